//! The 17 dimensionless features extracted at every outer iteration.
//!
//! | idx | name |
//! |----:|------|
//! | 0 | `effective_aspect_ratio` |
//! | 1 | `avg_darcy_velocity` |
//! | 2 | `avg_total_mobility` |
//! | 3 | `max_cfl` |
//! | 4 | `max_shock_front_cfl` |
//! | 5 | `shock_front_number_ratio` |
//! | 6 | `avg_shock_front_mobility_ratio` |
//! | 7 | `avg_long_capillary` |
//! | 8 | `avg_trans_capillary` |
//! | 9 | `avg_buoyancy` |
//! | 10 | `avg_long_buoyancy` |
//! | 11 | `avg_trans_buoyancy` |
//! | 12 | `avg_artificial_diffusion` |
//! | 13 | `residual` |
//! | 14 | `residual_old` |
//! | 15 | `residual_ratio` |
//! | 16 | `inner_iters_prev` |

use serde::{Deserialize, Serialize};

use crate::model::ReservoirModel;
use crate::rockfluid::{
    capillary_pressure, max_fw_slope, total_mobility, welge_tangent, ShockFront,
};
use crate::solver::{Discretization, SimulationState};
use crate::{Error, Result};

pub const N_FEATURES: usize = 17;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "effective_aspect_ratio",
    "avg_darcy_velocity",
    "avg_total_mobility",
    "max_cfl",
    "max_shock_front_cfl",
    "shock_front_number_ratio",
    "avg_shock_front_mobility_ratio",
    "avg_long_capillary",
    "avg_trans_capillary",
    "avg_buoyancy",
    "avg_long_buoyancy",
    "avg_trans_buoyancy",
    "avg_artificial_diffusion",
    "residual",
    "residual_old",
    "residual_ratio",
    "inner_iters_prev",
];

pub const MAX_CFL: usize = 3;
pub const MAX_SHOCK_FRONT_CFL: usize = 4;
pub const RESIDUAL: usize = 13;
pub const RESIDUAL_OLD: usize = 14;
pub const RESIDUAL_RATIO: usize = 15;
pub const INNER_ITERS_PREV: usize = 16;

/// Absolute velocity guard [m/s]; faces slower than this contribute zero.
pub const VELOCITY_EPS: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; N_FEATURES]);

impl FeatureVector {
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; N_FEATURES] = values.try_into().map_err(|_| Error::FeatureLength {
            expected: N_FEATURES,
            got: values.len(),
        })?;
        Ok(Self(arr))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.0[i])
    }

    pub fn residual(&self) -> f64 {
        self.0[RESIDUAL]
    }

    pub fn max_shock_front_cfl(&self) -> f64 {
        self.0[MAX_SHOCK_FRONT_CFL]
    }
}

/// Per-model quantities computed once and reused every outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureContext {
    pub flow_axis: usize,
    pub aspect_ratio: f64,
    pub max_slope: f64,
    pub shock: ShockFront,
    /// `λ_t(S*) / λ_t(Swi)`.
    pub shock_mobility_ratio: f64,
}

impl FeatureContext {
    pub fn new(model: &ReservoirModel) -> Self {
        let flow_axis = model.bc.inflow.axis();
        let shock = welge_tangent(&model.rock_fluid, &model.fluid);
        let lt = |s| total_mobility(s, &model.rock_fluid, &model.fluid);
        Self {
            flow_axis,
            aspect_ratio: effective_aspect_ratio(model),
            max_slope: max_fw_slope(&model.rock_fluid, &model.fluid),
            shock,
            shock_mobility_ratio: lt(shock.saturation) / lt(model.rock_fluid.swi),
        }
    }
}

/// Axis compared against the main flow direction: vertical unless the model
/// has a single layer, then the remaining horizontal one.
fn transverse_axis(model: &ReservoirModel, flow_axis: usize) -> usize {
    let g = &model.grid;
    if flow_axis != 2 && g.nz > 1 {
        2
    } else if flow_axis != 1 && g.ny > 1 {
        1
    } else if flow_axis != 2 {
        2
    } else {
        0
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// `(L_flow / L_t) · sqrt(mean k_t / mean k_flow)`.
pub fn effective_aspect_ratio(model: &ReservoirModel) -> f64 {
    let fa = model.bc.inflow.axis();
    let ta = transverse_axis(model, fa);
    let field = |axis| match axis {
        0 => &model.kx,
        1 => &model.ky,
        _ => &model.kz,
    };
    let len = model.grid.lengths();
    (len[fa] / len[ta]) * (mean(field(ta)) / mean(field(fa))).sqrt()
}

/// Per-cell CFL `dt Σ_out |q_t| / (φV)` and its maximum.
pub fn cfl_field(disc: &Discretization, state: &SimulationState) -> (Vec<f64>, f64) {
    let mut out = vec![0.0; state.sw.len()];
    for (f, face) in disc.faces.iter().enumerate() {
        let q = state.vel.u_t[f] * face.area;
        if q > 0.0 {
            out[face.a] += q;
        } else {
            out[face.b] -= q;
        }
    }
    for (i, bf) in disc.outflow.iter().enumerate() {
        let q = state.vel.ub_t[i] * bf.area;
        if q > 0.0 {
            out[bf.cell] += q;
        }
    }
    let cfl: Vec<f64> = out
        .iter()
        .zip(&disc.pore_volume)
        .map(|(q, pv)| state.dt * q / pv)
        .collect();
    let max = cfl.iter().copied().fold(0.0, f64::max);
    (cfl, max)
}

/// `(max shock-front CFL, ratio to max CFL)`; the ratio is 0 when nothing flows.
pub fn shock_front_cfl(max_cfl: f64, max_slope: f64) -> (f64, f64) {
    let sf = max_cfl * max_slope;
    let ratio = if max_cfl > VELOCITY_EPS {
        sf / max_cfl
    } else {
        0.0
    };
    (sf, ratio)
}

/// `(mean λ_t μ_nw, shock-front mobility ratio)`.
pub fn mobility_features(
    model: &ReservoirModel,
    ctx: &FeatureContext,
    state: &SimulationState,
) -> (f64, f64) {
    let lt: Vec<f64> = state
        .sw
        .iter()
        .map(|&s| total_mobility(s, &model.rock_fluid, &model.fluid) * model.fluid.mu_nw)
        .collect();
    (mean(&lt), ctx.shock_mobility_ratio)
}

struct FaceProps {
    lt: f64,
    k: f64,
    speed: f64,
}

fn face_props(
    model: &ReservoirModel,
    disc: &Discretization,
    state: &SimulationState,
) -> Vec<FaceProps> {
    let lt = |c: usize| total_mobility(state.sw[c], &model.rock_fluid, &model.fluid);
    let spacing = model.grid.spacing();
    disc.faces
        .iter()
        .enumerate()
        .map(|(f, face)| FaceProps {
            lt: 0.5 * (lt(face.a) + lt(face.b)),
            k: face.trans * spacing[face.axis] / face.area,
            speed: state.vel.u_t[f].abs(),
        })
        .collect()
}

/// Averages of `values` over the faces along, and across, the flow axis.
fn split_means(disc: &Discretization, flow_axis: usize, values: &[f64]) -> (f64, f64) {
    let (mut ls, mut ln, mut ts, mut tn) = (0.0, 0usize, 0.0, 0usize);
    for (face, v) in disc.faces.iter().zip(values) {
        if face.axis == flow_axis {
            ls += v;
            ln += 1;
        } else {
            ts += v;
            tn += 1;
        }
    }
    let avg = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    (avg(ls, ln), avg(ts, tn))
}

/// Face capillary numbers `λ_t K |Δp_c| / (|u_t| d)`, averaged longitudinally
/// and transversely.
pub fn capillary_numbers(
    model: &ReservoirModel,
    disc: &Discretization,
    ctx: &FeatureContext,
    state: &SimulationState,
) -> (f64, f64) {
    let props = face_props(model, disc, state);
    let spacing = model.grid.spacing();
    let pc = |c: usize| capillary_pressure(state.sw[c], &model.rock_fluid);
    let n: Vec<f64> = disc
        .faces
        .iter()
        .zip(&props)
        .map(|(face, fp)| {
            if fp.speed < VELOCITY_EPS {
                return 0.0;
            }
            let dpc = (pc(face.a) - pc(face.b)).abs();
            fp.lt * fp.k * dpc / (fp.speed * spacing[face.axis])
        })
        .collect();
    split_means(disc, ctx.flow_axis, &n)
}

/// Face buoyancy numbers `Δρ |g| λ_t K |ĝ·n̂| / |u_t|`: overall, longitudinal
/// and transverse averages.
pub fn buoyancy_numbers(
    model: &ReservoirModel,
    disc: &Discretization,
    ctx: &FeatureContext,
    state: &SimulationState,
) -> (f64, f64, f64) {
    let props = face_props(model, disc, state);
    let drho = (model.fluid.rho_nw - model.fluid.rho_w).abs();
    let gmag = model.gravity_magnitude();
    let gdir = model.gravity_direction();
    let n: Vec<f64> = disc
        .faces
        .iter()
        .zip(&props)
        .map(|(face, fp)| {
            if fp.speed < VELOCITY_EPS {
                return 0.0;
            }
            drho * gmag * fp.lt * fp.k * gdir[face.axis].abs() / fp.speed
        })
        .collect();
    let (long, trans) = split_means(disc, ctx.flow_axis, &n);
    (mean(&n), long, trans)
}

/// Cell-centered Darcy speed from the average of the two bounding face
/// velocities along each axis.
fn cell_speeds(model: &ReservoirModel, disc: &Discretization, state: &SimulationState) -> Vec<f64> {
    let n = state.sw.len();
    let mut sum = vec![[0.0f64; 3]; n];
    for (f, face) in disc.faces.iter().enumerate() {
        sum[face.a][face.axis] += state.vel.u_t[f];
        sum[face.b][face.axis] += state.vel.u_t[f];
    }
    let out_axis = model.bc.outflow.axis();
    let out_sign = if model.bc.outflow.is_min() { -1.0 } else { 1.0 };
    for (i, bf) in disc.outflow.iter().enumerate() {
        sum[bf.cell][out_axis] += out_sign * state.vel.ub_t[i];
    }
    let in_axis = model.bc.inflow.axis();
    let in_sign = if model.bc.inflow.is_min() { 1.0 } else { -1.0 };
    for &(cell, _) in &disc.inflow {
        sum[cell][in_axis] += in_sign * model.bc.injection_flux;
    }
    sum.iter()
        .map(|s| s.iter().map(|v| 0.25 * v * v).sum::<f64>().sqrt())
        .collect()
}

/// Mean of `max(0, ½ |u| Δx (1 − CFL)) · dt / (φ Δx²)` over cells, with `Δx`
/// the spacing along the flow axis.
pub fn artificial_diffusion_number(
    model: &ReservoirModel,
    disc: &Discretization,
    ctx: &FeatureContext,
    state: &SimulationState,
    cfl: &[f64],
) -> f64 {
    let speeds = cell_speeds(model, disc, state);
    let dx = model.grid.spacing()[ctx.flow_axis];
    let vals: Vec<f64> = (0..speeds.len())
        .map(|i| artificial_diffusion_cell(speeds[i], dx, cfl[i], model.phi[i], state.dt))
        .collect();
    mean(&vals)
}

pub fn artificial_diffusion_cell(speed: f64, dx: f64, cfl: f64, phi: f64, dt: f64) -> f64 {
    let d = (0.5 * speed * dx * (1.0 - cfl)).max(0.0);
    d * dt / (phi * dx * dx)
}

pub fn residual_ratio(residual: f64, residual_old: f64) -> f64 {
    if residual_old > 0.0 {
        residual / residual_old
    } else {
        1.0
    }
}

/// Assembles the full feature vector; any non-finite entry is an error naming it.
pub fn extract(
    ctx: &FeatureContext,
    model: &ReservoirModel,
    disc: &Discretization,
    state: &SimulationState,
    residual: f64,
    residual_old: f64,
    inner_prev: usize,
) -> Result<FeatureVector> {
    let (cfl, max_cfl) = cfl_field(disc, state);
    let (max_sf, sf_ratio) = shock_front_cfl(max_cfl, ctx.max_slope);
    let (avg_lt, mob_ratio) = mobility_features(model, ctx, state);
    let (cap_long, cap_trans) = capillary_numbers(model, disc, ctx, state);
    let (buo, buo_long, buo_trans) = buoyancy_numbers(model, disc, ctx, state);
    let diffusion = artificial_diffusion_number(model, disc, ctx, state, &cfl);
    let darcy = if model.bc.injection_flux > 0.0 {
        mean(&state.vel.u_t.iter().map(|u| u.abs()).collect::<Vec<_>>()) / model.bc.injection_flux
    } else {
        0.0
    };
    let v = [
        ctx.aspect_ratio,
        darcy,
        avg_lt,
        max_cfl,
        max_sf,
        sf_ratio,
        mob_ratio,
        cap_long,
        cap_trans,
        buo,
        buo_long,
        buo_trans,
        diffusion,
        residual,
        residual_old,
        residual_ratio(residual, residual_old),
        inner_prev as f64,
    ];
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteFeature {
            name: FEATURE_NAMES[i],
            value: v[i],
        });
    }
    Ok(FeatureVector(v))
}
