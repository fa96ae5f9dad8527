//! Implicit upwind saturation transport and the step convergence checks.

use serde::{Deserialize, Serialize};

use crate::linalg::{solve_sgs, SparseMatrix};
use crate::model::ReservoirModel;
use crate::rockfluid::fractional_flow_derivative;
use crate::Result;

use super::{Discretization, SimulationState, SolverConfig};

/// How the water flux depends on the unknown saturation inside one transport solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Linearization {
    /// Upwind water flux expanded about the current iterate with `f_w′`
    /// frozen there and the total flux held fixed.
    #[default]
    FrozenSlope,
    /// Fluxes fully lagged at the current iterate; only accumulation is implicit.
    Lagged,
}

/// Per-cell water imbalance `φV (S − Sⁿ)/dt + Σ F_w,out − Q` [m³/s] for the
/// current saturation and velocities.
pub fn transport_imbalance(disc: &Discretization, state: &SimulationState) -> Vec<f64> {
    let mut r: Vec<f64> = (0..state.sw.len())
        .map(|i| disc.pore_volume[i] * (state.sw[i] - state.sw_old[i]) / state.dt)
        .collect();
    for (f, face) in disc.faces.iter().enumerate() {
        let q = state.vel.u_w[f] * face.area;
        r[face.a] += q;
        r[face.b] -= q;
    }
    for (i, bf) in disc.outflow.iter().enumerate() {
        r[bf.cell] += state.vel.ub_w[i] * bf.area;
    }
    for &(cell, q) in &disc.inflow {
        r[cell] -= q;
    }
    r
}

/// Volume used to normalize step balances: the injected volume over the
/// step, or the pore volume when nothing is injected.
fn balance_scale(disc: &Discretization, dt: f64) -> f64 {
    let injected = disc.total_injection() * dt;
    if injected > 0.0 {
        injected
    } else {
        disc.total_pore_volume()
    }
}

/// L2 norm of the transport imbalance integrated over the step, relative to
/// the injected volume.
pub fn transport_residual(disc: &Discretization, state: &SimulationState) -> f64 {
    let r = transport_imbalance(disc, state);
    let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    norm * state.dt / balance_scale(disc, state.dt)
}

/// Relative global water balance error `|in − out − accumulation| / in` over the step.
pub fn mass_balance_error(disc: &Discretization, state: &SimulationState) -> f64 {
    let r = transport_imbalance(disc, state);
    r.iter().sum::<f64>().abs() * state.dt / balance_scale(disc, state.dt)
}

/// One linearized implicit-Euler transport solve about the current iterate.
/// Returns the unrelaxed, unclamped candidate `S̃`.
pub fn transport_solve(
    model: &ReservoirModel,
    disc: &Discretization,
    state: &SimulationState,
    linearization: Linearization,
) -> Result<Vec<f64>> {
    let n = state.sw.len();
    let r = transport_imbalance(disc, state);
    let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
    let accum: Vec<f64> = disc.pore_volume.iter().map(|pv| pv / state.dt).collect();

    let ds = match linearization {
        Linearization::Lagged => rhs.iter().zip(&accum).map(|(b, d)| b / d).collect(),
        Linearization::FrozenSlope => {
            let slope =
                |c: usize| fractional_flow_derivative(state.sw[c], &model.rock_fluid, &model.fluid);
            let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(n + 2 * disc.faces.len());
            trip.extend(accum.iter().enumerate().map(|(i, &d)| (i, i, d)));
            for (f, face) in disc.faces.iter().enumerate() {
                let qt = state.vel.u_t[f] * face.area;
                let (up, down) = if qt >= 0.0 {
                    (face.a, face.b)
                } else {
                    (face.b, face.a)
                };
                let c = slope(up) * qt.abs();
                if c > 0.0 {
                    trip.push((up, up, c));
                    trip.push((down, up, -c));
                }
            }
            for (i, bf) in disc.outflow.iter().enumerate() {
                let qt = state.vel.ub_t[i] * bf.area;
                if qt > 0.0 {
                    trip.push((bf.cell, bf.cell, slope(bf.cell) * qt));
                }
            }
            let a = SparseMatrix::from_triplets(n, &trip)?;
            let zero = vec![0.0; n];
            solve_sgs(&a, &rhs, &zero, 1e-12, 10 * n + 100)?.x
        }
    };
    Ok(state.sw.iter().zip(&ds).map(|(s, d)| s + d).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceVerdict {
    pub mass_error: f64,
    /// `‖S − S_prev‖∞` between successive outer iterates.
    pub dsat: f64,
    pub converged: bool,
}

pub fn check_convergence(
    disc: &Discretization,
    state: &SimulationState,
    sw_prev_outer: &[f64],
    config: &SolverConfig,
) -> ConvergenceVerdict {
    let mass_error = mass_balance_error(disc, state);
    let dsat = state
        .sw
        .iter()
        .zip(sw_prev_outer)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ConvergenceVerdict {
        mass_error,
        dsat,
        converged: mass_error < config.outer_tol_mass && dsat < config.outer_tol_dsat,
    }
}
