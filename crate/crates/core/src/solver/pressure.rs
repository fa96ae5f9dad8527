//! TPFA pressure assembly and phase Darcy velocities.

use crate::linalg::{solve_cg_with_guess, SparseMatrix};
use crate::model::ReservoirModel;
use crate::rockfluid::{capillary_pressure, mobilities};
use crate::{Error, Result};

use super::{Discretization, SimulationState, Velocities};

fn cell_mobilities(model: &ReservoirModel, sw: &[f64]) -> Vec<(f64, f64)> {
    sw.iter()
        .map(|&s| mobilities(s, &model.rock_fluid, &model.fluid))
        .collect()
}

fn cell_pc(model: &ReservoirModel, sw: &[f64]) -> Vec<f64> {
    sw.iter()
        .map(|&s| capillary_pressure(s, &model.rock_fluid))
        .collect()
}

/// Phase potential differences `(ΔΦ_w, ΔΦ_nw)` from cell `a` to cell `b`.
fn potential_drops(
    model: &ReservoirModel,
    disc: &Discretization,
    p: &[f64],
    pc: &[f64],
    a: usize,
    b: usize,
) -> (f64, f64) {
    let f = &model.fluid;
    let dg = disc.gdotx[a] - disc.gdotx[b];
    let dp = p[a] - p[b];
    (dp - f.rho_w * dg, dp + pc[a] - pc[b] - f.rho_nw * dg)
}

fn upwind(drop: f64, up_a: f64, up_b: f64) -> f64 {
    if drop >= 0.0 {
        up_a
    } else {
        up_b
    }
}

/// Assembles the total-flux balance `Σ_faces F_t = Q` for the wetting
/// pressure. Phase mobilities are upwinded by the potentials of the current
/// state; capillary and gravity terms go to the right-hand side.
///
/// The outflow side holds each phase potential at the prescribed pressure,
/// i.e. a hydrostatic boundary referenced to `z = 0`.
pub fn assemble_pressure(
    model: &ReservoirModel,
    disc: &Discretization,
    state: &SimulationState,
) -> Result<(SparseMatrix, Vec<f64>)> {
    let p_out = model.bc.outflow_pressure.ok_or_else(|| {
        Error::Config("outflow pressure is not set; the pressure system is singular".into())
    })?;
    let n = model.n_cells();
    let f = &model.fluid;
    let mob = cell_mobilities(model, &state.sw);
    let pc = cell_pc(model, &state.sw);

    let mut trip = Vec::with_capacity(4 * disc.faces.len() + n);
    let mut rhs = vec![0.0; n];
    for face in &disc.faces {
        let (a, b) = (face.a, face.b);
        let (dw, dnw) = potential_drops(model, disc, &state.p, &pc, a, b);
        let lw = upwind(dw, mob[a].0, mob[b].0);
        let lnw = upwind(dnw, mob[a].1, mob[b].1);
        let c = face.trans * (lw + lnw);
        trip.push((a, a, c));
        trip.push((b, b, c));
        trip.push((a, b, -c));
        trip.push((b, a, -c));
        let dg = disc.gdotx[a] - disc.gdotx[b];
        let extra = face.trans * (lnw * (pc[a] - pc[b]) - (lw * f.rho_w + lnw * f.rho_nw) * dg);
        rhs[a] -= extra;
        rhs[b] += extra;
    }
    for bf in &disc.outflow {
        let (lw, lnw) = mob[bf.cell];
        let c = bf.trans * (lw + lnw);
        trip.push((bf.cell, bf.cell, c));
        rhs[bf.cell] +=
            c * p_out + bf.trans * (lw * f.rho_w + lnw * f.rho_nw) * disc.gdotx[bf.cell];
    }
    for &(cell, q) in &disc.inflow {
        rhs[cell] += q;
    }
    Ok((SparseMatrix::from_triplets(n, &trip)?, rhs))
}

/// Solves the pressure system in place, warm-started from the current pressure.
pub fn solve_pressure(
    model: &ReservoirModel,
    disc: &Discretization,
    state: &mut SimulationState,
    tol: f64,
) -> Result<usize> {
    let (a, rhs) = assemble_pressure(model, disc, state)?;
    let max_iter = 20 * model.n_cells() + 100;
    let sol = solve_cg_with_guess(&a, &rhs, Some(&state.p), tol, max_iter)?;
    state.p = sol.x;
    Ok(sol.iterations)
}

/// Phase velocities from the current pressure and saturation, each phase
/// upwinded by its own potential difference.
pub fn compute_velocities(
    model: &ReservoirModel,
    disc: &Discretization,
    state: &SimulationState,
) -> Velocities {
    let mob = cell_mobilities(model, &state.sw);
    let pc = cell_pc(model, &state.sw);
    let mut v = Velocities::zeros(disc.faces.len(), disc.outflow.len());
    for (i, face) in disc.faces.iter().enumerate() {
        let (dw, dnw) = potential_drops(model, disc, &state.p, &pc, face.a, face.b);
        let lw = upwind(dw, mob[face.a].0, mob[face.b].0);
        let lnw = upwind(dnw, mob[face.a].1, mob[face.b].1);
        v.u_w[i] = face.trans * lw * dw / face.area;
        v.u_nw[i] = face.trans * lnw * dnw / face.area;
        v.u_t[i] = v.u_w[i] + v.u_nw[i];
    }
    let p_out = model.bc.outflow_pressure.unwrap_or(0.0);
    let f = &model.fluid;
    for (i, bf) in disc.outflow.iter().enumerate() {
        let c = bf.cell;
        let (lw, lnw) = mob[c];
        let dw = state.p[c] - f.rho_w * disc.gdotx[c] - p_out;
        let dnw = state.p[c] - f.rho_nw * disc.gdotx[c] - p_out;
        v.ub_w[i] = bf.trans * lw * dw / bf.area;
        v.ub_nw[i] = bf.trans * lnw * dnw / bf.area;
        v.ub_t[i] = v.ub_w[i] + v.ub_nw[i];
    }
    v
}
