//! Relaxed inner saturation/velocity iteration.

use crate::model::ReservoirModel;
use crate::Result;

use super::{compute_velocities, transport_solve, Discretization, SimulationState, SolverConfig};

/// `S = ω S̃ + (1−ω) S^{k−1} + (1−ω)^{β+1} ω (S^{k−2} − S^{k−1})`, clamped to `[0, 1]`.
pub fn apply_relaxation(
    s_tilde: &[f64],
    s_prev1: &[f64],
    s_prev2: &[f64],
    omega: f64,
    beta: f64,
) -> Vec<f64> {
    let hist = (1.0 - omega).powf(beta + 1.0) * omega;
    s_tilde
        .iter()
        .zip(s_prev1)
        .zip(s_prev2)
        .map(|((&st, &s1), &s2)| {
            (omega * st + (1.0 - omega) * s1 + hist * (s2 - s1)).clamp(0.0, 1.0)
        })
        .collect()
}

/// Aitken update of the relaxation factor from the last two fixed-point
/// residuals `R = S̃ − S^{k−1}`, clamped to `[omega_min, omega_max]`.
/// A vanishing residual change leaves `omega_prev` unchanged.
pub fn inner_relaxation_update(
    r_prev: &[f64],
    r_cur: &[f64],
    omega_prev: f64,
    config: &SolverConfig,
) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in r_prev.iter().zip(r_cur) {
        let d = b - a;
        num += a * d;
        den += d * d;
    }
    if den == 0.0 || !den.is_finite() {
        return omega_prev;
    }
    (-omega_prev * num / den).clamp(config.omega_min, config.omega_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerOutcome {
    pub iterations: usize,
    /// `‖S̃ − S^{k−1}‖∞` of the last iteration.
    pub residual: f64,
    pub converged: bool,
    /// Relaxation factor used at each inner iteration.
    pub omegas: Vec<f64>,
}

/// Repeats transport solve → relaxation → velocity update at fixed pressure
/// until the fixed-point residual `‖S̃ − S^{k−1}‖∞` drops below
/// `outer_tol_dsat` or `max_inner` iterations are spent.
pub fn inner_loop(
    model: &ReservoirModel,
    disc: &Discretization,
    state: &mut SimulationState,
    omega0: f64,
    config: &SolverConfig,
) -> Result<InnerOutcome> {
    state.sw_prev1 = state.sw.clone();
    state.sw_prev2 = state.sw.clone();
    let mut omega = omega0;
    let mut r_prev: Option<Vec<f64>> = None;
    let mut omegas = Vec::new();
    let mut residual = f64::INFINITY;
    for k in 1..=config.max_inner {
        let s_tilde = transport_solve(model, disc, state, config.linearization)?;
        let r: Vec<f64> = s_tilde.iter().zip(&state.sw).map(|(a, b)| a - b).collect();
        if let Some(rp) = &r_prev {
            omega = inner_relaxation_update(rp, &r, omega, config);
        }
        omegas.push(omega);
        residual = r.iter().fold(0.0, |m, x| f64::max(m, x.abs()));

        // At k = 1 the second history level falls back to S^{k−1}.
        let s2 = if k == 1 { &state.sw } else { &state.sw_prev1 };
        let s_new = apply_relaxation(&s_tilde, &state.sw, s2, omega, config.beta);
        state.sw_prev2 = std::mem::replace(&mut state.sw_prev1, std::mem::take(&mut state.sw));
        state.sw = s_new;
        state.vel = compute_velocities(model, disc, state);
        r_prev = Some(r);

        if residual < config.outer_tol_dsat {
            return Ok(InnerOutcome {
                iterations: k,
                residual,
                converged: true,
                omegas,
            });
        }
    }
    Ok(InnerOutcome {
        iterations: config.max_inner,
        residual,
        converged: false,
        omegas,
    })
}
