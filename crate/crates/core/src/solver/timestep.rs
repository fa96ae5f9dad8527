//! Outer loop, time marching and run reports.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::features::{extract, FeatureContext, FEATURE_NAMES};
use crate::model::ReservoirModel;
use crate::{Error, Result};

use super::{
    check_convergence, compute_velocities, inner_loop, solve_pressure, transport_residual,
    Discretization, IterationRecord, RelaxationPolicy, SimulationState, SolverConfig,
};

/// Outer iterations at or below which a step counts as easy.
pub const EASY_STEP_OUTER: usize = 3;
/// Consecutive easy steps before the step size grows.
pub const EASY_STEPS_TO_GROW: usize = 5;
pub const DT_GROWTH: f64 = 1.25;

const MAX_STEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Simulated end time [s].
    pub end_time: f64,
    pub dt_initial: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    /// Stops after this many steps even if `end_time` is not reached.
    #[serde(default)]
    pub max_steps: Option<usize>,
}

impl Schedule {
    /// Constant step size unless an outer failure forces halving.
    pub fn fixed(end_time: f64, dt: f64) -> Self {
        Self {
            end_time,
            dt_initial: dt,
            dt_max: dt,
            dt_min: dt / 16.0,
            max_steps: None,
        }
    }

    /// Injects `pvi` pore volumes in `n_steps` equal steps.
    pub fn pore_volumes(model: &ReservoirModel, pvi: f64, n_steps: usize) -> Result<Self> {
        let rate = model.injection_rate();
        if !(rate > 0.0) || n_steps == 0 {
            return Err(Error::Config(
                "pore-volume schedule needs positive injection and at least one step".into(),
            ));
        }
        let end = pvi * model.pore_volume() / rate;
        Ok(Self::fixed(end, end / n_steps as f64))
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == Some(0) {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if !(self.end_time >= 0.0) {
            return Err(Error::Config("end time must be non-negative".into()));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_initial && self.dt_initial <= self.dt_max)
        {
            return Err(Error::Config(format!(
                "need 0 < dt_min <= dt_initial <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_initial, self.dt_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl StepOutcome {
    pub fn outer(&self) -> usize {
        self.records.len()
    }

    pub fn inner(&self) -> usize {
        self.records.iter().map(|r| r.inner_iters).sum()
    }
}

/// Runs the outer loop for one step of size `state.dt`.
#[allow(clippy::too_many_arguments)]
pub fn advance_timestep(
    model: &ReservoirModel,
    disc: &Discretization,
    ctx: &FeatureContext,
    state: &mut SimulationState,
    policy: &mut dyn RelaxationPolicy,
    config: &SolverConfig,
    step: usize,
) -> Result<StepOutcome> {
    state.sw_old = state.sw.clone();
    let mut sw_prev_outer = state.sw.clone();
    let mut records = Vec::new();
    for outer in 1..=config.max_outer {
        solve_pressure(model, disc, state, config.linear_tol)?;
        state.vel = compute_velocities(model, disc, state);
        let residual_before = transport_residual(disc, state);
        let hist = policy.history();
        let features = extract(
            ctx,
            model,
            disc,
            state,
            residual_before,
            hist.residual_old,
            hist.inner_prev,
        )?;
        let omega0 = policy.select_omega(&features)?;
        if !(omega0 > 0.0 && omega0 <= 1.0) {
            return Err(Error::Config(format!("controller returned omega {omega0}")));
        }
        let inner = inner_loop(model, disc, state, omega0, config)?;
        let verdict = check_convergence(disc, state, &sw_prev_outer, config);
        let update = policy.report_outcome(&features, omega0, inner.iterations)?;
        records.push(IterationRecord {
            step,
            outer,
            time: state.t,
            dt: state.dt,
            omega0,
            inner_iters: inner.iterations,
            inner_converged: inner.converged,
            residual_before,
            residual_after: transport_residual(disc, state),
            mass_error: verdict.mass_error,
            dsat: verdict.dsat,
            converged: verdict.converged,
            features,
            update,
        });
        if verdict.converged {
            return Ok(StepOutcome {
                records,
                converged: true,
            });
        }
        sw_prev_outer.clone_from(&state.sw);
    }
    Ok(StepOutcome {
        records,
        converged: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub index: usize,
    pub t_end: f64,
    pub dt: f64,
    pub outer: usize,
    pub inner: usize,
    pub converged: bool,
    pub cumulative_outer: usize,
    pub cumulative_inner: usize,
    pub cumulative_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub steps: Vec<StepSummary>,
    pub records: Vec<IterationRecord>,
    pub total_outer: usize,
    pub total_inner: usize,
    /// `Σ outer + Σ inner / 3`.
    pub total_metric: f64,
    pub wall_time_s: f64,
    pub final_time: f64,
    pub final_p: Vec<f64>,
    pub final_sw: Vec<f64>,
    pub all_converged: bool,
    pub n_updates: usize,
}

impl SimulationReport {
    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// `Σ outer + (Σ inner) / 3`, one record per outer iteration.
pub fn total_iteration_metric(records: &[IterationRecord]) -> f64 {
    let inner: usize = records.iter().map(|r| r.inner_iters).sum();
    records.len() as f64 + inner as f64 / 3.0
}

/// Marches from the initial state to `schedule.end_time`. Steps whose outer
/// loop hits the cap are accepted with `converged = false` and the next step
/// size is halved; five consecutive easy steps grow it by 25%.
pub fn run_simulation(
    model: &ReservoirModel,
    policy: &mut dyn RelaxationPolicy,
    schedule: &Schedule,
    config: &SolverConfig,
) -> Result<SimulationReport> {
    let start = Instant::now();
    config.validate()?;
    schedule.validate()?;
    let disc = Discretization::new(model)?;
    let ctx = FeatureContext::new(model);
    let mut state = SimulationState::initial(model, &disc, schedule.dt_initial);

    let mut dt = schedule.dt_initial;
    let mut easy = 0;
    let mut steps = Vec::new();
    let mut records: Vec<IterationRecord> = Vec::new();
    let (mut cum_outer, mut cum_inner) = (0usize, 0usize);
    let end = schedule.end_time;
    while state.t < end * (1.0 - 1e-12) && schedule.max_steps.is_none_or(|m| steps.len() < m) {
        if steps.len() >= MAX_STEPS {
            return Err(Error::Config(format!("exceeded {MAX_STEPS} time steps")));
        }
        state.dt = dt.min(end - state.t);
        let index = steps.len();
        let out = advance_timestep(model, &disc, &ctx, &mut state, policy, config, index)?;
        state.t += state.dt;
        cum_outer += out.outer();
        cum_inner += out.inner();
        steps.push(StepSummary {
            index,
            t_end: state.t,
            dt: state.dt,
            outer: out.outer(),
            inner: out.inner(),
            converged: out.converged,
            cumulative_outer: cum_outer,
            cumulative_inner: cum_inner,
            cumulative_metric: cum_outer as f64 + cum_inner as f64 / 3.0,
        });
        if !out.converged {
            dt = (dt * 0.5).max(schedule.dt_min);
            easy = 0;
        } else if out.outer() <= EASY_STEP_OUTER {
            easy += 1;
            if easy >= EASY_STEPS_TO_GROW {
                dt = (dt * DT_GROWTH).min(schedule.dt_max);
                easy = 0;
            }
        } else {
            easy = 0;
        }
        records.extend(out.records);
    }
    let n_updates = records.iter().filter(|r| r.update.is_some()).count();
    Ok(SimulationReport {
        all_converged: steps.iter().all(|s| s.converged),
        total_metric: total_iteration_metric(&records),
        total_outer: cum_outer,
        total_inner: cum_inner,
        steps,
        records,
        wall_time_s: start.elapsed().as_secs_f64(),
        final_time: state.t,
        final_p: state.p,
        final_sw: state.sw,
        n_updates,
    })
}

/// CSV header of the per-iteration log.
pub fn record_csv_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "step",
        "outer",
        "time",
        "dt",
        "omega0",
        "inner_iters",
        "inner_converged",
        "residual_before",
        "residual_after",
        "mass_error",
        "dsat",
        "converged",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    h.extend(
        ["update_index", "buffer_rmse_before", "buffer_rmse_after"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

pub fn write_records_csv<W: Write>(records: &[IterationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(record_csv_header())?;
    for r in records {
        let mut row = vec![
            r.step.to_string(),
            r.outer.to_string(),
            r.time.to_string(),
            r.dt.to_string(),
            r.omega0.to_string(),
            r.inner_iters.to_string(),
            r.inner_converged.to_string(),
            r.residual_before.to_string(),
            r.residual_after.to_string(),
            r.mass_error.to_string(),
            r.dsat.to_string(),
            r.converged.to_string(),
        ];
        row.extend(r.features.0.iter().map(|v| v.to_string()));
        match &r.update {
            Some(u) => {
                row.push(u.index.to_string());
                row.push(u.buffer_rmse_before.to_string());
                row.push(u.buffer_rmse_after.to_string());
            }
            None => row.extend(std::iter::repeat_n(String::new(), 3)),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
