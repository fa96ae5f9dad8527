//! Sequential Picard solver: an outer pressure/saturation loop wrapping an
//! inner saturation/velocity loop whose first relaxation factor is supplied by
//! a [`RelaxationPolicy`].

pub mod pressure;
pub mod relaxation;
pub mod timestep;
pub mod transport;

use serde::{Deserialize, Serialize};

use crate::features::FeatureVector;
use crate::model::{Face, ReservoirModel};
use crate::online::UpdateEvent;
use crate::{Error, Result};

pub use pressure::{assemble_pressure, compute_velocities, solve_pressure};
pub use relaxation::{apply_relaxation, inner_loop, inner_relaxation_update, InnerOutcome};
pub use timestep::{
    advance_timestep, run_simulation, total_iteration_metric, write_records_csv, Schedule,
    SimulationReport, StepOutcome, StepSummary,
};
pub use transport::{
    check_convergence, mass_balance_error, transport_residual, transport_solve, ConvergenceVerdict,
    Linearization,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative water mass-balance tolerance per step.
    pub outer_tol_mass: f64,
    /// Infinity-norm saturation change tolerance (outer and inner loops).
    pub outer_tol_dsat: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub beta: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    /// Relative residual for the pressure CG solve.
    pub linear_tol: f64,
    pub linearization: Linearization,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            outer_tol_mass: 1e-3,
            outer_tol_dsat: 1e-2,
            max_outer: 30,
            max_inner: 10,
            beta: 0.4,
            omega_min: 0.1,
            omega_max: 1.0,
            linear_tol: 1e-10,
            linearization: Linearization::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.outer_tol_mass > 0.0 && self.outer_tol_dsat > 0.0 && self.linear_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !(0.0 < self.omega_min && self.omega_min <= self.omega_max && self.omega_max <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 < omega_min <= omega_max <= 1, got [{}, {}]",
                self.omega_min, self.omega_max
            )));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::Config("iteration caps must be at least 1".into()));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::Config(format!(
                "beta {} must be non-negative",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Outflow boundary connection of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub cell: usize,
    pub area: f64,
    /// Half-cell transmissibility [m³].
    pub trans: f64,
}

/// Geometry precomputed once per model.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub faces: Vec<Face>,
    pub outflow: Vec<BoundaryFace>,
    /// Inflow cells with their injected water rate [m³/s].
    pub inflow: Vec<(usize, f64)>,
    /// `g · x` at each cell center [m²/s²].
    pub gdotx: Vec<f64>,
    /// `φ V` per cell [m³].
    pub pore_volume: Vec<f64>,
}

impl Discretization {
    pub fn new(model: &ReservoirModel) -> Result<Self> {
        model.validate()?;
        let g = &model.grid;
        let faces = model.interior_faces();
        let outflow = g
            .boundary_cells(model.bc.outflow)
            .into_iter()
            .map(|cell| BoundaryFace {
                cell,
                area: g.face_area(model.bc.outflow.axis()),
                trans: model.boundary_transmissibility(cell, model.bc.outflow),
            })
            .collect();
        let rate = model.bc.injection_flux * g.face_area(model.bc.inflow.axis());
        let inflow = g
            .boundary_cells(model.bc.inflow)
            .into_iter()
            .map(|c| (c, rate))
            .collect();
        let gdotx = (0..g.n_cells())
            .map(|c| {
                let x = g.cell_center(c);
                (0..3).map(|d| model.gravity[d] * x[d]).sum()
            })
            .collect();
        let v = g.cell_volume();
        let pore_volume = model.phi.iter().map(|p| p * v).collect();
        Ok(Self {
            faces,
            outflow,
            inflow,
            gdotx,
            pore_volume,
        })
    }

    pub fn total_injection(&self) -> f64 {
        self.inflow.iter().map(|(_, q)| q).sum()
    }

    pub fn total_pore_volume(&self) -> f64 {
        self.pore_volume.iter().sum()
    }
}

/// Phase Darcy velocities [m/s]. Interior entries are positive from `face.a`
/// to `face.b`; boundary entries are positive out of the domain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Velocities {
    pub u_w: Vec<f64>,
    pub u_nw: Vec<f64>,
    pub u_t: Vec<f64>,
    pub ub_w: Vec<f64>,
    pub ub_nw: Vec<f64>,
    pub ub_t: Vec<f64>,
}

impl Velocities {
    pub fn zeros(n_faces: usize, n_boundary: usize) -> Self {
        Self {
            u_w: vec![0.0; n_faces],
            u_nw: vec![0.0; n_faces],
            u_t: vec![0.0; n_faces],
            ub_w: vec![0.0; n_boundary],
            ub_nw: vec![0.0; n_boundary],
            ub_t: vec![0.0; n_boundary],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    /// Wetting-phase pressure per cell [Pa].
    pub p: Vec<f64>,
    pub sw: Vec<f64>,
    /// Inner iterates `S^{k−1}` and `S^{k−2}`.
    pub sw_prev1: Vec<f64>,
    pub sw_prev2: Vec<f64>,
    /// Saturation at the start of the current time step.
    pub sw_old: Vec<f64>,
    pub vel: Velocities,
    pub t: f64,
    pub dt: f64,
}

impl SimulationState {
    /// Uniform initial saturation `Swi` and zero pressure.
    pub fn initial(model: &ReservoirModel, disc: &Discretization, dt: f64) -> Self {
        let n = model.n_cells();
        let sw = vec![model.rock_fluid.swi; n];
        Self {
            p: vec![model.bc.outflow_pressure.unwrap_or(0.0); n],
            sw_prev1: sw.clone(),
            sw_prev2: sw.clone(),
            sw_old: sw.clone(),
            sw,
            vel: Velocities::zeros(disc.faces.len(), disc.outflow.len()),
            t: 0.0,
            dt,
        }
    }
}

/// Residual and inner-count history fed back into feature extraction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationHistory {
    pub residual_old: f64,
    pub inner_prev: usize,
}

/// Chooses the initial inner relaxation factor once per outer iteration.
pub trait RelaxationPolicy {
    fn select_omega(&mut self, features: &FeatureVector) -> Result<f64>;

    /// Called after each outer iteration with the factor that was used and
    /// the inner iterations it cost.
    fn report_outcome(
        &mut self,
        features: &FeatureVector,
        omega: f64,
        inner_iters: usize,
    ) -> Result<Option<UpdateEvent>>;

    fn history(&self) -> IterationHistory;
}

/// One row of the per-outer-iteration log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub step: usize,
    pub outer: usize,
    pub time: f64,
    pub dt: f64,
    pub omega0: f64,
    pub inner_iters: usize,
    pub inner_converged: bool,
    pub residual_before: f64,
    pub residual_after: f64,
    pub mass_error: f64,
    pub dsat: f64,
    pub converged: bool,
    pub features: FeatureVector,
    pub update: Option<UpdateEvent>,
}
