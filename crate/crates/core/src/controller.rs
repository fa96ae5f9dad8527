//! Relaxation-selection strategies queried once per outer iteration.

use crate::features::FeatureVector;
use crate::mlcore::{TrainingSample, TreeEnsemble};
use crate::model::ReservoirModel;
use crate::online::{OnlineConfig, OnlineLearner, UpdateEvent};
use crate::solver::{
    run_simulation, IterationHistory, RelaxationPolicy, Schedule, SimulationReport, SolverConfig,
};
use crate::{Error, Result};

pub use crate::solver::total_iteration_metric;

pub const OMEGA_GRID_MIN: f64 = 0.10;
pub const OMEGA_GRID_STEP: f64 = 0.05;
pub const OMEGA_GRID_POINTS: usize = 19;

/// Relative tolerance under which two surrogate predictions count as tied.
const PREDICTION_TIE_RTOL: f64 = 1e-9;

/// `{0.10, 0.15, …, 1.00}`.
pub fn omega_grid() -> Vec<f64> {
    (0..OMEGA_GRID_POINTS)
        .map(|i| ((OMEGA_GRID_MIN + OMEGA_GRID_STEP * i as f64) * 100.0).round() / 100.0)
        .collect()
}

#[derive(Debug, Clone)]
pub enum Strategy {
    /// Argmin of predicted inner iterations over the grid, optionally
    /// updated online from the observed outcomes.
    MlSurrogate {
        ensemble: Box<TreeEnsemble>,
        learner: Option<OnlineLearner>,
        grid: Vec<f64>,
    },
    Fixed(f64),
    NoRelaxation,
    /// `clamp(1 / (1 + a · max shock-front CFL), omega_min, 1)`.
    CflDynamic {
        a: f64,
        omega_min: f64,
    },
}

#[derive(Debug, Clone)]
pub struct RelaxationController {
    pub strategy: Strategy,
    history: IterationHistory,
}

impl RelaxationController {
    pub fn new(strategy: Strategy) -> Result<Self> {
        match &strategy {
            Strategy::Fixed(w) if !(*w > 0.0 && *w <= 1.0) => {
                return Err(Error::Config(format!("fixed omega {w} must lie in (0, 1]")))
            }
            Strategy::CflDynamic { a, omega_min }
                if !(*a >= 0.0 && *omega_min > 0.0 && *omega_min <= 1.0) =>
            {
                return Err(Error::Config(format!(
                    "cfl-dynamic needs a >= 0 and omega_min in (0, 1], got a={a}, omega_min={omega_min}"
                )))
            }
            Strategy::MlSurrogate { grid, .. } if grid.is_empty() => {
                return Err(Error::Config("omega grid is empty".into()))
            }
            _ => {}
        }
        Ok(Self {
            strategy,
            history: IterationHistory::default(),
        })
    }

    pub fn fixed(omega: f64) -> Result<Self> {
        Self::new(Strategy::Fixed(omega))
    }

    pub fn no_relaxation() -> Self {
        Self::new(Strategy::NoRelaxation).expect("valid strategy")
    }

    pub fn cfl_dynamic(a: f64, omega_min: f64) -> Result<Self> {
        Self::new(Strategy::CflDynamic { a, omega_min })
    }

    /// Surrogate controller; `online = None` keeps the ensemble frozen.
    pub fn ml(ensemble: TreeEnsemble, online: Option<OnlineConfig>) -> Result<Self> {
        let learner = online.map(OnlineLearner::new).transpose()?;
        Self::new(Strategy::MlSurrogate {
            ensemble: Box::new(ensemble),
            learner,
            grid: omega_grid(),
        })
    }

    pub fn ensemble(&self) -> Option<&TreeEnsemble> {
        match &self.strategy {
            Strategy::MlSurrogate { ensemble, .. } => Some(ensemble),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.strategy {
            Strategy::MlSurrogate { learner: None, .. } => "ml-frozen".into(),
            Strategy::MlSurrogate {
                learner: Some(l), ..
            } => format!("ml-online-w{}", l.config.window),
            Strategy::Fixed(w) => format!("fixed-{w:.2}"),
            Strategy::NoRelaxation => "no-relax".into(),
            Strategy::CflDynamic { .. } => "cfl-dynamic".into(),
        }
    }
}

/// Grid point with the smallest prediction; near-ties go to the larger `ω`.
pub fn surrogate_argmin(ensemble: &TreeEnsemble, features: &FeatureVector, grid: &[f64]) -> f64 {
    let mut best_w = grid[0];
    let mut best = f64::INFINITY;
    for &w in grid {
        let p = ensemble.predict(features, w);
        if p <= best + PREDICTION_TIE_RTOL * best.abs().max(1.0) {
            best = p.min(best);
            best_w = w;
        }
    }
    best_w
}

impl RelaxationPolicy for RelaxationController {
    fn select_omega(&mut self, features: &FeatureVector) -> Result<f64> {
        if let Some(i) = features.0.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature {
                name: crate::features::FEATURE_NAMES[i],
                value: features.0[i],
            });
        }
        Ok(match &self.strategy {
            Strategy::MlSurrogate { ensemble, grid, .. } => {
                surrogate_argmin(ensemble, features, grid)
            }
            Strategy::Fixed(w) => *w,
            Strategy::NoRelaxation => 1.0,
            Strategy::CflDynamic { a, omega_min } => {
                (1.0 / (1.0 + a * features.max_shock_front_cfl())).clamp(*omega_min, 1.0)
            }
        })
    }

    fn report_outcome(
        &mut self,
        features: &FeatureVector,
        omega: f64,
        inner_iters: usize,
    ) -> Result<Option<UpdateEvent>> {
        self.history = IterationHistory {
            residual_old: features.residual(),
            inner_prev: inner_iters,
        };
        if let Strategy::MlSurrogate {
            ensemble,
            learner: Some(learner),
            ..
        } = &mut self.strategy
        {
            let sample = TrainingSample {
                features: *features,
                omega,
                inner_iters: inner_iters as f64,
            };
            return learner.push(sample, ensemble);
        }
        Ok(None)
    }

    fn history(&self) -> IterationHistory {
        self.history
    }
}

/// Mean `ω0` over all outer iterations of a run.
pub fn mean_omega(report: &SimulationReport) -> f64 {
    if report.records.is_empty() {
        return 1.0;
    }
    report.records.iter().map(|r| r.omega0).sum::<f64>() / report.records.len() as f64
}

/// Finds the cfl-dynamic constant `a` whose run-mean `ω0` matches
/// `target_omega`, by bisection on `log a` (the mean decreases with `a`).
/// Returns `(a, achieved mean ω0)`.
pub fn calibrate_cfl_dynamic(
    model: &ReservoirModel,
    schedule: &Schedule,
    config: &SolverConfig,
    target_omega: f64,
    omega_min: f64,
) -> Result<(f64, f64)> {
    let run = |a: f64| -> Result<f64> {
        let mut c = RelaxationController::cfl_dynamic(a, omega_min)?;
        Ok(mean_omega(&run_simulation(
            model, &mut c, schedule, config,
        )?))
    };
    if target_omega >= 1.0 - 1e-12 {
        return Ok((0.0, 1.0));
    }
    let (mut lo, mut hi) = (-8.0f64, 4.0f64);
    let mut best = (10f64.powf(lo), run(10f64.powf(lo))?);
    for _ in 0..14 {
        let mid = 0.5 * (lo + hi);
        let a = 10f64.powf(mid);
        let m = run(a)?;
        if (m - target_omega).abs() < (best.1 - target_omega).abs() {
            best = (a, m);
        }
        if (m - target_omega).abs() < 0.01 {
            break;
        }
        if m > target_omega {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}
