//! Batch-incremental ensemble updates over a fixed-size sample buffer.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mlcore::{
    derive_seed, fit_bootstrap_trees, fit_tree_rows, rmse, EnsembleMode, Matrix, TrainingSample,
    TreeEnsemble, TreeParams,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnlineStrategy {
    Boosting,
    Bagging,
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostingUpdate {
    pub new_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub row_subsample: f64,
    pub col_subsample: f64,
}

impl Default for BoostingUpdate {
    fn default() -> Self {
        Self {
            new_trees: 1,
            learning_rate: 0.01,
            max_depth: 3,
            row_subsample: 1.0,
            col_subsample: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaggingUpdate {
    pub new_trees: usize,
    pub max_depth: usize,
    pub max_features: f64,
}

impl Default for BaggingUpdate {
    fn default() -> Self {
        Self {
            new_trees: 70,
            max_depth: 30,
            max_features: 0.2,
        }
    }
}

pub const DEFAULT_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub strategy: OnlineStrategy,
    /// Buffer size `W`.
    pub window: usize,
    pub boosting: BoostingUpdate,
    pub bagging: BaggingUpdate,
    pub seed: u64,
}

impl OnlineConfig {
    pub fn new(strategy: OnlineStrategy, window: usize) -> Self {
        Self {
            strategy,
            window,
            boosting: BoostingUpdate::default(),
            bagging: BaggingUpdate::default(),
            seed: 0,
        }
    }

    pub fn frozen() -> Self {
        Self::new(OnlineStrategy::Frozen, DEFAULT_WINDOW)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("buffer size W must be at least 1".into()));
        }
        let b = &self.boosting;
        if !(b.row_subsample > 0.0 && b.row_subsample <= 1.0)
            || !(b.col_subsample > 0.0 && b.col_subsample <= 1.0)
        {
            return Err(Error::Config(
                "subsampling fractions must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Logged whenever a full buffer triggers an ensemble update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateEvent {
    /// 1-based update count.
    pub index: usize,
    pub buffer_rmse_before: f64,
    pub buffer_rmse_after: f64,
    pub n_trees: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineBuffer {
    pub capacity: usize,
    pub samples: Vec<TrainingSample>,
}

impl OnlineBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            samples: Vec::with_capacity(capacity.min(4096)),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn buffer_design(buffer: &[TrainingSample]) -> Result<(Matrix, Vec<f64>)> {
    let rows: Vec<_> = buffer.iter().map(|s| s.predictors()).collect();
    Ok((
        Matrix::from_rows(&rows)?,
        buffer.iter().map(|s| s.inner_iters).collect(),
    ))
}

/// Appends `new_trees` depth-limited trees fit on the current residuals of
/// the buffer, each weighted by the update learning rate.
pub fn update_boosting(
    ensemble: &mut TreeEnsemble,
    buffer: &[TrainingSample],
    cfg: &BoostingUpdate,
    seed: u64,
) -> Result<()> {
    ensemble.check_mode(EnsembleMode::Boosted)?;
    if buffer.is_empty() {
        return Err(Error::Ml("empty update buffer".into()));
    }
    let (x, y) = buffer_design(buffer)?;
    let mut pred: Vec<f64> = buffer
        .iter()
        .map(|s| ensemble.predict(&s.features, s.omega))
        .collect();
    let params = TreeParams {
        max_depth: cfg.max_depth,
        min_leaf: 1,
        max_features: cfg.col_subsample,
    };
    let n = buffer.len();
    for t in 0..cfg.new_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
        let resid: Vec<f64> = y.iter().zip(&pred).map(|(a, p)| a - p).collect();
        let rows: Vec<usize> = if cfg.row_subsample < 1.0 {
            let k = ((cfg.row_subsample * n as f64).ceil() as usize).clamp(1, n);
            let mut r = sample(&mut rng, n, k).into_vec();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        let tree = fit_tree_rows(&x, &resid, rows, &params, &mut rng)?;
        for (i, p) in pred.iter_mut().enumerate() {
            *p += cfg.learning_rate * tree.predict(x.row(i));
        }
        ensemble.trees.push(tree);
        ensemble.weights.push(cfg.learning_rate);
    }
    Ok(())
}

/// Appends `new_trees` bootstrap trees fit on the buffer; aggregation stays
/// the plain mean over all members.
pub fn update_bagging(
    ensemble: &mut TreeEnsemble,
    buffer: &[TrainingSample],
    cfg: &BaggingUpdate,
    seed: u64,
) -> Result<()> {
    ensemble.check_mode(EnsembleMode::Bagging)?;
    let (x, y) = buffer_design(buffer)?;
    let params = TreeParams {
        max_depth: cfg.max_depth,
        min_leaf: 1,
        max_features: cfg.max_features,
    };
    let trees = fit_bootstrap_trees(&x, &y, cfg.new_trees, &params, seed, 0)?;
    ensemble.trees.extend(trees);
    Ok(())
}

/// Buffer plus update bookkeeping owned by one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineLearner {
    pub config: OnlineConfig,
    pub buffer: OnlineBuffer,
    pub n_updates: usize,
}

impl OnlineLearner {
    pub fn new(config: OnlineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            buffer: OnlineBuffer::new(config.window),
            config,
            n_updates: 0,
        })
    }

    /// Adds a sample; when the buffer reaches `W` the configured update runs
    /// on the whole buffer, which is then emptied.
    pub fn push(
        &mut self,
        sample: TrainingSample,
        ensemble: &mut TreeEnsemble,
    ) -> Result<Option<UpdateEvent>> {
        if !(sample.inner_iters >= 1.0) {
            return Err(Error::Ml(format!(
                "inner iteration count {} must be at least 1",
                sample.inner_iters
            )));
        }
        self.buffer.samples.push(sample);
        if self.buffer.len() < self.buffer.capacity {
            return Ok(None);
        }
        let batch = std::mem::take(&mut self.buffer.samples);
        if self.config.strategy == OnlineStrategy::Frozen {
            return Ok(None);
        }
        let before = rmse(ensemble, &batch)?;
        let seed = derive_seed(self.config.seed, self.n_updates as u64);
        match self.config.strategy {
            OnlineStrategy::Boosting => {
                update_boosting(ensemble, &batch, &self.config.boosting, seed)?
            }
            OnlineStrategy::Bagging => {
                update_bagging(ensemble, &batch, &self.config.bagging, seed)?
            }
            OnlineStrategy::Frozen => unreachable!(),
        }
        self.n_updates += 1;
        Ok(Some(UpdateEvent {
            index: self.n_updates,
            buffer_rmse_before: before,
            buffer_rmse_after: rmse(ensemble, &batch)?,
            n_trees: ensemble.len(),
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamTrajectory {
    /// RMSE of the predictions made inside each consecutive window.
    pub window_rmse: Vec<f64>,
    /// Stream positions (exclusive end) of each window.
    pub window_end: Vec<usize>,
    /// Stream positions after which an update fired.
    pub update_at: Vec<usize>,
}

/// Prequential replay: every sample is predicted before it is pushed.
/// RMSE is reported per consecutive window of `eval_window` samples.
pub fn stream_replay(
    stream: &[TrainingSample],
    ensemble: &TreeEnsemble,
    config: &OnlineConfig,
    eval_window: usize,
) -> Result<StreamTrajectory> {
    if eval_window == 0 {
        return Err(Error::Config("evaluation window must be at least 1".into()));
    }
    let mut model = ensemble.clone();
    let mut learner = OnlineLearner::new(*config)?;
    let mut traj = StreamTrajectory {
        window_rmse: Vec::new(),
        window_end: Vec::new(),
        update_at: Vec::new(),
    };
    let mut sse = 0.0;
    let mut count = 0;
    for (i, s) in stream.iter().enumerate() {
        let e = model.predict(&s.features, s.omega) - s.inner_iters;
        sse += e * e;
        count += 1;
        if learner.push(*s, &mut model)?.is_some() {
            traj.update_at.push(i + 1);
        }
        if count == eval_window || i + 1 == stream.len() {
            traj.window_rmse.push((sse / count as f64).sqrt());
            traj.window_end.push(i + 1);
            sse = 0.0;
            count = 0;
        }
    }
    Ok(traj)
}
