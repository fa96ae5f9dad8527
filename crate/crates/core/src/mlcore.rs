//! CART regression trees and their bagged / boosted ensembles.
//!
//! The model input is the 17-entry feature vector followed by the relaxation
//! factor, and the target is the inner-iteration count that factor produced.

use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::{FeatureVector, N_FEATURES};
use crate::{Error, Result};

/// Features plus `omega`.
pub const N_PREDICTORS: usize = N_FEATURES + 1;

pub const MODEL_FILE_VERSION: u32 = 1;
const MODEL_FILE_FORMAT: &str = "relaxflow-ensemble";

/// Relative tolerance under which two split gains count as tied.
pub const GAIN_TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub features: FeatureVector,
    pub omega: f64,
    pub inner_iters: f64,
}

impl TrainingSample {
    pub fn predictors(&self) -> [f64; N_PREDICTORS] {
        predictor_row(&self.features, self.omega)
    }
}

pub fn predictor_row(features: &FeatureVector, omega: f64) -> [f64; N_PREDICTORS] {
    let mut row = [0.0; N_PREDICTORS];
    row[..N_FEATURES].copy_from_slice(&features.0);
    row[N_FEATURES] = omega;
    row
}

/// Row-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::FeatureLength {
                    expected: n_cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { n_cols, data })
    }

    pub fn n_rows(&self) -> usize {
        self.data.len().checked_div(self.n_cols).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }
}

fn design(samples: &[TrainingSample]) -> Result<(Matrix, Vec<f64>)> {
    let rows: Vec<[f64; N_PREDICTORS]> = samples.iter().map(|s| s.predictors()).collect();
    let y = samples.iter().map(|s| s.inner_iters).collect();
    Ok((Matrix::from_rows(&rows)?, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Maximum depth; the root is at depth 0.
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Fraction of predictors considered at each node, rounded up.
    pub max_features: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 12,
            min_leaf: 5,
            max_features: 1.0,
        }
    }
}

impl TreeParams {
    fn validate(&self) -> Result<()> {
        if self.min_leaf == 0 {
            return Err(Error::Ml("min_leaf must be at least 1".into()));
        }
        if !(self.max_features > 0.0 && self.max_features <= 1.0) {
            return Err(Error::Ml(format!(
                "max_features {} must lie in (0, 1]",
                self.max_features
            )));
        }
        Ok(())
    }
}

/// Flattened tree node. Leaves have `feature == -1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: i32,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    /// Mean training target of the node.
    pub value: f64,
    /// SSE reduction achieved by this split (0 for leaves).
    pub gain: f64,
}

impl Node {
    fn leaf(value: f64) -> Self {
        Self {
            feature: -1,
            threshold: 0.0,
            left: 0,
            right: 0,
            value,
            gain: 0.0,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.feature < 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn constant(value: f64) -> Self {
        Self {
            nodes: vec![Node::leaf(value)],
        }
    }

    /// Goes left when `x[feature] <= threshold`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let n = &self.nodes[i];
            if n.is_leaf() {
                return n.value;
            }
            i = if x[n.feature as usize] <= n.threshold {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }

    pub fn depth(&self) -> usize {
        fn rec(t: &RegressionTree, i: usize) -> usize {
            let n = &t.nodes[i];
            if n.is_leaf() {
                0
            } else {
                1 + rec(t, n.left as usize).max(rec(t, n.right as usize))
            }
        }
        rec(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }
}

/// Best split of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

fn beats(gain: f64, best: f64) -> bool {
    gain > best + GAIN_TIE_RTOL * best.abs()
}

/// Best variance-reducing split over `candidates` (scanned in ascending
/// order). Gain is `n_L n_R / n · (ȳ_L − ȳ_R)²`; thresholds are midpoints of
/// consecutive distinct values; ties go to the lowest predictor, then the
/// lowest threshold.
pub fn best_split(
    x: &Matrix,
    y: &[f64],
    idx: &[usize],
    candidates: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    let n = idx.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let total: f64 = idx.iter().map(|&i| y[i]).sum();
    let mut best: Option<Split> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &f in candidates {
        pairs.clear();
        pairs.extend(idx.iter().map(|&i| (x.get(i, f), y[i])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_sum = 0.0;
        for p in 1..n {
            left_sum += pairs[p - 1].1;
            if p < min_leaf || n - p < min_leaf || pairs[p - 1].0 == pairs[p].0 {
                continue;
            }
            let (nl, nr) = (p as f64, (n - p) as f64);
            let diff = left_sum / nl - (total - left_sum) / nr;
            let gain = nl * nr / n as f64 * diff * diff;
            if gain > 0.0 && best.is_none_or(|b| beats(gain, b.gain)) {
                let (lo, hi) = (pairs[p - 1].0, pairs[p].0);
                // Adjacent floats can have a midpoint that rounds up to `hi`.
                let mid = 0.5 * (lo + hi);
                best = Some(Split {
                    feature: f,
                    threshold: if mid < hi { mid } else { lo },
                    gain,
                });
            }
        }
    }
    best
}

/// Fits one tree on the rows listed in `idx` (duplicates allowed).
pub fn fit_tree_rows(
    x: &Matrix,
    y: &[f64],
    idx: Vec<usize>,
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Result<RegressionTree> {
    params.validate()?;
    if idx.is_empty() {
        return Err(Error::Ml("cannot fit a tree on zero samples".into()));
    }
    let p = x.n_cols;
    let k = ((params.max_features * p as f64).ceil() as usize).clamp(1, p);
    let mean = |ix: &[usize]| ix.iter().map(|&i| y[i]).sum::<f64>() / ix.len() as f64;

    let mut nodes = vec![Node::leaf(mean(&idx))];
    let mut stack = vec![(0usize, idx, 0usize)];
    while let Some((id, ix, depth)) = stack.pop() {
        if depth >= params.max_depth {
            continue;
        }
        let first = y[ix[0]];
        if ix.iter().all(|&i| y[i] == first) {
            continue;
        }
        let candidates: Vec<usize> = if k == p {
            (0..p).collect()
        } else {
            let mut c = sample(rng, p, k).into_vec();
            c.sort_unstable();
            c
        };
        let Some(split) = best_split(x, y, &ix, &candidates, params.min_leaf) else {
            continue;
        };
        let (li, ri): (Vec<usize>, Vec<usize>) = ix
            .iter()
            .partition(|&&i| x.get(i, split.feature) <= split.threshold);
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::leaf(mean(&li)));
        nodes.push(Node::leaf(mean(&ri)));
        let node = &mut nodes[id];
        node.feature = split.feature as i32;
        node.threshold = split.threshold;
        node.left = l as u32;
        node.right = r as u32;
        node.gain = split.gain;
        stack.push((r, ri, depth + 1));
        stack.push((l, li, depth + 1));
    }
    Ok(RegressionTree { nodes })
}

pub fn fit_tree_matrix(
    x: &Matrix,
    y: &[f64],
    params: &TreeParams,
    seed: u64,
) -> Result<RegressionTree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fit_tree_rows(x, y, (0..y.len()).collect(), params, &mut rng)
}

pub fn fit_tree(
    samples: &[TrainingSample],
    params: &TreeParams,
    seed: u64,
) -> Result<RegressionTree> {
    let (x, y) = design(samples)?;
    fit_tree_matrix(&x, &y, params, seed)
}

/// SplitMix64 finalizer applied to `seed + (i + 1)·γ`; used to derive
/// independent member seeds from one master seed.
pub fn derive_seed(seed: u64, i: u64) -> u64 {
    let mut z = seed.wrapping_add((i + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleMode {
    Bagging,
    Boosted,
}

impl EnsembleMode {
    pub fn name(self) -> &'static str {
        match self {
            EnsembleMode::Bagging => "bagging",
            EnsembleMode::Boosted => "boosted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub mode: EnsembleMode,
    pub trees: Vec<RegressionTree>,
    /// Boosted only: per-tree learning rate.
    pub weights: Vec<f64>,
    /// Boosted only: initial prediction (training-target mean).
    pub base_value: f64,
    /// Learning rate used for offline fitting (Boosted only).
    pub learning_rate: f64,
    pub n_predictors: usize,
    pub params: TreeParams,
}

impl TreeEnsemble {
    pub fn bagging(trees: Vec<RegressionTree>, params: TreeParams) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::Ml("ensemble needs at least one tree".into()));
        }
        Ok(Self {
            mode: EnsembleMode::Bagging,
            trees,
            weights: Vec::new(),
            base_value: 0.0,
            learning_rate: 0.0,
            n_predictors: N_PREDICTORS,
            params,
        })
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_predictors {
            return Err(Error::FeatureLength {
                expected: self.n_predictors,
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        match self.mode {
            EnsembleMode::Bagging => {
                self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
            }
            EnsembleMode::Boosted => {
                self.base_value
                    + self
                        .trees
                        .iter()
                        .zip(&self.weights)
                        .map(|(t, w)| w * t.predict(x))
                        .sum::<f64>()
            }
        }
    }

    /// Predicted inner iterations for `features` relaxed with `omega`.
    pub fn predict(&self, features: &FeatureVector, omega: f64) -> f64 {
        self.predict_unchecked(&predictor_row(features, omega))
    }

    pub fn check_mode(&self, expected: EnsembleMode) -> Result<()> {
        if self.mode != expected {
            return Err(Error::ModeMismatch {
                expected: expected.name(),
                found: self.mode.name(),
            });
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from_ensemble(
            self,
        ))?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let parse_err = |e: serde_json::Error| Error::Parse {
            path: origin.to_string(),
            message: format!("line {} column {}: {e}", e.line(), e.column()),
        };
        let header: FileHeader = serde_json::from_str(text).map_err(parse_err)?;
        if header.format != MODEL_FILE_FORMAT {
            return Err(Error::Parse {
                path: origin.to_string(),
                message: format!("unexpected format tag `{}`", header.format),
            });
        }
        if header.version != MODEL_FILE_VERSION {
            return Err(Error::Version {
                found: header.version,
                expected: MODEL_FILE_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_str(text).map_err(parse_err)?;
        file.into_ensemble().map_err(|message| Error::Parse {
            path: origin.to_string(),
            message,
        })
    }
}

#[derive(Deserialize)]
struct FileHeader {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct TreeArrays {
    weight: f64,
    feature: Vec<i32>,
    threshold: Vec<f64>,
    left: Vec<u32>,
    right: Vec<u32>,
    value: Vec<f64>,
    gain: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    mode: EnsembleMode,
    n_predictors: usize,
    base_value: f64,
    learning_rate: f64,
    params: TreeParams,
    trees: Vec<TreeArrays>,
}

impl ModelFile {
    fn from_ensemble(e: &TreeEnsemble) -> Self {
        let trees = e
            .trees
            .iter()
            .enumerate()
            .map(|(i, t)| TreeArrays {
                weight: e.weights.get(i).copied().unwrap_or(1.0),
                feature: t.nodes.iter().map(|n| n.feature).collect(),
                threshold: t.nodes.iter().map(|n| n.threshold).collect(),
                left: t.nodes.iter().map(|n| n.left).collect(),
                right: t.nodes.iter().map(|n| n.right).collect(),
                value: t.nodes.iter().map(|n| n.value).collect(),
                gain: t.nodes.iter().map(|n| n.gain).collect(),
            })
            .collect();
        Self {
            format: MODEL_FILE_FORMAT.to_string(),
            version: MODEL_FILE_VERSION,
            mode: e.mode,
            n_predictors: e.n_predictors,
            base_value: e.base_value,
            learning_rate: e.learning_rate,
            params: e.params,
            trees,
        }
    }

    fn into_ensemble(self) -> std::result::Result<TreeEnsemble, String> {
        if self.trees.is_empty() {
            return Err("model has no trees".into());
        }
        let mut trees = Vec::with_capacity(self.trees.len());
        let mut weights = Vec::new();
        for (ti, a) in self.trees.into_iter().enumerate() {
            let n = a.feature.len();
            if n == 0
                || [
                    a.threshold.len(),
                    a.left.len(),
                    a.right.len(),
                    a.value.len(),
                    a.gain.len(),
                ]
                .iter()
                .any(|&l| l != n)
            {
                return Err(format!(
                    "tree {ti}: node arrays are empty or of unequal length"
                ));
            }
            let mut nodes = Vec::with_capacity(n);
            for i in 0..n {
                let f = a.feature[i];
                if f >= 0 {
                    let (l, r) = (a.left[i] as usize, a.right[i] as usize);
                    if f as usize >= self.n_predictors || l >= n || r >= n || l <= i || r <= i {
                        return Err(format!("tree {ti} node {i}: invalid split"));
                    }
                }
                nodes.push(Node {
                    feature: f,
                    threshold: a.threshold[i],
                    left: a.left[i],
                    right: a.right[i],
                    value: a.value[i],
                    gain: a.gain[i],
                });
            }
            trees.push(RegressionTree { nodes });
            weights.push(a.weight);
        }
        if self.mode == EnsembleMode::Bagging {
            weights.clear();
        }
        Ok(TreeEnsemble {
            mode: self.mode,
            trees,
            weights,
            base_value: self.base_value,
            learning_rate: self.learning_rate,
            n_predictors: self.n_predictors,
            params: self.params,
        })
    }
}

/// Bootstrap trees fit on `x`, `y`; member `i` uses seed `derive_seed(seed, offset + i)`.
pub fn fit_bootstrap_trees(
    x: &Matrix,
    y: &[f64],
    n_trees: usize,
    params: &TreeParams,
    seed: u64,
    offset: u64,
) -> Result<Vec<RegressionTree>> {
    let n = y.len();
    if n == 0 {
        return Err(Error::Ml("cannot fit on zero samples".into()));
    }
    (0..n_trees as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, offset + i));
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            fit_tree_rows(x, y, idx, params, &mut rng)
        })
        .collect()
}

pub fn fit_forest(
    samples: &[TrainingSample],
    n_trees: usize,
    params: &TreeParams,
    seed: u64,
) -> Result<TreeEnsemble> {
    if n_trees == 0 {
        return Err(Error::Ml("n_trees must be at least 1".into()));
    }
    let (x, y) = design(samples)?;
    let trees = fit_bootstrap_trees(&x, &y, n_trees, params, seed, 0)?;
    TreeEnsemble::bagging(trees, *params)
}

/// Gradient boosting on squared loss: each round fits a tree to the current
/// residuals and adds it scaled by `learning_rate`.
pub fn fit_boosted(
    samples: &[TrainingSample],
    n_rounds: usize,
    learning_rate: f64,
    params: &TreeParams,
    seed: u64,
) -> Result<TreeEnsemble> {
    if n_rounds == 0 {
        return Err(Error::Ml("n_rounds must be at least 1".into()));
    }
    if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
        return Err(Error::Ml(format!("invalid learning rate {learning_rate}")));
    }
    if samples.is_empty() {
        return Err(Error::Ml("cannot fit on zero samples".into()));
    }
    let (x, y) = design(samples)?;
    let base = y.iter().sum::<f64>() / y.len() as f64;
    let mut pred = vec![base; y.len()];
    let mut trees = Vec::with_capacity(n_rounds);
    for round in 0..n_rounds {
        let resid: Vec<f64> = y.iter().zip(&pred).map(|(t, p)| t - p).collect();
        let tree = fit_tree_matrix(&x, &resid, params, derive_seed(seed, round as u64))?;
        for (i, p) in pred.iter_mut().enumerate() {
            *p += learning_rate * tree.predict(x.row(i));
        }
        trees.push(tree);
    }
    Ok(TreeEnsemble {
        mode: EnsembleMode::Boosted,
        weights: vec![learning_rate; trees.len()],
        trees,
        base_value: base,
        learning_rate,
        n_predictors: N_PREDICTORS,
        params: *params,
    })
}

pub fn rmse(ensemble: &TreeEnsemble, samples: &[TrainingSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Ml("rmse of an empty sample set".into()));
    }
    let sse: f64 = samples
        .iter()
        .map(|s| {
            let e = ensemble.predict(&s.features, s.omega) - s.inner_iters;
            e * e
        })
        .sum();
    Ok((sse / samples.len() as f64).sqrt())
}

/// Total SSE reduction per predictor over every split of every tree,
/// normalized to sum to 1 (all zeros when no tree splits).
pub fn feature_importance(ensemble: &TreeEnsemble) -> Vec<f64> {
    let mut imp = vec![0.0; ensemble.n_predictors];
    for t in &ensemble.trees {
        for n in t.nodes.iter().filter(|n| !n.is_leaf()) {
            imp[n.feature as usize] += n.gain;
        }
    }
    let total: f64 = imp.iter().sum();
    if total > 0.0 {
        imp.iter_mut().for_each(|v| *v /= total);
    }
    imp
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert_eq, proptest};
    use rand::Rng;

    fn sample(x0: f64, omega: f64, y: f64) -> TrainingSample {
        let mut f = [0.0; N_FEATURES];
        f[0] = x0;
        TrainingSample {
            features: FeatureVector(f),
            omega,
            inner_iters: y,
        }
    }

    fn synthetic(n: usize, seed: u64, noise: f64) -> Vec<TrainingSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut f = [0.0; N_FEATURES];
                for v in f.iter_mut() {
                    *v = rng.gen_range(-1.0f64..1.0);
                }
                let omega: f64 = rng.gen_range(0.1..1.0);
                let y = 3.0 * (2.0 * f[0]).sin()
                    + f[1] * f[2]
                    + 2.0 * omega
                    + noise * rng.gen_range(-1.0..1.0);
                TrainingSample {
                    features: FeatureVector(f),
                    omega,
                    inner_iters: y,
                }
            })
            .collect()
    }

    /// SSE reduction of every midpoint split computed directly from the two
    /// partitions.
    fn brute_force_split(x: &[Vec<f64>], y: &[f64], min_leaf: usize) -> Option<(usize, f64, f64)> {
        let sse = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|a| (a - m) * (a - m)).sum::<f64>()
        };
        let total = sse(y);
        let mut best: Option<(usize, f64, f64)> = None;
        for f in 0..x[0].len() {
            let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
            vals.sort_by(|a, b| a.total_cmp(b));
            vals.dedup();
            for w in vals.windows(2) {
                let t = 0.5 * (w[0] + w[1]);
                let (l, r): (Vec<f64>, Vec<f64>) = (
                    x.iter()
                        .zip(y)
                        .filter(|(r, _)| r[f] <= t)
                        .map(|(_, v)| *v)
                        .collect(),
                    x.iter()
                        .zip(y)
                        .filter(|(r, _)| r[f] > t)
                        .map(|(_, v)| *v)
                        .collect(),
                );
                if l.len() < min_leaf || r.len() < min_leaf {
                    continue;
                }
                let gain = total - sse(&l) - sse(&r);
                let better = match best {
                    None => gain > 0.0,
                    Some((_, _, g)) => gain > g + GAIN_TIE_RTOL * g.abs(),
                };
                if better {
                    best = Some((f, t, gain));
                }
            }
        }
        best
    }

    #[test]
    fn adjacent_float_values_split_into_nonempty_children() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let rows: Vec<TrainingSample> = [a, b, a, b]
            .iter()
            .zip([0.0, 1.0, 0.0, 1.0])
            .map(|(&x, y)| sample(x, 0.5, y))
            .collect();
        let params = TreeParams {
            max_depth: 3,
            min_leaf: 1,
            max_features: 1.0,
        };
        let t = fit_tree(&rows, &params, 0).unwrap();
        assert_eq!(t.predict(&rows[0].predictors()), 0.0);
        assert_eq!(t.predict(&rows[1].predictors()), 1.0);
    }

    #[test]
    fn constant_targets_give_single_leaf() {
        let s: Vec<_> = (0..10).map(|i| sample(i as f64, 0.5, 3.0)).collect();
        let t = fit_tree(&s, &TreeParams::default(), 1).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.nodes[0].value, 3.0);
    }

    #[test]
    fn two_point_depth_one_split() {
        let s = vec![sample(0.0, 0.5, 0.0), sample(1.0, 0.5, 1.0)];
        let p = TreeParams {
            max_depth: 1,
            min_leaf: 1,
            max_features: 1.0,
        };
        let t = fit_tree(&s, &p, 0).unwrap();
        assert_eq!(t.nodes.len(), 3);
        assert_eq!(t.nodes[0].feature, 0);
        assert_eq!(t.nodes[0].threshold, 0.5);
        for x in &s {
            assert_eq!(t.predict(&x.predictors()), x.inner_iters);
        }
    }

    #[test]
    fn unbounded_tree_memorizes() {
        let s = synthetic(200, 3, 0.5);
        let p = TreeParams {
            max_depth: usize::MAX,
            min_leaf: 1,
            max_features: 1.0,
        };
        let t = fit_tree(&s, &p, 0).unwrap();
        let e = TreeEnsemble::bagging(vec![t], p).unwrap();
        assert_eq!(rmse(&e, &s).unwrap(), 0.0);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(fit_tree(&[], &TreeParams::default(), 0).is_err());
        let s = synthetic(10, 1, 0.0);
        assert!(fit_forest(&s, 0, &TreeParams::default(), 0).is_err());
        assert!(fit_boosted(&s, 0, 0.1, &TreeParams::default(), 0).is_err());
        let e = fit_forest(&s, 2, &TreeParams::default(), 0).unwrap();
        assert!(rmse(&e, &[]).is_err());
    }

    #[test]
    fn root_split_matches_brute_force_on_small_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(2..=12);
            let p = rng.gen_range(1..=2);
            let x: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..p).map(|_| rng.gen_range(0..6) as f64 * 0.5).collect())
                .collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let m = Matrix::from_rows(&x).unwrap();
            let params = TreeParams {
                max_depth: 1,
                min_leaf: 1,
                max_features: 1.0,
            };
            let t = fit_tree_matrix(&m, &y, &params, 0).unwrap();
            match brute_force_split(&x, &y, 1) {
                None => assert!(t.nodes[0].is_leaf()),
                Some((f, thr, gain)) => {
                    assert_eq!(t.nodes[0].feature, f as i32);
                    assert_eq!(t.nodes[0].threshold, thr);
                    assert!((t.nodes[0].gain - gain).abs() <= 1e-9 * gain.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn predict_aggregation_examples() {
        let p = TreeParams::default();
        let x = sample(0.0, 0.5, 0.0);
        let single = TreeEnsemble::bagging(vec![RegressionTree::constant(3.0)], p).unwrap();
        assert_eq!(single.predict(&x.features, 0.3), 3.0);
        let bag = TreeEnsemble::bagging(
            vec![RegressionTree::constant(2.0), RegressionTree::constant(4.0)],
            p,
        )
        .unwrap();
        assert_eq!(bag.predict(&x.features, 0.3), 3.0);
        let boosted = TreeEnsemble {
            mode: EnsembleMode::Boosted,
            trees: vec![RegressionTree::constant(-10.0)],
            weights: vec![0.01],
            base_value: 5.0,
            learning_rate: 0.01,
            n_predictors: N_PREDICTORS,
            params: p,
        };
        assert!((boosted.predict(&x.features, 0.3) - 4.9).abs() < 1e-15);
        assert!(matches!(
            boosted.predict_row(&[0.0; 17]),
            Err(Error::FeatureLength {
                expected: 18,
                got: 17
            })
        ));
    }

    #[test]
    fn forest_constant_targets_and_single_sample() {
        let s: Vec<_> = (0..20).map(|i| sample(i as f64, 0.4, 7.0)).collect();
        let e = fit_forest(&s, 5, &TreeParams::default(), 9).unwrap();
        assert_eq!(e.predict(&s[3].features, 0.9), 7.0);
        let one = vec![sample(1.0, 0.5, 4.0)];
        let e = fit_forest(&one, 1, &TreeParams::default(), 9).unwrap();
        assert_eq!(e.predict(&one[0].features, 0.5), 4.0);
    }

    #[test]
    fn bagging_mean_and_boosted_sum_identities() {
        let s = synthetic(150, 5, 0.3);
        let bag = fit_forest(&s, 7, &TreeParams::default(), 1).unwrap();
        let boost = fit_boosted(
            &s,
            9,
            0.3,
            &TreeParams {
                max_depth: 3,
                ..TreeParams::default()
            },
            1,
        )
        .unwrap();
        for q in &s[..20] {
            let x = q.predictors();
            let mean =
                bag.trees.iter().map(|t| t.predict(&x)).sum::<f64>() / bag.trees.len() as f64;
            assert_eq!(bag.predict_row(&x).unwrap(), mean);
            let sum = boost.base_value
                + boost
                    .trees
                    .iter()
                    .zip(&boost.weights)
                    .map(|(t, w)| w * t.predict(&x))
                    .sum::<f64>();
            assert_eq!(boost.predict_row(&x).unwrap(), sum);
        }
    }

    #[test]
    fn forest_not_worse_than_single_tree_on_noisy_data() {
        let mut ratios = Vec::new();
        for seed in 0..5 {
            let train = synthetic(400, 100 + seed, 1.0);
            let test = synthetic(400, 200 + seed, 1.0);
            let p = TreeParams {
                max_depth: 10,
                min_leaf: 2,
                max_features: 1.0,
            };
            let tree = TreeEnsemble::bagging(vec![fit_tree(&train, &p, seed).unwrap()], p).unwrap();
            let forest = fit_forest(&train, 30, &p, seed).unwrap();
            ratios.push(rmse(&forest, &test).unwrap() / rmse(&tree, &test).unwrap());
        }
        ratios.sort_by(|a, b| a.total_cmp(b));
        assert!(ratios[2] <= 1.1, "{ratios:?}");
    }

    #[test]
    fn boosting_loss_is_non_increasing() {
        let s = synthetic(300, 8, 0.2);
        let p = TreeParams {
            max_depth: 3,
            min_leaf: 1,
            max_features: 1.0,
        };
        let e = fit_boosted(&s, 40, 0.1, &p, 2).unwrap();
        let mut partial = e.clone();
        let mut last = f64::INFINITY;
        for k in 0..=e.trees.len() {
            partial.trees = e.trees[..k].to_vec();
            partial.weights = e.weights[..k].to_vec();
            let l = rmse(&partial, &s).unwrap();
            assert!(l <= last + 1e-12);
            last = l;
        }
    }

    #[test]
    fn boosting_constant_targets_and_zero_rate() {
        let s: Vec<_> = (0..10).map(|i| sample(i as f64, 0.5, 2.5)).collect();
        let e = fit_boosted(&s, 1, 0.1, &TreeParams::default(), 0).unwrap();
        assert_eq!(e.trees[0].nodes[0].value, 0.0);
        assert_eq!(e.predict(&s[0].features, 0.5), 2.5);
        let s = synthetic(50, 2, 0.0);
        let e = fit_boosted(&s, 5, 0.0, &TreeParams::default(), 0).unwrap();
        for q in &s {
            assert_eq!(e.predict(&q.features, q.omega), e.base_value);
        }
    }

    #[test]
    fn rmse_hand_example_and_mean_predictor() {
        let s = vec![
            sample(0.0, 0.5, 1.0),
            sample(0.0, 0.5, 2.0),
            sample(0.0, 0.5, 6.0),
        ];
        let e = TreeEnsemble::bagging(vec![RegressionTree::constant(2.0)], TreeParams::default())
            .unwrap();
        // errors 1, 0, 4 → sqrt(17/3)
        assert!((rmse(&e, &s).unwrap() - (17.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let e = TreeEnsemble::bagging(vec![RegressionTree::constant(3.0)], TreeParams::default())
            .unwrap();
        let std = ((4.0 + 1.0 + 9.0) / 3.0f64).sqrt();
        assert!((rmse(&e, &s).unwrap() - std).abs() < 1e-15);
    }

    #[test]
    fn importance_single_split_and_normalization() {
        let s = vec![sample(0.0, 0.5, 0.0), sample(1.0, 0.5, 1.0)];
        let p = TreeParams {
            max_depth: 1,
            min_leaf: 1,
            max_features: 1.0,
        };
        let e = TreeEnsemble::bagging(vec![fit_tree(&s, &p, 0).unwrap()], p).unwrap();
        let imp = feature_importance(&e);
        assert_eq!(imp.len(), N_PREDICTORS);
        assert_eq!(imp[0], 1.0);
        assert!(imp[1..].iter().all(|&v| v == 0.0));
        let e = fit_forest(&synthetic(200, 1, 0.2), 10, &TreeParams::default(), 0).unwrap();
        assert!((feature_importance(&e).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fitting_is_deterministic() {
        let s = synthetic(200, 4, 0.3);
        let p = TreeParams {
            max_features: 0.3,
            ..TreeParams::default()
        };
        let a = fit_forest(&s, 6, &p, 77).unwrap().to_json().unwrap();
        let b = fit_forest(&s, 6, &p, 77).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        let c = fit_forest(&s, 6, &p, 78).unwrap().to_json().unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn save_load_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let s = synthetic(200, 6, 0.3);
        let boost = fit_boosted(&s, 10, 0.1, &TreeParams::default(), 3).unwrap();
        let bag = fit_forest(&s, 4, &TreeParams::default(), 3).unwrap();
        let probe = synthetic(100, 99, 0.0);
        for (name, e) in [("b.json", boost), ("f.json", bag)] {
            let path = dir.path().join(name);
            e.save(&path).unwrap();
            let back = TreeEnsemble::load(&path).unwrap();
            assert_eq!(back, e);
            for q in &probe {
                assert_eq!(
                    back.predict(&q.features, q.omega).to_bits(),
                    e.predict(&q.features, q.omega).to_bits()
                );
            }
        }
    }

    #[test]
    fn malformed_and_incompatible_files_rejected() {
        let s = synthetic(50, 6, 0.3);
        let e = fit_forest(&s, 2, &TreeParams::default(), 3).unwrap();
        let text = e.to_json().unwrap();
        let truncated = &text[..text.len() / 2];
        match TreeEnsemble::from_json(truncated, "m.json") {
            Err(Error::Parse { message, .. }) => assert!(message.contains("line")),
            other => panic!("expected parse error, got {other:?}"),
        }
        let bumped = text.replacen("\"version\": 1", "\"version\": 2", 1);
        assert!(matches!(
            TreeEnsemble::from_json(&bumped, "m.json"),
            Err(Error::Version {
                found: 2,
                expected: 1
            })
        ));
    }

    proptest! {
        #[test]
        fn monotone_transform_leaves_predictions_unchanged(
            xs in proptest::collection::vec(-5.0f64..5.0, 5..40),
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s: Vec<_> = xs.iter().map(|&x| sample(x, 0.5, rng.gen_range(0.0..10.0))).collect();
            let t: Vec<_> = s.iter().map(|q| {
                let mut q2 = *q;
                q2.features.0[0] = q.features.0[0].exp();
                q2
            }).collect();
            let p = TreeParams { max_depth: 6, min_leaf: 1, max_features: 1.0 };
            let a = fit_tree(&s, &p, 0).unwrap();
            let b = fit_tree(&t, &p, 0).unwrap();
            for (qa, qb) in s.iter().zip(&t) {
                prop_assert_eq!(a.predict(&qa.predictors()), b.predict(&qb.predictors()));
            }
        }
    }
}
