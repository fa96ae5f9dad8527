//! Offline training data: perturbed two-layer scenarios run with a fixed
//! relaxation factor, one sample per outer iteration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::RelaxationController;
use crate::features::{cfl_field, FeatureVector, FEATURE_NAMES, N_FEATURES};
use crate::mlcore::{derive_seed, TrainingSample};
use crate::model::{build_two_layer, ReservoirModel, STANDARD_GRAVITY};
use crate::solver::{
    compute_velocities, run_simulation, solve_pressure, Discretization, Schedule, SimulationState,
    SolverConfig,
};
use crate::{Error, Result};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    fn uniform(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.gen();
        if self.lo == self.hi {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * u
        }
    }

    fn log_uniform(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.gen();
        if self.lo == self.hi {
            self.lo
        } else {
            (self.lo.ln() + (self.hi.ln() - self.lo.ln()) * u).exp()
        }
    }

    fn validate(&self, name: &str, positive: bool) -> Result<()> {
        if !(self.lo <= self.hi && self.lo.is_finite() && self.hi.is_finite())
            || (positive && self.lo <= 0.0)
        {
            return Err(Error::Config(format!(
                "range `{name}` [{}, {}] is invalid",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// Perturbation ranges. Permeabilities and the anisotropy ratio are sampled
/// log-uniformly, everything else uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRanges {
    /// Horizontal permeability of the upper layer [mD].
    pub kx_upper_md: Range,
    pub kx_lower_md: Range,
    /// `kz / kx`.
    pub kz_ratio: Range,
    pub phi_upper: Range,
    pub phi_lower: Range,
    /// Displaced / injected viscosity ratio.
    pub viscosity_ratio: Range,
    /// Entry capillary pressure [Pa].
    pub entry_pressure: Range,
    pub corey_exponent: Range,
    pub krw_end: Range,
    pub krnw_end: Range,
    /// Gravity magnitude [m/s²].
    pub gravity: Range,
    /// Tilt of gravity from the `-z` axis inside the x–z plane [rad].
    pub gravity_tilt: Range,
    /// Target initial max CFL number; sets the step size.
    pub target_cfl: Range,
    pub omega: Range,
}

impl Default for ScenarioRanges {
    fn default() -> Self {
        Self {
            kx_upper_md: Range::new(1.0, 1000.0),
            kx_lower_md: Range::new(1.0, 1000.0),
            kz_ratio: Range::new(0.01, 1.0),
            phi_upper: Range::new(0.05, 0.35),
            phi_lower: Range::new(0.05, 0.35),
            viscosity_ratio: Range::new(1.0, 20.0),
            entry_pressure: Range::new(0.0, 5000.0),
            corey_exponent: Range::new(1.5, 3.0),
            krw_end: Range::new(0.3, 1.0),
            krnw_end: Range::new(0.5, 1.0),
            gravity: Range::new(0.0, STANDARD_GRAVITY),
            gravity_tilt: Range::new(-0.5, 0.5),
            target_cfl: Range::new(0.1, 20.0),
            omega: Range::new(0.1, 1.0),
        }
    }
}

impl ScenarioRanges {
    /// Every range collapsed onto the test-case-1 values, with the given
    /// step-size target and relaxation factor.
    pub fn test_case_1(target_cfl: f64, omega: f64) -> Self {
        Self {
            kx_upper_md: Range::point(200.0),
            kx_lower_md: Range::point(100.0),
            kz_ratio: Range::point(0.1),
            phi_upper: Range::point(0.10),
            phi_lower: Range::point(0.20),
            viscosity_ratio: Range::point(5.0),
            entry_pressure: Range::point(1000.0),
            corey_exponent: Range::point(2.0),
            krw_end: Range::point(1.0),
            krnw_end: Range::point(1.0),
            gravity: Range::point(STANDARD_GRAVITY),
            gravity_tilt: Range::point(0.0),
            target_cfl: Range::point(target_cfl),
            omega: Range::point(omega),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kx_upper_md.validate("kx_upper_md", true)?;
        self.kx_lower_md.validate("kx_lower_md", true)?;
        self.kz_ratio.validate("kz_ratio", true)?;
        self.phi_upper.validate("phi_upper", true)?;
        self.phi_lower.validate("phi_lower", true)?;
        self.viscosity_ratio.validate("viscosity_ratio", true)?;
        self.entry_pressure.validate("entry_pressure", false)?;
        self.corey_exponent.validate("corey_exponent", true)?;
        self.krw_end.validate("krw_end", true)?;
        self.krnw_end.validate("krnw_end", true)?;
        self.gravity.validate("gravity", false)?;
        self.gravity_tilt.validate("gravity_tilt", false)?;
        self.target_cfl.validate("target_cfl", true)?;
        self.omega.validate("omega", true)?;
        for r in [self.phi_upper, self.phi_lower] {
            if !(r.lo > 0.02 && r.hi < 0.4) {
                return Err(Error::Config(format!(
                    "porosity range [{}, {}] must lie inside (0.02, 0.4)",
                    r.lo, r.hi
                )));
            }
        }
        if self.omega.lo < 0.1
            || self.omega.hi > 1.0
            || self.krw_end.hi > 1.0
            || self.krnw_end.hi > 1.0
        {
            return Err(Error::Config(
                "omega must lie in [0.1, 1] and relperm endpoints must not exceed 1".into(),
            ));
        }
        if self.entry_pressure.lo < 0.0 || self.gravity.lo < 0.0 {
            return Err(Error::Config(
                "entry pressure and gravity must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Sampled parameter values, in the order of [`ScenarioRanges`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub kx_upper_md: f64,
    pub kx_lower_md: f64,
    pub kz_ratio: f64,
    pub phi_upper: f64,
    pub phi_lower: f64,
    pub viscosity_ratio: f64,
    pub entry_pressure: f64,
    pub corey_exponent: f64,
    pub krw_end: f64,
    pub krnw_end: f64,
    pub gravity: f64,
    pub gravity_tilt: f64,
    pub target_cfl: f64,
    pub omega: f64,
}

impl ScenarioParams {
    pub fn named(&self) -> [(&'static str, f64); 14] {
        [
            ("kx_upper_md", self.kx_upper_md),
            ("kx_lower_md", self.kx_lower_md),
            ("kz_ratio", self.kz_ratio),
            ("phi_upper", self.phi_upper),
            ("phi_lower", self.phi_lower),
            ("viscosity_ratio", self.viscosity_ratio),
            ("entry_pressure", self.entry_pressure),
            ("corey_exponent", self.corey_exponent),
            ("krw_end", self.krw_end),
            ("krnw_end", self.krnw_end),
            ("gravity", self.gravity),
            ("gravity_tilt", self.gravity_tilt),
            ("target_cfl", self.target_cfl),
            ("omega", self.omega),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: ReservoirModel,
    pub dt: f64,
    pub omega: f64,
    pub params: ScenarioParams,
}

pub fn sample_params(ranges: &ScenarioRanges, seed: u64) -> ScenarioParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScenarioParams {
        kx_upper_md: ranges.kx_upper_md.log_uniform(&mut rng),
        kx_lower_md: ranges.kx_lower_md.log_uniform(&mut rng),
        kz_ratio: ranges.kz_ratio.log_uniform(&mut rng),
        phi_upper: ranges.phi_upper.uniform(&mut rng),
        phi_lower: ranges.phi_lower.uniform(&mut rng),
        viscosity_ratio: ranges.viscosity_ratio.uniform(&mut rng),
        entry_pressure: ranges.entry_pressure.uniform(&mut rng),
        corey_exponent: ranges.corey_exponent.uniform(&mut rng),
        krw_end: ranges.krw_end.uniform(&mut rng),
        krnw_end: ranges.krnw_end.uniform(&mut rng),
        gravity: ranges.gravity.uniform(&mut rng),
        gravity_tilt: ranges.gravity_tilt.uniform(&mut rng),
        target_cfl: ranges.target_cfl.uniform(&mut rng),
        omega: ranges.omega.uniform(&mut rng),
    }
}

/// Two-layer model carrying the sampled parameters.
pub fn scenario_model(p: &ScenarioParams) -> ReservoirModel {
    let mut m = build_two_layer(
        p.kx_upper_md,
        p.kx_lower_md,
        p.phi_upper,
        p.phi_lower,
        p.kz_ratio,
    );
    m.fluid.mu_nw = m.fluid.mu_w * p.viscosity_ratio;
    m.rock_fluid.pe = p.entry_pressure;
    m.rock_fluid.n_exp = p.corey_exponent;
    m.rock_fluid.krw_end = p.krw_end;
    m.rock_fluid.krnw_end = p.krnw_end;
    m.gravity = if p.gravity_tilt == 0.0 {
        [0.0, 0.0, -p.gravity]
    } else {
        [
            p.gravity * p.gravity_tilt.sin(),
            0.0,
            -p.gravity * p.gravity_tilt.cos(),
        ]
    };
    m
}

/// Step size giving the requested max CFL on the initial pressure field.
pub fn dt_for_cfl(model: &ReservoirModel, target_cfl: f64) -> Result<f64> {
    let disc = Discretization::new(model)?;
    let mut st = SimulationState::initial(model, &disc, 1.0);
    solve_pressure(model, &disc, &mut st, 1e-10)?;
    st.vel = compute_velocities(model, &disc, &st);
    let (_, cfl_per_second) = cfl_field(&disc, &st);
    if !(cfl_per_second > 0.0) {
        return Err(Error::Model(
            "no flow through the model; cannot size the step".into(),
        ));
    }
    Ok(target_cfl / cfl_per_second)
}

/// Deterministic scenario for `seed`.
pub fn sample_scenario(ranges: &ScenarioRanges, seed: u64) -> Result<Scenario> {
    ranges.validate()?;
    let params = sample_params(ranges, seed);
    let model = scenario_model(&params);
    model.validate()?;
    let dt = dt_for_cfl(&model, params.target_cfl)?;
    Ok(Scenario {
        model,
        dt,
        omega: params.omega,
        params,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatagenConfig {
    pub n_sims: usize,
    /// Time steps per scenario run.
    pub n_steps: usize,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        Self {
            n_sims: 200,
            n_steps: 8,
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

/// One dataset row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetRow {
    pub sim_id: usize,
    pub sample: TrainingSample,
}

pub fn dataset_header() -> Vec<String> {
    let mut h = vec!["sim_id".to_string()];
    h.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    h.push("omega".into());
    h.push("inner_iters".into());
    h
}

/// Runs one scenario and returns a row per outer iteration.
pub fn run_scenario(
    sim_id: usize,
    scenario: &Scenario,
    config: &DatagenConfig,
) -> Result<Vec<DatasetRow>> {
    let mut ctl = RelaxationController::fixed(scenario.omega)?;
    let schedule = Schedule {
        max_steps: Some(config.n_steps),
        ..Schedule::fixed(scenario.dt * config.n_steps as f64, scenario.dt)
    };
    let report = run_simulation(&scenario.model, &mut ctl, &schedule, &config.solver)?;
    Ok(report
        .records
        .iter()
        .map(|r| DatasetRow {
            sim_id,
            sample: TrainingSample {
                features: r.features,
                omega: r.omega0,
                inner_iters: r.inner_iters as f64,
            },
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub min: f64,
    pub max: f64,
    /// Ten equal-width bins over `[min, max]`.
    pub histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_sims: usize,
    pub n_rows: usize,
    /// Scenarios whose run raised an error (skipped).
    pub failed: Vec<(usize, String)>,
    pub coverage: BTreeMap<String, Coverage>,
}

pub fn coverage(values: &[f64]) -> Coverage {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut histogram = vec![0; 10];
    for &v in values {
        let b = if max > min {
            (((v - min) / (max - min)) * 10.0).floor() as usize
        } else {
            0
        };
        histogram[b.min(9)] += 1;
    }
    Coverage {
        min,
        max,
        histogram,
    }
}

/// Generates `config.n_sims` scenarios in parallel and writes all rows in
/// scenario order.
pub fn generate_dataset(
    ranges: &ScenarioRanges,
    config: &DatagenConfig,
    out_path: &Path,
) -> Result<DatasetSummary> {
    if config.n_sims == 0 {
        return Err(Error::Config("n_sims must be at least 1".into()));
    }
    ranges.validate()?;
    config.solver.validate()?;
    let results: Vec<(ScenarioParams, Result<Vec<DatasetRow>>)> = (0..config.n_sims)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(config.seed, i as u64);
            let params = sample_params(ranges, seed);
            let rows = sample_scenario(ranges, seed).and_then(|s| run_scenario(i, &s, config));
            (params, rows)
        })
        .collect();

    let mut rows = Vec::new();
    let mut failed = Vec::new();
    let mut params = Vec::new();
    for (i, (p, r)) in results.into_iter().enumerate() {
        params.push(p);
        match r {
            Ok(r) => rows.extend(r),
            Err(e) => failed.push((i, e.to_string())),
        }
    }
    write_dataset(out_path, &rows)?;

    let mut cov = BTreeMap::new();
    for (k, (name, _)) in params[0].named().iter().enumerate() {
        let vals: Vec<f64> = params.iter().map(|p| p.named()[k].1).collect();
        cov.insert(name.to_string(), coverage(&vals));
    }
    Ok(DatasetSummary {
        n_sims: config.n_sims,
        n_rows: rows.len(),
        failed,
        coverage: cov,
    })
}

pub fn write_dataset(path: &Path, rows: &[DatasetRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(dataset_header())?;
    for r in rows {
        let mut rec = vec![r.sim_id.to_string()];
        rec.extend(r.sample.features.0.iter().map(|v| v.to_string()));
        rec.push(r.sample.omega.to_string());
        rec.push(r.sample.inner_iters.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.to_string()).collect();
    if header != dataset_header() {
        return Err(Error::Dataset(format!(
            "{}: header does not match the dataset schema",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|e| {
                Error::Dataset(format!(
                    "{} row {}: column {i}: {e}",
                    path.display(),
                    line + 2
                ))
            })
        };
        let sim_id = rec[0].parse::<usize>().map_err(|e| {
            Error::Dataset(format!("{} row {}: sim_id: {e}", path.display(), line + 2))
        })?;
        let mut f = [0.0; N_FEATURES];
        for (k, v) in f.iter_mut().enumerate() {
            *v = num(1 + k)?;
        }
        let sample = TrainingSample {
            features: FeatureVector(f),
            omega: num(N_FEATURES + 1)?,
            inner_iters: num(N_FEATURES + 2)?,
        };
        if !(sample.omega > 0.0 && sample.omega <= 1.0 && sample.inner_iters >= 1.0)
            || f.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Dataset(format!(
                "{} row {}: not a valid training sample",
                path.display(),
                line + 2
            )));
        }
        rows.push(DatasetRow { sim_id, sample });
    }
    Ok(rows)
}

pub fn samples(rows: &[DatasetRow]) -> Vec<TrainingSample> {
    rows.iter().map(|r| r.sample).collect()
}

/// Partitions rows by simulation: a seeded shuffle of the simulation ids
/// puts `round(fraction · n_sims)` of them (at least one on each side) in
/// the training file. Outputs are `<stem>_train.csv` and `<stem>_test.csv`
/// next to the input.
pub fn split_dataset(path: &Path, fraction: f64, seed: u64) -> Result<(PathBuf, PathBuf)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction {fraction} must lie in (0, 1)"
        )));
    }
    let rows = read_dataset(path)?;
    let (train, test) = split_rows(&rows, fraction, seed)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let train_path = dir.join(format!("{stem}_train.csv"));
    let test_path = dir.join(format!("{stem}_test.csv"));
    write_dataset(&train_path, &train)?;
    write_dataset(&test_path, &test)?;
    Ok((train_path, test_path))
}

pub fn split_rows(
    rows: &[DatasetRow],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<DatasetRow>, Vec<DatasetRow>)> {
    let mut ids: Vec<usize> = rows.iter().map(|r| r.sim_id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::Dataset(format!(
            "need at least 2 simulations to split, found {}",
            ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n_train = ((fraction * ids.len() as f64).round() as usize).clamp(1, ids.len() - 1);
    let train_ids: std::collections::HashSet<usize> = ids[..n_train].iter().copied().collect();
    let (train, test): (Vec<DatasetRow>, Vec<DatasetRow>) =
        rows.iter().partition(|r| train_ids.contains(&r.sim_id));
    Ok((train, test))
}
