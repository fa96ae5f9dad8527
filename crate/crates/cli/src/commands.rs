use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use relaxflow::controller::{calibrate_cfl_dynamic, mean_omega, omega_grid, RelaxationController};
use relaxflow::datagen::{
    generate_dataset, read_dataset, samples, split_dataset, DatagenConfig, DatasetSummary,
    ScenarioRanges,
};
use relaxflow::features::FEATURE_NAMES;
use relaxflow::mlcore::{
    feature_importance, fit_boosted, fit_forest, rmse, EnsembleMode, TrainingSample, TreeEnsemble,
    TreeParams,
};
use relaxflow::model::{build_layered_3d, build_test_case_1, build_test_case_2, ReservoirModel};
use relaxflow::online::{stream_replay, OnlineConfig, OnlineStrategy, DEFAULT_WINDOW};
use relaxflow::solver::{
    run_simulation, write_records_csv, Schedule, SimulationReport, SolverConfig,
};

use crate::error::{CliError, CliResult};
use crate::svg::{line_chart, Series};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a, A: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub args: &'a A,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

fn write_manifest<A: Serialize>(
    dir: &Path,
    command: &str,
    args: &A,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
) -> CliResult<()> {
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        args,
        inputs,
        outputs,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&m)?)?;
    Ok(())
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// ---------------------------------------------------------------- datagen

#[derive(Debug, Clone, Args, Serialize)]
pub struct DatagenArgs {
    /// Number of perturbed scenarios to run.
    #[arg(long, default_value_t = 200)]
    pub sims: usize,
    /// Time steps per scenario.
    #[arg(long, default_value_t = 8)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of simulations placed in the training file.
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    /// TOML file overriding any of the default scenario ranges.
    #[arg(long)]
    pub ranges: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct DatagenOutput {
    pub dataset: PathBuf,
    pub train: PathBuf,
    pub test: PathBuf,
    pub summary: DatasetSummary,
}

/// Default ranges overlaid with the keys present in a TOML file.
pub fn load_ranges(path: &Path) -> CliResult<ScenarioRanges> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let user: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut base = toml::Table::try_from(ScenarioRanges::default())
        .map_err(|e| CliError::Data(e.to_string()))?;
    for (k, v) in user {
        if !base.contains_key(&k) {
            return Err(CliError::Usage(format!(
                "{}: unknown range `{k}`",
                path.display()
            )));
        }
        base.insert(k, v);
    }
    base.try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn cmd_datagen(args: &DatagenArgs) -> CliResult<DatagenOutput> {
    if args.sims == 0 {
        return Err(CliError::Usage("--sims must be at least 1".into()));
    }
    if args.steps == 0 {
        return Err(CliError::Usage("--steps must be at least 1".into()));
    }
    let ranges = match &args.ranges {
        Some(p) => load_ranges(p)?,
        None => ScenarioRanges::default(),
    };
    fs::create_dir_all(&args.out)?;
    let dataset = args.out.join("dataset.csv");
    let config = DatagenConfig {
        n_sims: args.sims,
        n_steps: args.steps,
        seed: args.seed,
        solver: SolverConfig::default(),
    };
    let summary = generate_dataset(&ranges, &config, &dataset)?;
    let (train, test) = split_dataset(&dataset, args.split, args.seed)?;
    let summary_path = args.out.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    let ranges_path = args.out.join("ranges.json");
    fs::write(&ranges_path, serde_json::to_string_pretty(&ranges)?)?;
    write_manifest(
        &args.out,
        "datagen",
        args,
        args.ranges.iter().cloned().collect(),
        vec![
            dataset.clone(),
            train.clone(),
            test.clone(),
            summary_path,
            ranges_path,
        ],
    )?;
    Ok(DatagenOutput {
        dataset,
        train,
        test,
        summary,
    })
}

// ------------------------------------------------------------------ train

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum ModelKind {
    Forest,
    Boosted,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelKind::Forest)]
    pub kind: ModelKind,
    /// Trees (forest) or boosting rounds; default 100 / 300.
    #[arg(long)]
    pub n_trees: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    /// Default 12 (forest) / 4 (boosted).
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub min_leaf: usize,
    /// Fraction of predictors tried per split; default 1/3 (forest) / 1 (boosted).
    #[arg(long)]
    pub max_features: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub kind: ModelKind,
    pub n_train: usize,
    pub n_test: usize,
    pub n_trees: usize,
    pub train_rmse: f64,
    pub test_rmse: f64,
    /// Predictor name and normalized gain importance, in predictor order.
    pub importances: Vec<(String, f64)>,
}

/// The 17 feature names followed by `omega`.
pub fn predictor_names() -> Vec<String> {
    FEATURE_NAMES
        .iter()
        .map(|s| s.to_string())
        .chain(std::iter::once("omega".to_string()))
        .collect()
}

pub fn train_ensemble(
    train: &[TrainingSample],
    kind: ModelKind,
    args: &TrainArgs,
) -> CliResult<TreeEnsemble> {
    let params = TreeParams {
        max_depth: args.max_depth.unwrap_or(match kind {
            ModelKind::Forest => 12,
            ModelKind::Boosted => 4,
        }),
        min_leaf: args.min_leaf,
        max_features: args.max_features.unwrap_or(match kind {
            ModelKind::Forest => 1.0 / 3.0,
            ModelKind::Boosted => 1.0,
        }),
    };
    Ok(match kind {
        ModelKind::Forest => fit_forest(train, args.n_trees.unwrap_or(100), &params, args.seed)?,
        ModelKind::Boosted => fit_boosted(
            train,
            args.n_trees.unwrap_or(300),
            args.learning_rate,
            &params,
            args.seed,
        )?,
    })
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<TrainReport> {
    let train = samples(&read_dataset(&args.train)?);
    let test = samples(&read_dataset(&args.test)?);
    if train.is_empty() {
        return Err(CliError::Data(format!(
            "{} has no rows",
            args.train.display()
        )));
    }
    let ens = train_ensemble(&train, args.kind, args)?;
    let imp = feature_importance(&ens);
    let report = TrainReport {
        kind: args.kind,
        n_train: train.len(),
        n_test: test.len(),
        n_trees: ens.len(),
        train_rmse: rmse(&ens, &train)?,
        test_rmse: if test.is_empty() {
            f64::NAN
        } else {
            rmse(&ens, &test)?
        },
        importances: predictor_names().into_iter().zip(imp).collect(),
    };
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    ens.save(&args.out)?;
    let report_path = args.out.with_extension("report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    let dir = args
        .out
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    write_manifest(
        dir,
        "train",
        args,
        vec![args.train.clone(), args.test.clone()],
        vec![args.out.clone(), report_path],
    )?;
    Ok(report)
}

// --------------------------------------------------------------- simulate

/// Built-in model by case id: 1 and 2 are the two-dimensional test cases,
/// 3 the layered three-dimensional model.
pub fn build_case(case: u32) -> CliResult<ReservoirModel> {
    match case {
        1 => Ok(build_test_case_1()),
        2 => Ok(build_test_case_2()),
        3 => Ok(build_layered_3d()),
        other => Err(CliError::Usage(format!(
            "unknown case id {other} (expected 1, 2 or 3)"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum OnlineKind {
    /// Boosting update for boosted models, bagging update for forests.
    Auto,
    Boosting,
    Bagging,
}

/// Strategy by name: `no-relax`, `fixed` (or `fixed:<ω>`), `cfl-dynamic`,
/// `ml-frozen`, `ml-online`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum StrategySpec {
    NoRelax,
    Fixed(f64),
    CflDynamic(Option<f64>),
    MlFrozen,
    MlOnline(usize),
}

impl StrategySpec {
    pub fn label(&self) -> String {
        match self {
            StrategySpec::NoRelax => "no-relax".into(),
            StrategySpec::Fixed(w) => format!("fixed-{w:.2}"),
            StrategySpec::CflDynamic(_) => "cfl-dynamic".into(),
            StrategySpec::MlFrozen => "ml-frozen".into(),
            StrategySpec::MlOnline(w) => format!("ml-online-w{w}"),
        }
    }

    fn needs_model(&self) -> bool {
        matches!(self, StrategySpec::MlFrozen | StrategySpec::MlOnline(_))
    }

    fn is_seeded(&self) -> bool {
        matches!(self, StrategySpec::MlOnline(_))
    }
}

fn parse_omega(s: &str) -> CliResult<f64> {
    let w: f64 = s
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid omega `{s}`")))?;
    if !(w > 0.0 && w <= 1.0) {
        return Err(CliError::Usage(format!("omega {w} must lie in (0, 1]")));
    }
    Ok(w)
}

/// Expands one strategy token; `fixed-sweep` yields the 19 grid values.
pub fn parse_strategies(
    token: &str,
    omega: f64,
    cfl_a: Option<f64>,
    windows: &[usize],
) -> CliResult<Vec<StrategySpec>> {
    let t = token.trim();
    if let Some(w) = t.strip_prefix("fixed:") {
        return Ok(vec![StrategySpec::Fixed(parse_omega(w)?)]);
    }
    Ok(match t {
        "no-relax" => vec![StrategySpec::NoRelax],
        "fixed" => vec![StrategySpec::Fixed(parse_omega(&omega.to_string())?)],
        "fixed-sweep" => omega_grid().into_iter().map(StrategySpec::Fixed).collect(),
        "cfl-dynamic" => vec![StrategySpec::CflDynamic(cfl_a)],
        "ml-frozen" => vec![StrategySpec::MlFrozen],
        "ml-online" => {
            if windows.is_empty() || windows.contains(&0) {
                return Err(CliError::Usage("buffer sizes W must be at least 1".into()));
            }
            windows.iter().map(|&w| StrategySpec::MlOnline(w)).collect()
        }
        other => return Err(CliError::Usage(format!("unknown strategy `{other}`"))),
    })
}

fn load_model(path: Option<&Path>) -> CliResult<TreeEnsemble> {
    let path = path.ok_or_else(|| CliError::Usage("ml strategies need --model".into()))?;
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "model file {} not found",
            path.display()
        )));
    }
    Ok(TreeEnsemble::load(path)?)
}

fn online_config(ens: &TreeEnsemble, kind: OnlineKind, window: usize, seed: u64) -> OnlineConfig {
    let strategy = match kind {
        OnlineKind::Boosting => OnlineStrategy::Boosting,
        OnlineKind::Bagging => OnlineStrategy::Bagging,
        OnlineKind::Auto => match ens.mode {
            EnsembleMode::Boosted => OnlineStrategy::Boosting,
            EnsembleMode::Bagging => OnlineStrategy::Bagging,
        },
    };
    OnlineConfig {
        seed,
        ..OnlineConfig::new(strategy, window)
    }
}

/// Default `a` when cfl-dynamic runs without calibration.
pub const DEFAULT_CFL_A: f64 = 0.1;
pub const DEFAULT_CFL_OMEGA_MIN: f64 = 0.1;

pub fn make_controller(
    spec: &StrategySpec,
    model: Option<&TreeEnsemble>,
    online: OnlineKind,
    seed: u64,
) -> CliResult<RelaxationController> {
    Ok(match spec {
        StrategySpec::NoRelax => RelaxationController::no_relaxation(),
        StrategySpec::Fixed(w) => RelaxationController::fixed(*w)?,
        StrategySpec::CflDynamic(a) => {
            RelaxationController::cfl_dynamic(a.unwrap_or(DEFAULT_CFL_A), DEFAULT_CFL_OMEGA_MIN)?
        }
        StrategySpec::MlFrozen => RelaxationController::ml(
            model
                .ok_or_else(|| CliError::Usage("ml-frozen needs --model".into()))?
                .clone(),
            None,
        )?,
        StrategySpec::MlOnline(w) => {
            let ens = model.ok_or_else(|| CliError::Usage("ml-online needs --model".into()))?;
            let cfg = online_config(ens, online, *w, seed);
            RelaxationController::ml(ens.clone(), Some(cfg))?
        }
    })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    pub case: u32,
    #[arg(long, default_value = "no-relax")]
    pub strategy: String,
    /// Relaxation factor for `--strategy fixed`.
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    /// Constant of the cfl-dynamic rule.
    #[arg(long)]
    pub cfl_a: Option<f64>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Online buffer size W.
    #[arg(long = "window", visible_alias = "W", default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    #[arg(long, value_enum, default_value_t = OnlineKind::Auto)]
    pub online: OnlineKind,
    /// Pore volumes injected.
    #[arg(long, default_value_t = 0.5)]
    pub pvi: f64,
    /// Nominal number of time steps.
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn case_schedule(model: &ReservoirModel, pvi: f64, steps: usize) -> CliResult<Schedule> {
    if !(pvi > 0.0) || steps == 0 {
        return Err(CliError::Usage(
            "--pvi must be positive and --steps at least 1".into(),
        ));
    }
    Ok(Schedule::pore_volumes(model, pvi, steps)?)
}

fn write_curve(path: &Path, report: &SimulationReport) -> CliResult<()> {
    let mut s = String::from("step,t_end,cumulative_outer,cumulative_inner,cumulative_metric\n");
    for st in &report.steps {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            st.index, st.t_end, st.cumulative_outer, st.cumulative_inner, st.cumulative_metric
        ));
    }
    fs::write(path, s)?;
    Ok(())
}

fn write_trace(path: &Path, report: &SimulationReport) -> CliResult<()> {
    let mut s = String::from("iteration,step,outer,omega0,inner_iters,update_index\n");
    for (i, r) in report.records.iter().enumerate() {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            i + 1,
            r.step,
            r.outer,
            r.omega0,
            r.inner_iters,
            r.update.map(|u| u.index.to_string()).unwrap_or_default()
        ));
    }
    fs::write(path, s)?;
    Ok(())
}

fn write_run_outputs(
    dir: &Path,
    label: &str,
    report: &SimulationReport,
) -> CliResult<Vec<PathBuf>> {
    for sub in ["curves", "traces", "iterations"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    let curve = dir.join("curves").join(format!("{label}.csv"));
    let trace = dir.join("traces").join(format!("{label}.csv"));
    let iters = dir.join("iterations").join(format!("{label}.csv"));
    write_curve(&curve, report)?;
    write_trace(&trace, report)?;
    write_records_csv(&report.records, fs::File::create(&iters)?)?;
    Ok(vec![curve, trace, iters])
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<SimulationReport> {
    let model = build_case(args.case)?;
    let specs = parse_strategies(&args.strategy, args.omega, args.cfl_a, &[args.window])?;
    let spec = match specs.as_slice() {
        [s] => s.clone(),
        _ => return Err(CliError::Usage("simulate runs exactly one strategy".into())),
    };
    let ens = if spec.needs_model() {
        Some(load_model(args.model.as_deref())?)
    } else {
        None
    };
    let schedule = case_schedule(&model, args.pvi, args.steps)?;
    let mut ctl = make_controller(&spec, ens.as_ref(), args.online, args.seed)?;
    let report = run_simulation(&model, &mut ctl, &schedule, &SolverConfig::default())?;
    fs::create_dir_all(&args.out)?;
    let report_path = args.out.join("report.json");
    report.save_json(&report_path)?;
    let mut outputs = vec![report_path];
    outputs.extend(write_run_outputs(&args.out, &spec.label(), &report)?);
    write_manifest(
        &args.out,
        "simulate",
        args,
        args.model.iter().cloned().collect(),
        outputs,
    )?;
    Ok(report)
}

// ------------------------------------------------------------------ bench

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 1)]
    pub case: u32,
    /// Comma-separated strategy tokens: no-relax, fixed:<ω>, fixed-sweep,
    /// cfl-dynamic, ml-frozen, ml-online.
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Set,
          default_value = "no-relax,fixed-sweep,cfl-dynamic,ml-frozen,ml-online")]
    pub strategies: Vec<String>,
    /// Buffer sizes for ml-online.
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Set, default_value = "50")]
    pub windows: Vec<usize>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Label of the strategy improvements are measured against.
    #[arg(long, default_value = "no-relax")]
    pub baseline: String,
    /// cfl-dynamic constant; calibrated against the best fixed ω when unset
    /// and a sweep is part of the bench.
    #[arg(long)]
    pub cfl_a: Option<f64>,
    #[arg(long, value_enum, default_value_t = OnlineKind::Auto)]
    pub online: OnlineKind,
    #[arg(long, default_value_t = 0.5)]
    pub pvi: f64,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    /// Seeds for the seeded (online) strategies; results are medians.
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Set, default_value = "0")]
    pub seeds: Vec<u64>,
    /// Run strategies concurrently; wall times are then not reported.
    #[arg(long)]
    pub parallel: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub strategy: String,
    /// Median total-iteration metric over seeds.
    pub metric: f64,
    pub outer: usize,
    pub inner: usize,
    /// `(baseline − strategy) / baseline`.
    pub improvement: Option<f64>,
    pub wall_time_s: Option<f64>,
    pub all_converged: bool,
    pub mean_omega: f64,
    pub n_updates: usize,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub case: u32,
    pub baseline: String,
    pub rows: Vec<BenchRow>,
    /// Best fixed ω of the sweep, if one ran.
    pub best_fixed: Option<(f64, f64)>,
    /// cfl-dynamic constant used and its mean ω.
    pub cfl_dynamic: Option<(f64, f64)>,
}

impl BenchResult {
    pub fn row(&self, label: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.strategy == label)
    }
}

struct RunOutcome {
    metric: f64,
    report: SimulationReport,
}

fn failure_row(label: String, msg: String) -> BenchRow {
    BenchRow {
        strategy: label,
        metric: f64::NAN,
        outer: 0,
        inner: 0,
        improvement: None,
        wall_time_s: None,
        all_converged: false,
        mean_omega: f64::NAN,
        n_updates: 0,
        status: format!("failed: {msg}"),
    }
}

fn run_seeds(
    spec: &StrategySpec,
    model: &ReservoirModel,
    schedule: &Schedule,
    ens: Option<&TreeEnsemble>,
    args: &BenchArgs,
) -> CliResult<Vec<RunOutcome>> {
    let seeds: Vec<u64> = if spec.is_seeded() {
        args.seeds.clone()
    } else {
        vec![args.seeds[0]]
    };
    seeds
        .iter()
        .map(|&seed| {
            let mut ctl = make_controller(spec, ens, args.online, seed)?;
            let report = run_simulation(model, &mut ctl, schedule, &SolverConfig::default())?;
            Ok(RunOutcome {
                metric: report.total_metric,
                report,
            })
        })
        .collect()
}

fn summarize(label: String, runs: &[RunOutcome], timed: bool) -> BenchRow {
    let mut metrics: Vec<f64> = runs.iter().map(|r| r.metric).collect();
    let med = median(&mut metrics);
    // Representative run: the one whose metric is closest to the median.
    let rep = runs
        .iter()
        .min_by(|a, b| (a.metric - med).abs().total_cmp(&(b.metric - med).abs()))
        .expect("at least one run");
    let mut walls: Vec<f64> = runs.iter().map(|r| r.report.wall_time_s).collect();
    BenchRow {
        strategy: label,
        metric: med,
        outer: rep.report.total_outer,
        inner: rep.report.total_inner,
        improvement: None,
        wall_time_s: timed.then(|| median(&mut walls)),
        all_converged: runs.iter().all(|r| r.report.all_converged),
        mean_omega: mean_omega(&rep.report),
        n_updates: rep.report.n_updates,
        status: "ok".into(),
    }
}

/// Prequential RMSE of the frozen and online surrogates on the stream a run
/// produced, in windows of the run's buffer size.
fn online_rmse_csv(
    path: &Path,
    report: &SimulationReport,
    ens: &TreeEnsemble,
    cfg: &OnlineConfig,
) -> CliResult<()> {
    let stream: Vec<TrainingSample> = report
        .records
        .iter()
        .map(|r| TrainingSample {
            features: r.features,
            omega: r.omega0,
            inner_iters: r.inner_iters as f64,
        })
        .collect();
    if stream.is_empty() {
        return Ok(());
    }
    let online = stream_replay(&stream, ens, cfg, cfg.window)?;
    let frozen = stream_replay(&stream, ens, &OnlineConfig::frozen(), cfg.window)?;
    let mut s = String::from("window_end,rmse_frozen,rmse_online\n");
    for i in 0..online.window_rmse.len() {
        s.push_str(&format!(
            "{},{},{}\n",
            online.window_end[i], frozen.window_rmse[i], online.window_rmse[i]
        ));
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> CliResult<BenchResult> {
    let model = build_case(args.case)?;
    if args.seeds.is_empty() {
        return Err(CliError::Usage("at least one seed is required".into()));
    }
    let mut specs = Vec::new();
    for t in &args.strategies {
        specs.extend(parse_strategies(t, 1.0, args.cfl_a, &args.windows)?);
    }
    let mut seen = std::collections::HashSet::new();
    specs.retain(|s| seen.insert(s.label()));
    if specs.len() < 2 {
        return Err(CliError::Usage(
            "a bench needs at least 2 strategies".into(),
        ));
    }
    if !specs.iter().any(|s| s.label() == args.baseline) {
        return Err(CliError::Usage(format!(
            "baseline `{}` is not among the strategies",
            args.baseline
        )));
    }
    let ens = if specs.iter().any(StrategySpec::needs_model) {
        Some(load_model(args.model.as_deref())?)
    } else {
        None
    };
    let schedule = case_schedule(&model, args.pvi, args.steps)?;
    fs::create_dir_all(&args.out)?;

    // Fixed sweep and other strategies first so cfl-dynamic can be calibrated.
    let (dynamic, rest): (Vec<StrategySpec>, Vec<StrategySpec>) = specs
        .iter()
        .cloned()
        .partition(|s| matches!(s, StrategySpec::CflDynamic(None)));
    let run_one = |spec: &StrategySpec| -> (String, CliResult<Vec<RunOutcome>>) {
        (
            spec.label(),
            run_seeds(spec, &model, &schedule, ens.as_ref(), args),
        )
    };
    let mut results: Vec<(String, CliResult<Vec<RunOutcome>>)> = if args.parallel {
        rest.par_iter().map(run_one).collect()
    } else {
        rest.iter().map(run_one).collect()
    };

    let best_fixed = results
        .iter()
        .filter(|(l, _)| l.starts_with("fixed-"))
        .filter_map(|(l, r)| {
            let r = r.as_ref().ok()?;
            let w: f64 = l.trim_start_matches("fixed-").parse().ok()?;
            Some((w, r[0].metric))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1).then(b.0.total_cmp(&a.0)));

    let mut cfl_dynamic = None;
    for spec in &dynamic {
        let calibrated = match best_fixed {
            Some((w, _)) => calibrate_cfl_dynamic(
                &model,
                &schedule,
                &SolverConfig::default(),
                w,
                DEFAULT_CFL_OMEGA_MIN,
            )
            .map(|(a, _)| a)
            .map_err(CliError::from),
            None => Ok(DEFAULT_CFL_A),
        };
        let out = calibrated.and_then(|a| {
            let runs = run_seeds(
                &StrategySpec::CflDynamic(Some(a)),
                &model,
                &schedule,
                None,
                args,
            )?;
            cfl_dynamic = Some((a, mean_omega(&runs[0].report)));
            Ok(runs)
        });
        results.push((spec.label(), out));
    }
    if let Some(spec) = specs
        .iter()
        .find(|s| matches!(s, StrategySpec::CflDynamic(Some(_))))
    {
        if let Some((_, Ok(runs))) = results.iter().find(|(l, _)| *l == spec.label()) {
            if let StrategySpec::CflDynamic(Some(a)) = spec {
                cfl_dynamic = Some((*a, mean_omega(&runs[0].report)));
            }
        }
    }

    // Restore the requested order.
    let order: BTreeMap<String, usize> = specs
        .iter()
        .enumerate()
        .map(|(i, s)| (s.label(), i))
        .collect();
    results.sort_by_key(|(l, _)| order[l]);

    let mut rows = Vec::new();
    let mut outputs = Vec::new();
    fs::create_dir_all(args.out.join("rmse"))?;
    for (label, res) in &results {
        match res {
            Ok(runs) => {
                rows.push(summarize(label.clone(), runs, !args.parallel));
                outputs.extend(write_run_outputs(&args.out, label, &runs[0].report)?);
                if let (Some(StrategySpec::MlOnline(w)), Some(e)) =
                    (specs.iter().find(|s| s.label() == *label), ens.as_ref())
                {
                    let cfg = online_config(e, args.online, *w, args.seeds[0]);
                    let p = args.out.join("rmse").join(format!("{label}.csv"));
                    online_rmse_csv(&p, &runs[0].report, e, &cfg)?;
                    outputs.push(p);
                }
            }
            Err(e) => rows.push(failure_row(label.clone(), e.to_string())),
        }
    }
    let base = rows
        .iter()
        .find(|r| r.strategy == args.baseline && r.status == "ok")
        .map(|r| r.metric);
    for r in rows.iter_mut() {
        r.improvement = base
            .filter(|_| r.status == "ok")
            .map(|b| (b - r.metric) / b);
    }

    let result = BenchResult {
        case: args.case,
        baseline: args.baseline.clone(),
        rows,
        best_fixed,
        cfl_dynamic,
    };
    let table = args.out.join("bench_table.csv");
    fs::write(&table, bench_table_csv(&result))?;
    let json = args.out.join("bench.json");
    fs::write(&json, serde_json::to_string_pretty(&result)?)?;
    outputs.push(table);
    outputs.push(json);
    write_manifest(
        &args.out,
        "bench",
        args,
        args.model.iter().cloned().collect(),
        outputs,
    )?;
    Ok(result)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn bench_table_csv(result: &BenchResult) -> String {
    let mut s = String::from(
        "strategy,metric,outer,inner,improvement_pct,wall_time_s,all_converged,mean_omega,n_updates,status\n",
    );
    for r in &result.rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},\"{}\"\n",
            r.strategy,
            r.metric,
            r.outer,
            r.inner,
            fmt_opt(r.improvement.map(|x| 100.0 * x)),
            fmt_opt(r.wall_time_s),
            r.all_converged,
            r.mean_omega,
            r.n_updates,
            r.status.replace('"', "'")
        ));
    }
    s
}

/// Plain-text comparison table.
pub fn format_bench_table(result: &BenchResult) -> String {
    let mut s = format!(
        "{:<18} {:>10} {:>7} {:>7} {:>9} {:>9}  {}\n",
        "strategy", "metric", "outer", "inner", "improv%", "wall[s]", "status"
    );
    for r in &result.rows {
        s.push_str(&format!(
            "{:<18} {:>10.1} {:>7} {:>7} {:>9} {:>9}  {}\n",
            r.strategy,
            r.metric,
            r.outer,
            r.inner,
            r.improvement
                .map(|x| format!("{:.1}", 100.0 * x))
                .unwrap_or_else(|| "-".into()),
            r.wall_time_s
                .map(|x| format!("{x:.2}"))
                .unwrap_or_else(|| "-".into()),
            r.status
        ));
    }
    s
}

// ----------------------------------------------------------------- report

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// Directory written by `bench` or `simulate`.
    pub bench_dir: PathBuf,
    /// Where SVGs go; defaults to `<bench_dir>/plots`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read_numeric_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::Data(format!("{} is empty", path.display())))?
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let rows = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|v| v.parse::<f64>().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    Ok((header, rows))
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> CliResult<Vec<f64>> {
    let i = header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Data(format!("missing column `{name}`")))?;
    Ok(rows
        .iter()
        .map(|r| r.get(i).copied().unwrap_or(f64::NAN))
        .collect())
}

/// Chart specification per output subdirectory: x column, y columns, labels.
const CHARTS: [(&str, &str, &[&str], &str, &str); 3] = [
    (
        "curves",
        "step",
        &["cumulative_metric"],
        "time step",
        "cumulative outer + inner/3",
    ),
    (
        "traces",
        "iteration",
        &["omega0"],
        "outer iteration",
        "relaxation factor",
    ),
    (
        "rmse",
        "window_end",
        &["rmse_frozen", "rmse_online"],
        "stream position",
        "windowed RMSE",
    ),
];

pub fn cmd_report(args: &ReportArgs) -> CliResult<Vec<PathBuf>> {
    if !args.bench_dir.is_dir() {
        return Err(CliError::Usage(format!(
            "{} is not a directory",
            args.bench_dir.display()
        )));
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.bench_dir.join("plots"));
    let mut written = Vec::new();
    for (sub, x, ys, xl, yl) in CHARTS {
        let dir = args.bench_dir.join(sub);
        if !dir.is_dir() {
            continue;
        }
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        files.sort();
        for f in files {
            let (header, rows) = read_numeric_csv(&f)?;
            let xs = column(&header, &rows, x)?;
            let mut series = Vec::new();
            for y in ys {
                let yv = column(&header, &rows, y)?;
                series.push(Series {
                    name: y.to_string(),
                    points: xs.iter().copied().zip(yv).collect(),
                });
            }
            let stem = f
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            let svg = line_chart(&format!("{sub}: {stem}"), xl, yl, &series);
            fs::create_dir_all(&out)?;
            let p = out.join(format!("{sub}_{stem}.svg"));
            fs::write(&p, svg)?;
            written.push(p);
        }
    }
    if written.is_empty() {
        return Err(CliError::Data(format!(
            "nothing to report in {}",
            args.bench_dir.display()
        )));
    }
    Ok(written)
}
