//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! hard failure. Run with `cargo test -p relaxflow-cli --test acceptance`.

use std::path::Path;
use std::time::{Duration, Instant};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relaxflow::controller::{omega_grid, RelaxationController};
use relaxflow::features::{extract, FeatureContext, FeatureVector, FEATURE_NAMES, N_FEATURES};
use relaxflow::mlcore::{
    fit_boosted, fit_forest, fit_tree, predictor_row, TrainingSample, TreeEnsemble, TreeParams,
    N_PREDICTORS,
};
use relaxflow::model::{build_grid, build_test_case_1, ReservoirModel};
use relaxflow::online::{stream_replay, OnlineConfig, OnlineStrategy};
use relaxflow::rockfluid::fractional_flow;
use relaxflow::solver::{
    apply_relaxation, compute_velocities, run_simulation, solve_pressure, Discretization, Schedule,
    SimulationReport, SimulationState, SolverConfig,
};
use relaxflow_cli::commands::{cmd_datagen, cmd_train, TrainReport};
use relaxflow_cli::{Cli, Command};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Comma-separated criterion ids from `ACCEPTANCE_ONLY`; all when unset.
fn selected(id: &str) -> bool {
    match std::env::var("ACCEPTANCE_ONLY") {
        Ok(v) => v.split(',').any(|x| x.trim() == id),
        Err(_) => true,
    }
}

/// Runs one criterion and checks its wall-time budget.
fn criterion(
    id: &str,
    name: &str,
    budget: Duration,
    hard: bool,
    failures: &mut Vec<String>,
    f: impl FnOnce() -> Verdict,
) {
    if !selected(id) {
        return;
    }
    let t = Instant::now();
    let v = f();
    let elapsed = t.elapsed();
    let in_time = elapsed <= budget;
    let pass = v.pass && in_time;
    let tag = match (pass, hard) {
        (true, _) => "PASS",
        (false, true) => "FAIL",
        (false, false) => "WARN",
    };
    let timing = if in_time {
        format!("{:.1}s", elapsed.as_secs_f64())
    } else {
        format!(
            "{:.1}s exceeds {:.0}s budget",
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        )
    };
    println!("{tag} [{id}] {name}: {} ({timing})", v.detail);
    if !pass && hard {
        failures.push(id.to_string());
    }
}

fn tc1_default_schedule(m: &ReservoirModel) -> Schedule {
    Schedule::pore_volumes(m, 0.5, 50).unwrap()
}

fn run(m: &ReservoirModel, ctl: &mut RelaxationController, sch: &Schedule) -> SimulationReport {
    run_simulation(m, ctl, sch, &SolverConfig::default()).unwrap()
}

// ------------------------------------------------------------- relaxation

fn relaxation_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let beta = 0.4;
    let n = 64;
    let vecs =
        |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.gen_range(0.0..1.0)).collect() };
    let (st, s1, s2) = (vecs(&mut rng), vecs(&mut rng), vecs(&mut rng));
    let unit = apply_relaxation(&st, &s1, &s2, 1.0, beta) == st;
    let zero = apply_relaxation(&st, &s1, &s2, 0.0, beta) == s1;

    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let w: f64 = rng.gen_range(1e-6..=1.0);
        let (a, b, c): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
        let got = apply_relaxation(&[a], &[b], &[c], w, beta)[0];
        let direct =
            (w * a + (1.0 - w) * b + (1.0 - w).powf(beta + 1.0) * w * (c - b)).clamp(0.0, 1.0);
        let rel = (got - direct).abs() / direct.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }
    Verdict::new(
        unit && zero && worst <= 1e-14,
        format!("omega=1 identity {unit}, omega=0 identity {zero}, max rel. error {worst:.1e} over 1000 tuples"),
    )
}

// ------------------------------------------------------------ convergence

fn convergence_fidelity() -> Verdict {
    let m = build_test_case_1();
    let cfg = SolverConfig::default();
    let r = run(
        &m,
        &mut RelaxationController::no_relaxation(),
        &tc1_default_schedule(&m),
    );
    let mut bad = 0;
    let mut worst_mass = 0.0f64;
    let mut worst_ds = 0.0f64;
    for s in &r.steps {
        let last = r
            .records
            .iter()
            .rfind(|x| x.step == s.index)
            .expect("every step has records");
        worst_mass = worst_mass.max(last.mass_error);
        worst_ds = worst_ds.max(last.dsat);
        if !(s.converged && last.mass_error < 1e-3 && last.dsat < 1e-2) {
            bad += 1;
        }
    }
    let max_outer = r.steps.iter().map(|s| s.outer).max().unwrap_or(0);
    let max_inner = r.records.iter().map(|x| x.inner_iters).max().unwrap_or(0);
    let caps = max_outer <= cfg.max_outer && max_inner <= cfg.max_inner;
    Verdict::new(
        bad == 0 && caps && !r.steps.is_empty(),
        format!(
            "{} steps, {bad} violating; max mass error {worst_mass:.1e}, max dS {worst_ds:.1e}; max outer {max_outer}/30, max inner {max_inner}/10",
            r.steps.len()
        ),
    )
}

// ------------------------------------------------------- Buckley-Leverett

fn buckley_leverett() -> Verdict {
    let n = 200;
    let mut m = build_grid(n, 1, 1, 1.0, 1.0, 1.0).unwrap();
    m.gravity = [0.0; 3];
    m.rock_fluid.pe = 0.0;

    // Welge tangent from a dense secant sweep of the fractional-flow curve.
    let p = m.rock_fluid;
    let (lo, hi) = (p.swi, 1.0 - p.snwi);
    let f0 = fractional_flow(lo, &p, &m.fluid);
    let sweep = 200_000;
    let (s_star, slope) = (1..=sweep)
        .map(|i| {
            let s = lo + (hi - lo) * i as f64 / sweep as f64;
            (s, (fractional_flow(s, &p, &m.fluid) - f0) / (s - lo))
        })
        .fold((lo, 0.0), |b, c| if c.1 > b.1 { c } else { b });

    let sch = Schedule::pore_volumes(&m, 0.6 / slope, 200).unwrap();
    let r = run(&m, &mut RelaxationController::no_relaxation(), &sch);
    let exact = slope * m.injection_rate() * r.final_time / (m.phi[0] * m.inflow_area());
    let level = 0.5 * (lo + s_star);
    let sw = &r.final_sw;
    let x = (1..n)
        .find(|&i| sw[i] < level)
        .map(|i| i as f64 - 0.5 + (sw[i - 1] - level) / (sw[i - 1] - sw[i]))
        .unwrap_or(n as f64);
    let err = (x - exact).abs() / exact;
    Verdict::new(
        err < 0.05,
        format!(
            "front at {x:.2} m, analytic {exact:.2} m, error {:.2}%",
            100.0 * err
        ),
    )
}

// ---------------------------------------------------------------- ML oracle

fn random_samples(rng: &mut ChaCha8Rng, n: usize) -> Vec<TrainingSample> {
    (0..n)
        .map(|_| {
            let mut f = [0.0; N_FEATURES];
            for v in f.iter_mut() {
                // Coarse values so that duplicates occur.
                *v = (rng.gen_range(0.0..1.0f64) * 8.0).round() / 8.0;
            }
            TrainingSample {
                features: FeatureVector(f),
                omega: (rng.gen_range(0.1..1.0f64) * 20.0).round() / 20.0,
                inner_iters: rng.gen_range(1.0..10.0),
            }
        })
        .collect()
}

/// Exhaustive best root split by explicit SSE reduction. Ties go to the lowest
/// predictor, then the lowest threshold.
fn brute_force_root(samples: &[TrainingSample]) -> Option<(usize, f64)> {
    let rows: Vec<[f64; N_PREDICTORS]> = samples.iter().map(|s| s.predictors()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.inner_iters).collect();
    let sse = |idx: &[usize]| -> f64 {
        let m = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
        idx.iter().map(|&i| (y[i] - m).powi(2)).sum()
    };
    let all: Vec<usize> = (0..y.len()).collect();
    let parent = sse(&all);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..N_PREDICTORS {
        let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| rows[i][f] <= t);
            let gain = parent - sse(&l) - sse(&r);
            let better = match best {
                None => gain > 1e-12,
                Some((_, _, g)) => gain > g * (1.0 + 1e-9) + 1e-12,
            };
            if better {
                best = Some((f, t, gain));
            }
        }
    }
    best.map(|(f, t, _)| (f, t))
}

fn ml_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let params = TreeParams {
        max_depth: 1,
        min_leaf: 1,
        max_features: 1.0,
    };
    let mut split_mismatch = 0;
    for d in 0..50 {
        let n = rng.gen_range(2..=12);
        let samples = random_samples(&mut rng, n);
        let tree = fit_tree(&samples, &params, d).unwrap();
        let root = tree.nodes[0];
        let got = (!root.is_leaf()).then_some((root.feature as usize, root.threshold));
        if got != brute_force_root(&samples) {
            split_mismatch += 1;
        }
    }

    let train = random_samples(&mut rng, 300);
    let tp = TreeParams::default();
    let forest = fit_forest(&train, 15, &tp, 5).unwrap();
    let boosted = fit_boosted(&train, 15, 0.1, &tp, 5).unwrap();
    let probe = random_samples(&mut rng, 200);
    let mut agg_ok = true;
    for s in &probe {
        let x = predictor_row(&s.features, s.omega);
        let mean = forest.trees.iter().map(|t| t.predict(&x)).sum::<f64>() / forest.len() as f64;
        let sum = boosted.base_value
            + boosted
                .trees
                .iter()
                .zip(&boosted.weights)
                .map(|(t, w)| w * t.predict(&x))
                .sum::<f64>();
        agg_ok &= forest.predict(&s.features, s.omega) == mean;
        agg_ok &= boosted.predict(&s.features, s.omega) == sum;
    }

    let dir = tempfile::tempdir().unwrap();
    let mut roundtrip = true;
    for (name, e) in [("forest", &forest), ("boosted", &boosted)] {
        let path = dir.path().join(format!("{name}.json"));
        e.save(&path).unwrap();
        let back = TreeEnsemble::load(&path).unwrap();
        roundtrip &= probe
            .iter()
            .all(|s| back.predict(&s.features, s.omega) == e.predict(&s.features, s.omega));
    }
    Verdict::new(
        split_mismatch == 0 && agg_ok && roundtrip,
        format!(
            "root split mismatches {split_mismatch}/50; aggregation identities exact: {agg_ok}; save/load identical: {roundtrip}"
        ),
    )
}

// ------------------------------------------------------------------ online

/// Synthetic stream over uniform features with
/// `y = 3.5 + 3·f[max_cfl] + 1.5·f[residual_ratio] − 2·ω + shift + U(−0.5, 0.5)`.
/// The label falls with `ω`, so a surrogate trained on it picks large factors.
fn synthetic_stream(n: usize, seed: u64, shift: impl Fn(usize) -> f64) -> Vec<TrainingSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut f = [0.0; N_FEATURES];
            for v in f.iter_mut() {
                *v = rng.gen_range(0.0..1.0);
            }
            let omega = rng.gen_range(0.1..1.0);
            let noise = rng.gen_range(-0.5..0.5);
            TrainingSample {
                features: FeatureVector(f),
                omega,
                inner_iters: 3.5 + 3.0 * f[3] + 1.5 * f[15] - 2.0 * omega + shift(i) + noise,
            }
        })
        .collect()
}

fn online_mechanics() -> Verdict {
    let train = synthetic_stream(400, 31, |_| 0.0);
    let p = TreeParams::default();
    let forest = fit_forest(&train, 20, &p, 1).unwrap();
    let boosted = fit_boosted(&train, 30, 0.2, &TreeParams { max_depth: 4, ..p }, 1).unwrap();
    let m = build_test_case_1();
    let sch = tc1_default_schedule(&m);
    let mut ok = true;
    let mut notes = Vec::new();
    for (ens, strategy, per_update) in [
        (&boosted, OnlineStrategy::Boosting, 1),
        (&forest, OnlineStrategy::Bagging, 70),
    ] {
        let mut ctl =
            RelaxationController::ml(ens.clone(), Some(OnlineConfig::new(strategy, 50))).unwrap();
        let r = run(&m, &mut ctl, &sch);
        let n = r.records.len();
        let fired: Vec<usize> = r
            .records
            .iter()
            .enumerate()
            .filter(|(_, x)| x.update.is_some())
            .map(|(i, _)| i + 1)
            .collect();
        let cadence = fired.iter().enumerate().all(|(k, &i)| i == 50 * (k + 1));
        let count = fired.len() == n / 50 && r.n_updates == n / 50;
        let grown = ctl.ensemble().unwrap().len() == ens.len() + per_update * fired.len();
        ok &= cadence && count && grown && !fired.is_empty();
        notes.push(format!(
            "{strategy:?}: {n} outcomes, {} updates, +{} trees",
            fired.len(),
            ctl.ensemble().unwrap().len() - ens.len()
        ));
    }
    let a = run(
        &m,
        &mut RelaxationController::ml(forest.clone(), None).unwrap(),
        &sch,
    );
    let b = run(
        &m,
        &mut RelaxationController::ml(forest.clone(), Some(OnlineConfig::frozen())).unwrap(),
        &sch,
    );
    let frozen_same = a.records == b.records && a.final_sw == b.final_sw && a.final_p == b.final_p;
    ok &= frozen_same;
    notes.push(format!("frozen bit-identical: {frozen_same}"));
    Verdict::new(ok, notes.join("; "))
}

fn mean_after(traj: &relaxflow::online::StreamTrajectory, start: usize) -> f64 {
    let v: Vec<f64> = traj
        .window_end
        .iter()
        .zip(&traj.window_rmse)
        .filter(|(e, _)| **e > start)
        .map(|(_, r)| *r)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Both ensemble/strategy pairings must beat frozen on drift and stay within
/// 5% of it on the stationary stream.
fn online_direction() -> Verdict {
    let train = synthetic_stream(2000, 41, |_| 0.0);
    let forest = fit_forest(
        &train,
        100,
        &TreeParams {
            max_features: 1.0 / 3.0,
            ..TreeParams::default()
        },
        2,
    )
    .unwrap();
    let boosted = fit_boosted(
        &train,
        100,
        0.1,
        &TreeParams {
            max_depth: 4,
            ..TreeParams::default()
        },
        2,
    )
    .unwrap();
    let n = 600;
    let drift = synthetic_stream(n, 42, |_| 2.0);
    let stationary = synthetic_stream(n, 43, |_| 0.0);
    let mut ok = true;
    let mut notes = Vec::new();
    for (ens, strategy) in [
        (&forest, OnlineStrategy::Bagging),
        (&boosted, OnlineStrategy::Boosting),
    ] {
        let cfg = OnlineConfig::new(strategy, 50);
        let mut out = Vec::new();
        for s in [&drift, &stationary] {
            let online = stream_replay(s, ens, &cfg, 50).unwrap();
            let frozen = stream_replay(s, ens, &OnlineConfig::frozen(), 50).unwrap();
            let second = online.update_at[1];
            out.push((mean_after(&online, second), mean_after(&frozen, second)));
        }
        let (d_on, d_fr) = out[0];
        let (s_on, s_fr) = out[1];
        ok &= d_on < d_fr && s_on <= 1.05 * s_fr;
        notes.push(format!(
            "{strategy:?}: drift RMSE online {d_on:.3} vs frozen {d_fr:.3}, stationary {s_on:.3} vs {s_fr:.3} (ratio {:.3})",
            s_on / s_fr
        ));
    }
    Verdict::new(ok, notes.join("; "))
}

// --------------------------------------------------------------- features

fn feature_contract() -> Verdict {
    const EXPECTED: [&str; 17] = [
        "effective_aspect_ratio",
        "avg_darcy_velocity",
        "avg_total_mobility",
        "max_cfl",
        "max_shock_front_cfl",
        "shock_front_number_ratio",
        "avg_shock_front_mobility_ratio",
        "avg_long_capillary",
        "avg_trans_capillary",
        "avg_buoyancy",
        "avg_long_buoyancy",
        "avg_trans_buoyancy",
        "avg_artificial_diffusion",
        "residual",
        "residual_old",
        "residual_ratio",
        "inner_iters_prev",
    ];
    let order = FEATURE_NAMES == EXPECTED;

    let m = build_test_case_1();
    let sch = Schedule::pore_volumes(&m, 0.1, 10).unwrap();
    let r = run(&m, &mut RelaxationController::fixed(0.7).unwrap(), &sch);
    let finite = r.records.iter().all(|x| {
        x.features.as_slice().len() == 17 && x.features.as_slice().iter().all(|v| v.is_finite())
    });

    // Change of pressure unit by a power of two.
    let disc = Discretization::new(&m).unwrap();
    let ctx = FeatureContext::new(&m);
    let mut st = SimulationState::initial(&m, &disc, 2e5);
    for c in 0..m.n_cells() {
        let [i, _, k] = m.grid.ijk(c);
        st.sw[c] = if i < 10 + k / 2 {
            0.65
        } else {
            0.2 + 0.01 * (k % 3) as f64
        };
    }
    solve_pressure(&m, &disc, &mut st, 1e-12).unwrap();
    st.vel = compute_velocities(&m, &disc, &st);
    let base = extract(&ctx, &m, &disc, &st, 0.2, 0.4, 3).unwrap();
    let c = 2f64.powi(-10);
    let mut m2 = m.clone();
    m2.fluid.mu_w *= c;
    m2.fluid.mu_nw *= c;
    m2.fluid.rho_w *= c;
    m2.fluid.rho_nw *= c;
    m2.rock_fluid.pe *= c;
    let disc2 = Discretization::new(&m2).unwrap();
    let mut st2 = st.clone();
    st2.p.iter_mut().for_each(|p| *p *= c);
    st2.vel = compute_velocities(&m2, &disc2, &st2);
    let scaled = extract(&FeatureContext::new(&m2), &m2, &disc2, &st2, 0.2, 0.4, 3).unwrap();
    let worst = base
        .0
        .iter()
        .zip(&scaled.0)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Verdict::new(
        order && finite && worst <= 1e-10,
        format!(
            "order frozen: {order}; {} records all 17 finite: {finite}; rescale max rel. diff {worst:.1e}",
            r.records.len()
        ),
    )
}

// ------------------------------------------------------------ end to end

struct EndToEnd {
    verdict: Verdict,
    reports: Vec<TrainReport>,
}

fn parse(args: &[&str]) -> Command {
    let mut argv = vec!["relaxflow"];
    argv.extend_from_slice(args);
    Cli::try_parse_from(argv).unwrap().command
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn end_to_end(dir: &Path) -> EndToEnd {
    let data = dir.join("data");
    let Command::Datagen(a) = parse(&["datagen", "--sims", "200", "--out", data.to_str().unwrap()])
    else {
        unreachable!()
    };
    let ds = cmd_datagen(&a).unwrap();
    let m = build_test_case_1();
    let sch = tc1_default_schedule(&m);

    let base = run(&m, &mut RelaxationController::no_relaxation(), &sch).total_metric;
    let (best_w, best) = omega_grid()
        .into_iter()
        .map(|w| {
            (
                w,
                run(&m, &mut RelaxationController::fixed(w).unwrap(), &sch).total_metric,
            )
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();

    let mut reports = Vec::new();
    let mut ml = Vec::new();
    for seed in ["0", "1", "2"] {
        let model = dir.join(format!("forest-{seed}.json"));
        let Command::Train(a) = parse(&[
            "train",
            "--train",
            ds.train.to_str().unwrap(),
            "--test",
            ds.test.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            model.to_str().unwrap(),
        ]) else {
            unreachable!()
        };
        reports.push(cmd_train(&a).unwrap());
        let ens = TreeEnsemble::load(&model).unwrap();
        ml.push(run(&m, &mut RelaxationController::ml(ens, None).unwrap(), &sch).total_metric);
    }
    let ml_med = median(&mut ml.clone());
    let vs_base = (base - ml_med) / base;
    let vs_best = (ml_med - best) / best;
    EndToEnd {
        verdict: Verdict::new(
            vs_base >= 0.10 && vs_best <= 0.05,
            format!(
                "{} rows; ml-frozen median {ml_med:.1} (seeds {:?}), no-relax {base:.1} ({:+.1}% reduction, need >= 10%), best fixed omega {best_w:.2} at {best:.1} ({:+.1}% gap, need <= 5%)",
                ds.summary.n_rows,
                ml.iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>(),
                100.0 * vs_base,
                100.0 * vs_best
            ),
        ),
        reports,
    }
}

fn importance_direction(reports: &[TrainReport]) -> Verdict {
    let ranks: Vec<usize> = reports
        .iter()
        .map(|r| {
            let mut imp = r.importances.clone();
            imp.sort_by(|a, b| b.1.total_cmp(&a.1));
            imp.iter().position(|(n, _)| n == "residual_ratio").unwrap() + 1
        })
        .collect();
    let mut rr: Vec<f64> = ranks.iter().map(|&r| r as f64).collect();
    let med = median(&mut rr);
    let top = reports.first().map(|r| {
        let mut imp = r.importances.clone();
        imp.sort_by(|a, b| b.1.total_cmp(&a.1));
        imp.iter()
            .take(3)
            .map(|(n, _)| n.clone())
            .collect::<Vec<_>>()
            .join(", ")
    });
    Verdict::new(
        med <= 3.0,
        format!(
            "residual_ratio rank per seed {ranks:?}; top 3 (seed 0): {}",
            top.unwrap_or_default()
        ),
    )
}

fn main() {
    // `cargo test -- <filter>` passes arguments; only listing is honoured.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut failures = Vec::new();
    let s = Duration::from_secs;
    criterion(
        "1",
        "relaxation identities",
        s(1),
        true,
        &mut failures,
        relaxation_identities,
    );
    criterion(
        "2",
        "convergence-criteria fidelity",
        s(60),
        true,
        &mut failures,
        convergence_fidelity,
    );
    criterion(
        "3",
        "Buckley-Leverett shock position",
        s(30),
        true,
        &mut failures,
        buckley_leverett,
    );
    criterion(
        "4",
        "tree oracle equivalence",
        s(30),
        true,
        &mut failures,
        ml_oracles,
    );
    criterion(
        "5",
        "online update mechanics",
        s(60),
        true,
        &mut failures,
        online_mechanics,
    );

    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    criterion(
        "6",
        "end-to-end acceleration",
        s(20 * 60),
        true,
        &mut failures,
        || {
            let e = end_to_end(dir.path());
            reports = e.reports;
            e.verdict
        },
    );
    criterion(
        "7",
        "online directional check",
        s(120),
        true,
        &mut failures,
        online_direction,
    );
    criterion(
        "8",
        "feature contract",
        s(10),
        true,
        &mut failures,
        feature_contract,
    );
    if selected("6") {
        criterion(
            "9",
            "feature-importance direction",
            s(20 * 60),
            false,
            &mut failures,
            || importance_direction(&reports),
        );
    }

    if failures.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {}", failures.join(", "));
        std::process::exit(1);
    }
}
