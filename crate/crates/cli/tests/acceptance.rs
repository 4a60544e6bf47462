//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Exits non-zero on a failed criterion only when `ACCEPTANCE_STRICT` is set.

#[path = "../../core/tests/common/oracle_cases.rs"]
#[allow(dead_code)]
mod oracle_cases;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use mfbma::benchmarks::{currin_hf, hartmann_lf, park2_hf, park2_lf, HARTMANN_A, HARTMANN_ALPHA, HARTMANN_P};
use mfbma::demo::Demo1dConfig;
use mfbma::design::random_lhs;
use mfbma::ensemble::ambiguity_residual_from;
use mfbma::experiment::{AdaptiveConfig, InterpolationCheck};
use mfbma::{
    best_gain_ratio, bma_weights, fit_ensemble, run_adaptive, run_one_shot, select_fidelity, Benchmark, BenchmarkId,
    CostModel, Dataset, ExperimentConfig, ExperimentRecord, Fidelity, FidelityPolicy, KernelConfig, OptimizerSettings,
    Sparsity,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    failed: usize,
    total: usize,
}

impl Report {
    fn line(&mut self, id: usize, name: &str, pass: bool, detail: String, started: Instant) {
        self.total += 1;
        if !pass {
            self.failed += 1;
        }
        let status = if pass { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {id}. {name}: {detail} ({:.1} s)",
            started.elapsed().as_secs_f64()
        );
    }
}

fn algebraic_identities() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut simplex: f64 = 0.0;
    let mut shift: f64 = 0.0;
    let mut ambiguity: f64 = 0.0;
    for _ in 0..1000 {
        let s = rng.gen_range(1..=8);
        let lls: Vec<f64> = (0..s).map(|_| rng.gen_range(-1e3..1e3)).collect();
        let w = bma_weights(&lls).unwrap();
        simplex = simplex.max((w.iter().sum::<f64>() - 1.0).abs());
        let c = rng.gen_range(-1e4..1e4);
        let ws = bma_weights(&lls.iter().map(|l| l + c).collect::<Vec<_>>()).unwrap();
        shift = shift.max(w.iter().zip(&ws).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let means: Vec<f64> = (0..s).map(|_| rng.gen_range(-10.0..10.0)).collect();
        ambiguity = ambiguity.max(ambiguity_residual_from(&w, &means, rng.gen_range(-10.0..10.0)).abs());
    }
    let ens = Demo1dConfig::default().fit().unwrap();
    let grid: Vec<f64> = (0..201).map(|i| i as f64 / 200.0).collect();
    let pred = ens.predict(&DMatrix::from_column_slice(grid.len(), 1, &grid)).unwrap();
    let total = pred.total_variance();
    let split = (0..grid.len())
        .map(|i| (total[i] - pred.var_within[i] - pred.var_between[i]).abs() / total[i].max(1.0))
        .fold(0.0, f64::max);
    let pass = simplex <= 1e-12 && shift <= 1e-12 && ambiguity <= 1e-10 && split <= 1e-12;
    (
        pass,
        format!("simplex {simplex:.1e}, shift {shift:.1e}, ambiguity {ambiguity:.1e}, within+between {split:.1e}"),
    )
}

fn oracle_equivalence() -> (bool, String) {
    let all = oracle_cases::instances();
    let worst = all.iter().map(|i| i.max_error()).fold(0.0, f64::max);
    (
        all.len() >= 5 && worst <= 1e-8,
        format!("{} instances, max abs error {worst:.1e} (tol 1e-8)", all.len()),
    )
}

fn random_points(d: usize, seed: u64) -> Vec<Vec<f64>> {
    let m = random_lhs(100, d, seed);
    (0..100).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn shifted_average(x: &[f64], delta: f64) -> f64 {
    let mut total = 0.0;
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            total += currin_hf(x[0] + s1 * delta, (x[1] + s2 * delta).max(0.0));
        }
    }
    total / 4.0
}

fn lf_identities() -> (bool, String) {
    let park = random_points(4, 1)
        .iter()
        .map(|x| (park2_lf(x) - (1.2 * park2_hf(x) - 1.0)).abs())
        .fold(0.0, f64::max);
    let hartmann = random_points(6, 2)
        .iter()
        .map(|x| {
            let sum: f64 = (0..3)
                .map(|i| {
                    let inner: f64 = (0..6)
                        .map(|j| HARTMANN_A[i][j] * (x[j] - HARTMANN_P[i][j]).powi(2))
                        .sum();
                    HARTMANN_ALPHA[i] * (-inner).exp()
                })
                .sum();
            (hartmann_lf(x) - -(2.58 + sum) / 1.94).abs()
        })
        .fold(0.0, f64::max);
    let bench = Benchmark::new(BenchmarkId::Currin2);
    let currin = random_points(2, 3)
        .iter()
        .map(|x| (bench.eval(Fidelity::Low, x).unwrap() - shifted_average(x, bench.currin_delta)).abs())
        .fold(0.0, f64::max);
    let tol = 1e-12;
    (
        park <= tol && hartmann <= tol && currin <= tol,
        format!("park2 {park:.1e}, hartmann {hartmann:.1e}, currin {currin:.1e} on 100 points each"),
    )
}

fn low_config(id: BenchmarkId) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(id);
    cfg.sparsity = Sparsity::Low;
    cfg.nested = true;
    cfg.replicates = 10;
    cfg
}

fn interpolation_checks(records: &[&ExperimentRecord]) -> Vec<InterpolationCheck> {
    records
        .iter()
        .flat_map(|r| r.replicates.iter().filter_map(|rep| rep.interpolation.clone()))
        .collect()
}

fn determinism() -> (bool, String) {
    let bin = env!("CARGO_BIN_EXE_mfbma");
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let fit_cfg = configs.join("fit.json");
    let dir = tempfile::tempdir().unwrap();
    let bench_cfg = dir.path().join("bench.json");
    fs::write(
        &bench_cfg,
        r#"{"benchmark":"currin2","replicates":2,"test_set_size":200,"adaptive":{"extra_hf_budget_multiple":1,"fidelity_policy":"free","candidates_per_iter":50}}"#,
    )
    .unwrap();
    let run = |tag: &str| -> Vec<(String, Vec<u8>)> {
        let root = dir.path().join(tag);
        let fit_out = root.join("fit");
        let predict_cfg = root.join("predict.json");
        fs::create_dir_all(&root).unwrap();
        fs::write(
            &predict_cfg,
            format!(
                r#"{{"ensemble":{:?},"queries":{:?}}}"#,
                fit_out.join("ensemble.json"),
                configs.join("data/queries.csv")
            ),
        )
        .unwrap();
        let commands: Vec<Vec<String>> = vec![
            vec![
                "fit".into(),
                "--config".into(),
                fit_cfg.display().to_string(),
                "--out".into(),
                fit_out.display().to_string(),
                "--seed".into(),
                "4".into(),
            ],
            vec![
                "predict".into(),
                "--config".into(),
                predict_cfg.display().to_string(),
                "--out".into(),
                root.join("predict").display().to_string(),
            ],
            vec!["demo1d".into(), "--out".into(), root.join("demo").display().to_string()],
            vec![
                "benchmark".into(),
                "--config".into(),
                bench_cfg.display().to_string(),
                "--out".into(),
                root.join("bench").display().to_string(),
            ],
            vec![
                "adaptive".into(),
                "--config".into(),
                bench_cfg.display().to_string(),
                "--out".into(),
                root.join("adaptive").display().to_string(),
            ],
        ];
        for args in &commands {
            let o = Command::new(bin).args(args).arg("--quiet").output().unwrap();
            assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let mut files = Vec::new();
        for sub in ["fit", "predict", "demo", "bench", "adaptive"] {
            let mut entries: Vec<_> = fs::read_dir(root.join(sub))
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            entries.sort();
            for p in entries {
                files.push((
                    format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()),
                    fs::read(&p).unwrap(),
                ));
            }
        }
        files
    };
    let (a, b) = (run("a"), run("b"));
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let pass = a.len() == b.len() && differing.is_empty() && !a.is_empty();
    let detail = if pass {
        format!(
            "{} output files from fit, predict, demo1d, benchmark and adaptive are byte-identical",
            a.len()
        )
    } else {
        format!("differing outputs: {differing:?}")
    };
    (pass, detail)
}

fn fidelity_contract() -> (bool, String) {
    let cases: [(f64, f64, usize); 10] = [
        (1.2, 2.1, 1),
        (0.0, 1e-6, 2),
        (1.0, 7.0, 2),
        (0.5, 3.0, 1),
        (0.1, 0.8, 2),
        (2.0, 14.0, 2),
        (2.0, 13.9, 1),
        (0.0, 0.0, 2),
        (3.5, 1.0, 1),
        (1e-9, 1e-8, 2),
    ];
    let costs = [1.0, 7.0];
    let table_ok = cases.iter().all(|&(g1, g2, want)| {
        let scripted = if g1 / costs[0] > g2 / costs[1] { 1 } else { 2 };
        let (level, ratios) = best_gain_ratio(&[g1, g2], &costs);
        scripted == want && level == want && ratios == [g1 / 1.0, g2 / 7.0]
    });
    let xs: Vec<f64> = (0..8).map(|i| i as f64 / 7.0).collect();
    let datasets = vec![
        Dataset::new(
            DMatrix::from_column_slice(8, 1, &xs),
            xs.iter().map(|x| (5.0 * x).sin()).collect(),
            1,
        )
        .unwrap(),
        Dataset::new(DMatrix::from_column_slice(3, 1, &[0.1, 0.45, 0.8]), vec![0.0; 3], 2).unwrap(),
    ];
    let ens = fit_ensemble(&datasets, &KernelConfig::ALL, &OptimizerSettings::default()).unwrap();
    let cost = CostModel::new(costs.to_vec()).unwrap();
    let zero_beta = ens.chains().iter().all(|c| c.betas()[0] == 0.0)
        && [0.05, 0.3, 0.62, 0.97]
            .iter()
            .all(|x| select_fidelity(&ens, &[*x], &cost).unwrap().level_star == 2);
    (
        table_ok && zero_beta,
        format!(
            "10-case table {}, all-zero scaling forces HF {}",
            ok(table_ok),
            ok(zero_beta)
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "wrong"
    }
}

fn main() {
    let mut report = Report { failed: 0, total: 0 };
    println!("acceptance report");

    let t = Instant::now();
    let (pass, detail) = algebraic_identities();
    report.line(1, "algebraic identities", pass, detail, t);

    let t = Instant::now();
    let (pass, detail) = oracle_equivalence();
    report.line(2, "dense oracle equivalence", pass, detail, t);

    let t = Instant::now();
    let (pass, detail) = lf_identities();
    report.line(4, "low-fidelity identities", pass, detail, t);

    let t = Instant::now();
    let (pass, detail) = fidelity_contract();
    report.line(7, "fidelity selection contract", pass, detail, t);

    let t = Instant::now();
    let (pass, detail) = determinism();
    report.line(8, "CLI determinism", pass, detail, t);

    let t5 = Instant::now();
    let currin = run_one_shot(&low_config(BenchmarkId::Currin2)).unwrap();
    let hartmann = run_one_shot(&low_config(BenchmarkId::Hartmann6)).unwrap();
    let park = run_one_shot(&low_config(BenchmarkId::Park2_4)).unwrap();
    let t5_elapsed = t5.elapsed();

    let t6 = Instant::now();
    let mut acfg = low_config(BenchmarkId::Currin2);
    acfg.adaptive = Some(AdaptiveConfig {
        extra_hf_budget_multiple: 5.0,
        fidelity_policy: FidelityPolicy::HfOnly,
        candidates_per_iter: None,
    });
    let adaptive = run_adaptive(&acfg).unwrap();

    let checks = interpolation_checks(&[&currin, &hartmann, &park, &adaptive]);
    let worst_mean = checks
        .iter()
        .map(|c| c.max_abs_error / c.output_range)
        .fold(0.0, f64::max);
    let worst_var = checks
        .iter()
        .map(|c| c.max_total_variance / c.max_process_variance)
        .fold(0.0, f64::max);
    let pass = !checks.is_empty() && checks.iter().all(|c| c.passes(1e-6, 1e-8));
    report.line(
        3,
        "HF interpolation",
        pass,
        format!(
            "{} fits, max |mean - f|/range {worst_mean:.1e} (tol 1e-6), max var/process var {worst_var:.1e} (tol 1e-8)",
            checks.len()
        ),
        t5,
    );

    let m = |r: &ExperimentRecord| r.mean_rmse.unwrap_or(f64::NAN);
    let all_ok = |r: &ExperimentRecord| r.failed_replicates == 0 && r.replicates.len() >= 10;
    let (mc, mh, mp) = (m(&currin), m(&hartmann), m(&park));
    let pass = all_ok(&currin)
        && all_ok(&hartmann)
        && all_ok(&park)
        && (0.08 / 3.0..=0.08 * 3.0).contains(&mc)
        && mh <= 0.1065 * 3.0
        && mp <= 5e-3;
    report.line(
        5,
        "RMSE bands (10 replicates each)",
        pass,
        format!(
            "currin {mc:.4} in [{:.4}, {:.4}], hartmann {mh:.4} <= {:.4}, park2 {mp:.2e} <= 5.0e-3; runtime {:.0} s",
            0.08 / 3.0,
            0.08 * 3.0,
            0.1065 * 3.0,
            t5_elapsed.as_secs_f64()
        ),
        t5,
    );

    let final_mean = m(&adaptive);
    let ratio = final_mean / mc;
    let decreasing = adaptive
        .replicates
        .iter()
        .filter(|r| match (r.trace.first(), r.trace.last()) {
            (Some(a), Some(b)) => r.trace.len() > 1 && b.rmse < a.rmse,
            _ => false,
        })
        .count();
    let pass = all_ok(&adaptive) && ratio <= 1.15 && decreasing >= 9;
    report.line(
        6,
        "adaptive effectiveness",
        pass,
        format!(
            "final mean {final_mean:.4} / low one-shot {mc:.4} = {ratio:.3} (tol 1.15), trace decreasing in {decreasing}/{}",
            adaptive.replicates.len()
        ),
        t6,
    );

    println!("{}/{} criteria passed", report.total - report.failed, report.total);
    if report.failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
