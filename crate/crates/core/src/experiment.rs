//! Replicated benchmark experiments, their aggregation and report files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::adaptive::{adaptive_loop, AdaptiveSettings, CostModel, FidelityPolicy, Simulator};
use crate::benchmarks::{rmse, Benchmark, BenchmarkId, Fidelity, CURRIN_DELTA};
use crate::data::{format_float, rows_of, Dataset};
use crate::design::{build_design, derive_seed, random_lhs};
use crate::ensemble::{fit_ensemble, MFEnsemble};
use crate::error::{Error, Result};
use crate::kernels::default_kernel_set;
use crate::optimize::OptimizerSettings;

/// Seed from which every benchmark's test set is derived.
pub const TEST_SET_SEED: u64 = 0x07e5_75e7;

pub const STD_ERROR_LABEL: &str = "sample_std/sqrt(n)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Sparsity {
    /// `5d` HF and `25d` LF points.
    #[default]
    #[serde(rename = "high")]
    High,
    /// `10d` HF and `50d` LF points.
    #[serde(rename = "low")]
    Low,
}

impl Sparsity {
    /// `(n_lf, n_hf)` for input dimension `d`.
    pub fn sizes(self, d: usize) -> (usize, usize) {
        match self {
            Sparsity::High => (25 * d, 5 * d),
            Sparsity::Low => (50 * d, 10 * d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveConfig {
    /// Extra budget in units of `d` HF evaluations.
    #[serde(default = "default_extra_multiple")]
    pub extra_hf_budget_multiple: f64,
    #[serde(default)]
    pub fidelity_policy: FidelityPolicy,
    /// Defaults to `100 * d`.
    #[serde(default)]
    pub candidates_per_iter: Option<usize>,
}

fn default_extra_multiple() -> f64 {
    5.0
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            extra_hf_budget_multiple: default_extra_multiple(),
            fidelity_policy: FidelityPolicy::Free,
            candidates_per_iter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkId,
    #[serde(default = "default_true")]
    pub nested: bool,
    #[serde(default)]
    pub sparsity: Sparsity,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// HF cost relative to an LF evaluation.
    #[serde(default = "default_cost_ratio")]
    pub cost_ratio: f64,
    #[serde(default)]
    pub adaptive: Option<AdaptiveConfig>,
    #[serde(default = "default_test_set_size")]
    pub test_set_size: usize,
    #[serde(default = "default_currin_delta")]
    pub currin_delta: f64,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
}

fn default_true() -> bool {
    true
}
fn default_replicates() -> usize {
    30
}
fn default_cost_ratio() -> f64 {
    7.0
}
fn default_test_set_size() -> usize {
    2000
}
fn default_currin_delta() -> f64 {
    CURRIN_DELTA
}

impl ExperimentConfig {
    pub fn new(benchmark: BenchmarkId) -> Self {
        ExperimentConfig {
            benchmark,
            nested: true,
            sparsity: Sparsity::High,
            replicates: default_replicates(),
            base_seed: 0,
            cost_ratio: default_cost_ratio(),
            adaptive: None,
            test_set_size: default_test_set_size(),
            currin_delta: CURRIN_DELTA,
            optimizer: OptimizerSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.replicates == 0 {
            problems.push("replicates must be at least 1".to_string());
        }
        if !(self.cost_ratio.is_finite() && self.cost_ratio > 0.0) {
            problems.push("cost_ratio must be positive".to_string());
        }
        if self.test_set_size == 0 {
            problems.push("test_set_size must be at least 1".to_string());
        }
        if !(self.currin_delta.is_finite() && self.currin_delta >= 0.0) {
            problems.push("currin_delta must be non-negative".to_string());
        }
        if let Some(a) = &self.adaptive {
            if !(a.extra_hf_budget_multiple.is_finite() && a.extra_hf_budget_multiple >= 0.0) {
                problems.push("adaptive.extra_hf_budget_multiple must be non-negative".to_string());
            }
            if a.candidates_per_iter == Some(0) {
                problems.push("adaptive.candidates_per_iter must be at least 1".to_string());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(problems.join("; ")))
        }
    }

    pub fn benchmark_fn(&self) -> Benchmark {
        Benchmark {
            id: self.benchmark,
            currin_delta: self.currin_delta,
        }
    }

    /// Seed of replicate `r`.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        self.base_seed.wrapping_add(r as u64)
    }
}

/// Fixed test inputs for a benchmark, shared by all its configurations.
pub fn test_set(id: BenchmarkId, size: usize) -> DMatrix<f64> {
    random_lhs(size, id.dimension(), derive_seed(TEST_SET_SEED, id.index()))
}

/// Fit quality at the HF training points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationCheck {
    pub max_abs_error: f64,
    pub output_range: f64,
    pub max_total_variance: f64,
    pub max_process_variance: f64,
}

impl InterpolationCheck {
    pub fn of(ens: &MFEnsemble) -> Self {
        let top = ens.datasets().last().expect("fitted ensemble has levels");
        let pred = ens.predict(&top.inputs).expect("dimensions match");
        let max_abs_error = pred
            .mean
            .iter()
            .zip(&top.outputs)
            .map(|(m, y)| (m - y).abs())
            .fold(0.0, f64::max);
        let (lo, hi) = top
            .outputs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(*y), b.max(*y)));
        InterpolationCheck {
            max_abs_error,
            output_range: hi - lo,
            max_total_variance: pred.total_variance().into_iter().fold(0.0, f64::max),
            max_process_variance: ens.max_process_variance(),
        }
    }

    pub fn passes(&self, mean_tol: f64, var_tol: f64) -> bool {
        self.max_abs_error <= mean_tol * self.output_range
            && self.max_total_variance <= var_tol * self.max_process_variance
    }
}

/// One point of an adaptive RMSE trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// 1-based acquisition index.
    pub step: usize,
    pub level: usize,
    pub cum_cost: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub seed: u64,
    /// Final test RMSE; `None` when the replicate failed.
    pub rmse: Option<f64>,
    /// RMSE before any acquisition (adaptive runs only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_rmse: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TracePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpolation: Option<InterpolationCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunKind {
    #[serde(rename = "one_shot")]
    OneShot,
    #[serde(rename = "adaptive")]
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentRecord {
    pub config: ExperimentConfig,
    pub kind: RunKind,
    pub mean_rmse: Option<f64>,
    pub std_error: f64,
    pub std_error_label: String,
    /// False when fewer than two replicates succeeded.
    pub std_error_defined: bool,
    pub failed_replicates: usize,
    /// Mean adaptive RMSE after each step over the replicates reaching it.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mean_trace: Vec<f64>,
    pub replicates: Vec<ReplicateResult>,
}

impl ExperimentRecord {
    /// Copy with wall-times zeroed, which report files do not carry.
    pub fn without_wall_times(&self) -> Self {
        let mut r = self.clone();
        for rep in &mut r.replicates {
            rep.wall_time_s = 0.0;
        }
        r
    }

    /// RMSE values of the successful replicates in replicate order.
    pub fn rmse_values(&self) -> Vec<f64> {
        self.replicates.iter().filter_map(|r| r.rmse).collect()
    }
}

/// Mean, standard error and whether the standard error is defined.
pub fn aggregate(values: &[f64]) -> (Option<f64>, f64, bool) {
    let n = values.len();
    if n == 0 {
        return (None, 0.0, false);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (Some(mean), 0.0, false);
    }
    let ss: f64 = sorted.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    (Some(mean), sd / (n as f64).sqrt(), true)
}

fn bench_datasets(bench: &Benchmark, lf: &DMatrix<f64>, hf: &DMatrix<f64>) -> Result<Vec<Dataset>> {
    let eval =
        |m: &DMatrix<f64>, f: Fidelity| -> Result<Vec<f64>> { rows_of(m).iter().map(|x| bench.eval(f, x)).collect() };
    Ok(vec![
        Dataset::new(lf.clone(), eval(lf, Fidelity::Low)?, 1)?,
        Dataset::new(hf.clone(), eval(hf, Fidelity::High)?, 2)?,
    ])
}

struct TestOracle {
    inputs: DMatrix<f64>,
    truth: Vec<f64>,
}

impl TestOracle {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let inputs = test_set(cfg.benchmark, cfg.test_set_size);
        let bench = cfg.benchmark_fn();
        let truth = rows_of(&inputs)
            .iter()
            .map(|x| bench.eval(Fidelity::High, x))
            .collect::<Result<Vec<f64>>>()?;
        Ok(TestOracle { inputs, truth })
    }

    fn rmse(&self, ens: &MFEnsemble) -> Result<f64> {
        rmse(&ens.predict(&self.inputs)?.mean, &self.truth)
    }
}

/// Fits the replicate's initial ensemble under `sparsity`.
fn fit_replicate(cfg: &ExperimentConfig, sparsity: Sparsity, seed: u64) -> Result<MFEnsemble> {
    let d = cfg.benchmark.dimension();
    let (n_lf, n_hf) = sparsity.sizes(d);
    let design = build_design(d, n_lf, n_hf, cfg.nested, seed)?;
    let data = bench_datasets(&cfg.benchmark_fn(), &design.lf_inputs, &design.hf_inputs)?;
    let opt = cfg.optimizer.clone().with_seed(derive_seed(seed, 3));
    fit_ensemble(&data, &default_kernel_set(), &opt)
}

fn failed_replicate(replicate: usize, seed: u64, e: &Error, started: Instant) -> ReplicateResult {
    log::warn!("replicate {replicate} failed: {e}");
    ReplicateResult {
        replicate,
        seed,
        rmse: None,
        initial_rmse: None,
        trace: Vec::new(),
        interpolation: None,
        error: Some(e.to_string()),
        wall_time_s: started.elapsed().as_secs_f64(),
    }
}

fn one_shot_replicate(cfg: &ExperimentConfig, oracle: &TestOracle, r: usize) -> ReplicateResult {
    let seed = cfg.replicate_seed(r);
    let started = Instant::now();
    let run = || -> Result<(f64, InterpolationCheck)> {
        let ens = fit_replicate(cfg, cfg.sparsity, seed)?;
        Ok((oracle.rmse(&ens)?, InterpolationCheck::of(&ens)))
    };
    match run() {
        Ok((value, check)) => ReplicateResult {
            replicate: r,
            seed,
            rmse: Some(value),
            initial_rmse: None,
            trace: Vec::new(),
            interpolation: Some(check),
            error: None,
            wall_time_s: started.elapsed().as_secs_f64(),
        },
        Err(e) => failed_replicate(r, seed, &e, started),
    }
}

fn adaptive_replicate(cfg: &ExperimentConfig, acfg: &AdaptiveConfig, oracle: &TestOracle, r: usize) -> ReplicateResult {
    let seed = cfg.replicate_seed(r);
    let started = Instant::now();
    let d = cfg.benchmark.dimension();
    let bench = cfg.benchmark_fn();
    let run = || -> Result<ReplicateResult> {
        let ens = fit_replicate(cfg, Sparsity::High, seed)?;
        let initial = oracle.rmse(&ens)?;
        let cost = CostModel::new(vec![1.0, cfg.cost_ratio])?;
        let settings = AdaptiveSettings {
            budget: acfg.extra_hf_budget_multiple * d as f64 * cfg.cost_ratio,
            candidates_per_iter: acfg.candidates_per_iter,
            seed: derive_seed(seed, 4),
            policy: acfg.fidelity_policy,
            optimizer: cfg.optimizer.clone().with_seed(derive_seed(seed, 3)),
        };
        let lf = |x: &[f64]| bench.eval(Fidelity::Low, x);
        let hf = |x: &[f64]| bench.eval(Fidelity::High, x);
        let sims: [Simulator<'_>; 2] = [&lf, &hf];
        let outcome = adaptive_loop(ens, &sims, &cost, &settings, |e| oracle.rmse(e).ok())?;
        let trace: Vec<TracePoint> = outcome
            .steps
            .iter()
            .enumerate()
            .map(|(i, s)| TracePoint {
                step: i + 1,
                level: s.level_star,
                cum_cost: s.budget_spent_after,
                rmse: s.rmse.unwrap_or(f64::NAN),
            })
            .collect();
        if let Some(e) = outcome.failure {
            return Err(e);
        }
        if trace.iter().any(|t| !t.rmse.is_finite()) {
            return Err(Error::NonFiniteLikelihood);
        }
        let final_rmse = trace.last().map_or(initial, |t| t.rmse);
        Ok(ReplicateResult {
            replicate: r,
            seed,
            rmse: Some(final_rmse),
            initial_rmse: Some(initial),
            trace,
            interpolation: Some(InterpolationCheck::of(&outcome.ensemble)),
            error: None,
            wall_time_s: 0.0,
        })
    };
    match run() {
        Ok(mut rep) => {
            rep.wall_time_s = started.elapsed().as_secs_f64();
            rep
        }
        Err(e) => failed_replicate(r, seed, &e, started),
    }
}

#[cfg(feature = "parallel")]
fn map_replicates<F>(n: usize, f: F) -> Vec<ReplicateResult>
where
    F: Fn(usize) -> ReplicateResult + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_replicates<F>(n: usize, f: F) -> Vec<ReplicateResult>
where
    F: Fn(usize) -> ReplicateResult,
{
    (0..n).map(f).collect()
}

/// Builds a record from replicate results in any order.
pub fn assemble_record(
    config: ExperimentConfig,
    kind: RunKind,
    mut replicates: Vec<ReplicateResult>,
) -> ExperimentRecord {
    replicates.sort_by_key(|r| r.replicate);
    let values: Vec<f64> = replicates.iter().filter_map(|r| r.rmse).collect();
    let (mean_rmse, std_error, std_error_defined) = aggregate(&values);
    let failed_replicates = replicates.iter().filter(|r| r.rmse.is_none()).count();
    let steps = replicates.iter().map(|r| r.trace.len()).max().unwrap_or(0);
    let mean_trace = (0..steps)
        .map(|s| {
            let vals: Vec<f64> = replicates
                .iter()
                .filter(|r| r.rmse.is_some())
                .filter_map(|r| r.trace.get(s).map(|t| t.rmse))
                .collect();
            aggregate(&vals).0.unwrap_or(f64::NAN)
        })
        .filter(|v| v.is_finite())
        .collect();
    ExperimentRecord {
        config,
        kind,
        mean_rmse,
        std_error,
        std_error_label: STD_ERROR_LABEL.to_string(),
        std_error_defined,
        failed_replicates,
        mean_trace,
        replicates,
    }
}

/// Fits the ensemble on each replicate design and scores it on the test set.
pub fn run_one_shot(cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    cfg.validate()?;
    let oracle = TestOracle::new(cfg)?;
    let reps = map_replicates(cfg.replicates, |r| one_shot_replicate(cfg, &oracle, r));
    Ok(assemble_record(cfg.clone(), RunKind::OneShot, reps))
}

/// Starts every replicate from its high-sparsity fit and enriches it
/// adaptively, recording the test RMSE after each accepted point.
pub fn run_adaptive(cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    cfg.validate()?;
    let acfg = cfg
        .adaptive
        .clone()
        .ok_or_else(|| Error::Invalid("config has no `adaptive` section".into()))?;
    let oracle = TestOracle::new(cfg)?;
    let reps = map_replicates(cfg.replicates, |r| adaptive_replicate(cfg, &acfg, &oracle, r));
    Ok(assemble_record(cfg.clone(), RunKind::Adaptive, reps))
}

pub const RMSE_CSV: &str = "rmse.csv";
pub const TRACE_CSV: &str = "adaptive_trace.csv";
pub const SUMMARY_JSON: &str = "summary.json";

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(contents)?;
    Ok(())
}

pub fn rmse_csv(record: &ExperimentRecord) -> String {
    let mut out = String::from("replicate,rmse\n");
    for r in &record.replicates {
        match r.rmse {
            Some(v) => out.push_str(&format!("{},{}\n", r.replicate, format_float(v))),
            None => out.push_str(&format!("{},\n", r.replicate)),
        }
    }
    out
}

pub fn trace_csv(record: &ExperimentRecord) -> String {
    let mut out = String::from("replicate,step,level,cum_cost,rmse\n");
    for r in &record.replicates {
        for t in &r.trace {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.replicate,
                t.step,
                t.level,
                format_float(t.cum_cost),
                format_float(t.rmse)
            ));
        }
    }
    out
}

pub fn summary_json(record: &ExperimentRecord) -> Result<String> {
    let mut s = serde_json::to_string_pretty(record)?;
    s.push('\n');
    Ok(s)
}

pub fn parse_summary(text: &str) -> Result<ExperimentRecord> {
    Ok(serde_json::from_str(text)?)
}

/// Writes the RMSE table, the trace table for adaptive runs and the JSON
/// summary into `dir`. Returns the written paths.
pub fn emit_report(record: &ExperimentRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let rmse_path = dir.join(RMSE_CSV);
    write_file(&rmse_path, rmse_csv(record).as_bytes())?;
    written.push(rmse_path);
    if record.kind == RunKind::Adaptive {
        let p = dir.join(TRACE_CSV);
        write_file(&p, trace_csv(record).as_bytes())?;
        written.push(p);
    }
    let p = dir.join(SUMMARY_JSON);
    write_file(&p, summary_json(record)?.as_bytes())?;
    written.push(p);
    Ok(written)
}
