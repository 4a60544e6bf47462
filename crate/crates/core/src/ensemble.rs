//! Ensembles of hierarchical-kriging chains aggregated by Bayesian model
//! averaging.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{matrix_from_rows, rows_of, Dataset};
use crate::error::{Error, Result};
use crate::gp::{fit_gp, FittedLevel, LevelSnapshot, TrendSpec};
use crate::kernels::KernelConfig;
use crate::optimize::OptimizerSettings;

/// One kernel family fitted at every fidelity level; level `l >= 2` uses
/// the predictive mean of level `l - 1` as its trend.
#[derive(Debug, Clone)]
pub struct HKChain {
    kernel: KernelConfig,
    levels: Vec<Arc<FittedLevel>>,
}

impl HKChain {
    pub fn kernel(&self) -> KernelConfig {
        self.kernel
    }

    pub fn levels(&self) -> &[Arc<FittedLevel>] {
        &self.levels
    }

    /// Level `l` (1-based).
    pub fn level(&self, l: usize) -> &FittedLevel {
        &self.levels[l - 1]
    }

    pub fn top(&self) -> &FittedLevel {
        self.levels.last().expect("a chain has at least one level")
    }

    /// Trend coefficients of levels 2..=L.
    pub fn betas(&self) -> Vec<f64> {
        self.levels.iter().skip(1).map(|l| l.beta()).collect()
    }

    /// Variance propagation factor `prod_{t > level} beta_t^2`.
    pub fn propagation_factor(&self, level: usize) -> f64 {
        self.levels[level..].iter().map(|l| l.beta() * l.beta()).product()
    }

    pub fn predict(&self, xs: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        self.top().predict(xs)
    }
}

fn check_datasets(datasets: &[Dataset]) -> Result<usize> {
    let first = datasets
        .first()
        .ok_or_else(|| Error::Invalid("at least one dataset is required".into()))?;
    let d = first.dim();
    for (i, ds) in datasets.iter().enumerate() {
        if ds.is_empty() {
            return Err(Error::Invalid(format!("dataset for level {} is empty", i + 1)));
        }
        if ds.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: ds.dim(),
            });
        }
        if i > 0 && ds.fidelity <= datasets[i - 1].fidelity {
            return Err(Error::Invalid(
                "datasets must be ordered by strictly increasing fidelity".into(),
            ));
        }
        if ds.len() < 2 {
            return Err(Error::TooFewPoints {
                needed: 2,
                got: ds.len(),
            });
        }
        ds.validate()?;
    }
    Ok(d)
}

/// Fits one chain on datasets ordered from lowest to highest fidelity.
/// The input sets need not be nested.
pub fn fit_chain(datasets: &[Dataset], kernel: KernelConfig, opt: &OptimizerSettings) -> Result<HKChain> {
    check_datasets(datasets)?;
    let mut levels: Vec<Arc<FittedLevel>> = Vec::with_capacity(datasets.len());
    for (i, ds) in datasets.iter().enumerate() {
        let trend = match levels.last() {
            None => TrendSpec::Constant,
            Some(prev) => TrendSpec::Level(Arc::clone(prev)),
        };
        let level = fit_gp(ds, kernel, trend, opt).map_err(|e| e.at_level(i + 1, kernel.name()))?;
        levels.push(Arc::new(level));
    }
    Ok(HKChain { kernel, levels })
}

/// Normalized `exp(L_s)` computed with the maximum subtracted.
pub fn bma_weights(log_liks: &[f64]) -> Result<Vec<f64>> {
    if log_liks.is_empty() || log_liks.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFiniteLikelihood);
    }
    let max = log_liks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = log_liks.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|r| r / total).collect())
}

/// BMA mixture moments at one point: `(mean, within, between)`.
pub fn bma_moments(weights: &[f64], means: &[f64], vars: &[f64]) -> (f64, f64, f64) {
    let mean: f64 = weights.iter().zip(means).map(|(w, m)| w * m).sum();
    let within: f64 = weights.iter().zip(vars).map(|(w, v)| w * v).sum();
    let between: f64 = weights
        .iter()
        .zip(means)
        .map(|(w, m)| w * (m - mean) * (m - mean))
        .sum();
    (mean, within, between)
}

/// `[sum_s w_s (m_s - truth)^2 - between] - (mean - truth)^2`, which is
/// zero for any `truth`.
pub fn ambiguity_residual_from(weights: &[f64], means: &[f64], truth: f64) -> f64 {
    let (mean, _, between) = bma_moments(weights, means, &vec![0.0; means.len()]);
    let avg_err: f64 = weights
        .iter()
        .zip(means)
        .map(|(w, m)| w * (m - truth) * (m - truth))
        .sum();
    (avg_err - between) - (mean - truth) * (mean - truth)
}

/// Ensemble prediction at `m` query points.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePrediction {
    pub mean: Vec<f64>,
    pub var_within: Vec<f64>,
    pub var_between: Vec<f64>,
    /// `S x m`
    pub per_learner_means: Vec<Vec<f64>>,
    /// `S x m`
    pub per_learner_vars: Vec<Vec<f64>>,
}

impl EnsemblePrediction {
    pub fn total_variance(&self) -> Vec<f64> {
        self.var_within
            .iter()
            .zip(&self.var_between)
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// `S` chains over `L` levels plus their BMA weights.
#[derive(Debug, Clone)]
pub struct MFEnsemble {
    chains: Vec<HKChain>,
    weights: Vec<f64>,
    kernel_set: Vec<KernelConfig>,
    datasets: Vec<Dataset>,
}

#[cfg(feature = "parallel")]
fn fit_all(datasets: &[Dataset], kernel_set: &[KernelConfig], opt: &OptimizerSettings) -> Vec<Result<HKChain>> {
    use rayon::prelude::*;
    kernel_set.par_iter().map(|&k| fit_chain(datasets, k, opt)).collect()
}

#[cfg(not(feature = "parallel"))]
fn fit_all(datasets: &[Dataset], kernel_set: &[KernelConfig], opt: &OptimizerSettings) -> Vec<Result<HKChain>> {
    kernel_set.iter().map(|&k| fit_chain(datasets, k, opt)).collect()
}

/// Fits one chain per kernel and weights them by their top-level
/// marginal likelihoods. Chains that fail are dropped with a warning.
pub fn fit_ensemble(datasets: &[Dataset], kernel_set: &[KernelConfig], opt: &OptimizerSettings) -> Result<MFEnsemble> {
    if kernel_set.is_empty() {
        return Err(Error::Invalid("kernel set is empty".into()));
    }
    for (i, k) in kernel_set.iter().enumerate() {
        if kernel_set[..i].contains(k) {
            return Err(Error::Invalid(format!("kernel `{k}` listed twice")));
        }
    }
    check_datasets(datasets)?;
    let mut chains = Vec::new();
    for result in fit_all(datasets, kernel_set, opt) {
        match result {
            Ok(c) => chains.push(c),
            Err(e) => log::warn!("dropping chain: {e}"),
        }
    }
    MFEnsemble::from_chains(chains, kernel_set.to_vec(), datasets.to_vec())
}

impl MFEnsemble {
    fn from_chains(chains: Vec<HKChain>, kernel_set: Vec<KernelConfig>, datasets: Vec<Dataset>) -> Result<Self> {
        if chains.is_empty() {
            return Err(Error::AllChainsFailed);
        }
        let lls: Vec<f64> = chains.iter().map(|c| c.top().log_marginal_likelihood()).collect();
        let weights = bma_weights(&lls)?;
        Ok(MFEnsemble {
            chains,
            weights,
            kernel_set,
            datasets,
        })
    }

    pub fn chains(&self) -> &[HKChain] {
        &self.chains
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Kernels requested at fit time, including any that were dropped.
    pub fn kernel_set(&self) -> &[KernelConfig] {
        &self.kernel_set
    }

    pub fn datasets(&self) -> &[Dataset] {
        &self.datasets
    }

    pub fn level_count(&self) -> usize {
        self.datasets.len()
    }

    pub fn dim(&self) -> usize {
        self.datasets[0].dim()
    }

    /// Largest top-level process variance across learners.
    pub fn max_process_variance(&self) -> f64 {
        self.chains
            .iter()
            .map(|c| c.top().process_variance())
            .fold(0.0, f64::max)
    }

    /// Refits every chain on new datasets with the original kernel set.
    pub fn refit(&self, datasets: Vec<Dataset>, opt: &OptimizerSettings) -> Result<MFEnsemble> {
        fit_ensemble(&datasets, &self.kernel_set, opt)
    }

    pub(crate) fn predict_rows(&self, rows: &[Vec<f64>]) -> EnsemblePrediction {
        let per: Vec<(Vec<f64>, Vec<f64>)> = self.chains.iter().map(|c| c.top().predict_rows(rows)).collect();
        let m = rows.len();
        let mut out = EnsemblePrediction {
            mean: Vec::with_capacity(m),
            var_within: Vec::with_capacity(m),
            var_between: Vec::with_capacity(m),
            per_learner_means: per.iter().map(|p| p.0.clone()).collect(),
            per_learner_vars: per.iter().map(|p| p.1.clone()).collect(),
        };
        let mut means = vec![0.0; per.len()];
        let mut vars = vec![0.0; per.len()];
        for j in 0..m {
            for (s, p) in per.iter().enumerate() {
                means[s] = p.0[j];
                vars[s] = p.1[j];
            }
            let (mean, within, between) = bma_moments(&self.weights, &means, &vars);
            out.mean.push(mean);
            out.var_within.push(within);
            out.var_between.push(between);
        }
        out
    }

    /// Ensemble mean with the within/between-model variance split.
    pub fn predict(&self, xs: &DMatrix<f64>) -> Result<EnsemblePrediction> {
        if xs.nrows() > 0 && xs.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: xs.ncols(),
            });
        }
        Ok(self.predict_rows(&rows_of(xs)))
    }

    pub fn predict_point(&self, x: &[f64]) -> EnsemblePrediction {
        self.predict_rows(&[x.to_vec()])
    }

    /// Ambiguity-decomposition residual at `x` for a given true value.
    pub fn ambiguity_residual(&self, x: &[f64], truth: f64) -> f64 {
        let p = self.predict_point(x);
        let means: Vec<f64> = p.per_learner_means.iter().map(|m| m[0]).collect();
        ambiguity_residual_from(&self.weights, &means, truth)
    }

    pub fn to_file(&self) -> EnsembleFile {
        EnsembleFile {
            format: ENSEMBLE_FORMAT.to_string(),
            kernel_set: self.kernel_set.clone(),
            weights: self.weights.clone(),
            level_count: self.level_count(),
            dataset_hashes: self.datasets.iter().map(Dataset::content_hash).collect(),
            fidelities: self.datasets.iter().map(|d| d.fidelity).collect(),
            chains: self
                .chains
                .iter()
                .map(|c| ChainFile {
                    kernel: c.kernel,
                    levels: c.levels.iter().map(|l| l.snapshot()).collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    /// Rebuilds an ensemble, refactorizing every level.
    pub fn from_file(file: &EnsembleFile) -> Result<Self> {
        if file.format != ENSEMBLE_FORMAT {
            return Err(Error::Serialization(format!("unsupported format `{}`", file.format)));
        }
        let first = file
            .chains
            .first()
            .ok_or_else(|| Error::Serialization("ensemble has no chains".into()))?;
        if first.levels.len() != file.level_count || file.fidelities.len() != file.level_count {
            return Err(Error::Serialization("level count mismatch".into()));
        }
        let d = first.levels[0].lengthscales.len();
        let datasets: Vec<Dataset> = first
            .levels
            .iter()
            .zip(&file.fidelities)
            .map(|(s, &fid)| Dataset::new(matrix_from_rows(&s.inputs, d), s.outputs.clone(), fid))
            .collect::<Result<_>>()?;
        for (ds, h) in datasets.iter().zip(&file.dataset_hashes) {
            if &ds.content_hash() != h {
                return Err(Error::Serialization("dataset hash mismatch".into()));
            }
        }
        let mut chains = Vec::new();
        for cf in &file.chains {
            if cf.levels.len() != file.level_count {
                return Err(Error::Serialization("chain level count mismatch".into()));
            }
            let mut levels: Vec<Arc<FittedLevel>> = Vec::new();
            for (snap, ds) in cf.levels.iter().zip(&datasets) {
                if snap.inputs != ds.rows() || snap.outputs != ds.outputs {
                    return Err(Error::Serialization("chains were trained on different data".into()));
                }
                let trend = match levels.last() {
                    None => TrendSpec::Constant,
                    Some(prev) => TrendSpec::Level(Arc::clone(prev)),
                };
                levels.push(Arc::new(FittedLevel::from_snapshot(snap, trend)?));
            }
            chains.push(HKChain {
                kernel: cf.kernel,
                levels,
            });
        }
        let ens = MFEnsemble::from_chains(chains, file.kernel_set.clone(), datasets)?;
        if ens.weights.len() != file.weights.len()
            || ens
                .weights
                .iter()
                .zip(&file.weights)
                .any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(Error::Serialization(
                "stored weights do not match the likelihoods".into(),
            ));
        }
        Ok(ens)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(text)?)
    }
}

const ENSEMBLE_FORMAT: &str = "mfbma-ensemble/1";

/// On-disk form of an [`MFEnsemble`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleFile {
    pub format: String,
    pub kernel_set: Vec<KernelConfig>,
    pub weights: Vec<f64>,
    pub level_count: usize,
    pub dataset_hashes: Vec<String>,
    pub fidelities: Vec<usize>,
    pub chains: Vec<ChainFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub kernel: KernelConfig,
    pub levels: Vec<LevelSnapshot>,
}
