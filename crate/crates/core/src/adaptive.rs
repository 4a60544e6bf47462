//! Sequential design: pick the candidate where the learners disagree most,
//! then the fidelity with the best expected variance reduction per unit
//! cost.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::rows_of;
use crate::design::{derive_seed, random_lhs};
use crate::ensemble::MFEnsemble;
use crate::error::{Error, Result};
use crate::optimize::OptimizerSettings;

/// Evaluation cost per fidelity level, lowest level first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    costs: Vec<f64>,
}

impl CostModel {
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        if costs.is_empty() || costs.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::Invalid("costs must be positive and finite".into()));
        }
        if costs.windows(2).any(|w| w[1] < w[0]) {
            log::warn!("cost model decreases with fidelity: {costs:?}");
        }
        Ok(CostModel { costs })
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// Cost of level `l` (1-based).
    pub fn cost(&self, level: usize) -> f64 {
        self.costs[level - 1]
    }

    pub fn levels(&self) -> usize {
        self.costs.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FidelityPolicy {
    /// Choose the level by gain per unit cost.
    #[default]
    #[serde(rename = "free")]
    Free,
    /// Always evaluate the highest fidelity.
    #[serde(rename = "hf_only")]
    HfOnly,
}

/// One accepted acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionStep {
    pub x_star: Vec<f64>,
    /// 1-based.
    pub level_star: usize,
    /// Gain divided by cost, per level.
    pub gain_per_level: Vec<f64>,
    pub sigma2_bm_at_star: f64,
    pub budget_spent_after: f64,
    /// Test error after refitting, when an oracle was supplied.
    pub rmse: Option<f64>,
}

/// Latin hypercube candidate set on `[0,1]^d`.
pub fn candidate_set(d: usize, count: usize, seed: u64) -> DMatrix<f64> {
    random_lhs(count, d, seed)
}

fn ranked_candidates(ens: &MFEnsemble, candidates: &DMatrix<f64>) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<usize>)> {
    if candidates.nrows() == 0 {
        return Err(Error::EmptyCandidates);
    }
    let pred = ens.predict(candidates)?;
    let mut order: Vec<usize> = (0..candidates.nrows()).collect();
    order.sort_by(|&a, &b| pred.var_between[b].total_cmp(&pred.var_between[a]).then(a.cmp(&b)));
    Ok((rows_of(candidates), pred.var_between, order))
}

/// Candidate with the largest between-model variance (lowest row on ties).
pub fn acquire_location(ens: &MFEnsemble, candidates: &DMatrix<f64>) -> Result<(Vec<f64>, f64)> {
    let (rows, bm, order) = ranked_candidates(ens, candidates)?;
    let best = order[0];
    Ok((rows[best].clone(), bm[best]))
}

/// Expected reduction of the top-level predictive variance from an
/// evaluation at `x` and `level` (1-based).
pub fn information_gain(ens: &MFEnsemble, x: &[f64], level: usize) -> Result<f64> {
    let levels = ens.level_count();
    if level == 0 || level > levels {
        return Err(Error::LevelOutOfRange { level, levels });
    }
    if x.len() != ens.dim() {
        return Err(Error::DimensionMismatch {
            expected: ens.dim(),
            got: x.len(),
        });
    }
    if level == levels {
        let p = ens.predict_point(x);
        return Ok(p.var_within[0] + p.var_between[0]);
    }
    Ok(ens
        .chains()
        .iter()
        .zip(ens.weights())
        .map(|(chain, w)| {
            let (_, var) = chain.level(level).predict_point(x);
            w * chain.propagation_factor(level) * var
        })
        .sum())
}

/// Level maximizing `gain / cost`, ties going to the highest level.
/// Returns the 1-based level and the ratios.
pub fn best_gain_ratio(gains: &[f64], costs: &[f64]) -> (usize, Vec<f64>) {
    let ratios: Vec<f64> = gains.iter().zip(costs).map(|(g, c)| g / c).collect();
    let mut best = 0;
    for (i, r) in ratios.iter().enumerate() {
        if *r >= ratios[best] {
            best = i;
        }
    }
    (best + 1, ratios)
}

/// Fidelity choice at `x_star`.
pub fn select_fidelity(ens: &MFEnsemble, x_star: &[f64], cost: &CostModel) -> Result<AcquisitionStep> {
    let levels = ens.level_count();
    if cost.levels() != levels {
        return Err(Error::DimensionMismatch {
            expected: levels,
            got: cost.levels(),
        });
    }
    let gains = (1..=levels)
        .map(|l| information_gain(ens, x_star, l))
        .collect::<Result<Vec<f64>>>()?;
    let (level_star, ratios) = best_gain_ratio(&gains, cost.costs());
    let bm = ens.predict_point(x_star).var_between[0];
    Ok(AcquisitionStep {
        x_star: x_star.to_vec(),
        level_star,
        gain_per_level: ratios,
        sigma2_bm_at_star: bm,
        budget_spent_after: 0.0,
        rmse: None,
    })
}

/// Loop controls.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveSettings {
    pub budget: f64,
    /// Defaults to `100 * d`.
    pub candidates_per_iter: Option<usize>,
    pub seed: u64,
    pub policy: FidelityPolicy,
    pub optimizer: OptimizerSettings,
}

/// Final state of an adaptive run.
#[derive(Debug, Clone)]
pub struct AdaptiveOutcome {
    pub ensemble: MFEnsemble,
    pub steps: Vec<AcquisitionStep>,
    /// Set when a simulator or refit failed; `steps` holds the partial trace.
    pub failure: Option<Error>,
}

pub type Simulator<'a> = &'a (dyn Fn(&[f64]) -> Result<f64> + Sync);

/// Runs acquisitions until the next one would exceed the budget. After
/// every new point all levels and weights are refitted. `observer` is
/// called on each refitted ensemble and may return a test error.
pub fn adaptive_loop<O>(
    ens: MFEnsemble,
    simulators: &[Simulator<'_>],
    cost: &CostModel,
    settings: &AdaptiveSettings,
    mut observer: O,
) -> Result<AdaptiveOutcome>
where
    O: FnMut(&MFEnsemble) -> Option<f64>,
{
    let levels = ens.level_count();
    if simulators.len() != levels || cost.levels() != levels {
        return Err(Error::Invalid(format!(
            "need one simulator and one cost per level ({levels} levels)"
        )));
    }
    if !(settings.budget >= 0.0) {
        return Err(Error::Invalid("budget must be non-negative".into()));
    }
    let d = ens.dim();
    let count = settings.candidates_per_iter.unwrap_or(100 * d).max(1);
    let min_cost = match settings.policy {
        FidelityPolicy::Free => cost.costs().iter().copied().fold(f64::INFINITY, f64::min),
        FidelityPolicy::HfOnly => cost.cost(levels),
    };
    let slack = 1e-9 * settings.budget.max(1.0);

    let mut ens = ens;
    let mut steps = Vec::new();
    let mut spent = 0.0;
    for iter in 0u64.. {
        let remaining = settings.budget - spent;
        if min_cost > remaining + slack {
            break;
        }
        let candidates = candidate_set(d, count, derive_seed(settings.seed, iter));
        let (rows, bm, order) = ranked_candidates(&ens, &candidates)?;
        let mut chosen = None;
        for idx in order {
            let x = &rows[idx];
            let mut step = select_fidelity(&ens, x, cost)?;
            if settings.policy == FidelityPolicy::HfOnly {
                step.level_star = levels;
            }
            step.sigma2_bm_at_star = bm[idx];
            if !ens.datasets()[step.level_star - 1].contains(x) {
                chosen = Some(step);
                break;
            }
        }
        let Some(mut step) = chosen else { break };
        let c = cost.cost(step.level_star);
        if c > remaining + slack {
            break;
        }
        let y = match simulators[step.level_star - 1](&step.x_star) {
            Ok(y) if y.is_finite() => y,
            Ok(y) => {
                return Ok(failed(ens, steps, step.level_star, format!("non-finite output {y}")));
            }
            Err(e) => return Ok(failed(ens, steps, step.level_star, e.to_string())),
        };
        let mut datasets = ens.datasets().to_vec();
        datasets[step.level_star - 1].push(&step.x_star, y)?;
        let next = match ens.refit(datasets, &settings.optimizer) {
            Ok(n) => n,
            Err(e) => {
                return Ok(AdaptiveOutcome {
                    ensemble: ens,
                    steps,
                    failure: Some(e),
                })
            }
        };
        spent += c;
        step.budget_spent_after = spent;
        step.rmse = observer(&next);
        steps.push(step);
        ens = next;
    }
    Ok(AdaptiveOutcome {
        ensemble: ens,
        steps,
        failure: None,
    })
}

fn failed(ensemble: MFEnsemble, steps: Vec<AcquisitionStep>, level: usize, message: String) -> AdaptiveOutcome {
    AdaptiveOutcome {
        ensemble,
        steps,
        failure: Some(Error::SimulatorFailure { level, message }),
    }
}
