//! Browser bindings for the one-dimensional Forrester demo.
//!
//! Every export takes and returns JSON text so the page stays plain
//! JavaScript.

use mfbma::adaptive::Simulator;
use mfbma::demo::{evaluate_demo, forrester_hf, Demo1dConfig, Demo1dResult};
use mfbma::{adaptive_loop, AdaptiveSettings, CostModel, FidelityPolicy, KernelConfig};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

fn parse_config(config_json: &str) -> Result<Demo1dConfig, String> {
    if config_json.trim().is_empty() {
        return Ok(Demo1dConfig::default());
    }
    serde_json::from_str(config_json).map_err(|e| format!("invalid demo config: {e}"))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Fits the ensemble to the configured Forrester points and returns the
/// grid predictions, per-kernel means and weights.
#[wasm_bindgen]
pub fn forrester_demo(config_json: &str) -> Result<String, String> {
    let cfg = parse_config(config_json)?;
    let ens = cfg.fit().map_err(|e| e.to_string())?;
    to_json(&evaluate_demo(&cfg, &ens).map_err(|e| e.to_string())?)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KernelProfile {
    pub kernel: KernelConfig,
    pub correlation: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KernelProfiles {
    pub distance: Vec<f64>,
    pub profiles: Vec<KernelProfile>,
}

/// Correlation against distance for every kernel at one lengthscale,
/// sampled on `points` distances in `[0, 3 * lengthscale]`.
#[wasm_bindgen]
pub fn kernel_profiles(lengthscale: f64, points: usize) -> Result<String, String> {
    if !(lengthscale.is_finite() && lengthscale > 0.0) {
        return Err("lengthscale must be positive".into());
    }
    if points < 2 {
        return Err("points must be at least 2".into());
    }
    let distance: Vec<f64> = (0..points)
        .map(|i| 3.0 * lengthscale * i as f64 / (points - 1) as f64)
        .collect();
    let profiles = KernelConfig::ALL
        .iter()
        .map(|&kernel| KernelProfile {
            kernel,
            correlation: distance.iter().map(|r| kernel.correlation(r / lengthscale)).collect(),
        })
        .collect();
    to_json(&KernelProfiles { distance, profiles })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DemoStep {
    pub x: f64,
    pub level: usize,
    pub gain_per_cost: Vec<f64>,
    pub between_variance: f64,
    pub cost_spent: f64,
    pub rmse: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AdaptiveDemo {
    pub initial_rmse: f64,
    pub steps: Vec<DemoStep>,
    pub result: Demo1dResult,
    pub failure: Option<String>,
}

fn grid_rmse(result: &Demo1dResult) -> f64 {
    let sse: f64 = result
        .mean
        .iter()
        .zip(&result.hf_true)
        .map(|(m, f)| (m - f).powi(2))
        .sum();
    (sse / result.mean.len() as f64).sqrt()
}

/// Enriches the demo fit sequentially with costs `[1, cost_ratio]` until
/// `budget` is spent. `policy` is `free` or `hf_only`.
#[wasm_bindgen]
pub fn adaptive_demo(
    config_json: &str,
    budget: f64,
    cost_ratio: f64,
    policy: &str,
    seed: u64,
) -> Result<String, String> {
    let cfg = parse_config(config_json)?;
    let policy: FidelityPolicy =
        serde_json::from_value(serde_json::Value::String(policy.into())).map_err(|e| format!("policy: {e}"))?;
    let cost = CostModel::new(vec![1.0, cost_ratio]).map_err(|e| e.to_string())?;
    let ens = cfg.fit().map_err(|e| e.to_string())?;
    let initial_rmse = grid_rmse(&evaluate_demo(&cfg, &ens).map_err(|e| e.to_string())?);
    let settings = AdaptiveSettings {
        budget,
        candidates_per_iter: Some(200),
        seed,
        policy,
        optimizer: cfg.optimizer.clone(),
    };
    let lf = |x: &[f64]| Ok(cfg.lf(x[0]));
    let hf = |x: &[f64]| Ok(forrester_hf(x[0]));
    let sims: [Simulator<'_>; 2] = [&lf, &hf];
    let observer = |e: &mfbma::MFEnsemble| evaluate_demo(&cfg, e).ok().map(|r| grid_rmse(&r));
    let outcome = adaptive_loop(ens, &sims, &cost, &settings, observer).map_err(|e| e.to_string())?;
    let steps = outcome
        .steps
        .iter()
        .map(|s| DemoStep {
            x: s.x_star[0],
            level: s.level_star,
            gain_per_cost: s.gain_per_level.clone(),
            between_variance: s.sigma2_bm_at_star,
            cost_spent: s.budget_spent_after,
            rmse: s.rmse.unwrap_or(f64::NAN),
        })
        .collect();
    to_json(&AdaptiveDemo {
        initial_rmse,
        steps,
        result: evaluate_demo(&cfg, &outcome.ensemble).map_err(|e| e.to_string())?,
        failure: outcome.failure.map(|e| e.to_string()),
    })
}
