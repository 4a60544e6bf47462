//! Strict JSON configuration loading.

use std::fs;
use std::path::{Path, PathBuf};

use mfbma::demo::Demo1dConfig;
use mfbma::experiment::{AdaptiveConfig, ExperimentConfig};
use mfbma::{BenchmarkId, KernelConfig, OptimizerSettings};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Datasets ordered from lowest to highest fidelity, each a CSV with
/// columns `x1..xd,y`. Relative paths resolve against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub datasets: Vec<PathBuf>,
    #[serde(default)]
    pub kernels: Option<Vec<KernelConfig>>,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    pub ensemble: PathBuf,
    pub queries: PathBuf,
}

/// Collects the dotted paths of keys in `value` that `template` lacks.
fn unknown_keys(value: &Value, template: &Value, prefix: &str, out: &mut Vec<String>) {
    let (Value::Object(given), Value::Object(known)) = (value, template) else {
        return;
    };
    for (k, v) in given {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match known.get(k) {
            None => out.push(path),
            Some(t) => unknown_keys(v, t, &path, out),
        }
    }
}

/// Parses `text` into `T`, first reporting every key absent from
/// `template` (a fully populated instance).
pub fn parse_strict<T: DeserializeOwned, S: Serialize>(text: &str, template: &S, what: &str) -> Result<T, CliError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| CliError::validation(format!("{what}: invalid JSON: {e}")))?;
    let template = serde_json::to_value(template).map_err(|e| CliError::runtime(e.to_string()))?;
    let mut unknown = Vec::new();
    unknown_keys(&value, &template, "", &mut unknown);
    if !unknown.is_empty() {
        return Err(CliError::validation(format!(
            "{what}: unknown keys: {}",
            unknown.join(", ")
        )));
    }
    serde_json::from_value(value).map_err(|e| CliError::validation(format!("{what}: {e}")))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))
}

fn full_experiment_template() -> ExperimentConfig {
    let mut t = ExperimentConfig::new(BenchmarkId::Currin2);
    t.adaptive = Some(AdaptiveConfig {
        candidates_per_iter: Some(1),
        ..AdaptiveConfig::default()
    });
    t
}

pub fn load_experiment(path: &Path) -> Result<ExperimentConfig, CliError> {
    parse_strict(
        &read_text(path)?,
        &full_experiment_template(),
        &path.display().to_string(),
    )
}

pub fn load_fit(path: &Path) -> Result<FitConfig, CliError> {
    let template = FitConfig {
        datasets: Vec::new(),
        kernels: Some(Vec::new()),
        optimizer: OptimizerSettings::default(),
    };
    parse_strict(&read_text(path)?, &template, &path.display().to_string())
}

pub fn load_predict(path: &Path) -> Result<PredictConfig, CliError> {
    let template = PredictConfig {
        ensemble: PathBuf::new(),
        queries: PathBuf::new(),
    };
    parse_strict(&read_text(path)?, &template, &path.display().to_string())
}

pub fn load_demo(path: &Path) -> Result<Demo1dConfig, CliError> {
    parse_strict(&read_text(path)?, &Demo1dConfig::default(), &path.display().to_string())
}

/// Resolves `p` relative to the directory holding `config`.
pub fn resolve(config: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config.parent().unwrap_or(Path::new(".")).join(p)
    }
}
