//! One-dimensional two-fidelity example on the Forrester pair.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{format_float, Dataset};
use crate::ensemble::{fit_ensemble, MFEnsemble};
use crate::error::{Error, Result};
use crate::kernels::{default_kernel_set, KernelConfig};
use crate::optimize::OptimizerSettings;

pub const DEMO_GRID_POINTS: usize = 401;

pub fn forrester_hf(x: f64) -> f64 {
    (6.0 * x - 2.0).powi(2) * (12.0 * x - 4.0).sin()
}

/// `a * hf(x) + b * (x - 0.5) + c`.
pub fn forrester_lf(x: f64, a: f64, b: f64, c: f64) -> f64 {
    a * forrester_hf(x) + b * (x - 0.5) + c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Demo1dConfig {
    pub lf_points: Vec<f64>,
    pub hf_points: Vec<f64>,
    pub lf_a: f64,
    pub lf_b: f64,
    pub lf_c: f64,
    pub grid_points: usize,
    pub kernels: Vec<KernelConfig>,
    pub optimizer: OptimizerSettings,
}

impl Default for Demo1dConfig {
    fn default() -> Self {
        Demo1dConfig {
            lf_points: (0..11).map(|i| i as f64 / 10.0).collect(),
            hf_points: vec![0.0, 0.4, 0.6, 1.0],
            lf_a: 0.5,
            lf_b: 10.0,
            lf_c: -5.0,
            grid_points: DEMO_GRID_POINTS,
            kernels: default_kernel_set(),
            optimizer: OptimizerSettings::default(),
        }
    }
}

/// Dense-grid view of a fitted 1D ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demo1dResult {
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub var_within: Vec<f64>,
    pub var_between: Vec<f64>,
    pub var_total: Vec<f64>,
    pub lf_true: Vec<f64>,
    pub hf_true: Vec<f64>,
    /// Per-learner means, one row per chain.
    pub learner_means: Vec<Vec<f64>>,
    pub learner_kernels: Vec<KernelConfig>,
    pub weights: Vec<f64>,
    pub lf_points: Vec<(f64, f64)>,
    pub hf_points: Vec<(f64, f64)>,
}

impl Demo1dConfig {
    pub fn lf(&self, x: f64) -> f64 {
        forrester_lf(x, self.lf_a, self.lf_b, self.lf_c)
    }

    pub fn datasets(&self) -> Result<Vec<Dataset>> {
        let make = |pts: &[f64], f: &dyn Fn(f64) -> f64, level| {
            Dataset::new(
                DMatrix::from_column_slice(pts.len(), 1, pts),
                pts.iter().map(|&x| f(x)).collect(),
                level,
            )
        };
        Ok(vec![
            make(&self.lf_points, &|x| self.lf(x), 1)?,
            make(&self.hf_points, &forrester_hf, 2)?,
        ])
    }

    pub fn grid(&self) -> Vec<f64> {
        let n = self.grid_points;
        if n == 1 {
            return vec![0.5];
        }
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    pub fn fit(&self) -> Result<MFEnsemble> {
        if self.grid_points == 0 {
            return Err(Error::Invalid("grid_points must be at least 1".into()));
        }
        fit_ensemble(&self.datasets()?, &self.kernels, &self.optimizer)
    }
}

pub fn evaluate_demo(cfg: &Demo1dConfig, ens: &MFEnsemble) -> Result<Demo1dResult> {
    let x = cfg.grid();
    let pred = ens.predict(&DMatrix::from_column_slice(x.len(), 1, &x))?;
    let var_total = pred.total_variance();
    let pts = |d: &Dataset| d.inputs.iter().copied().zip(d.outputs.iter().copied()).collect();
    Ok(Demo1dResult {
        lf_true: x.iter().map(|&v| cfg.lf(v)).collect(),
        hf_true: x.iter().map(|&v| forrester_hf(v)).collect(),
        learner_means: pred.per_learner_means.clone(),
        learner_kernels: ens.chains().iter().map(|c| c.kernel()).collect(),
        weights: ens.weights().to_vec(),
        lf_points: pts(&ens.datasets()[0]),
        hf_points: pts(&ens.datasets()[1]),
        x,
        mean: pred.mean,
        var_within: pred.var_within,
        var_between: pred.var_between,
        var_total,
    })
}

pub fn run_demo1d(cfg: &Demo1dConfig) -> Result<Demo1dResult> {
    let ens = cfg.fit()?;
    evaluate_demo(cfg, &ens)
}

impl Demo1dResult {
    /// `x,mean,lower,upper,var_within,var_between,var_total,lf_true,hf_true`
    /// with bounds at two standard deviations.
    pub fn grid_csv(&self) -> String {
        let mut out = String::from("x,mean,lower,upper,var_within,var_between,var_total,lf_true,hf_true\n");
        for i in 0..self.x.len() {
            let sd = self.var_total[i].sqrt();
            let row = [
                self.x[i],
                self.mean[i],
                self.mean[i] - 2.0 * sd,
                self.mean[i] + 2.0 * sd,
                self.var_within[i],
                self.var_between[i],
                self.var_total[i],
                self.lf_true[i],
                self.hf_true[i],
            ];
            out.push_str(&row.map(format_float).join(","));
            out.push('\n');
        }
        out
    }

    /// `fidelity,x,y` for the training points.
    pub fn points_csv(&self) -> String {
        let mut out = String::from("fidelity,x,y\n");
        for (level, pts) in [(1, &self.lf_points), (2, &self.hf_points)] {
            for (x, y) in pts {
                out.push_str(&format!("{level},{},{}\n", format_float(*x), format_float(*y)));
            }
        }
        out
    }
}
