//! Stationary covariance functions with per-dimension lengthscales.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;
const SQRT5: f64 = 2.236_067_977_499_79;

/// Kernel family. Serialized as `sq_exp`, `matern52`, `matern32`, `exponential`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KernelConfig {
    #[serde(rename = "sq_exp")]
    SquaredExponential,
    #[serde(rename = "matern52")]
    Matern52,
    #[serde(rename = "matern32")]
    Matern32,
    #[serde(rename = "exponential")]
    Exponential,
}

impl KernelConfig {
    pub const ALL: [KernelConfig; 4] = [
        KernelConfig::SquaredExponential,
        KernelConfig::Matern52,
        KernelConfig::Matern32,
        KernelConfig::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelConfig::SquaredExponential => "sq_exp",
            KernelConfig::Matern52 => "matern52",
            KernelConfig::Matern32 => "matern32",
            KernelConfig::Exponential => "exponential",
        }
    }

    /// Correlation at scaled distance `r >= 0`; equals 1 at `r = 0`.
    #[inline]
    pub fn correlation(self, r: f64) -> f64 {
        match self {
            KernelConfig::SquaredExponential => (-0.5 * r * r).exp(),
            KernelConfig::Matern52 => {
                let s = SQRT5 * r;
                (1.0 + s + s * s / 3.0) * (-s).exp()
            }
            KernelConfig::Matern32 => {
                let s = SQRT3 * r;
                (1.0 + s) * (-s).exp()
            }
            KernelConfig::Exponential => (-r).exp(),
        }
    }

    #[inline]
    fn correlation_sq(self, r2: f64) -> f64 {
        match self {
            KernelConfig::SquaredExponential => (-0.5 * r2).exp(),
            _ => self.correlation(r2.sqrt()),
        }
    }
}

impl fmt::Display for KernelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelConfig::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::Invalid(format!(
                "unknown kernel `{s}`; expected one of sq_exp, matern52, matern32, exponential"
            ))
        })
    }
}

/// The four-member kernel set used by the ensemble, in fixed order.
pub fn default_kernel_set() -> Vec<KernelConfig> {
    KernelConfig::ALL.to_vec()
}

/// Lengthscales (one per input dimension) and process variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub lengthscales: Vec<f64>,
    pub variance: f64,
}

impl KernelParams {
    pub fn new(lengthscales: Vec<f64>, variance: f64) -> Result<Self> {
        let p = KernelParams { lengthscales, variance };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if self.lengthscales.is_empty() || !self.lengthscales.iter().all(|&l| ok(l)) || !ok(self.variance) {
            return Err(Error::NonPositiveParams);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }
}

#[inline]
pub(crate) fn scaled_dist_sq(x: &[f64], y: &[f64], inv_ls: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(inv_ls)
        .map(|((a, b), il)| {
            let t = (a - b) * il;
            t * t
        })
        .sum()
}

/// `variance * rho(r)` with `r` the lengthscale-scaled Euclidean distance.
pub fn kernel_eval(config: KernelConfig, params: &KernelParams, x: &[f64], x2: &[f64]) -> Result<f64> {
    params.validate()?;
    let d = params.dim();
    for len in [x.len(), x2.len()] {
        if len != d {
            return Err(Error::DimensionMismatch { expected: d, got: len });
        }
    }
    let inv: Vec<f64> = params.lengthscales.iter().map(|l| 1.0 / l).collect();
    Ok(params.variance * config.correlation_sq(scaled_dist_sq(x, x2, &inv)))
}

/// Cross-covariance matrix between the rows of `x` and `x2`.
pub fn gram_matrix(
    config: KernelConfig,
    params: &KernelParams,
    x: &DMatrix<f64>,
    x2: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    params.validate()?;
    let d = params.dim();
    for cols in [x.ncols(), x2.ncols()] {
        if cols != d {
            return Err(Error::DimensionMismatch { expected: d, got: cols });
        }
    }
    let a = crate::data::rows_of(x);
    let b = crate::data::rows_of(x2);
    let inv: Vec<f64> = params.lengthscales.iter().map(|l| 1.0 / l).collect();
    Ok(DMatrix::from_fn(x.nrows(), x2.nrows(), |i, j| {
        params.variance * config.correlation_sq(scaled_dist_sq(&a[i], &b[j], &inv))
    }))
}

/// Row-major unit-variance correlation matrix of a point set.
pub(crate) fn correlation_row_major(config: KernelConfig, points: &[Vec<f64>], inv_ls: &[f64]) -> Vec<f64> {
    let n = points.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        out[i * n + i] = 1.0;
        for j in 0..i {
            let c = config.correlation_sq(scaled_dist_sq(&points[i], &points[j], inv_ls));
            out[i * n + j] = c;
            out[j * n + i] = c;
        }
    }
    out
}

/// Correlations between one point and every row of a point set.
pub(crate) fn correlation_vector(config: KernelConfig, x: &[f64], points: &[Vec<f64>], inv_ls: &[f64]) -> Vec<f64> {
    points
        .iter()
        .map(|p| config.correlation_sq(scaled_dist_sq(x, p, inv_ls)))
        .collect()
}
