//! Single-level kriging with a one-basis trend.
//!
//! The trend is either a constant or the predictive mean of a lower
//! fidelity level (hierarchical kriging). The trend coefficient and the
//! process variance are profiled out in closed form, so the likelihood
//! search runs over log-lengthscales only.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{matrix_from_rows, rows_of, Dataset};
use crate::error::{Error, Result};
use crate::kernels::{correlation_row_major, correlation_vector, KernelConfig, KernelParams};
use crate::numerics::{cholesky_row_major, dot, JitterSchedule, SpdFactor};
use crate::optimize::{multi_start_minimize, OptimizerSettings};

/// Largest relative jitter accepted while fitting. Larger boosts break
/// interpolation of the training data, so such lengthscales are treated as
/// infeasible by the likelihood search.
pub const FIT_JITTER_CAP: f64 = 1e-10;

fn fit_schedule() -> JitterSchedule {
    JitterSchedule::default().capped(FIT_JITTER_CAP)
}

/// Basis function of the trend.
#[derive(Debug, Clone)]
pub enum TrendSpec {
    /// `F(x) = 1`.
    Constant,
    /// `F(x)` is the predictive mean of a fitted lower level.
    Level(Arc<FittedLevel>),
}

impl TrendSpec {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TrendSpec::Constant => 1.0,
            TrendSpec::Level(lower) => lower.mean_at(x),
        }
    }

    pub fn eval_rows(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.eval(r)).collect()
    }

    pub fn lower(&self) -> Option<&Arc<FittedLevel>> {
        match self {
            TrendSpec::Constant => None,
            TrendSpec::Level(l) => Some(l),
        }
    }
}

/// Closed-form trend coefficient, process variance and log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub beta: f64,
    pub variance: f64,
    pub log_likelihood: f64,
    /// Set when the profiled variance is negligible relative to the data
    /// spread; the likelihood is then evaluated at a floored variance.
    pub zero_variance: bool,
}

/// Generalized least squares for the trend coefficient given the
/// correlation-matrix factor, then the profiled variance and the log
/// marginal likelihood at `K = variance * R`.
pub fn profile_trend_and_variance(corr: &SpdFactor, trend: &[f64], outputs: &[f64]) -> Result<Profile> {
    Ok(profile_parts(corr, trend, outputs)?.0)
}

struct ProfileParts {
    corr_weights: Vec<f64>,
    trend_solve: Vec<f64>,
    ftrf: f64,
}

fn profile_parts(corr: &SpdFactor, trend: &[f64], outputs: &[f64]) -> Result<(Profile, ProfileParts)> {
    let n = outputs.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    if trend.len() != n || corr.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: trend.len().min(corr.dim()),
        });
    }
    let u = corr.forward(trend);
    let z = corr.forward(outputs);
    let ftrf = dot(&u, &u);
    let fnorm2 = dot(trend, trend);
    if !(ftrf > 1e-12 * fnorm2) || fnorm2 == 0.0 {
        return Err(Error::DegenerateTrend(ftrf));
    }
    let beta = dot(&u, &z) / ftrf;
    let whitened: Vec<f64> = z.iter().zip(&u).map(|(a, b)| a - beta * b).collect();
    let q = dot(&whitened, &whitened).max(0.0);
    let variance = q / n as f64;

    let mean_f = outputs.iter().sum::<f64>() / n as f64;
    let spread = outputs.iter().map(|y| (y - mean_f).powi(2)).sum::<f64>() / n as f64;
    let zero_variance = variance <= 1e-12 * spread;
    let floored = if zero_variance {
        (1e-12 * spread).max(f64::MIN_POSITIVE)
    } else {
        variance
    };
    let nf = n as f64;
    let quad = if zero_variance { q / floored } else { nf };
    let log_likelihood = -0.5 * quad - 0.5 * (corr.log_det() + nf * floored.ln()) - 0.5 * nf * (2.0 * PI).ln();

    let mut corr_weights = whitened;
    corr.backward_in_place(&mut corr_weights);
    Ok((
        Profile {
            beta,
            variance,
            log_likelihood,
            zero_variance,
        },
        ProfileParts {
            corr_weights,
            trend_solve: u,
            ftrf,
        },
    ))
}

/// A trained kriging level. Immutable once built.
#[derive(Debug, Clone)]
pub struct FittedLevel {
    kernel: KernelConfig,
    params: KernelParams,
    inv_ls: Vec<f64>,
    trend: TrendSpec,
    beta: f64,
    zero_variance: bool,
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
    trend_at_train: Vec<f64>,
    corr: SpdFactor,
    corr_weights: Vec<f64>,
    trend_solve: Vec<f64>,
    ftrf: f64,
    log_likelihood: f64,
}

/// Serializable description of a level; the factorization is rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSnapshot {
    pub kernel: KernelConfig,
    pub lengthscales: Vec<f64>,
    pub variance: f64,
    pub beta: f64,
    pub jitter: f64,
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
    pub log_likelihood: f64,
}

fn validate_training(data: &Dataset) -> Result<()> {
    if data.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: data.len(),
        });
    }
    data.validate()
}

/// Profiled log-likelihood at the given lengthscales.
pub fn profiled_log_likelihood(
    data: &Dataset,
    kernel: KernelConfig,
    trend: &TrendSpec,
    lengthscales: &[f64],
) -> Result<f64> {
    let rows = data.rows();
    let f = trend.eval_rows(&rows);
    let inv: Vec<f64> = lengthscales.iter().map(|l| 1.0 / l).collect();
    let r = correlation_row_major(kernel, &rows, &inv);
    let factor = cholesky_row_major(&r, rows.len(), &fit_schedule())?;
    Ok(profile_trend_and_variance(&factor, &f, &data.outputs)?.log_likelihood)
}

/// Maximum-likelihood fit of one level.
pub fn fit_gp(data: &Dataset, kernel: KernelConfig, trend: TrendSpec, opt: &OptimizerSettings) -> Result<FittedLevel> {
    validate_training(data)?;
    let d = data.dim();
    let rows = data.rows();
    let f = trend.eval_rows(&rows);
    let n = rows.len();
    let schedule = fit_schedule();
    let mut objective = |logls: &[f64]| -> f64 {
        let inv: Vec<f64> = logls.iter().map(|l| (-l).exp()).collect();
        let r = correlation_row_major(kernel, &rows, &inv);
        match cholesky_row_major(&r, n, &schedule).and_then(|c| profile_trend_and_variance(&c, &f, &data.outputs)) {
            Ok(p) => -p.log_likelihood,
            Err(_) => f64::INFINITY,
        }
    };
    let (lo, hi) = (opt.min_lengthscale.ln(), opt.max_lengthscale.ln());
    let starts = opt.start_points(d);
    let best = multi_start_minimize(&mut objective, &starts, lo, hi, opt).ok_or(Error::OptimizerFailure)?;
    let lengthscales: Vec<f64> = best.x.iter().map(|l| l.exp()).collect();
    FittedLevel::assemble(kernel, lengthscales, trend, rows, data.outputs.clone(), f, &schedule)
}

impl FittedLevel {
    /// Builds a level at fixed lengthscales, profiling the trend
    /// coefficient and variance.
    pub fn with_lengthscales(
        data: &Dataset,
        kernel: KernelConfig,
        trend: TrendSpec,
        lengthscales: Vec<f64>,
    ) -> Result<Self> {
        validate_training(data)?;
        if lengthscales.len() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                got: lengthscales.len(),
            });
        }
        let rows = data.rows();
        let f = trend.eval_rows(&rows);
        Self::assemble(
            kernel,
            lengthscales,
            trend,
            rows,
            data.outputs.clone(),
            f,
            &JitterSchedule::default(),
        )
    }

    fn assemble(
        kernel: KernelConfig,
        lengthscales: Vec<f64>,
        trend: TrendSpec,
        inputs: Vec<Vec<f64>>,
        outputs: Vec<f64>,
        trend_at_train: Vec<f64>,
        schedule: &JitterSchedule,
    ) -> Result<Self> {
        let inv_ls: Vec<f64> = lengthscales.iter().map(|l| 1.0 / l).collect();
        let n = inputs.len();
        let r = correlation_row_major(kernel, &inputs, &inv_ls);
        let corr = cholesky_row_major(&r, n, schedule)?;
        let (profile, parts) = profile_parts(&corr, &trend_at_train, &outputs)?;
        // a zero variance is kept as a tiny positive value so the params stay valid
        let variance = if profile.variance > 0.0 {
            profile.variance
        } else {
            f64::MIN_POSITIVE
        };
        let params = KernelParams::new(lengthscales, variance)?;
        if !profile.log_likelihood.is_finite() {
            return Err(Error::OptimizerFailure);
        }
        Ok(FittedLevel {
            kernel,
            params,
            inv_ls,
            trend,
            beta: profile.beta,
            zero_variance: profile.zero_variance,
            inputs,
            outputs,
            trend_at_train,
            corr,
            corr_weights: parts.corr_weights,
            trend_solve: parts.trend_solve,
            ftrf: parts.ftrf,
            log_likelihood: profile.log_likelihood,
        })
    }

    pub fn kernel(&self) -> KernelConfig {
        self.kernel
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn trend(&self) -> &TrendSpec {
        &self.trend
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn process_variance(&self) -> f64 {
        self.params.variance
    }

    pub fn zero_variance(&self) -> bool {
        self.zero_variance
    }

    pub fn jitter(&self) -> f64 {
        self.corr.jitter_used()
    }

    pub fn train_inputs(&self) -> DMatrix<f64> {
        matrix_from_rows(&self.inputs, self.dim())
    }

    pub fn train_rows(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn train_outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn trend_at_train(&self) -> &[f64] {
        &self.trend_at_train
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.corr
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// `K^{-1}(f - beta F)` with `K = variance * (R + jitter I)`.
    pub fn residual_weights(&self) -> Vec<f64> {
        self.corr_weights.iter().map(|w| w / self.params.variance).collect()
    }

    /// Log marginal likelihood at the fitted estimates.
    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// Predictive mean at one point.
    pub fn mean_at(&self, x: &[f64]) -> f64 {
        let r = correlation_vector(self.kernel, x, &self.inputs, &self.inv_ls);
        self.beta * self.trend.eval(x) + dot(&r, &self.corr_weights)
    }

    /// Mean and variance before clamping the variance at zero.
    pub fn predict_point_raw(&self, x: &[f64]) -> (f64, f64) {
        let r = correlation_vector(self.kernel, x, &self.inputs, &self.inv_ls);
        let fx = self.trend.eval(x);
        let mean = self.beta * fx + dot(&r, &self.corr_weights);
        let v = self.corr.forward(&r);
        let gap = fx - dot(&v, &self.trend_solve);
        let var = self.params.variance * (1.0 - dot(&v, &v) + gap * gap / self.ftrf);
        (mean, var)
    }

    /// Predictive mean and (clamped) variance at one point.
    pub fn predict_point(&self, x: &[f64]) -> (f64, f64) {
        let (m, v) = self.predict_point_raw(x);
        (m, v.max(0.0))
    }

    pub(crate) fn predict_rows(&self, rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        rows.iter().map(|r| self.predict_point(r)).unzip()
    }

    /// Predictive means and variances at the rows of `xs`.
    pub fn predict(&self, xs: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        if xs.ncols() != self.dim() && xs.nrows() > 0 {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: xs.ncols(),
            });
        }
        Ok(self.predict_rows(&rows_of(xs)))
    }

    pub fn snapshot(&self) -> LevelSnapshot {
        LevelSnapshot {
            kernel: self.kernel,
            lengthscales: self.params.lengthscales.clone(),
            variance: self.params.variance,
            beta: self.beta,
            jitter: self.corr.jitter_used(),
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            log_likelihood: self.log_likelihood,
        }
    }

    /// Rebuilds a level from its snapshot and the trend it was fitted with.
    pub fn from_snapshot(snap: &LevelSnapshot, trend: TrendSpec) -> Result<Self> {
        let d = snap.lengthscales.len();
        if snap.inputs.iter().any(|r| r.len() != d) || snap.inputs.len() != snap.outputs.len() {
            return Err(Error::Serialization("snapshot shapes are inconsistent".into()));
        }
        let f = trend.eval_rows(&snap.inputs);
        let level = Self::assemble(
            snap.kernel,
            snap.lengthscales.clone(),
            trend,
            snap.inputs.clone(),
            snap.outputs.clone(),
            f,
            &JitterSchedule::Absolute(vec![snap.jitter]),
        )?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
        if !close(level.beta, snap.beta) || !close(level.log_likelihood, snap.log_likelihood) {
            return Err(Error::Serialization(
                "snapshot does not reproduce its stored estimates".into(),
            ));
        }
        Ok(level)
    }
}
