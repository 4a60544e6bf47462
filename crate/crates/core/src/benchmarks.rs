//! Two-fidelity analytic test functions on the unit hypercube and the
//! RMSE metric.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default Currin low-fidelity shift.
pub const CURRIN_DELTA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BenchmarkId {
    #[serde(rename = "currin2")]
    Currin2,
    #[serde(rename = "park1_4")]
    Park1_4,
    #[serde(rename = "park2_4")]
    Park2_4,
    #[serde(rename = "hartmann6")]
    Hartmann6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fidelity {
    #[serde(rename = "lf")]
    Low,
    #[serde(rename = "hf")]
    High,
}

impl BenchmarkId {
    pub const ALL: [BenchmarkId; 4] = [
        BenchmarkId::Currin2,
        BenchmarkId::Park1_4,
        BenchmarkId::Park2_4,
        BenchmarkId::Hartmann6,
    ];

    pub fn dimension(self) -> usize {
        match self {
            BenchmarkId::Currin2 => 2,
            BenchmarkId::Park1_4 | BenchmarkId::Park2_4 => 4,
            BenchmarkId::Hartmann6 => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkId::Currin2 => "currin2",
            BenchmarkId::Park1_4 => "park1_4",
            BenchmarkId::Park2_4 => "park2_4",
            BenchmarkId::Hartmann6 => "hartmann6",
        }
    }

    pub(crate) fn index(self) -> u64 {
        BenchmarkId::ALL.iter().position(|b| *b == self).unwrap() as u64
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchmarkId::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown benchmark `{s}`; valid names: {}", valid_names())))
    }
}

pub fn valid_names() -> String {
    BenchmarkId::ALL.map(BenchmarkId::name).join(", ")
}

pub fn currin_hf(x1: f64, x2: f64) -> f64 {
    let head = 1.0 - (-1.0 / (2.0 * x2)).exp();
    let num = 2300.0 * x1.powi(3) + 1900.0 * x1 * x1 + 2092.0 * x1 + 60.0;
    let den = 100.0 * x1.powi(3) + 500.0 * x1 * x1 + 4.0 * x1 + 20.0;
    head * num / den
}

pub fn currin_lf(x1: f64, x2: f64, delta: f64) -> f64 {
    let x2_low = (x2 - delta).max(0.0);
    0.25 * (currin_hf(x1 + delta, x2 + delta)
        + currin_hf(x1 + delta, x2_low)
        + currin_hf(x1 - delta, x2 + delta)
        + currin_hf(x1 - delta, x2_low))
}

pub fn park1_hf(x: &[f64]) -> f64 {
    let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
    // x1 -> 0 limit of the first term is sqrt((x2 + x3^2) x4) / 2
    let first = if x1 == 0.0 {
        0.5 * ((x2 + x3 * x3) * x4).sqrt()
    } else {
        0.5 * x1 * ((1.0 + (x2 + x3 * x3) * x4 / (x1 * x1)).sqrt() - 1.0)
    };
    first + (x1 + 3.0 * x4) * (1.0 + x3.sin()).exp()
}

pub fn park1_lf(x: &[f64]) -> f64 {
    (1.0 + x[0].sin() / 10.0) * park1_hf(x) - 2.0 * x[0] + x[1] * x[1] + x[2] * x[2] + 0.5
}

pub fn park2_hf(x: &[f64]) -> f64 {
    2.0 / 3.0 * (x[0] + x[1]).exp() - x[3] * x[2].sin() + x[2]
}

pub fn park2_lf(x: &[f64]) -> f64 {
    1.2 * park2_hf(x) - 1.0
}

pub const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];

pub const HARTMANN_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];

pub const HARTMANN_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

fn hartmann_terms(x: &[f64], terms: usize) -> f64 {
    let sum: f64 = (0..terms)
        .map(|i| {
            let inner: f64 = (0..6)
                .map(|j| HARTMANN_A[i][j] * (x[j] - HARTMANN_P[i][j]).powi(2))
                .sum();
            HARTMANN_ALPHA[i] * (-inner).exp()
        })
        .sum();
    -(2.58 + sum) / 1.94
}

pub fn hartmann_hf(x: &[f64]) -> f64 {
    hartmann_terms(x, 4)
}

pub fn hartmann_lf(x: &[f64]) -> f64 {
    hartmann_terms(x, 3)
}

/// A benchmark plus its tunable constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub id: BenchmarkId,
    pub currin_delta: f64,
}

impl Benchmark {
    pub fn new(id: BenchmarkId) -> Self {
        Benchmark {
            id,
            currin_delta: CURRIN_DELTA,
        }
    }

    pub fn dimension(&self) -> usize {
        self.id.dimension()
    }

    pub fn eval(&self, fidelity: Fidelity, x: &[f64]) -> Result<f64> {
        let d = self.id.dimension();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::DomainViolation);
        }
        Ok(match (self.id, fidelity) {
            (BenchmarkId::Currin2, Fidelity::High) => currin_hf(x[0], x[1]),
            (BenchmarkId::Currin2, Fidelity::Low) => currin_lf(x[0], x[1], self.currin_delta),
            (BenchmarkId::Park1_4, Fidelity::High) => park1_hf(x),
            (BenchmarkId::Park1_4, Fidelity::Low) => park1_lf(x),
            (BenchmarkId::Park2_4, Fidelity::High) => park2_hf(x),
            (BenchmarkId::Park2_4, Fidelity::Low) => park2_lf(x),
            (BenchmarkId::Hartmann6, Fidelity::High) => hartmann_hf(x),
            (BenchmarkId::Hartmann6, Fidelity::Low) => hartmann_lf(x),
        })
    }

    /// Level `1` is low fidelity and level `2` high fidelity.
    pub fn eval_level(&self, level: usize, x: &[f64]) -> Result<f64> {
        match level {
            1 => self.eval(Fidelity::Low, x),
            2 => self.eval(Fidelity::High, x),
            _ => Err(Error::LevelOutOfRange { level, levels: 2 }),
        }
    }
}

/// Closed-form value of a benchmark with default constants.
pub fn eval_benchmark(id: BenchmarkId, fidelity: Fidelity, x: &[f64]) -> Result<f64> {
    Benchmark::new(id).eval(fidelity, x)
}

/// Root mean squared error.
pub fn rmse(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() || predicted.is_empty() {
        return Err(Error::LengthMismatch(predicted.len(), truth.len()));
    }
    let ss: f64 = predicted.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((ss / predicted.len() as f64).sqrt())
}
