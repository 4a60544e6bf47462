//! Small GP and hierarchical-kriging instances with values frozen from an
//! independent dense-inverse computation (`oracle/dense_oracle.py`).

use std::sync::Arc;

use mfbma::gp::{FittedLevel, TrendSpec};
use mfbma::{Dataset, KernelConfig};
use nalgebra::DMatrix;

pub struct Frozen {
    pub beta: f64,
    pub variance: f64,
    pub loglik: f64,
    pub mean: [f64; 3],
    pub var: [f64; 3],
}

const SE_1D: Frozen = Frozen {
    beta: 0.43330325937549935,
    variance: 1.0517961537267044,
    loglik: -4.558899461372312,
    mean: [0.6072655938046824, 1.027861892021334, -0.13166111618956916],
    var: [0.001565534687882354, 0.0003279414699649899, 0.0017944656747660116],
};

const M52_2D: Frozen = Frozen {
    beta: 0.5777313484561054,
    variance: 0.45168987494757096,
    loglik: -4.151524617873355,
    mean: [0.6676577814472279, 1.4326262560865515, 1.366860167776994],
    var: [0.01776207485778444, 0.040993472606846416, 0.06478710076754954],
};

const M32_2D: Frozen = Frozen {
    beta: 0.22953301198444645,
    variance: 0.11375478982063499,
    loglik: -1.726991203221624,
    mean: [0.638376179724237, 0.11210239832661217, 0.24669646734435757],
    var: [0.010181961828946184, 0.02241344815084214, 0.0703393542754519],
};

const EXP_1D: Frozen = Frozen {
    beta: 0.3314060139990697,
    variance: 0.9030082493879868,
    loglik: -5.8440537483891575,
    mean: [0.7667456313626659, -0.4819990298649745, -0.6536436208636114],
    var: [0.11232533781887157, 0.03907980358952598, 1.0025405498970009e-16],
};

const HK_SE_LOWER: Frozen = Frozen {
    beta: -1.8572575864370273,
    variance: 46.53905859275005,
    loglik: -20.179393453810334,
    mean: [-8.918232829007106, -4.54535128658716, 0.9214962781793548],
    var: [0.009600070654005227, 1.033374687881008e-14, 0.12994246638717233],
};

const HK_SE_UPPER: Frozen = Frozen {
    beta: 0.8791355259828483,
    variance: 48.320203471732036,
    loglik: -12.587138467440639,
    mean: [1.8337456501459766, -0.1122178924986974, 8.676643533632582],
    var: [2.584230846348534, 0.3044842033942857, 5.384582679349722],
};

const HK_M52_LOWER: Frozen = Frozen {
    beta: 0.16218507876488442,
    variance: 0.28908151996644527,
    loglik: -2.366376207359675,
    mean: [0.2341262251577823, 0.8461010048692412, 0.7934881342215953],
    var: [0.011367727908982037, 0.026235822468381693, 0.041463744491231684],
};

const HK_M52_UPPER: Frozen = Frozen {
    beta: 1.639750626012167,
    variance: 0.02343352637905223,
    loglik: 4.5821040859904745,
    mean: [0.6533443629634688, 1.4440216535807031, 1.3275873136289957],
    var: [0.00126959543122399, 0.0019267967149098591, 0.004404159004869069],
};

pub fn data(rows: &[&[f64]], y: &[f64], fidelity: usize) -> Dataset {
    let d = rows[0].len();
    let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    Dataset::new(DMatrix::from_row_slice(rows.len(), d, &flat), y.to_vec(), fidelity).unwrap()
}

const X1: [&[f64]; 5] = [&[0.05], &[0.3], &[0.5], &[0.7], &[0.95]];
const Q1: [&[f64]; 3] = [&[0.1], &[0.42], &[0.8]];
pub const X2: [&[f64]; 8] = [
    &[0.1, 0.2],
    &[0.8, 0.1],
    &[0.5, 0.5],
    &[0.2, 0.9],
    &[0.9, 0.8],
    &[0.4, 0.05],
    &[0.65, 0.35],
    &[0.3, 0.6],
];
const Q2: [&[f64]; 3] = [&[0.25, 0.25], &[0.6, 0.7], &[0.95, 0.5]];
const X3: [&[f64]; 10] = [
    &[0.0, 0.0],
    &[1.0, 0.0],
    &[0.0, 1.0],
    &[1.0, 1.0],
    &[0.5, 0.5],
    &[0.25, 0.75],
    &[0.75, 0.25],
    &[0.3, 0.2],
    &[0.7, 0.8],
    &[0.55, 0.1],
];
const X4: [&[f64]; 6] = [&[0.0], &[0.2], &[0.4], &[0.55], &[0.8], &[1.0]];

fn forrester_hf(x: f64) -> f64 {
    (6.0 * x - 2.0).powi(2) * (12.0 * x - 4.0).sin()
}

fn forrester_lf(x: f64) -> f64 {
    0.5 * forrester_hf(x) + 10.0 * (x - 0.5) - 5.0
}

pub fn g2(x: &[f64]) -> f64 {
    x[0] * x[0] + (3.0 * x[1]).sin()
}

pub fn fixed(ds: &Dataset, kernel: KernelConfig, trend: TrendSpec, ls: &[f64]) -> FittedLevel {
    FittedLevel::with_lengthscales(ds, kernel, trend, ls.to_vec()).unwrap()
}

/// A fixed-hyperparameter level, its queries and the frozen reference.
pub struct Instance {
    pub name: &'static str,
    pub level: FittedLevel,
    pub queries: Vec<Vec<f64>>,
    pub want: &'static Frozen,
}

fn instance(name: &'static str, level: FittedLevel, queries: &[&[f64]], want: &'static Frozen) -> Instance {
    Instance {
        name,
        level,
        queries: queries.iter().map(|q| q.to_vec()).collect(),
        want,
    }
}

pub fn instances() -> Vec<Instance> {
    let mut out = Vec::new();

    let y: Vec<f64> = X1.iter().map(|x| (6.0 * x[0]).sin() + x[0]).collect();
    let lvl = fixed(
        &data(&X1, &y, 1),
        KernelConfig::SquaredExponential,
        TrendSpec::Constant,
        &[0.3],
    );
    out.push(instance("se_1d", lvl, &Q1, &SE_1D));

    let y: Vec<f64> = X2.iter().map(|x| g2(x)).collect();
    let lvl = fixed(
        &data(&X2, &y, 1),
        KernelConfig::Matern52,
        TrendSpec::Constant,
        &[0.4, 0.7],
    );
    out.push(instance("matern52_2d", lvl, &Q2, &M52_2D));

    let y: Vec<f64> = X3.iter().map(|x| (-x[0]).exp() * (2.0 * x[1]).cos()).collect();
    let lvl = fixed(
        &data(&X3, &y, 1),
        KernelConfig::Matern32,
        TrendSpec::Constant,
        &[0.5, 0.25],
    );
    out.push(instance("matern32_2d", lvl, &Q2, &M32_2D));

    let y: Vec<f64> = X4.iter().map(|x| (5.0 * x[0]).cos()).collect();
    let lvl = fixed(
        &data(&X4, &y, 1),
        KernelConfig::Exponential,
        TrendSpec::Constant,
        &[0.8],
    );
    out.push(instance("exponential_1d", lvl, &Q1, &EXP_1D));

    let xl: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 / 6.0]).collect();
    let xl_ref: Vec<&[f64]> = xl.iter().map(|v| v.as_slice()).collect();
    let yl: Vec<f64> = xl.iter().map(|x| forrester_lf(x[0])).collect();
    let xh: [&[f64]; 4] = [&[0.0], &[0.4], &[0.6], &[1.0]];
    let yh: Vec<f64> = xh.iter().map(|x| forrester_hf(x[0])).collect();
    let q: [&[f64]; 3] = [&[0.15], &[0.5], &[0.9]];
    let lower = Arc::new(fixed(
        &data(&xl_ref, &yl, 1),
        KernelConfig::SquaredExponential,
        TrendSpec::Constant,
        &[0.2],
    ));
    let upper = fixed(
        &data(&xh, &yh, 2),
        KernelConfig::SquaredExponential,
        TrendSpec::Level(lower.clone()),
        &[0.3],
    );
    out.push(instance("hk_se_lower", (*lower).clone(), &q, &HK_SE_LOWER));
    out.push(instance("hk_se_upper", upper, &q, &HK_SE_UPPER));

    let yl: Vec<f64> = X2.iter().map(|x| 0.8 * g2(x) - 0.3).collect();
    let xh: Vec<&[f64]> = [0, 2, 4, 6, 7].iter().map(|&i| X2[i]).collect();
    let yh: Vec<f64> = xh.iter().map(|x| g2(x)).collect();
    let lower = Arc::new(fixed(
        &data(&X2, &yl, 1),
        KernelConfig::Matern52,
        TrendSpec::Constant,
        &[0.4, 0.7],
    ));
    let upper = fixed(
        &data(&xh, &yh, 2),
        KernelConfig::Matern52,
        TrendSpec::Level(lower.clone()),
        &[0.6, 0.5],
    );
    out.push(instance("hk_matern52_lower", (*lower).clone(), &Q2, &HK_M52_LOWER));
    out.push(instance("hk_matern52_upper", upper, &Q2, &HK_M52_UPPER));

    out
}

impl Instance {
    /// Largest absolute deviation over beta, variance, log-likelihood and
    /// the predictive moments at every query.
    pub fn max_error(&self) -> f64 {
        let w = self.want;
        let mut err = (self.level.beta() - w.beta)
            .abs()
            .max((self.level.process_variance() - w.variance).abs())
            .max((self.level.log_marginal_likelihood() - w.loglik).abs());
        for (i, q) in self.queries.iter().enumerate() {
            let (m, v) = self.level.predict_point(q);
            err = err.max((m - w.mean[i]).abs()).max((v - w.var[i]).abs());
        }
        err
    }
}
