//! Box-constrained Nelder-Mead with deterministic multi-start.

use serde::{Deserialize, Serialize};

use crate::design::random_lhs;

/// Settings for the lengthscale search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    /// Space-filling starts in addition to the fixed start.
    pub starts: usize,
    pub seed: u64,
    /// Lengthscale used for the fixed start in every dimension.
    pub fixed_start: f64,
    pub min_lengthscale: f64,
    pub max_lengthscale: f64,
    /// Evaluations per input dimension for the short screening run of
    /// every start.
    pub screen_evals_per_dim: usize,
    /// Number of screened starts that are refined.
    pub refine_top: usize,
    /// Evaluations per input dimension for each refinement.
    pub evals_per_dim: usize,
    pub f_tol: f64,
    pub x_tol: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            starts: 8,
            seed: 0,
            fixed_start: 0.5,
            min_lengthscale: 0.01,
            max_lengthscale: 10.0,
            screen_evals_per_dim: 20,
            refine_top: 2,
            evals_per_dim: 120,
            f_tol: 1e-9,
            x_tol: 1e-4,
        }
    }
}

impl OptimizerSettings {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Starting points in log-lengthscale space. The fixed start comes last.
    pub fn start_points(&self, d: usize) -> Vec<Vec<f64>> {
        let (lo, hi) = (self.min_lengthscale.ln(), self.max_lengthscale.ln());
        let mut pts: Vec<Vec<f64>> = if self.starts > 0 {
            let lhs = random_lhs(self.starts, d, self.seed);
            (0..self.starts)
                .map(|i| (0..d).map(|j| lo + (hi - lo) * lhs[(i, j)]).collect())
                .collect()
        } else {
            Vec::new()
        };
        pts.push(vec![self.fixed_start.ln().clamp(lo, hi); d]);
        pts
    }
}

/// Result of a minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

/// Minimizes `f` over the box `[lo, hi]^d` from `start`. Non-finite
/// values are treated as `+inf`. Never returns a point worse than `start`.
pub fn nelder_mead<F>(f: &mut F, start: &[f64], lo: f64, hi: f64, max_evals: usize, f_tol: f64, x_tol: f64) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let nf = n as f64;
    // dimension-adaptive coefficients; the classic ones for n <= 2
    let (alpha, gamma, rho, sigma) = if n <= 2 {
        (1.0, 2.0, 0.5, 0.5)
    } else {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf)
    };
    let clamp = |v: &mut Vec<f64>| v.iter_mut().for_each(|c| *c = c.clamp(lo, hi));
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let step = 0.1 * (hi - lo);
    let mut x0 = start.to_vec();
    clamp(&mut x0);
    let mut simplex = vec![x0.clone()];
    for i in 0..n {
        let mut v = x0.clone();
        v[i] = if v[i] + step <= hi { v[i] + step } else { v[i] - step };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evals)).collect();

    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let (best, worst) = (values[0], values[n]);
        let diameter = simplex[1..]
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if best.is_finite() && (worst - best).abs() <= f_tol * (best.abs() + f_tol) && diameter <= x_tol {
            break;
        }

        let mut centroid = vec![0.0; n];
        for p in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut v: Vec<f64> = centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect();
            v.iter_mut().for_each(|c| *c = c.clamp(lo, hi));
            v
        };

        let xr = along(alpha);
        let fr = eval(&xr, &mut evals);
        if fr < values[0] {
            let xe = along(gamma);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(rho);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        for i in 1..=n {
            let shrunk: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, p)| b + sigma * (p - b))
                .collect();
            values[i] = eval(&shrunk, &mut evals);
            simplex[i] = shrunk;
        }
    }

    let (i_best, &v_best) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .expect("simplex is non-empty");
    Minimum {
        x: simplex[i_best].clone(),
        value: v_best,
        evals,
    }
}

/// Screens every start with a short Nelder-Mead run, refines the best
/// `refine_top` of them (with one polishing restart each) and keeps the
/// lowest value. Ties keep the earliest start.
pub fn multi_start_minimize<F>(
    f: &mut F,
    starts: &[Vec<f64>],
    lo: f64,
    hi: f64,
    settings: &OptimizerSettings,
) -> Option<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    let d = starts.first()?.len().max(1);
    let screen_budget = settings.screen_evals_per_dim * d;
    let budget = settings.evals_per_dim * d;
    let mut screened: Vec<(usize, Minimum)> = starts
        .iter()
        .map(|s| nelder_mead(f, s, lo, hi, screen_budget.max(d + 1), settings.f_tol, settings.x_tol))
        .enumerate()
        .filter(|(_, m)| m.value.is_finite())
        .collect();
    screened.sort_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)));
    let mut best: Option<Minimum> = None;
    for (_, s) in screened.into_iter().take(settings.refine_top.max(1)) {
        let first = nelder_mead(f, &s.x, lo, hi, budget, settings.f_tol, settings.x_tol);
        let first = if first.value <= s.value { first } else { s };
        let remaining = budget.saturating_sub(first.evals).max(4 * (d + 1));
        let polished = nelder_mead(f, &first.x, lo, hi, remaining, settings.f_tol, settings.x_tol);
        let m = if polished.value <= first.value { polished } else { first };
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let mut f = |x: &[f64]| (x[0] - 0.3).powi(2) + 4.0 * (x[1] + 0.7).powi(2);
        let m = nelder_mead(&mut f, &[1.0, 1.0], -2.0, 2.0, 2000, 1e-14, 1e-9);
        assert!((m.x[0] - 0.3).abs() < 1e-5 && (m.x[1] + 0.7).abs() < 1e-5, "{m:?}");
    }

    #[test]
    fn respects_bounds() {
        let mut f = |x: &[f64]| x[0];
        let m = nelder_mead(&mut f, &[0.5], 0.0, 1.0, 500, 1e-12, 1e-9);
        assert!(m.x[0] >= 0.0 && m.x[0] < 1e-6);
    }

    #[test]
    fn infinite_regions_are_avoided() {
        let mut f = |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { (x[0] - 0.2).powi(2) };
        let m = nelder_mead(&mut f, &[0.0], -1.0, 1.0, 500, 1e-14, 1e-9);
        assert!((m.x[0] - 0.2).abs() < 1e-5);
    }

    #[test]
    fn multistart_is_deterministic_and_never_worse_than_starts() {
        let s = OptimizerSettings::default().with_seed(7);
        let starts = s.start_points(2);
        assert_eq!(starts.len(), 9);
        assert_eq!(starts, s.start_points(2));
        let mut f = |x: &[f64]| (x[0].sin() * 3.0 + x[1]).powi(2) + 0.1 * x[1] * x[1];
        let (lo, hi) = (0.01f64.ln(), 10f64.ln());
        let m = multi_start_minimize(&mut f, &starts, lo, hi, &s).unwrap();
        for p in &starts {
            assert!(m.value <= f(p));
        }
        let again = multi_start_minimize(&mut f, &starts, lo, hi, &s).unwrap();
        assert_eq!(m, again);
    }
}
