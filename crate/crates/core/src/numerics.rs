//! Dense symmetric positive-definite linear algebra.
//!
//! Every covariance solve in the library goes through [`SpdFactor`]: a
//! lower Cholesky factor computed with an escalating diagonal jitter.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative asymmetry tolerated by [`cholesky_spd`].
const SYMMETRY_TOL: f64 = 1e-12;

/// Ordered diagonal boosts tried until factorization succeeds.
#[derive(Debug, Clone, PartialEq)]
pub enum JitterSchedule {
    /// Boosts added verbatim.
    Absolute(Vec<f64>),
    /// Boosts multiplied by the mean diagonal of the matrix.
    Relative(Vec<f64>),
}

impl Default for JitterSchedule {
    fn default() -> Self {
        JitterSchedule::Relative(vec![0.0, 1e-10, 1e-8, 1e-6, 1e-4])
    }
}

impl JitterSchedule {
    fn levels(&self, mean_diag: f64) -> Vec<f64> {
        match self {
            JitterSchedule::Absolute(v) => v.clone(),
            JitterSchedule::Relative(v) => v.iter().map(|j| j * mean_diag).collect(),
        }
    }

    /// The same schedule with every level above `max_relative` removed.
    pub fn capped(&self, max_relative: f64) -> Self {
        match self {
            JitterSchedule::Absolute(v) => {
                JitterSchedule::Absolute(v.iter().copied().filter(|j| *j <= max_relative).collect())
            }
            JitterSchedule::Relative(v) => {
                JitterSchedule::Relative(v.iter().copied().filter(|j| *j <= max_relative).collect())
            }
        }
    }
}

/// Lower Cholesky factor of `A + jitter_used * I`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor {
    n: usize,
    /// Row-major lower triangle (upper part zero).
    lower: Vec<f64>,
    jitter_used: f64,
}

impl SpdFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn lower_factor(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.lower)
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.lower[i * self.n..i * self.n + i + 1]
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.n);
        let mut y = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let row = self.row(i);
            let s = b[i] - dot(&row[..i], &y);
            y.push(s / row[i]);
        }
        y
    }

    /// Solves `L^T x = y` in place.
    pub fn backward_in_place(&self, y: &mut [f64]) {
        debug_assert_eq!(y.len(), self.n);
        for i in (0..self.n).rev() {
            let row = self.row(i);
            y[i] /= row[i];
            let xi = y[i];
            for (yk, lik) in y[..i].iter_mut().zip(&row[..i]) {
                *yk -= lik * xi;
            }
        }
    }

    /// Solves `(A + jitter I) x = b` for a single right-hand side.
    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let mut y = self.forward(b);
        self.backward_in_place(&mut y);
        Ok(y)
    }

    /// Solves `(A + jitter I) X = B` column by column.
    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.nrows(),
            });
        }
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for (j, col) in b.column_iter().enumerate() {
            let x = self.solve_vec(col.as_slice())?;
            out.column_mut(j).copy_from_slice(&x);
        }
        Ok(out)
    }

    /// `2 * sum(ln L_ii)`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.lower[i * self.n + i].ln()).sum::<f64>()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Factorizes a symmetric matrix, escalating the diagonal jitter until
/// the factorization succeeds.
pub fn cholesky_spd(a: &DMatrix<f64>, schedule: &JitterSchedule) -> Result<SpdFactor> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    let n = a.nrows();
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            rows.push(a[(i, j)]);
        }
    }
    let scale = rows.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((rows[i * n + j] - rows[j * n + i]).abs());
        }
    }
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NonSymmetric(asym));
    }
    cholesky_row_major(&rows, n, schedule)
}

/// Factorizes a row-major symmetric `n x n` buffer; only the lower
/// triangle is read.
pub(crate) fn cholesky_row_major(a: &[f64], n: usize, schedule: &JitterSchedule) -> Result<SpdFactor> {
    let mean_diag = if n == 0 {
        1.0
    } else {
        (0..n).map(|i| a[i * n + i]).sum::<f64>() / n as f64
    };
    let levels = schedule.levels(mean_diag);
    let mut lower = vec![0.0; n * n];
    let mut last = 0.0;
    for jitter in levels {
        last = jitter;
        if try_factor(a, n, jitter, &mut lower) {
            return Ok(SpdFactor {
                n,
                lower,
                jitter_used: jitter,
            });
        }
    }
    Err(Error::NotPositiveDefinite(last))
}

fn try_factor(a: &[f64], n: usize, jitter: f64, lower: &mut [f64]) -> bool {
    lower.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        for j in 0..=i {
            let (head, tail) = lower.split_at_mut(i * n);
            let row_i = &tail[..n];
            let s = if j == i {
                a[i * n + i] + jitter - dot(&row_i[..j], &row_i[..j])
            } else {
                let row_j = &head[j * n..j * n + j];
                a[i * n + j] - dot(&row_i[..j], row_j)
            };
            if j == i {
                if !(s > 0.0) || !s.is_finite() {
                    return false;
                }
                tail[i] = s.sqrt();
            } else {
                let ljj = head[j * n + j];
                tail[j] = s / ljj;
            }
        }
    }
    true
}

/// Log-determinant of a factored matrix.
pub fn log_det(factor: &SpdFactor) -> f64 {
    factor.log_det()
}

/// Solves `(A + jitter I) X = B`.
pub fn solve_with_factor(factor: &SpdFactor, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    factor.solve(b)
}
