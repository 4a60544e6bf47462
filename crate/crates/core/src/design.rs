//! Latin hypercube designs and nested / non-nested two-level designs.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{matrix_from_rows, rows_of};
use crate::error::{Error, Result};

/// SplitMix64 finalizer used to derive independent seed streams.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_lhs(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; d]; n];
    let nf = n as f64;
    for j in 0..d {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        for (i, p) in perm.into_iter().enumerate() {
            let u: f64 = rng.gen();
            pts[i][j] = ((p as f64 + u) / nf).min(((p + 1) as f64 / nf).next_down());
        }
    }
    pts
}

/// Random Latin hypercube on `[0,1)^d`: column `j` has exactly one point in
/// each stratum `[k/n, (k+1)/n)`.
pub fn random_lhs(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_for(seed, 0);
    matrix_from_rows(&draw_lhs(n, d, &mut rng), d)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Smallest pairwise Euclidean distance between rows (infinite for n < 2).
pub fn min_distance(points: &DMatrix<f64>) -> f64 {
    let rows = rows_of(points);
    let mut best = f64::INFINITY;
    for i in 0..rows.len() {
        for j in 0..i {
            best = best.min(dist2(&rows[i], &rows[j]));
        }
    }
    best.sqrt()
}

struct SwapSearch {
    pts: Vec<Vec<f64>>,
    d2: Vec<f64>,
    n: usize,
    min: f64,
    pair: (usize, usize),
}

impl SwapSearch {
    fn new(pts: Vec<Vec<f64>>) -> Self {
        let n = pts.len();
        let mut d2 = vec![f64::INFINITY; n * n];
        for i in 0..n {
            for j in 0..i {
                let v = dist2(&pts[i], &pts[j]);
                d2[i * n + j] = v;
                d2[j * n + i] = v;
            }
        }
        let mut s = SwapSearch {
            pts,
            d2,
            n,
            min: f64::INFINITY,
            pair: (0, 0),
        };
        s.refresh_min();
        s
    }

    fn refresh_min(&mut self) {
        self.min = f64::INFINITY;
        for i in 0..self.n {
            for j in 0..i {
                if self.d2[i * self.n + j] < self.min {
                    self.min = self.d2[i * self.n + j];
                    self.pair = (i, j);
                }
            }
        }
    }

    fn row_distances(&self, p: usize) -> Vec<f64> {
        (0..self.n)
            .map(|k| {
                if k == p {
                    f64::INFINITY
                } else {
                    dist2(&self.pts[p], &self.pts[k])
                }
            })
            .collect()
    }

    /// Swaps one coordinate between a point of the closest pair and another
    /// point; keeps the swap only if the minimum distance does not drop.
    fn step(&mut self, rng: &mut ChaCha8Rng) {
        let n = self.n;
        let d = self.pts[0].len();
        let p = if rng.gen::<bool>() { self.pair.0 } else { self.pair.1 };
        let mut q = rng.gen_range(0..n - 1);
        if q >= p {
            q += 1;
        }
        let c = rng.gen_range(0..d);
        let (vp, vq) = (self.pts[p][c], self.pts[q][c]);
        self.pts[p][c] = vq;
        self.pts[q][c] = vp;
        let rp = self.row_distances(p);
        let rq = self.row_distances(q);
        let new_min = rp.iter().chain(&rq).copied().fold(f64::INFINITY, f64::min);
        if new_min >= self.min {
            for k in 0..n {
                self.d2[p * n + k] = rp[k];
                self.d2[k * n + p] = rp[k];
            }
            for k in 0..n {
                self.d2[q * n + k] = rq[k];
                self.d2[k * n + q] = rq[k];
            }
            self.refresh_min();
        } else {
            self.pts[p][c] = vp;
            self.pts[q][c] = vq;
        }
    }
}

/// Search effort for [`lhs_maximin`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaximinSettings {
    pub restarts: usize,
    pub swaps: usize,
}

impl Default for MaximinSettings {
    fn default() -> Self {
        MaximinSettings {
            restarts: 50,
            swaps: 1000,
        }
    }
}

/// Maximin Latin hypercube: the best of `restarts` random LHS draws,
/// each improved by coordinate-swap hill climbing.
///
/// Restart `r` uses seed stream `r`, so restart 0 starts from
/// `random_lhs(n, d, seed)` and raising `restarts` never lowers the result.
pub fn lhs_maximin(n: usize, d: usize, seed: u64, restarts: usize) -> DMatrix<f64> {
    lhs_maximin_with(
        n,
        d,
        seed,
        MaximinSettings {
            restarts,
            ..Default::default()
        },
    )
}

pub fn lhs_maximin_with(n: usize, d: usize, seed: u64, settings: MaximinSettings) -> DMatrix<f64> {
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for r in 0..settings.restarts.max(1) {
        let mut rng = rng_for(seed, r as u64);
        let pts = draw_lhs(n, d, &mut rng);
        let pts = if n >= 2 && d >= 1 {
            let mut search = SwapSearch::new(pts);
            for _ in 0..settings.swaps {
                search.step(&mut rng);
            }
            (search.min, search.pts)
        } else {
            (f64::INFINITY, pts)
        };
        if best.as_ref().is_none_or(|(m, _)| pts.0 > *m) {
            best = Some(pts);
        }
    }
    let (_, pts) = best.expect("at least one restart");
    matrix_from_rows(&pts, d)
}

/// Inputs of a two-level design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPair {
    #[serde(with = "crate::data::matrix_rows")]
    pub lf_inputs: DMatrix<f64>,
    #[serde(with = "crate::data::matrix_rows")]
    pub hf_inputs: DMatrix<f64>,
    pub nested: bool,
}

/// Greedy maximin subset: starts from the row nearest the centroid and
/// repeatedly adds the row farthest from those already chosen. Returns
/// the chosen indices in ascending order.
pub fn greedy_maximin_subset(points: &DMatrix<f64>, k: usize) -> Vec<usize> {
    let rows = rows_of(points);
    let n = rows.len();
    if k == 0 || n == 0 {
        return Vec::new();
    }
    let d = points.ncols();
    let centroid: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let first = (0..n)
        .min_by(|&a, &b| dist2(&rows[a], &centroid).total_cmp(&dist2(&rows[b], &centroid)))
        .expect("non-empty");
    let mut chosen = vec![first];
    let mut nearest: Vec<f64> = rows.iter().map(|r| dist2(r, &rows[first])).collect();
    while chosen.len() < k.min(n) {
        let next = (0..n)
            .filter(|i| !chosen.contains(i))
            .max_by(|&a, &b| nearest[a].total_cmp(&nearest[b]).then(b.cmp(&a)))
            .expect("rows remain");
        chosen.push(next);
        for (i, r) in rows.iter().enumerate() {
            nearest[i] = nearest[i].min(dist2(r, &rows[next]));
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Builds a low/high fidelity design. Nested designs take the HF points as
/// a greedy maximin subset of the LF points; non-nested designs draw an
/// independent maximin LHS from a separate seed stream.
pub fn build_design(d: usize, n_lf: usize, n_hf: usize, nested: bool, seed: u64) -> Result<DesignPair> {
    build_design_with(d, n_lf, n_hf, nested, seed, MaximinSettings::default())
}

pub fn build_design_with(
    d: usize,
    n_lf: usize,
    n_hf: usize,
    nested: bool,
    seed: u64,
    settings: MaximinSettings,
) -> Result<DesignPair> {
    if d == 0 || n_hf == 0 || n_hf > n_lf {
        return Err(Error::InvalidSizes(format!(
            "need d >= 1 and 1 <= n_hf <= n_lf (d={d}, n_lf={n_lf}, n_hf={n_hf})"
        )));
    }
    let lf = lhs_maximin_with(n_lf, d, derive_seed(seed, 1), settings);
    let hf = if nested {
        let idx = greedy_maximin_subset(&lf, n_hf);
        let rows = rows_of(&lf);
        let picked: Vec<Vec<f64>> = idx.into_iter().map(|i| rows[i].clone()).collect();
        matrix_from_rows(&picked, d)
    } else {
        lhs_maximin_with(n_hf, d, derive_seed(seed, 2), settings)
    };
    Ok(DesignPair {
        lf_inputs: lf,
        hf_inputs: hf,
        nested,
    })
}
