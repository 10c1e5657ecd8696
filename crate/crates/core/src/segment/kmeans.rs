//! Lloyd's k-means with k-means++ seeding.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once the relative inertia improvement of an iteration is at most
    /// `tol`. With `tol = 0` iteration runs until assignments are stable.
    pub tol: f64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iter: 100,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub assignments: Vec<usize>,
    /// `dim × k`, one centroid per column.
    pub centroids: DMatrix<f64>,
    pub inertia: f64,
    /// Inertia after every assignment step, first entry from the seeding.
    pub history: Vec<f64>,
    pub n_iter: usize,
    /// Whether the last iteration left every assignment unchanged.
    pub converged: bool,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.ncols()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Squared distance of point `i` of `points` to its centroid.
    pub fn sq_distance(&self, points: &DMatrix<f64>, i: usize) -> f64 {
        sq_dist(column(points, i), column(&self.centroids, self.assignments[i]))
    }
}

#[inline]
pub(crate) fn column(m: &DMatrix<f64>, j: usize) -> &[f64] {
    let d = m.nrows();
    &m.as_slice()[j * d..(j + 1) * d]
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid (lowest index on ties) and squared distance.
pub(crate) fn nearest(point: &[f64], centroids: &DMatrix<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.ncols() {
        let d = sq_dist(point, column(centroids, c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(points: &DMatrix<f64>, centroids: &DMatrix<f64>) -> (Vec<usize>, Vec<f64>, f64) {
    let (labels, dists): (Vec<usize>, Vec<f64>) = (0..points.ncols())
        .into_par_iter()
        .map(|i| nearest(column(points, i), centroids))
        .unzip();
    let inertia = dists.iter().sum();
    (labels, dists, inertia)
}

fn plus_plus_init<R: Rng>(points: &DMatrix<f64>, k: usize, rng: &mut R) -> DMatrix<f64> {
    let (d, n) = points.shape();
    let mut centroids = DMatrix::zeros(d, k);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centroids.column_mut(0).copy_from_slice(column(points, first));
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(column(points, i), column(points, first))).collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                if w > 0.0 && r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            // rounding can leave `pick` on an already chosen point
            if chosen[pick] {
                pick = (0..n).rev().find(|&i| dist[i] > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            // all remaining points coincide with a centroid
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centroids.column_mut(c).copy_from_slice(column(points, pick));
        for (i, dd) in dist.iter_mut().enumerate() {
            *dd = dd.min(sq_dist(column(points, i), column(points, pick)));
        }
    }
    centroids
}

fn update(points: &DMatrix<f64>, labels: &[usize], dists: &[f64], k: usize) -> DMatrix<f64> {
    let d = points.nrows();
    let mut sums = DMatrix::zeros(d, k);
    let mut counts = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        let mut col = sums.column_mut(c);
        for (s, v) in col.iter_mut().zip(column(points, i)) {
            *s += v;
        }
    }
    let mut taken = vec![false; labels.len()];
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            let inv = 1.0 / count as f64;
            sums.column_mut(c).scale_mut(inv);
        } else {
            // empty cluster: re-seed at the point farthest from its centroid
            let far = (0..labels.len())
                .filter(|&i| !taken[i])
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                .expect("k <= n leaves a free point");
            taken[far] = true;
            sums.column_mut(c).copy_from_slice(column(points, far));
        }
    }
    sums
}

/// Cluster the columns of `points` (dim × n).
pub fn kmeans(points: &DMatrix<f64>, config: &KMeansConfig) -> Result<Clustering> {
    let n = points.ncols();
    let k = config.k;
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} must be in 1..={n} (number of points)")));
    }
    let mut rng = seed::rng(seed::derive_seed(config.seed, "kmeans"));
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let (mut labels, mut dists, mut inertia) = assign(points, &centroids);
    let mut history = vec![inertia];
    let mut n_iter = 0;
    let mut converged = false;
    while n_iter < config.max_iter {
        n_iter += 1;
        centroids = update(points, &labels, &dists, k);
        let (new_labels, new_dists, new_inertia) = assign(points, &centroids);
        history.push(new_inertia);
        let improvement = inertia - new_inertia;
        let stable = new_labels == labels;
        labels = new_labels;
        dists = new_dists;
        let prev = inertia;
        inertia = new_inertia;
        if stable {
            converged = true;
            break;
        }
        if config.tol > 0.0 && improvement <= config.tol * prev {
            break;
        }
    }
    Ok(Clustering {
        assignments: labels,
        centroids,
        inertia,
        history,
        n_iter,
        converged,
    })
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must have equal length");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |v: u64| (v * v.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&v| c2(v)).sum();
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    let expected = rows * cols / total;
    let max = (rows + cols) / 2.0;
    if max == expected {
        1.0
    } else {
        (index - expected) / (max - expected)
    }
}
