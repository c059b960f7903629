//! Seeded k-means: k-means++ seeding, Lloyd iterations, best of several restarts.

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::Grouping;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            restarts: 10,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansRun {
    pub assignments: Vec<usize>,
    /// k × dim
    pub centroids: DMatrix<f64>,
    /// Within-cluster sum of squares after each assignment step.
    pub history: Vec<f64>,
}

impl KMeansRun {
    pub fn objective(&self) -> f64 {
        *self.history.last().expect("history is never empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// Canonical labels (first appearance order).
    pub grouping: Grouping,
    pub objective: f64,
    pub best_restart: usize,
    pub runs: Vec<KMeansRun>,
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>, c: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(centroids.row(c).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn plus_plus_init(points: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = points.nrows();
    let mut centroids = DMatrix::zeros(k, points.ncols());
    let first = rng.random_range(0..n);
    centroids.set_row(0, &points.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centroids, 0)).collect();
    for c in 1..k {
        let pick = match WeightedIndex::new(&nearest) {
            Ok(dist) => dist.sample(rng),
            // every point already coincides with a centroid
            Err(_) => rng.random_range(0..n),
        };
        centroids.set_row(c, &points.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(points, i, &centroids, c));
        }
    }
    centroids
}

/// Assign each point to its nearest centroid (lowest index on ties).
fn assign(points: &DMatrix<f64>, centroids: &DMatrix<f64>, out: &mut [usize]) -> f64 {
    let mut total = 0.0;
    for (i, slot) in out.iter_mut().enumerate() {
        let mut best = 0;
        let mut best_d = sq_dist(points, i, centroids, 0);
        for c in 1..centroids.nrows() {
            let d = sq_dist(points, i, centroids, c);
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        *slot = best;
        total += best_d;
    }
    total
}

/// Recompute means; an empty cluster is moved onto the point farthest from
/// its own centroid (lowest index on ties, each point used at most once).
fn update(points: &DMatrix<f64>, assignments: &[usize], centroids: &mut DMatrix<f64>) {
    let k = centroids.nrows();
    let mut counts = vec![0usize; k];
    let mut sums = DMatrix::zeros(k, points.ncols());
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        let mut row = sums.row_mut(a);
        row += points.row(i);
    }
    let old = centroids.clone();
    let mut taken = vec![false; points.nrows()];
    for c in 0..k {
        if counts[c] > 0 {
            let mean = sums.row(c) / counts[c] as f64;
            centroids.set_row(c, &mean);
            continue;
        }
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &a) in assignments.iter().enumerate() {
            let d = sq_dist(points, i, &old, a);
            if !taken[i] && d > far_d {
                far = Some(i);
                far_d = d;
            }
        }
        if let Some(i) = far {
            taken[i] = true;
            centroids.set_row(c, &points.row(i));
        }
    }
}

fn lloyd(points: &DMatrix<f64>, k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> Result<KMeansRun> {
    let n = points.nrows();
    let mut centroids = plus_plus_init(points, k, rng);
    let mut assignments = vec![0; n];
    let mut history = vec![assign(points, &centroids, &mut assignments)];
    let mut next = assignments.clone();
    // rounding in the objective scales with the data, not with the objective
    let floor = 64.0 * f64::EPSILON * points.norm_squared();
    for _ in 0..max_iter {
        update(points, &assignments, &mut centroids);
        let obj = assign(points, &centroids, &mut next);
        let prev = *history.last().unwrap();
        if obj > prev * (1.0 + 1e-12) + floor {
            return Err(Error::Numerical(format!(
                "k-means objective increased from {prev:e} to {obj:e}"
            )));
        }
        history.push(obj);
        if next == assignments {
            break;
        }
        std::mem::swap(&mut assignments, &mut next);
    }
    Ok(KMeansRun {
        assignments,
        centroids,
        history,
    })
}

/// Rows of `points` are clustered. Restarts run in parallel; the lowest
/// objective wins, ties going to the lower restart index.
pub fn kmeans(points: &DMatrix<f64>, cfg: &KMeansConfig) -> Result<KMeansFit> {
    let n = points.nrows();
    if cfg.k == 0 || cfg.k > n {
        return Err(Error::Parameter(format!(
            "k-means needs 1 <= k <= n = {n}, got {}",
            cfg.k
        )));
    }
    if cfg.restarts == 0 || cfg.max_iter == 0 {
        return Err(Error::Parameter("k-means needs restarts >= 1 and max_iter >= 1".into()));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("k-means input contains non-finite values".into()));
    }
    let runs = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            lloyd(points, cfg.k, cfg.max_iter, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.objective() < runs[best].objective() {
            best = r;
        }
    }
    let grouping = Grouping::new(runs[best].assignments.clone(), cfg.k)?.canonical();
    Ok(KMeansFit {
        grouping,
        objective: runs[best].objective(),
        best_restart: best,
        runs,
    })
}
