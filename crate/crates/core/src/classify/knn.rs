//! k-nearest-neighbour vote classifier.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_K_GRID: [usize; 13] = [1, 3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub x: DMatrix<f64>,
    pub y: Vec<usize>,
    pub k: usize,
}

pub fn train_knn(x: &DMatrix<f64>, y: &[usize], k: usize) -> Result<KnnModel> {
    if x.nrows() != y.len() {
        return Err(Error::Input(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    if k == 0 || k > y.len() {
        return Err(Error::Parameter(format!(
            "K must satisfy 1 <= K <= {}, got {k}",
            y.len()
        )));
    }
    Ok(KnnModel {
        x: x.clone(),
        y: y.to_vec(),
        k,
    })
}

/// Training indices ordered by distance to `q`, lower index first on ties.
fn neighbour_order(train: &DMatrix<f64>, q: &DMatrix<f64>, row: usize) -> Vec<usize> {
    let d: Vec<f64> = (0..train.nrows())
        .map(|i| {
            (0..train.ncols())
                .map(|j| (train[(i, j)] - q[(row, j)]).powi(2))
                .sum::<f64>()
        })
        .collect();
    let mut order: Vec<usize> = (0..train.nrows()).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    order
}

/// Majority class among the first `k` neighbours, smallest class id on ties.
fn vote(order: &[usize], y: &[usize], k: usize) -> usize {
    let max_class = y.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; max_class + 1];
    for &i in &order[..k] {
        counts[y[i]] += 1;
    }
    let mut best = 0;
    for (c, &v) in counts.iter().enumerate() {
        if v > counts[best] {
            best = c;
        }
    }
    best
}

impl KnnModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        if x.ncols() != self.x.ncols() {
            return Err(Error::Input(format!(
                "expected {} features, got {}",
                self.x.ncols(),
                x.ncols()
            )));
        }
        Ok((0..x.nrows())
            .map(|r| vote(&neighbour_order(&self.x, x, r), &self.y, self.k))
            .collect())
    }
}

/// K from `grid` maximizing instance accuracy under leave-one-group-out
/// over `groups`; the smallest K wins ties. Candidates larger than any
/// inner training fold are skipped.
pub fn select_k(x: &DMatrix<f64>, y: &[usize], groups: &[usize], grid: &[usize]) -> Result<usize> {
    if grid.is_empty() {
        return Err(Error::Parameter("empty K grid".into()));
    }
    let mut ids: Vec<usize> = groups.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Ok(grid.iter().copied().filter(|&k| k <= y.len()).min().unwrap_or(1));
    }
    let mut hits = vec![0usize; grid.len()];
    let mut max_k = usize::MAX;
    for &hold in &ids {
        let train: Vec<usize> = (0..y.len()).filter(|&i| groups[i] != hold).collect();
        let test: Vec<usize> = (0..y.len()).filter(|&i| groups[i] == hold).collect();
        max_k = max_k.min(train.len());
        let xt = DMatrix::from_fn(train.len(), x.ncols(), |r, c| x[(train[r], c)]);
        let yt: Vec<usize> = train.iter().map(|&i| y[i]).collect();
        let xq = DMatrix::from_fn(test.len(), x.ncols(), |r, c| x[(test[r], c)]);
        for (r, &i) in test.iter().enumerate() {
            let order = neighbour_order(&xt, &xq, r);
            for (slot, &k) in grid.iter().enumerate() {
                if k <= train.len() && vote(&order, &yt, k) == y[i] {
                    hits[slot] += 1;
                }
            }
        }
    }
    let mut best: Option<(usize, usize)> = None;
    for (slot, &k) in grid.iter().enumerate() {
        if k == 0 || k > max_k {
            continue;
        }
        match best {
            Some((bk, bh)) if hits[slot] < bh || (hits[slot] == bh && k >= bk) => {}
            _ => best = Some((k, hits[slot])),
        }
    }
    best.map(|(k, _)| k)
        .ok_or_else(|| Error::Parameter(format!("no K in {grid:?} fits inner folds of size {max_k}")))
}
