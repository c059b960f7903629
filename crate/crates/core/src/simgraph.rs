//! Similarity graph construction over a [`DistanceMatrix`].
//!
//! Four classical models (ε-neighbourhood, symmetric and mutual kNN, fully
//! connected Gaussian) and two relative-similarity models. The relative
//! models start from row-normalized inverse-power distances
//!
//! ```text
//! s_init[i][j] = d_ij^m / Σ_{l≠i} d_il^m,   m < 0
//! ```
//!
//! keep every `s_init ≥ w`, and map smaller values through the Gaussian
//! density `f(s) = exp(-(s - w)² / 2σ²) / (σ√(2π))`:
//!
//! * threshold model: zero when `f < ε_w`, otherwise `min(f, w)`;
//! * criterion model: `min(f, w)` with probability `f / f_peak`, else zero,
//!   drawn from a seeded ChaCha stream in row-major pair order.
//!
//! Both directed weight matrices are then symmetrized by elementwise min or
//! max.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::DistanceMatrix;
use crate::error::{Error, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetrize {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnMode {
    Symmetric,
    Mutual,
}

/// Construction tag carried by every [`SimilarityGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphModel {
    Epsilon,
    Knn(KnnMode),
    FullyConnected,
    ProbThreshold(Symmetrize),
    ProbCriterion(Symmetrize),
}

impl GraphModel {
    pub const ALL: [GraphModel; 8] = [
        GraphModel::ProbThreshold(Symmetrize::Min),
        GraphModel::ProbThreshold(Symmetrize::Max),
        GraphModel::ProbCriterion(Symmetrize::Min),
        GraphModel::ProbCriterion(Symmetrize::Max),
        GraphModel::Epsilon,
        GraphModel::Knn(KnnMode::Symmetric),
        GraphModel::Knn(KnnMode::Mutual),
        GraphModel::FullyConnected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GraphModel::Epsilon => "epsilon",
            GraphModel::Knn(KnnMode::Symmetric) => "knn_symmetric",
            GraphModel::Knn(KnnMode::Mutual) => "knn_mutual",
            GraphModel::FullyConnected => "fully_connected",
            GraphModel::ProbThreshold(Symmetrize::Min) => "prob_threshold_min",
            GraphModel::ProbThreshold(Symmetrize::Max) => "prob_threshold_max",
            GraphModel::ProbCriterion(Symmetrize::Min) => "prob_criterion_min",
            GraphModel::ProbCriterion(Symmetrize::Max) => "prob_criterion_max",
        }
    }

    pub fn is_probabilistic(self) -> bool {
        matches!(self, GraphModel::ProbThreshold(_) | GraphModel::ProbCriterion(_))
    }
}

impl fmt::Display for GraphModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GraphModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GraphModel::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<_> = GraphModel::ALL.iter().map(|m| m.name()).collect();
            Error::Parameter(format!("unknown graph model `{s}` (expected one of {names:?})"))
        })
    }
}

impl Serialize for GraphModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for GraphModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Flat parameter record. Only the fields relevant to the model are set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub w_thresh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub m: Option<f64>,
    /// Similarity below which the threshold model always yields zero.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub s_eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub symmetrize: Option<Symmetrize>,
}

/// A fully specified graph construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum GraphSpec {
    Epsilon {
        epsilon: f64,
    },
    Knn {
        k: usize,
        mode: KnnMode,
        /// Gaussian edge width; `None` means the median off-diagonal distance.
        sigma: Option<f64>,
    },
    FullyConnected {
        sigma: f64,
    },
    ProbThreshold {
        w: f64,
        sigma: f64,
        eps_weight: f64,
        m: f64,
        symmetrize: Symmetrize,
    },
    ProbCriterion {
        w: f64,
        sigma: f64,
        m: f64,
        symmetrize: Symmetrize,
        seed: Option<u64>,
    },
}

impl GraphSpec {
    pub fn model(&self) -> GraphModel {
        match self {
            GraphSpec::Epsilon { .. } => GraphModel::Epsilon,
            GraphSpec::Knn { mode, .. } => GraphModel::Knn(*mode),
            GraphSpec::FullyConnected { .. } => GraphModel::FullyConnected,
            GraphSpec::ProbThreshold { symmetrize, .. } => GraphModel::ProbThreshold(*symmetrize),
            GraphSpec::ProbCriterion { symmetrize, .. } => GraphModel::ProbCriterion(*symmetrize),
        }
    }

    /// Same spec with the stochastic seed replaced (no-op for deterministic models).
    pub fn with_seed(mut self, new_seed: u64) -> Self {
        if let GraphSpec::ProbCriterion { seed, .. } = &mut self {
            *seed = Some(new_seed);
        }
        self
    }

    pub fn build(&self, d: &DistanceMatrix) -> Result<SimilarityGraph> {
        match *self {
            GraphSpec::Epsilon { epsilon } => epsilon_graph(d, epsilon),
            GraphSpec::Knn { k, mode, sigma } => knn_graph(d, k, mode, sigma),
            GraphSpec::FullyConnected { sigma } => fully_connected_gaussian(d, sigma),
            GraphSpec::ProbThreshold {
                w,
                sigma,
                eps_weight,
                m,
                symmetrize,
            } => {
                let s = initial_similarities(d, m)?;
                prob_threshold_graph(&s, w, sigma, eps_weight, symmetrize)
            }
            GraphSpec::ProbCriterion {
                w,
                sigma,
                m,
                symmetrize,
                seed,
            } => {
                let s = initial_similarities(d, m)?;
                prob_criterion_graph(&s, w, sigma, symmetrize, seed)
            }
        }
    }
}

/// Symmetric nonnegative weight matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    w: DMatrix<f64>,
    model: GraphModel,
    params: GraphParams,
    seed: Option<u64>,
}

impl SimilarityGraph {
    /// Wraps a weight matrix after checking the graph invariants. Used by
    /// deserialization and by callers that build weights themselves.
    pub fn from_weights(w: DMatrix<f64>, model: GraphModel, params: GraphParams, seed: Option<u64>) -> Result<Self> {
        let n = w.nrows();
        if w.ncols() != n {
            return Err(Error::Input(format!("weight matrix is {}x{}", n, w.ncols())));
        }
        for i in 0..n {
            if w[(i, i)] != 0.0 {
                return Err(Error::Input(format!("nonzero self-similarity at {i}")));
            }
            for j in (i + 1)..n {
                let v = w[(i, j)];
                if !v.is_finite() || v < 0.0 || v != w[(j, i)] {
                    return Err(Error::Input(format!("invalid weight at ({i}, {j}): {v}")));
                }
            }
        }
        Ok(Self { w, model, params, seed })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn model(&self) -> GraphModel {
        self.model
    }

    pub fn params(&self) -> &GraphParams {
        &self.params
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Number of undirected edges with positive weight.
    pub fn edge_count(&self) -> usize {
        let n = self.n();
        (0..n)
            .map(|i| ((i + 1)..n).filter(|&j| self.w[(i, j)] > 0.0).count())
            .sum()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.w[(i, j)] > 0.0
    }

    pub fn to_document(&self) -> GraphDocument {
        let n = self.n();
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.w[(i, j)];
                if v > 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        GraphDocument {
            n,
            model: self.model,
            params: self.params.clone(),
            seed: self.seed,
            triplets,
        }
    }

    pub fn from_document(doc: &GraphDocument) -> Result<Self> {
        let mut w = DMatrix::zeros(doc.n, doc.n);
        for &(i, j, v) in &doc.triplets {
            if i >= j || j >= doc.n {
                return Err(Error::Input(format!(
                    "triplet ({i}, {j}) is not upper-triangular in n = {}",
                    doc.n
                )));
            }
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
        Self::from_weights(w, doc.model, doc.params.clone(), doc.seed)
    }
}

/// Serialized form: only nonzero upper-triangle entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub n: usize,
    pub model: GraphModel,
    pub params: GraphParams,
    pub seed: Option<u64>,
    pub triplets: Vec<(usize, usize, f64)>,
}

/// Row-normalized inverse-power similarities; not symmetric in general.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialSimilarities {
    s: DMatrix<f64>,
    m: f64,
}

impl InitialSimilarities {
    pub fn n(&self) -> usize {
        self.s.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.s[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn exponent(&self) -> f64 {
        self.m
    }
}

pub fn initial_similarities(d: &DistanceMatrix, m: f64) -> Result<InitialSimilarities> {
    if m >= 0.0 || !m.is_finite() {
        return Err(Error::Parameter(format!("smoothing exponent m must be < 0, got {m}")));
    }
    let n = d.n();
    if n < 2 {
        return Err(Error::Parameter("initial similarities need n >= 2".into()));
    }
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut total = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let dij = d.get(i, j);
            if dij == 0.0 {
                return Err(Error::DegenerateDistance {
                    i: i.min(j),
                    j: i.max(j),
                });
            }
            let v = dij.powf(m);
            s[(i, j)] = v;
            total += v;
        }
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::Numerical(format!("row {i} of d^m sums to {total}")));
        }
        for j in 0..n {
            s[(i, j)] /= total;
        }
    }
    Ok(InitialSimilarities { s, m })
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be > 0, got {v}")))
    }
}

#[inline]
fn gaussian_similarity(d: f64, sigma: f64) -> f64 {
    (-(d * d) / (2.0 * sigma * sigma)).exp()
}

/// Unweighted graph joining pairs strictly closer than `epsilon`.
pub fn epsilon_graph(d: &DistanceMatrix, epsilon: f64) -> Result<SimilarityGraph> {
    check_positive("epsilon", epsilon)?;
    let n = d.n();
    let w = DMatrix::from_fn(n, n, |i, j| if i != j && d.get(i, j) < epsilon { 1.0 } else { 0.0 });
    Ok(SimilarityGraph {
        w,
        model: GraphModel::Epsilon,
        params: GraphParams {
            epsilon: Some(epsilon),
            ..GraphParams::default()
        },
        seed: None,
    })
}

/// Directed k-nearest-neighbour lists; distance ties go to the lower index.
pub fn knn_lists(d: &DistanceMatrix, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = d.n();
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!(
            "k must satisfy 1 <= k <= n-1 = {}, got {k}",
            n.saturating_sub(1)
        )));
    }
    Ok((0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| d.get(i, a).total_cmp(&d.get(i, b)).then(a.cmp(&b)));
            others.truncate(k);
            others
        })
        .collect())
}

pub fn knn_graph(d: &DistanceMatrix, k: usize, mode: KnnMode, sigma: Option<f64>) -> Result<SimilarityGraph> {
    let lists = knn_lists(d, k)?;
    let sigma = match sigma {
        Some(s) => {
            check_positive("sigma", s)?;
            s
        }
        None => {
            let med = d.median_off_diagonal();
            if med > 0.0 {
                med
            } else {
                1.0
            }
        }
    };
    let n = d.n();
    let mut directed = vec![vec![false; n]; n];
    for (i, list) in lists.iter().enumerate() {
        for &j in list {
            directed[i][j] = true;
        }
    }
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let linked = match mode {
                KnnMode::Symmetric => directed[i][j] || directed[j][i],
                KnnMode::Mutual => directed[i][j] && directed[j][i],
            };
            if linked {
                let v = gaussian_similarity(d.get(i, j), sigma);
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
    }
    Ok(SimilarityGraph {
        w,
        model: GraphModel::Knn(mode),
        params: GraphParams {
            k: Some(k),
            sigma: Some(sigma),
            ..GraphParams::default()
        },
        seed: None,
    })
}

pub fn fully_connected_gaussian(d: &DistanceMatrix, sigma: f64) -> Result<SimilarityGraph> {
    check_positive("sigma", sigma)?;
    let n = d.n();
    let w = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            gaussian_similarity(d.get(i, j), sigma)
        }
    });
    Ok(SimilarityGraph {
        w,
        model: GraphModel::FullyConnected,
        params: GraphParams {
            sigma: Some(sigma),
            ..GraphParams::default()
        },
        seed: None,
    })
}

/// Gaussian density with mean `w` and standard deviation `sigma`, at `s`.
#[inline]
pub fn truncated_density(s: f64, w: f64, sigma: f64) -> f64 {
    (-(s - w) * (s - w) / (2.0 * sigma * sigma)).exp() / (sigma * SQRT_2PI)
}

/// Peak of [`truncated_density`], reached at `s = w`.
#[inline]
pub fn density_peak(sigma: f64) -> f64 {
    1.0 / (sigma * SQRT_2PI)
}

/// The similarity `s_eps < w` at which the density equals `eps_weight`.
///
/// Returns `w` when `eps_weight` is at or above the density peak (every
/// below-threshold similarity is then cut).
pub fn weight_floor(w: f64, sigma: f64, eps_weight: f64) -> f64 {
    let ratio = eps_weight / density_peak(sigma);
    if ratio >= 1.0 {
        w
    } else {
        w - sigma * (-2.0 * ratio.ln()).sqrt()
    }
}

fn check_relative_params(w: f64, sigma: f64) -> Result<()> {
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::Parameter(format!("w_thresh must lie in (0, 1), got {w}")));
    }
    check_positive("sigma", sigma)
}

pub fn prob_threshold_graph(
    s: &InitialSimilarities,
    w_thresh: f64,
    sigma: f64,
    eps_weight: f64,
    rule: Symmetrize,
) -> Result<SimilarityGraph> {
    check_relative_params(w_thresh, sigma)?;
    check_positive("eps_weight", eps_weight)?;
    let n = s.n();
    let mut directed = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = s.get(i, j);
            directed[(i, j)] = if v >= w_thresh {
                v
            } else {
                let f = truncated_density(v, w_thresh, sigma);
                if f < eps_weight {
                    0.0
                } else {
                    f.min(w_thresh)
                }
            };
        }
    }
    Ok(SimilarityGraph {
        w: symmetrize(&directed, rule),
        model: GraphModel::ProbThreshold(rule),
        params: GraphParams {
            sigma: Some(sigma),
            w_thresh: Some(w_thresh),
            eps_weight: Some(eps_weight),
            m: Some(s.exponent()),
            s_eps: Some(weight_floor(w_thresh, sigma, eps_weight)),
            symmetrize: Some(rule),
            ..GraphParams::default()
        },
        seed: None,
    })
}

/// Stochastic model. A below-threshold pair is kept with probability
/// `f / f_peak`; draws are consumed only for such pairs, in row-major order
/// over ordered pairs `(i, j)`, `i != j`.
pub fn prob_criterion_graph(
    s: &InitialSimilarities,
    w_thresh: f64,
    sigma: f64,
    rule: Symmetrize,
    seed: Option<u64>,
) -> Result<SimilarityGraph> {
    check_relative_params(w_thresh, sigma)?;
    let seed = seed.ok_or_else(|| Error::Parameter("prob_criterion_graph requires a seed".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let peak = density_peak(sigma);
    let n = s.n();
    let mut directed = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = s.get(i, j);
            directed[(i, j)] = if v >= w_thresh {
                v
            } else {
                let f = truncated_density(v, w_thresh, sigma);
                let u: f64 = rng.random();
                if u < f / peak {
                    f.min(w_thresh)
                } else {
                    0.0
                }
            };
        }
    }
    Ok(SimilarityGraph {
        w: symmetrize(&directed, rule),
        model: GraphModel::ProbCriterion(rule),
        params: GraphParams {
            sigma: Some(sigma),
            w_thresh: Some(w_thresh),
            m: Some(s.exponent()),
            symmetrize: Some(rule),
            ..GraphParams::default()
        },
        seed: Some(seed),
    })
}

pub fn symmetrize(w: &DMatrix<f64>, rule: Symmetrize) -> DMatrix<f64> {
    let n = w.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (w[(i, j)], w[(j, i)]);
        match rule {
            Symmetrize::Min => a.min(b),
            Symmetrize::Max => a.max(b),
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Components {
    pub count: usize,
    /// Component id per vertex; ids are assigned in order of smallest member.
    pub labels: Vec<usize>,
}

impl Components {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Connected components of the support graph (`w > 0`).
pub fn connected_components(g: &SimilarityGraph) -> Components {
    support_components(&g.w)
}

pub(crate) fn support_components(w: &DMatrix<f64>) -> Components {
    let n = w.nrows();
    let mut labels = vec![usize::MAX; n];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if labels[start] != usize::MAX {
            continue;
        }
        labels[start] = count;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for u in 0..n {
                if labels[u] == usize::MAX && w[(v, u)] > 0.0 {
                    labels[u] = count;
                    queue.push_back(u);
                }
            }
        }
        count += 1;
    }
    Components { count, labels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dm(points: &[&[f64]]) -> DistanceMatrix {
        let p = points[0].len();
        let m = DMatrix::from_fn(points.len(), p, |i, j| points[i][j]);
        DistanceMatrix::from_points(&m)
    }

    fn line(xs: &[f64]) -> DistanceMatrix {
        let pts: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let refs: Vec<&[f64]> = pts.iter().map(|v| v.as_slice()).collect();
        dm(&refs)
    }

    fn assert_graph_invariants(g: &SimilarityGraph) {
        let w = g.weights();
        for i in 0..g.n() {
            assert_eq!(w[(i, i)], 0.0);
            for j in 0..g.n() {
                assert_eq!(w[(i, j)], w[(j, i)]);
                assert!(w[(i, j)] >= 0.0 && w[(i, j)].is_finite());
            }
        }
    }

    #[test]
    fn two_points_have_unit_similarity() {
        let s = initial_similarities(&line(&[0.0, 3.0]), -1.0).unwrap();
        assert_eq!(s.get(0, 1), 1.0);
        assert_eq!(s.get(1, 0), 1.0);
        assert_eq!(s.get(0, 0), 0.0);
    }

    #[test]
    fn equidistant_points_split_evenly() {
        let h = 3f64.sqrt() / 2.0;
        let s = initial_similarities(&dm(&[&[0.0, 0.0], &[1.0, 0.0], &[0.5, h]]), -1.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!((s.get(i, j) - 0.5).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn inverse_distance_ratio() {
        // d(0,1) = 1, d(0,2) = 2
        let s = initial_similarities(&line(&[0.0, 1.0, -2.0]), -1.0).unwrap();
        assert!((s.get(0, 1) - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.get(0, 2) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_points_are_degenerate() {
        let err = initial_similarities(&line(&[0.0, 1.0, 1.0]), -1.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateDistance { i: 1, j: 2 }));
    }

    #[test]
    fn nonnegative_exponent_rejected() {
        assert!(matches!(
            initial_similarities(&line(&[0.0, 1.0]), 0.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn epsilon_extremes() {
        let d = line(&[0.0, 1.0, 2.5, 4.0]);
        let all = epsilon_graph(&d, 10.0).unwrap();
        assert_eq!(all.edge_count(), 6);
        let none = epsilon_graph(&d, 0.5).unwrap();
        assert_eq!(none.edge_count(), 0);
        // strict inequality
        let g = epsilon_graph(&d, 1.0).unwrap();
        assert!(!g.has_edge(0, 1));
    }

    #[test]
    fn knn_full_k_is_complete() {
        let d = line(&[0.0, 1.0, 2.5, 4.0, 4.2]);
        let g = knn_graph(&d, 4, KnnMode::Symmetric, None).unwrap();
        assert_eq!(g.edge_count(), 10);
        assert_graph_invariants(&g);
    }

    #[test]
    fn knn_rejects_bad_k() {
        let d = line(&[0.0, 1.0, 2.0]);
        assert!(knn_graph(&d, 3, KnnMode::Symmetric, None).is_err());
        assert!(knn_graph(&d, 0, KnnMode::Mutual, None).is_err());
    }

    #[test]
    fn knn_ties_prefer_lower_index() {
        // points 0 and 2 are both at distance 1 from point 1
        let lists = knn_lists(&line(&[0.0, 1.0, 2.0]), 1).unwrap();
        assert_eq!(lists[1], vec![0]);
    }

    #[test]
    fn knn_weights_are_gaussian() {
        let d = line(&[0.0, 1.0, 3.0]);
        let g = knn_graph(&d, 1, KnnMode::Symmetric, Some(2.0)).unwrap();
        assert!((g.weights()[(0, 1)] - (-1.0f64 / 8.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_half_weight() {
        let sigma = 0.7;
        let d = sigma * (2.0 * 2f64.ln()).sqrt();
        let g = fully_connected_gaussian(&line(&[0.0, d]), sigma).unwrap();
        assert!((g.weights()[(0, 1)] - 0.5).abs() < 1e-12);
        let wide = fully_connected_gaussian(&line(&[0.0, 1.0, 2.0]), 1e6).unwrap();
        assert!(wide
            .weights()
            .iter()
            .enumerate()
            .all(|(idx, &v)| idx % 4 == 0 || v > 1.0 - 1e-11));
    }

    #[test]
    fn symmetrize_rules() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.7, 0.0]);
        let max = symmetrize(&w, Symmetrize::Max);
        assert_eq!((max[(0, 1)], max[(1, 0)]), (0.7, 0.7));
        let min = symmetrize(&w, Symmetrize::Min);
        assert_eq!((min[(0, 1)], min[(1, 0)]), (0.3, 0.3));
    }

    #[test]
    fn threshold_boundary_keeps_value() {
        // two points: s_init = 1 everywhere off-diagonal; w = 1 is excluded by (0,1),
        // so use three equidistant points where s_init = 0.5
        let h = 3f64.sqrt() / 2.0;
        let s = initial_similarities(&dm(&[&[0.0, 0.0], &[1.0, 0.0], &[0.5, h]]), -1.0).unwrap();
        let g = prob_threshold_graph(&s, s.get(0, 1), 0.1, 1e-3, Symmetrize::Min).unwrap();
        assert_eq!(g.weights()[(0, 1)], s.get(0, 1));
    }

    #[test]
    fn threshold_tail_vanishes() {
        let s = initial_similarities(&line(&[0.0, 1.0, 10.0, 11.0]), -1.0).unwrap();
        // s(0,2) is about 0.08, far below w = 0.45 with sigma = 0.01
        let g = prob_threshold_graph(&s, 0.45, 0.01, 1e-3, Symmetrize::Max).unwrap();
        assert_eq!(g.weights()[(0, 2)], 0.0);
        assert!(g.weights()[(0, 1)] > 0.0);
        assert_eq!(crate::simgraph::connected_components(&g).count, 2);
    }

    #[test]
    fn middle_branch_is_clamped_to_w() {
        // sigma small enough that the density peak exceeds w
        let s = initial_similarities(&line(&[0.0, 1.0, 1.9]), -1.0).unwrap();
        let w = 0.5;
        let sigma = 0.2;
        let g = prob_threshold_graph(&s, w, sigma, 1e-6, Symmetrize::Max).unwrap();
        for v in g.weights().iter() {
            assert!(*v <= 1.0);
        }
        let v = s.get(0, 2);
        assert!(v < w);
        let f = truncated_density(v, w, sigma);
        assert!(f > w);
        let directed_02 = f.min(w);
        assert!(g.weights()[(0, 2)] >= directed_02);
    }

    #[test]
    fn weight_floor_inverts_density() {
        let (w, sigma, eps) = (0.1, 0.02, 0.5);
        let floor = weight_floor(w, sigma, eps);
        assert!(floor < w);
        assert!((truncated_density(floor, w, sigma) - eps).abs() < 1e-10);
        assert_eq!(weight_floor(w, sigma, 1e9), w);
    }

    #[test]
    fn criterion_requires_seed() {
        let s = initial_similarities(&line(&[0.0, 1.0, 3.0]), -1.0).unwrap();
        assert!(matches!(
            prob_criterion_graph(&s, 0.2, 0.1, Symmetrize::Min, None),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn criterion_matches_threshold_when_all_above() {
        let s = initial_similarities(&line(&[0.0, 1.0, 2.5, 3.1]), -1.0).unwrap();
        let min_s = (0..4)
            .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| s.get(i, j))
            .fold(f64::INFINITY, f64::min);
        for rule in [Symmetrize::Min, Symmetrize::Max] {
            let a = prob_criterion_graph(&s, min_s, 0.05, rule, Some(9)).unwrap();
            let b = prob_threshold_graph(&s, min_s, 0.05, 1e-3, rule).unwrap();
            assert_eq!(a.weights(), b.weights());
        }
    }

    #[test]
    fn criterion_is_reproducible() {
        let d = line(&[0.0, 0.4, 1.0, 1.7, 3.0, 3.2, 5.5]);
        let s = initial_similarities(&d, -1.0).unwrap();
        let a = prob_criterion_graph(&s, 0.3, 0.05, Symmetrize::Max, Some(42)).unwrap();
        let b = prob_criterion_graph(&s, 0.3, 0.05, Symmetrize::Max, Some(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn acceptance_probability_is_one_at_peak() {
        let sigma = 0.3;
        assert!((truncated_density(0.2, 0.2, sigma) / density_peak(sigma) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn components_of_small_graphs() {
        let d = line(&[0.0, 1.0, 2.0, 3.0]);
        let empty = epsilon_graph(&d, 0.5).unwrap();
        assert_eq!(connected_components(&empty).count, 4);
        let full = epsilon_graph(&d, 10.0).unwrap();
        let c = connected_components(&full);
        assert_eq!((c.count, c.labels), (1, vec![0; 4]));
    }

    #[test]
    fn components_labelled_by_smallest_member() {
        // two triangles interleaved: {0,2,4} and {1,3,5}
        let mut w = DMatrix::zeros(6, 6);
        for (a, b) in [(0, 2), (2, 4), (0, 4), (1, 3), (3, 5), (1, 5)] {
            w[(a, b)] = 1.0;
            w[(b, a)] = 1.0;
        }
        let g = SimilarityGraph::from_weights(w, GraphModel::Epsilon, GraphParams::default(), None).unwrap();
        let c = connected_components(&g);
        assert_eq!(c.count, 2);
        assert_eq!(c.labels, vec![0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn document_round_trip() {
        let d = line(&[0.0, 0.4, 1.0, 1.7, 3.0]);
        let s = initial_similarities(&d, -1.0).unwrap();
        let g = prob_criterion_graph(&s, 0.3, 0.05, Symmetrize::Min, Some(3)).unwrap();
        let json = serde_json::to_string(&g.to_document()).unwrap();
        let back: GraphDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(SimilarityGraph::from_document(&back).unwrap(), g);
    }

    #[test]
    fn model_names_round_trip() {
        for m in GraphModel::ALL {
            assert_eq!(m.name().parse::<GraphModel>().unwrap(), m);
        }
        assert!("ring".parse::<GraphModel>().is_err());
    }

    fn points_strategy() -> impl Strategy<Value = DistanceMatrix> {
        (3usize..14).prop_flat_map(|n| {
            proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), n).prop_map(|pts| {
                let m = DMatrix::from_fn(pts.len(), 2, |i, j| if j == 0 { pts[i].0 } else { pts[i].1 });
                DistanceMatrix::from_points(&m)
            })
        })
    }

    fn distinct(d: &DistanceMatrix) -> bool {
        (0..d.n()).all(|i| (0..d.n()).all(|j| i == j || d.get(i, j) > 1e-9))
    }

    proptest! {
        #[test]
        fn rows_of_initial_similarities_sum_to_one(d in points_strategy()) {
            prop_assume!(distinct(&d));
            let s = initial_similarities(&d, -1.0).unwrap();
            for i in 0..s.n() {
                let total: f64 = (0..s.n()).map(|j| s.get(i, j)).sum();
                prop_assert!((total - 1.0).abs() < 1e-10);
                prop_assert_eq!(s.get(i, i), 0.0);
                for j in 0..s.n() {
                    if i != j {
                        prop_assert!(s.get(i, j) > 0.0 && s.get(i, j) <= 1.0);
                    }
                }
            }
        }

        #[test]
        fn every_model_yields_a_valid_graph(d in points_strategy(), seed in 0u64..1000) {
            prop_assume!(distinct(&d));
            let n = d.n();
            let s = initial_similarities(&d, -1.0).unwrap();
            let graphs = vec![
                epsilon_graph(&d, 3.0).unwrap(),
                knn_graph(&d, 2.min(n - 1), KnnMode::Symmetric, None).unwrap(),
                knn_graph(&d, 2.min(n - 1), KnnMode::Mutual, None).unwrap(),
                fully_connected_gaussian(&d, 2.0).unwrap(),
                prob_threshold_graph(&s, 0.15, 0.05, 0.01, Symmetrize::Min).unwrap(),
                prob_threshold_graph(&s, 0.15, 0.05, 0.01, Symmetrize::Max).unwrap(),
                prob_criterion_graph(&s, 0.15, 0.05, Symmetrize::Min, Some(seed)).unwrap(),
                prob_criterion_graph(&s, 0.15, 0.05, Symmetrize::Max, Some(seed)).unwrap(),
            ];
            for g in &graphs {
                assert_graph_invariants(g);
            }
        }

        #[test]
        fn epsilon_components_non_increasing(d in points_strategy(), a in 0.1f64..8.0, b in 0.1f64..8.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let c_lo = connected_components(&epsilon_graph(&d, lo).unwrap()).count;
            let c_hi = connected_components(&epsilon_graph(&d, hi).unwrap()).count;
            prop_assert!(c_hi <= c_lo);
        }

        #[test]
        fn knn_monotone_and_mutual_subset(d in points_strategy()) {
            let n = d.n();
            let mut prev = usize::MAX;
            for k in 1..n {
                let sym = knn_graph(&d, k, KnnMode::Symmetric, None).unwrap();
                let mutual = knn_graph(&d, k, KnnMode::Mutual, None).unwrap();
                for i in 0..n {
                    for j in 0..n {
                        if mutual.has_edge(i, j) {
                            prop_assert!(sym.has_edge(i, j));
                        }
                    }
                }
                let c = connected_components(&sym).count;
                prop_assert!(c <= prev);
                prev = c;
            }
        }

        #[test]
        fn min_rule_never_exceeds_max_rule(vals in proptest::collection::vec(0.0f64..5.0, 25)) {
            let w = DMatrix::from_fn(5, 5, |i, j| if i == j { 0.0 } else { vals[i * 5 + j] });
            let lo = symmetrize(&w, Symmetrize::Min);
            let hi = symmetrize(&w, Symmetrize::Max);
            for (a, b) in lo.iter().zip(hi.iter()) {
                prop_assert!(a <= b);
            }
            let sym = symmetrize(&lo, Symmetrize::Max);
            prop_assert_eq!(sym, lo);
        }

        #[test]
        fn vanishing_sigma_sparsifies(d in points_strategy()) {
            prop_assume!(distinct(&d));
            let s = initial_similarities(&d, -1.0).unwrap();
            let w = 0.2;
            let g = prob_threshold_graph(&s, w, 1e-9, 1e-3, Symmetrize::Max).unwrap();
            for i in 0..d.n() {
                for j in 0..d.n() {
                    if i != j && s.get(i, j) < w - 1e-6 && s.get(j, i) < w - 1e-6 {
                        prop_assert_eq!(g.weights()[(i, j)], 0.0);
                    }
                }
            }
        }
    }
}
