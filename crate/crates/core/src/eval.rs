//! Grouping validity indices and hyperparameter grid search.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{pairwise_distances, standardize, Dataset, DistanceMatrix};
use crate::error::{Error, Result};
use crate::simgraph::{connected_components, GraphModel, GraphSpec, Symmetrize};
use crate::spectral::{spectral_grouping, Grouping};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexName {
    DaviesBouldin,
    F1,
}

impl IndexName {
    /// Whether smaller values are better.
    pub fn minimize(self) -> bool {
        matches!(self, IndexName::DaviesBouldin)
    }
}

impl fmt::Display for IndexName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndexName::DaviesBouldin => "davies_bouldin",
            IndexName::F1 => "f1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexValue {
    pub name: IndexName,
    pub value: f64,
}

fn centroids_and_spreads(x: &DMatrix<f64>, grouping: &Grouping) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    if x.nrows() != grouping.n() {
        return Err(Error::Input(format!(
            "{} feature rows but {} assignments",
            x.nrows(),
            grouping.n()
        )));
    }
    let mut centroids = Vec::with_capacity(grouping.k);
    let mut spreads = Vec::with_capacity(grouping.k);
    for g in 0..grouping.k {
        let members = grouping.members(g);
        if members.is_empty() {
            return Err(Error::UndefinedIndex(format!("group {g} is empty")));
        }
        let mut c = DVector::zeros(x.ncols());
        for &i in &members {
            c += x.row(i).transpose();
        }
        c /= members.len() as f64;
        let spread = members.iter().map(|&i| (x.row(i).transpose() - &c).norm()).sum::<f64>() / members.len() as f64;
        centroids.push(c);
        spreads.push(spread);
    }
    Ok((centroids, spreads))
}

/// Two-group Davies–Bouldin: `(σ₁ + σ₂) / ‖c₁ − c₂‖`, σ the mean member
/// distance to the group centroid.
pub fn davies_bouldin(x: &DMatrix<f64>, grouping: &Grouping) -> Result<IndexValue> {
    if grouping.k != 2 {
        return Err(Error::Parameter(format!(
            "two-group Davies–Bouldin needs k = 2, got {} (see davies_bouldin_general)",
            grouping.k
        )));
    }
    davies_bouldin_general(x, grouping)
}

/// Extension to k ≥ 2 groups: mean over groups of the worst pairwise ratio.
/// Coincides with [`davies_bouldin`] for two groups.
pub fn davies_bouldin_general(x: &DMatrix<f64>, grouping: &Grouping) -> Result<IndexValue> {
    if grouping.k < 2 {
        return Err(Error::Parameter("Davies–Bouldin needs at least 2 groups".into()));
    }
    let (c, s) = centroids_and_spreads(x, grouping)?;
    let k = grouping.k;
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let sep = (&c[i] - &c[j]).norm();
            if sep == 0.0 {
                return Err(Error::UndefinedIndex(format!("groups {i} and {j} share a centroid")));
            }
            worst = worst.max((s[i] + s[j]) / sep);
        }
        total += worst;
    }
    Ok(IndexValue {
        name: IndexName::DaviesBouldin,
        value: total / k as f64,
    })
}

fn pairs(m: u64) -> u64 {
    m * m.saturating_sub(1) / 2
}

/// Pair-counting F-measure of a grouping against reference classes.
///
/// Precision is the fraction of same-group pairs sharing a class, recall the
/// fraction of same-class pairs sharing a group. Zero true-positive pairs
/// give F = 0.
pub fn f1_score(grouping: &Grouping, truth: &[usize], beta: f64) -> Result<IndexValue> {
    if truth.len() != grouping.n() {
        return Err(Error::Input(format!(
            "grouping has {} instances but truth has {}",
            grouping.n(),
            truth.len()
        )));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("beta must be > 0, got {beta}")));
    }
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut by_group: HashMap<usize, u64> = HashMap::new();
    let mut by_class: HashMap<usize, u64> = HashMap::new();
    for (&g, &t) in grouping.assignments.iter().zip(truth) {
        *table.entry((g, t)).or_default() += 1;
        *by_group.entry(g).or_default() += 1;
        *by_class.entry(t).or_default() += 1;
    }
    let tp: u64 = table.values().map(|&c| pairs(c)).sum();
    let grouped: u64 = by_group.values().map(|&c| pairs(c)).sum();
    let classed: u64 = by_class.values().map(|&c| pairs(c)).sum();
    if grouped == 0 || classed == 0 {
        return Err(Error::UndefinedIndex(format!(
            "no positive pairs (same-group pairs = {grouped}, same-class pairs = {classed})"
        )));
    }
    let value = if tp == 0 {
        0.0
    } else {
        let p = tp as f64 / grouped as f64;
        let r = tp as f64 / classed as f64;
        let b2 = beta * beta;
        (b2 + 1.0) * p * r / (b2 * p + r)
    };
    Ok(IndexValue {
        name: IndexName::F1,
        value,
    })
}

/// Parameter grid for one graph model. Lists irrelevant to the model are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub model: GraphModel,
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub k: Vec<usize>,
    #[serde(default)]
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub w: Vec<f64>,
    #[serde(default = "default_eps_weight")]
    pub eps_weight: f64,
    #[serde(default = "default_m")]
    pub m: f64,
    /// When set, `w` and `sigma` of the relative models are multiples of `1/(n−1)`.
    #[serde(default)]
    pub relative: bool,
}

fn default_eps_weight() -> f64 {
    0.01
}

fn default_m() -> f64 {
    -1.0
}

impl GridSpec {
    pub fn new(model: GraphModel) -> Self {
        Self {
            model,
            epsilon: Vec::new(),
            k: Vec::new(),
            sigma: Vec::new(),
            w: Vec::new(),
            eps_weight: default_eps_weight(),
            m: default_m(),
            relative: false,
        }
    }

    /// Concrete graph specs in grid order (outer list first).
    pub fn tuples(&self, n: usize, seed: u64) -> Result<Vec<GraphSpec>> {
        let scale = if self.relative && n > 1 {
            1.0 / (n - 1) as f64
        } else {
            1.0
        };
        let need = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::Parameter(format!(
                    "grid for {} needs a non-empty `{name}` list",
                    self.model
                )))
            } else {
                Ok(())
            }
        };
        let mut out = Vec::new();
        match self.model {
            GraphModel::Epsilon => {
                need("epsilon", self.epsilon.len())?;
                out.extend(self.epsilon.iter().map(|&epsilon| GraphSpec::Epsilon { epsilon }));
            }
            GraphModel::Knn(mode) => {
                need("k", self.k.len())?;
                for &k in &self.k {
                    if self.sigma.is_empty() {
                        out.push(GraphSpec::Knn { k, mode, sigma: None });
                    }
                    for &s in &self.sigma {
                        out.push(GraphSpec::Knn {
                            k,
                            mode,
                            sigma: Some(s),
                        });
                    }
                }
            }
            GraphModel::FullyConnected => {
                need("sigma", self.sigma.len())?;
                out.extend(self.sigma.iter().map(|&sigma| GraphSpec::FullyConnected { sigma }));
            }
            GraphModel::ProbThreshold(symmetrize) | GraphModel::ProbCriterion(symmetrize) => {
                need("w", self.w.len())?;
                need("sigma", self.sigma.len())?;
                for &w in &self.w {
                    for &s in &self.sigma {
                        out.push(prob_spec(
                            self.model,
                            symmetrize,
                            w * scale,
                            s * scale,
                            self.eps_weight,
                            self.m,
                            seed,
                        ));
                    }
                }
            }
        }
        Ok(out)
    }
}

fn prob_spec(
    model: GraphModel,
    symmetrize: Symmetrize,
    w: f64,
    sigma: f64,
    eps_weight: f64,
    m: f64,
    seed: u64,
) -> GraphSpec {
    match model {
        GraphModel::ProbThreshold(_) => GraphSpec::ProbThreshold {
            w,
            sigma,
            eps_weight,
            m,
            symmetrize,
        },
        _ => GraphSpec::ProbCriterion {
            w,
            sigma,
            m,
            symmetrize,
            seed: Some(seed),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Number of groups for spectral grouping.
    pub groups: usize,
    pub seed: u64,
    pub objective: IndexName,
    /// Tuples whose smallest group holds fewer than this fraction of n are degenerate.
    pub min_group_fraction: f64,
}

impl SearchOptions {
    pub fn new(groups: usize, seed: u64, objective: IndexName) -> Self {
        Self {
            groups,
            seed,
            objective,
            min_group_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub spec: GraphSpec,
    /// `None` for degenerate tuples.
    pub value: Option<f64>,
    pub components: usize,
    pub group_sizes: Vec<usize>,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub objective: IndexName,
    pub entries: Vec<GridEntry>,
    /// Index into `entries`.
    pub winner: usize,
    pub value: f64,
    pub grouping: Grouping,
}

impl GridSearchResult {
    pub fn winner_spec(&self) -> &GraphSpec {
        &self.entries[self.winner].spec
    }

    /// One row per tuple, suitable for heatmaps.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record([
            "index",
            "model",
            "epsilon",
            "k",
            "sigma",
            "w",
            "eps_weight",
            "m",
            "symmetrize",
            "seed",
            "objective",
            "value",
            "components",
            "group_sizes",
            "winner",
            "diagnostic",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (idx, e) in self.entries.iter().enumerate() {
            let (eps, k, sigma, w, eps_w, m, sym, seed) = match &e.spec {
                GraphSpec::Epsilon { epsilon } => (Some(*epsilon), None, None, None, None, None, None, None),
                GraphSpec::Knn { k, sigma, .. } => (None, Some(*k), *sigma, None, None, None, None, None),
                GraphSpec::FullyConnected { sigma } => (None, None, Some(*sigma), None, None, None, None, None),
                GraphSpec::ProbThreshold {
                    w,
                    sigma,
                    eps_weight,
                    m,
                    symmetrize,
                } => (
                    None,
                    None,
                    Some(*sigma),
                    Some(*w),
                    Some(*eps_weight),
                    Some(*m),
                    Some(*symmetrize),
                    None,
                ),
                GraphSpec::ProbCriterion {
                    w,
                    sigma,
                    m,
                    symmetrize,
                    seed,
                } => (
                    None,
                    None,
                    Some(*sigma),
                    Some(*w),
                    None,
                    Some(*m),
                    Some(*symmetrize),
                    *seed,
                ),
            };
            let sizes: Vec<String> = e.group_sizes.iter().map(usize::to_string).collect();
            wtr.write_record([
                idx.to_string(),
                e.spec.model().to_string(),
                opt(eps),
                k.map(|v| v.to_string()).unwrap_or_default(),
                opt(sigma),
                opt(w),
                opt(eps_w),
                opt(m),
                sym.map(|s| format!("{s:?}").to_lowercase()).unwrap_or_default(),
                seed.map(|v| v.to_string()).unwrap_or_default(),
                self.objective.to_string(),
                opt(e.value),
                e.components.to_string(),
                sizes.join(";"),
                (idx == self.winner).to_string(),
                e.diagnostic.clone().unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn evaluate(
    x: &DMatrix<f64>,
    d: &DistanceMatrix,
    truth: Option<&[usize]>,
    spec: &GraphSpec,
    opts: &SearchOptions,
) -> (GridEntry, Option<Grouping>) {
    let mut entry = GridEntry {
        spec: spec.clone(),
        value: None,
        components: 0,
        group_sizes: Vec::new(),
        diagnostic: None,
    };
    let outcome = (|| -> Result<(f64, Grouping)> {
        let g = spec.build(d)?;
        entry.components = connected_components(&g).count;
        let grouping = spectral_grouping(&g, opts.groups, opts.seed)?;
        entry.group_sizes = grouping.sizes();
        let smallest = *entry.group_sizes.iter().min().unwrap_or(&0);
        let floor = opts.min_group_fraction * grouping.n() as f64;
        if smallest == 0 || (smallest as f64) < floor {
            return Err(Error::DegenerateGrouping(format!(
                "group sizes {:?} below {:.1} instances",
                entry.group_sizes,
                floor.max(1.0)
            )));
        }
        let v = match opts.objective {
            IndexName::DaviesBouldin => davies_bouldin_general(x, &grouping)?.value,
            IndexName::F1 => {
                let t = truth.ok_or_else(|| Error::Parameter("f1 objective needs truth labels".into()))?;
                f1_score(&grouping, t, 1.0)?.value
            }
        };
        if !v.is_finite() {
            return Err(Error::UndefinedIndex(format!("objective evaluated to {v}")));
        }
        Ok((v, grouping))
    })();
    match outcome {
        Ok((v, grouping)) => {
            entry.value = Some(v);
            (entry, Some(grouping))
        }
        Err(e) => {
            entry.diagnostic = Some(e.to_string());
            (entry, None)
        }
    }
}

/// Grid search on precomputed features and distances (rows aligned).
pub fn grid_search_points(
    x: &DMatrix<f64>,
    d: &DistanceMatrix,
    truth: Option<&[usize]>,
    specs: &[GraphSpec],
    opts: &SearchOptions,
) -> Result<GridSearchResult> {
    if specs.is_empty() {
        return Err(Error::Parameter("empty grid".into()));
    }
    if opts.objective == IndexName::F1 && truth.is_none() {
        return Err(Error::Parameter("f1 objective needs truth labels".into()));
    }
    let evaluated: Vec<(GridEntry, Option<Grouping>)> =
        specs.par_iter().map(|s| evaluate(x, d, truth, s, opts)).collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, (e, _)) in evaluated.iter().enumerate() {
        if let Some(v) = e.value {
            let better = match best {
                None => true,
                Some((_, b)) if opts.objective.minimize() => v < b,
                Some((_, b)) => v > b,
            };
            if better {
                best = Some((i, v));
            }
        }
    }
    let Some((winner, value)) = best else {
        return Err(Error::SearchFailure {
            diagnostics: evaluated
                .iter()
                .enumerate()
                .map(|(i, (e, _))| format!("#{i} {:?}: {}", e.spec, e.diagnostic.as_deref().unwrap_or("?")))
                .collect(),
        });
    };
    let mut entries = Vec::with_capacity(evaluated.len());
    let mut grouping = None;
    for (i, (e, g)) in evaluated.into_iter().enumerate() {
        if i == winner {
            grouping = g;
        }
        entries.push(e);
    }
    Ok(GridSearchResult {
        objective: opts.objective,
        entries,
        winner,
        value,
        grouping: grouping.expect("winner has a grouping"),
    })
}

/// Standardizes the dataset, then runs the graph → grouping → index pipeline
/// for every tuple of `grid`.
pub fn grid_search(ds: &Dataset, grid: &GridSpec, opts: &SearchOptions) -> Result<GridSearchResult> {
    let (z, _) = standardize(ds);
    let d = pairwise_distances(&z);
    let truth = z.truth_indices();
    let specs = grid.tuples(z.n(), opts.seed)?;
    grid_search_points(&z.feature_matrix(), &d, truth.as_deref(), &specs, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgraph::KnnMode;
    use proptest::prelude::*;

    fn grouping(a: &[usize], k: usize) -> Grouping {
        Grouping::new(a.to_vec(), k).unwrap()
    }

    /// Literal re-evaluation of the two-group formula.
    fn db_oracle(x: &DMatrix<f64>, a: &[usize]) -> f64 {
        let mut c = [vec![0.0; x.ncols()], vec![0.0; x.ncols()]];
        let mut cnt = [0.0; 2];
        for (i, &g) in a.iter().enumerate() {
            cnt[g] += 1.0;
            for j in 0..x.ncols() {
                c[g][j] += x[(i, j)];
            }
        }
        for g in 0..2 {
            for v in c[g].iter_mut() {
                *v /= cnt[g];
            }
        }
        let dist = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let mut s = [0.0; 2];
        for (i, &g) in a.iter().enumerate() {
            let row: Vec<f64> = (0..x.ncols()).map(|j| x[(i, j)]).collect();
            s[g] += dist(&row, &c[g]);
        }
        (s[0] / cnt[0] + s[1] / cnt[1]) / dist(&c[0], &c[1])
    }

    /// O(n²) pair enumeration.
    fn f1_oracle(a: &[usize], t: &[usize]) -> f64 {
        let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
        for i in 0..a.len() {
            for j in (i + 1)..a.len() {
                match (a[i] == a[j], t[i] == t[j]) {
                    (true, true) => tp += 1.0,
                    (true, false) => fp += 1.0,
                    (false, true) => fneg += 1.0,
                    _ => {}
                }
            }
        }
        if tp == 0.0 {
            return 0.0;
        }
        let p = tp / (tp + fp);
        let r = tp / (tp + fneg);
        2.0 * p * r / (p + r)
    }

    #[test]
    fn singleton_groups_have_zero_db() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 3.0]);
        assert_eq!(davies_bouldin(&x, &grouping(&[0, 1], 2)).unwrap().value, 0.0);
    }

    #[test]
    fn symmetric_pairs_db() {
        let (delta, d) = (0.3, 5.0);
        let x = DMatrix::from_row_slice(4, 1, &[-delta, delta, d - delta, d + delta]);
        let v = davies_bouldin(&x, &grouping(&[0, 0, 1, 1], 2)).unwrap().value;
        assert!((v - 2.0 * delta / d).abs() < 1e-15);
    }

    #[test]
    fn shared_centroid_is_undefined() {
        let x = DMatrix::from_row_slice(4, 1, &[-1.0, 1.0, -2.0, 2.0]);
        assert!(matches!(
            davies_bouldin(&x, &grouping(&[0, 0, 1, 1], 2)),
            Err(Error::UndefinedIndex(_))
        ));
    }

    #[test]
    fn general_db_reduces_to_two_groups() {
        let x = DMatrix::from_row_slice(5, 2, &[0.0, 0.0, 1.0, 0.5, 4.0, 4.0, 5.0, 3.0, 4.5, 5.0]);
        let g = grouping(&[0, 0, 1, 1, 1], 2);
        assert_eq!(davies_bouldin(&x, &g).unwrap(), davies_bouldin_general(&x, &g).unwrap());
        assert!(davies_bouldin(&x, &grouping(&[0, 1, 2, 2, 2], 3)).is_err());
    }

    #[test]
    fn perfect_f1() {
        let v = f1_score(&grouping(&[1, 1, 0, 0, 2], 3), &[5, 5, 7, 7, 9], 1.0).unwrap();
        assert_eq!(v.value, 1.0);
    }

    #[test]
    fn one_group_against_balanced_truth() {
        let n = 10;
        let a = vec![0; n];
        let t: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let v = f1_score(&grouping(&a, 1), &t, 1.0).unwrap().value;
        // P = 2·C(5,2)/C(10,2) = 20/45, R = 1
        let p = 20.0 / 45.0;
        assert!((v - 2.0 * p / (p + 1.0)).abs() < 1e-15);
        assert!((v - f1_oracle(&a, &t)).abs() < 1e-15);
    }

    #[test]
    fn f1_without_positive_pairs_is_undefined() {
        assert!(matches!(
            f1_score(&grouping(&[0, 1, 2], 3), &[0, 0, 1], 1.0),
            Err(Error::UndefinedIndex(_))
        ));
    }

    #[test]
    fn f1_beta_weights_recall() {
        let a = [0, 0, 0, 0];
        let t = [0, 0, 1, 1];
        let g = grouping(&a, 1);
        // P = 2/6, R = 1
        let f2 = f1_score(&g, &t, 2.0).unwrap().value;
        let p = 1.0 / 3.0;
        assert!((f2 - 5.0 * p / (4.0 * p + 1.0)).abs() < 1e-15);
    }

    fn two_blobs() -> Dataset {
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for i in 0..8 {
            let t = i as f64 * 0.37;
            rows.push(vec![t.cos() * 0.3, t.sin() * 0.3]);
            truth.push("a".to_string());
            rows.push(vec![5.0 + t.sin() * 0.3, 5.0 + t.cos() * 0.25]);
            truth.push("b".to_string());
        }
        Dataset::unbagged(rows, Some(truth), vec![]).unwrap()
    }

    #[test]
    fn single_tuple_grid_wins() {
        let ds = two_blobs();
        let mut grid = GridSpec::new(GraphModel::FullyConnected);
        grid.sigma = vec![0.5];
        let res = grid_search(&ds, &grid, &SearchOptions::new(2, 0, IndexName::F1)).unwrap();
        assert_eq!(res.winner, 0);
        assert_eq!(res.value, 1.0);
    }

    #[test]
    fn worse_tuple_does_not_move_winner() {
        let ds = two_blobs();
        let mut grid = GridSpec::new(GraphModel::Knn(KnnMode::Symmetric));
        grid.k = vec![3, 5];
        let opts = SearchOptions::new(2, 0, IndexName::DaviesBouldin);
        let base = grid_search(&ds, &grid, &opts).unwrap();
        let mut wider = grid.clone();
        wider.k.push(15);
        let res = grid_search(&ds, &wider, &opts).unwrap();
        if res.entries[2].value.is_none_or(|v| v >= base.value) {
            assert_eq!(res.winner, base.winner);
        }
    }

    #[test]
    fn all_degenerate_grid_fails() {
        let ds = two_blobs();
        let mut grid = GridSpec::new(GraphModel::FullyConnected);
        grid.sigma = vec![0.5, 1.0];
        let mut opts = SearchOptions::new(2, 0, IndexName::DaviesBouldin);
        opts.min_group_fraction = 0.75;
        match grid_search(&ds, &grid, &opts) {
            Err(Error::SearchFailure { diagnostics }) => assert_eq!(diagnostics.len(), 2),
            other => panic!("expected search failure, got {other:?}"),
        }
    }

    #[test]
    fn relative_grid_scales_by_n() {
        let mut grid = GridSpec::new(GraphModel::ProbThreshold(Symmetrize::Min));
        grid.w = vec![1.0];
        grid.sigma = vec![0.5];
        grid.relative = true;
        let specs = grid.tuples(11, 0).unwrap();
        match specs[0] {
            GraphSpec::ProbThreshold { w, sigma, .. } => {
                assert!((w - 0.1).abs() < 1e-15 && (sigma - 0.05).abs() < 1e-15)
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn grid_csv_lists_every_tuple() {
        let ds = two_blobs();
        let mut grid = GridSpec::new(GraphModel::ProbCriterion(Symmetrize::Max));
        grid.w = vec![0.05, 0.1];
        grid.sigma = vec![0.01];
        let res = grid_search(&ds, &grid, &SearchOptions::new(2, 4, IndexName::F1)).unwrap();
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }

    fn instance() -> impl Strategy<Value = (DMatrix<f64>, Vec<usize>, Vec<usize>)> {
        (4usize..50).prop_flat_map(|n| {
            (
                proptest::collection::vec(-3.0f64..3.0, n * 3),
                proptest::collection::vec(0usize..2, n),
                proptest::collection::vec(0usize..3, n),
            )
                .prop_map(move |(vals, a, t)| (DMatrix::from_row_slice(n, 3, &vals), a, t))
        })
    }

    proptest! {
        #[test]
        fn db_matches_literal_formula((x, a, _) in instance()) {
            prop_assume!(a.contains(&0) && a.contains(&1));
            let g = grouping(&a, 2);
            let v = davies_bouldin(&x, &g).unwrap().value;
            prop_assert!((v - db_oracle(&x, &a)).abs() <= 1e-12 * v.max(1.0));
            let swapped: Vec<usize> = a.iter().map(|&i| 1 - i).collect();
            prop_assert_eq!(davies_bouldin(&x, &grouping(&swapped, 2)).unwrap().value, v);
        }

        #[test]
        fn f1_matches_pair_enumeration((_, a, t) in instance()) {
            let g = grouping(&a, 2);
            if let Ok(v) = f1_score(&g, &t, 1.0) {
                prop_assert!((v.value - f1_oracle(&a, &t)).abs() < 1e-12);
                let relabelled: Vec<usize> = t.iter().map(|&c| (c + 1) % 3).collect();
                prop_assert_eq!(f1_score(&g, &relabelled, 1.0).unwrap().value, v.value);
                let swapped: Vec<usize> = a.iter().map(|&i| 1 - i).collect();
                prop_assert_eq!(f1_score(&grouping(&swapped, 2), &t, 1.0).unwrap().value, v.value);
            }
        }
    }
}
