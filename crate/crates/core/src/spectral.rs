//! Graph Laplacians, eigenvector extraction and Shi–Malik spectral grouping.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans::{kmeans, KMeansConfig};
use crate::simgraph::SimilarityGraph;

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_ITER: usize = 10_000;
const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianKind {
    Unnormalized,
    /// `D^{-1/2} L D^{-1/2}`
    Sym,
    /// `D^{-1} L`
    Rw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    pub matrix: DMatrix<f64>,
    pub kind: LaplacianKind,
    /// Raw weighted degrees (zeros kept as zeros).
    pub degrees: DVector<f64>,
    /// Vertices whose zero degree was replaced by 1 in the normalization.
    pub zero_degree: Vec<usize>,
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    fn regularized_degrees(&self) -> DVector<f64> {
        self.degrees.map(|d| if d > 0.0 { d } else { 1.0 })
    }
}

pub fn degrees(g: &SimilarityGraph) -> DVector<f64> {
    let w = g.weights();
    DVector::from_iterator(w.nrows(), w.row_iter().map(|r| r.sum()))
}

pub fn unnormalized_laplacian(g: &SimilarityGraph) -> Laplacian {
    let d = degrees(g);
    let matrix = DMatrix::from_diagonal(&d) - g.weights();
    let zero_degree = zero_entries(&d);
    Laplacian {
        matrix,
        kind: LaplacianKind::Unnormalized,
        degrees: d,
        zero_degree,
    }
}

fn zero_entries(d: &DVector<f64>) -> Vec<usize> {
    d.iter()
        .enumerate()
        .filter(|(_, &v)| v <= 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Normalized Laplacian. Zero-degree vertices are treated as having degree 1,
/// so their rows stay zero and each forms its own component.
pub fn normalized_laplacian(g: &SimilarityGraph, kind: LaplacianKind) -> Laplacian {
    let mut lap = unnormalized_laplacian(g);
    let dreg = lap.regularized_degrees();
    let n = lap.n();
    match kind {
        LaplacianKind::Unnormalized => {}
        LaplacianKind::Sym => {
            let s = dreg.map(|d| 1.0 / d.sqrt());
            for i in 0..n {
                for j in 0..n {
                    lap.matrix[(i, j)] *= s[i] * s[j];
                }
            }
            // exact symmetry despite rounding in the scaling
            for i in 0..n {
                for j in (i + 1)..n {
                    lap.matrix[(j, i)] = lap.matrix[(i, j)];
                }
            }
        }
        LaplacianKind::Rw => {
            for i in 0..n {
                let inv = 1.0 / dreg[i];
                for j in 0..n {
                    lap.matrix[(i, j)] *= inv;
                }
            }
        }
    }
    if !lap.zero_degree.is_empty() && kind != LaplacianKind::Unnormalized {
        log::info!(
            "{} isolated vertices (zero degree) regularized to degree 1",
            lap.zero_degree.len()
        );
    }
    lap.kind = kind;
    lap
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    /// n × k, one eigenvector per column, unit norm.
    pub u: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

impl SpectralEmbedding {
    pub fn k(&self) -> usize {
        self.u.ncols()
    }

    /// One row per instance: `row,u1,...,uk`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["row".to_string()];
        header.extend((1..=self.k()).map(|j| format!("u{j}")));
        wtr.write_record(&header)?;
        for (i, row) in self.u.row_iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|v| format!("{v:.17e}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn sorted_eigen(m: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m, EIGEN_EPS, EIGEN_MAX_ITER).ok_or_else(|| {
        Error::Numerical(format!(
            "symmetric eigen-solver did not converge (n = {n}, max_iter = {EIGEN_MAX_ITER})"
        ))
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Flip so that the entry of largest magnitude (first on ties) is positive.
fn fix_sign(mut v: DVector<f64>) -> DVector<f64> {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
    v
}

/// The `k` eigenpairs of smallest eigenvalue.
///
/// For the random-walk kind the symmetric form is decomposed and vectors are
/// mapped back through `D^{-1/2}`; every returned column is checked against
/// the Laplacian's own matrix.
pub fn smallest_k_eigenvectors(lap: &Laplacian, k: usize) -> Result<SpectralEmbedding> {
    let n = lap.n();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k must satisfy 1 <= k <= n = {n}, got {k}")));
    }
    let dreg = lap.regularized_degrees();
    let (sym, back) = match lap.kind {
        LaplacianKind::Unnormalized | LaplacianKind::Sym => (lap.matrix.clone(), None),
        LaplacianKind::Rw => {
            let s = dreg.map(|d| d.sqrt());
            let mut m = lap.matrix.clone();
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] *= s[i] / s[j];
                }
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                    m[(i, j)] = avg;
                    m[(j, i)] = avg;
                }
            }
            (m, Some(s.map(|v| 1.0 / v)))
        }
    };
    let (values, vectors) = sorted_eigen(sym)?;
    let mut u = DMatrix::zeros(n, k);
    let mut diagnostics = Vec::new();
    for c in 0..k {
        let mut v: DVector<f64> = vectors.column(c).into_owned();
        if let Some(scale) = &back {
            v.component_mul_assign(scale);
        }
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Numerical(format!("eigenvector {c} has norm {norm}")));
        }
        let v = fix_sign(v / norm);
        let residual = (&lap.matrix * &v - &v * values[c]).norm();
        if residual > RESIDUAL_TOL {
            diagnostics.push(format!(
                "column {c}: lambda = {:.3e}, residual = {residual:.3e}",
                values[c]
            ));
        }
        u.set_column(c, &v);
    }
    if !diagnostics.is_empty() {
        return Err(Error::Numerical(format!(
            "eigenpair residual above {RESIDUAL_TOL:e}: {}",
            diagnostics.join("; ")
        )));
    }
    Ok(SpectralEmbedding {
        u,
        eigenvalues: values[..k].to_vec(),
    })
}

/// Full ascending spectrum of a Laplacian (random-walk kind via its symmetric form).
pub fn spectrum(lap: &Laplacian) -> Result<Vec<f64>> {
    Ok(smallest_k_eigenvectors(lap, lap.n())?.eigenvalues)
}

/// Assignment of n instances to k groups.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grouping {
    pub k: usize,
    pub assignments: Vec<usize>,
}

impl Grouping {
    pub fn new(assignments: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = assignments.iter().find(|&&a| a >= k) {
            return Err(Error::Input(format!("group index {bad} out of range for k = {k}")));
        }
        Ok(Self { k, assignments })
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &a in &self.assignments {
            s[a] += 1;
        }
        s
    }

    pub fn is_degenerate(&self) -> bool {
        self.sizes().contains(&0)
    }

    pub fn members(&self, group: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] == group).collect()
    }

    /// Relabel groups in order of first appearance; empty groups go last.
    pub fn canonical(&self) -> Self {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        for &a in &self.assignments {
            if map[a] == usize::MAX {
                map[a] = next;
                next += 1;
            }
        }
        Self {
            k: self.k,
            assignments: self.assignments.iter().map(|&a| map[a]).collect(),
        }
    }

    /// Same partition, ignoring group names.
    pub fn same_partition(&self, other: &Self) -> bool {
        self.n() == other.n() && self.canonical().assignments == other.canonical().assignments
    }
}

pub fn spectral_embedding(g: &SimilarityGraph, k: usize) -> Result<SpectralEmbedding> {
    smallest_k_eigenvectors(&normalized_laplacian(g, LaplacianKind::Rw), k)
}

/// Random-walk Laplacian, its `k` smallest eigenvectors, then k-means on the rows.
pub fn spectral_grouping(g: &SimilarityGraph, k: usize, seed: u64) -> Result<Grouping> {
    if k < 2 {
        return Err(Error::Parameter(format!("spectral grouping needs k >= 2, got {k}")));
    }
    if k > g.n() {
        return Err(Error::Parameter(format!("k = {k} exceeds n = {}", g.n())));
    }
    let emb = spectral_embedding(g, k)?;
    let fit = kmeans(&emb.u, &KMeansConfig::new(k, seed))?;
    Ok(fit.grouping)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgraph::{connected_components, GraphModel, GraphParams};
    use proptest::prelude::*;

    fn graph(w: DMatrix<f64>) -> SimilarityGraph {
        SimilarityGraph::from_weights(w, GraphModel::FullyConnected, GraphParams::default(), None).unwrap()
    }

    fn complete(n: usize) -> SimilarityGraph {
        graph(DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 }))
    }

    fn cliques(sizes: &[usize]) -> SimilarityGraph {
        let n: usize = sizes.iter().sum();
        let mut block = vec![0; n];
        let mut at = 0;
        for (b, &s) in sizes.iter().enumerate() {
            block[at..at + s].fill(b);
            at += s;
        }
        graph(DMatrix::from_fn(n, n, |i, j| {
            if i != j && block[i] == block[j] {
                1.0
            } else {
                0.0
            }
        }))
    }

    /// Cyclic Jacobi rotations; independent of the library solver.
    fn jacobi_eigenvalues(mut a: DMatrix<f64>) -> Vec<f64> {
        let n = a.nrows();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[(p, q)] * a[(p, q)];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    #[test]
    fn degrees_of_simple_graphs() {
        assert!(degrees(&complete(4)).iter().all(|&d| d == 3.0));
        assert!(degrees(&graph(DMatrix::zeros(3, 3))).iter().all(|&d| d == 0.0));
    }

    #[test]
    fn single_edge_laplacian() {
        let g = graph(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let l = unnormalized_laplacian(&g);
        assert_eq!(l.matrix, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let empty = unnormalized_laplacian(&graph(DMatrix::zeros(3, 3)));
        assert_eq!(empty.matrix, DMatrix::zeros(3, 3));
        assert_eq!(empty.zero_degree, vec![0, 1, 2]);
    }

    #[test]
    fn rw_laplacian_of_triangle() {
        let l = normalized_laplacian(&complete(3), LaplacianKind::Rw);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { -0.5 };
                assert!((l.matrix[(i, j)] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn constant_vector_in_rw_kernel() {
        let g = cliques(&[3, 4]);
        let l = normalized_laplacian(&g, LaplacianKind::Rw);
        let ones = DVector::from_element(7, 1.0);
        assert!((&l.matrix * ones).norm() < 1e-12);
    }

    #[test]
    fn connected_graph_first_eigenvector_is_constant() {
        let emb = smallest_k_eigenvectors(&normalized_laplacian(&complete(5), LaplacianKind::Rw), 1).unwrap();
        assert!(emb.eigenvalues[0].abs() < 1e-12);
        let v = emb.u.column(0);
        let expect = 1.0 / 5f64.sqrt();
        assert!(v.iter().all(|&x| (x - expect).abs() < 1e-10));
    }

    #[test]
    fn two_cliques_span_indicators() {
        let g = cliques(&[3, 4]);
        let emb = spectral_embedding(&g, 2).unwrap();
        assert!(emb.eigenvalues.iter().all(|l| l.abs() < 1e-10));
        // each column is constant on each clique
        for c in 0..2 {
            let col = emb.u.column(c);
            for i in 1..3 {
                assert!((col[i] - col[0]).abs() < 1e-10);
            }
            for i in 4..7 {
                assert!((col[i] - col[3]).abs() < 1e-10);
            }
        }
        let grouping = spectral_grouping(&g, 2, 1).unwrap();
        let comps = connected_components(&g);
        assert!(grouping.same_partition(&Grouping::new(comps.labels, 2).unwrap()));
    }

    #[test]
    fn embedding_csv_has_header_and_rows() {
        let emb = spectral_embedding(&cliques(&[2, 2]), 2).unwrap();
        let mut buf = Vec::new();
        emb.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("row,u1,u2\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn sign_convention_is_deterministic() {
        let a = spectral_embedding(&cliques(&[2, 3]), 2).unwrap();
        for c in 0..2 {
            let col = a.u.column(c);
            let (mut best, mut at) = (0.0f64, 0);
            for (i, &x) in col.iter().enumerate() {
                if x.abs() > best.abs() {
                    best = x;
                    at = i;
                }
            }
            assert!(col[at] > 0.0);
        }
    }

    #[test]
    fn grouping_helpers() {
        let g = Grouping::new(vec![2, 2, 0, 1, 0], 3).unwrap();
        assert_eq!(g.sizes(), vec![2, 1, 2]);
        assert_eq!(g.canonical().assignments, vec![0, 0, 1, 2, 1]);
        assert!(Grouping::new(vec![0, 3], 3).is_err());
        assert!(Grouping::new(vec![0, 0], 2).unwrap().is_degenerate());
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(json, r#"{"k":3,"assignments":[2,2,0,1,0]}"#);
    }

    #[test]
    fn spectral_grouping_rejects_k_one() {
        assert!(matches!(
            spectral_grouping(&complete(4), 1, 0),
            Err(Error::Parameter(_))
        ));
    }

    fn random_graph() -> impl Strategy<Value = SimilarityGraph> {
        (2usize..12).prop_flat_map(|n| {
            proptest::collection::vec(prop_oneof![2 => Just(0.0), 3 => 0.01f64..5.0], n * n).prop_map(move |vals| {
                let w = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { vals[i.min(j) * n + i.max(j)] });
                graph(w)
            })
        })
    }

    proptest! {
        #[test]
        fn degrees_match_row_sums(g in random_graph()) {
            let d = degrees(&g);
            for i in 0..g.n() {
                let mut s = 0.0;
                for j in 0..g.n() {
                    s += g.weights()[(i, j)];
                }
                prop_assert!((d[i] - s).abs() < 1e-12);
            }
        }

        #[test]
        fn unnormalized_rows_sum_to_zero_and_psd(g in random_graph()) {
            let l = unnormalized_laplacian(&g);
            for r in l.matrix.row_iter() {
                prop_assert!(r.sum().abs() < 1e-10);
            }
            let ev = spectrum(&l).unwrap();
            prop_assert!(ev[0] >= -1e-9);
        }

        #[test]
        fn rw_and_sym_spectra_agree(g in random_graph()) {
            let rw = spectrum(&normalized_laplacian(&g, LaplacianKind::Rw)).unwrap();
            let sym = spectrum(&normalized_laplacian(&g, LaplacianKind::Sym)).unwrap();
            for (a, b) in rw.iter().zip(&sym) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn spectrum_matches_jacobi_oracle(g in random_graph()) {
            let lap = normalized_laplacian(&g, LaplacianKind::Sym);
            let ours = spectrum(&lap).unwrap();
            let oracle = jacobi_eigenvalues(lap.matrix.clone());
            for (a, b) in ours.iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-8);
            }
        }

        #[test]
        fn zero_multiplicity_counts_components(g in random_graph()) {
            let ev = spectrum(&normalized_laplacian(&g, LaplacianKind::Rw)).unwrap();
            let zeros = ev.iter().filter(|l| l.abs() < 1e-8).count();
            prop_assert_eq!(zeros, connected_components(&g).count);
        }

        #[test]
        fn weight_scaling_leaves_rw_unchanged(g in random_graph(), c in 0.01f64..100.0) {
            let scaled = graph(g.weights() * c);
            let a = normalized_laplacian(&g, LaplacianKind::Rw);
            let b = normalized_laplacian(&scaled, LaplacianKind::Rw);
            for (x, y) in a.matrix.iter().zip(b.matrix.iter()) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }
    }
}
