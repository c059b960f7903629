//! Bags-of-instances datasets: CSV ingestion, z-scoring and Euclidean
//! distance matrices.
//!
//! Every instance belongs to exactly one bag and only bags carry labels.
//! An optional per-instance ground-truth column can be attached for scoring;
//! it is never consulted by the grouping or annotation code paths.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bag id used when the schema names no bag column.
pub const DEFAULT_BAG: &str = "all";
/// Bag label used when the schema names no bag-label column.
pub const DEFAULT_BAG_LABEL: &str = "unlabelled";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bag {
    pub id: String,
    pub label: String,
    /// Indices into [`Dataset::instances`].
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    instances: Vec<Instance>,
    bags: Vec<Bag>,
    label_set: Vec<String>,
    strong_label: Option<String>,
    truth: Option<Vec<String>>,
    feature_names: Vec<String>,
    bag_of: Vec<usize>,
}

impl Dataset {
    /// Validates and assembles a dataset.
    ///
    /// `label_set` is derived from the bag labels (sorted); `strong_label`,
    /// when given, must be one of them.
    pub fn new(
        instances: Vec<Instance>,
        bags: Vec<Bag>,
        strong_label: Option<String>,
        truth: Option<Vec<String>>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = instances.len();
        if n < 2 {
            return Err(Error::Integrity(format!(
                "a dataset needs at least 2 instances, got {n}"
            )));
        }
        let p = instances[0].features.len();
        if p == 0 {
            return Err(Error::Integrity("instances have no features".into()));
        }
        if !feature_names.is_empty() && feature_names.len() != p {
            return Err(Error::Integrity(format!(
                "{} feature names for {p} features",
                feature_names.len()
            )));
        }
        let mut seen = HashMap::with_capacity(n);
        for (idx, inst) in instances.iter().enumerate() {
            if inst.features.len() != p {
                return Err(Error::Integrity(format!(
                    "instance `{}` has {} features, expected {p}",
                    inst.id,
                    inst.features.len()
                )));
            }
            if let Some(v) = inst.features.iter().find(|v| !v.is_finite()) {
                return Err(Error::Integrity(format!(
                    "instance `{}` has a non-finite feature ({v})",
                    inst.id
                )));
            }
            if seen.insert(inst.id.as_str(), idx).is_some() {
                return Err(Error::Integrity(format!("duplicate instance id `{}`", inst.id)));
            }
        }

        let mut bag_of = vec![usize::MAX; n];
        for (b, bag) in bags.iter().enumerate() {
            if bag.members.is_empty() {
                return Err(Error::Integrity(format!("bag `{}` has no members", bag.id)));
            }
            for &m in &bag.members {
                if m >= n {
                    return Err(Error::Integrity(format!(
                        "bag `{}` references instance index {m} (n = {n})",
                        bag.id
                    )));
                }
                if bag_of[m] != usize::MAX {
                    return Err(Error::Integrity(format!(
                        "instance `{}` belongs to more than one bag",
                        instances[m].id
                    )));
                }
                bag_of[m] = b;
            }
        }
        if let Some(m) = bag_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::Integrity(format!(
                "instance `{}` is not in any bag",
                instances[m].id
            )));
        }

        let label_set: Vec<String> = bags
            .iter()
            .map(|b| b.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if let Some(s) = &strong_label {
            if !label_set.contains(s) {
                return Err(Error::Integrity(format!(
                    "strong label `{s}` is not a bag label (labels: {label_set:?})"
                )));
            }
        }
        if let Some(t) = &truth {
            if t.len() != n {
                return Err(Error::Integrity(format!("{} truth labels for {n} instances", t.len())));
            }
        }
        let feature_names = if feature_names.is_empty() {
            (0..p).map(|j| format!("f{j}")).collect()
        } else {
            feature_names
        };

        Ok(Self {
            instances,
            bags,
            label_set,
            strong_label,
            truth,
            feature_names,
            bag_of,
        })
    }

    /// Dataset with every instance in a single bag. Used for plain grouping
    /// benchmarks where no bag structure exists.
    pub fn unbagged(features: Vec<Vec<f64>>, truth: Option<Vec<String>>, feature_names: Vec<String>) -> Result<Self> {
        let n = features.len();
        let instances = features
            .into_iter()
            .enumerate()
            .map(|(i, f)| Instance {
                id: i.to_string(),
                features: f,
            })
            .collect();
        let bag = Bag {
            id: DEFAULT_BAG.into(),
            label: DEFAULT_BAG_LABEL.into(),
            members: (0..n).collect(),
        };
        Self::new(instances, vec![bag], None, truth, feature_names)
    }

    pub fn n(&self) -> usize {
        self.instances.len()
    }

    pub fn p(&self) -> usize {
        self.instances[0].features.len()
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn bags(&self) -> &[Bag] {
        &self.bags
    }

    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    pub fn strong_label(&self) -> Option<&str> {
        self.strong_label.as_deref()
    }

    pub fn truth(&self) -> Option<&[String]> {
        self.truth.as_deref()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Index of the bag owning instance `i`.
    pub fn bag_of(&self, i: usize) -> usize {
        self.bag_of[i]
    }

    /// Label of the bag owning instance `i`.
    pub fn bag_label_of(&self, i: usize) -> &str {
        &self.bags[self.bag_of[i]].label
    }

    pub fn with_strong_label(mut self, strong: Option<String>) -> Result<Self> {
        if let Some(s) = &strong {
            if !self.label_set.contains(s) {
                return Err(Error::Integrity(format!(
                    "strong label `{s}` is not a bag label (labels: {:?})",
                    self.label_set
                )));
            }
        }
        self.strong_label = strong;
        Ok(self)
    }

    /// n×p feature matrix.
    pub fn feature_matrix(&self) -> DMatrix<f64> {
        let (n, p) = (self.n(), self.p());
        DMatrix::from_fn(n, p, |i, j| self.instances[i].features[j])
    }

    /// Feature matrix restricted to the given instance indices (in order).
    pub fn feature_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        let p = self.p();
        DMatrix::from_fn(rows.len(), p, |r, j| self.instances[rows[r]].features[j])
    }

    /// Truth labels mapped to dense class indices in sorted label order.
    pub fn truth_indices(&self) -> Option<Vec<usize>> {
        let t = self.truth.as_ref()?;
        let classes: BTreeSet<&str> = t.iter().map(String::as_str).collect();
        let index: HashMap<&str, usize> = classes.into_iter().enumerate().map(|(i, c)| (c, i)).collect();
        Some(t.iter().map(|c| index[c.as_str()]).collect())
    }

    pub fn summary(&self) -> DatasetSummary {
        let mut bags_per_label = BTreeMap::new();
        let mut instances_per_label = BTreeMap::new();
        for bag in &self.bags {
            *bags_per_label.entry(bag.label.clone()).or_insert(0) += 1;
            *instances_per_label.entry(bag.label.clone()).or_insert(0) += bag.members.len();
        }
        DatasetSummary {
            n: self.n(),
            p: self.p(),
            bags: self.bags.len(),
            strong_label: self.strong_label.clone(),
            labels: self.label_set.clone(),
            bags_per_label,
            instances_per_label,
            has_truth: self.truth.is_some(),
            feature_names: self.feature_names.clone(),
        }
    }

    fn with_features(&self, rows: Vec<Vec<f64>>) -> Self {
        let mut out = self.clone();
        for (inst, f) in out.instances.iter_mut().zip(rows) {
            inst.features = f;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub p: usize,
    pub bags: usize,
    pub strong_label: Option<String>,
    pub labels: Vec<String>,
    pub bags_per_label: BTreeMap<String, usize>,
    pub instances_per_label: BTreeMap<String, usize>,
    pub has_truth: bool,
    pub feature_names: Vec<String>,
}

/// Column mapping for [`load_csv`].
///
/// Absent id column: row numbers become ids. Absent bag column: a single
/// bag. Empty `features`: every column not claimed by another role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub id: Option<String>,
    pub bag: Option<String>,
    pub bag_label: Option<String>,
    pub truth: Option<String>,
    pub features: Vec<String>,
    pub strong_label: Option<String>,
    pub delimiter: u8,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            id: None,
            bag: None,
            bag_label: None,
            truth: None,
            features: Vec::new(),
            strong_label: None,
            delimiter: b',',
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}` (header: {headers:?})")))
    };
    let id_col = schema.id.as_deref().map(find).transpose()?;
    let bag_col = schema.bag.as_deref().map(find).transpose()?;
    let label_col = schema.bag_label.as_deref().map(find).transpose()?;
    let truth_col = schema.truth.as_deref().map(find).transpose()?;
    let feature_cols: Vec<usize> = if schema.features.is_empty() {
        let claimed: BTreeSet<usize> = [id_col, bag_col, label_col, truth_col].into_iter().flatten().collect();
        (0..headers.len()).filter(|c| !claimed.contains(c)).collect()
    } else {
        schema.features.iter().map(|f| find(f)).collect::<Result<_>>()?
    };
    if feature_cols.is_empty() {
        return Err(Error::Schema("no feature columns".into()));
    }

    let mut instances = Vec::new();
    let mut truth = truth_col.map(|_| Vec::new());
    let mut bag_index: HashMap<String, usize> = HashMap::new();
    let mut bags: Vec<Bag> = Vec::new();

    for (row, record) in rdr.records().enumerate() {
        // 1-based data row, header excluded
        let row = row + 1;
        let record = record?;
        let cell = |c: usize| record.get(c).map(str::trim).unwrap_or("");
        let id = match id_col {
            Some(c) => cell(c).to_string(),
            None => row.to_string(),
        };
        let mut features = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let raw = cell(c);
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row,
                column: headers[c].clone(),
                message: if raw.is_empty() {
                    "missing value".into()
                } else {
                    format!("`{raw}` is not a number")
                },
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: headers[c].clone(),
                    message: format!("`{raw}` is not finite"),
                });
            }
            features.push(v);
        }
        let bag_id = bag_col
            .map(|c| cell(c).to_string())
            .unwrap_or_else(|| DEFAULT_BAG.into());
        let label = label_col
            .map(|c| cell(c).to_string())
            .unwrap_or_else(|| DEFAULT_BAG_LABEL.into());
        let idx = instances.len();
        match bag_index.get(&bag_id) {
            Some(&b) => {
                if bags[b].label != label {
                    return Err(Error::Integrity(format!(
                        "row {row}: bag `{bag_id}` labelled both `{}` and `{label}`",
                        bags[b].label
                    )));
                }
                bags[b].members.push(idx);
            }
            None => {
                bag_index.insert(bag_id.clone(), bags.len());
                bags.push(Bag {
                    id: bag_id,
                    label,
                    members: vec![idx],
                });
            }
        }
        if let (Some(t), Some(c)) = (truth.as_mut(), truth_col) {
            t.push(cell(c).to_string());
        }
        instances.push(Instance { id, features });
    }

    let names = feature_cols.iter().map(|&c| headers[c].clone()).collect();
    Dataset::new(instances, bags, schema.strong_label.clone(), truth, names)
}

/// Per-column scaling applied by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
    /// Columns with zero sample variance; these are set to all zeros.
    pub constant_columns: Vec<usize>,
}

impl ScalingReport {
    pub fn has_warnings(&self) -> bool {
        !self.constant_columns.is_empty()
    }
}

/// Z-scores every feature column (mean 0, sample standard deviation 1).
pub fn standardize(ds: &Dataset) -> (Dataset, ScalingReport) {
    let (n, p) = (ds.n(), ds.p());
    let mut means = vec![0.0; p];
    let mut sds = vec![0.0; p];
    let mut constant = Vec::new();
    for j in 0..p {
        let col = ds.instances.iter().map(|x| x.features[j]);
        let mean = col.clone().sum::<f64>() / n as f64;
        let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        means[j] = mean;
        sds[j] = var.sqrt();
        // relative test so a column of large identical values still counts as constant
        let scale = ds.instances.iter().map(|x| x.features[j].abs()).fold(0.0, f64::max);
        if sds[j] <= 1e-12 * scale.max(f64::MIN_POSITIVE) || sds[j] == 0.0 {
            constant.push(j);
        }
    }
    if !constant.is_empty() {
        log::warn!("constant feature columns left as zeros: {constant:?}");
    }
    let rows = ds
        .instances
        .iter()
        .map(|x| {
            (0..p)
                .map(|j| {
                    if constant.contains(&j) {
                        0.0
                    } else {
                        (x.features[j] - means[j]) / sds[j]
                    }
                })
                .collect()
        })
        .collect();
    (
        ds.with_features(rows),
        ScalingReport {
            means,
            std_devs: sds,
            constant_columns: constant,
        },
    )
}

/// Symmetric, zero-diagonal, nonnegative matrix of pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix(DMatrix<f64>);

impl DistanceMatrix {
    /// Wraps a matrix after checking the distance-matrix invariants.
    pub fn from_matrix(d: DMatrix<f64>) -> Result<Self> {
        let n = d.nrows();
        if d.ncols() != n {
            return Err(Error::Input(format!("distance matrix is {}x{}", n, d.ncols())));
        }
        for i in 0..n {
            if d[(i, i)] != 0.0 {
                return Err(Error::Input(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = d[(i, j)];
                if !v.is_finite() || v < 0.0 || v != d[(j, i)] {
                    return Err(Error::Input(format!("invalid distance at ({i}, {j}): {v}")));
                }
            }
        }
        Ok(Self(d))
    }

    /// Euclidean distances between the rows of `points`.
    pub fn from_points(points: &DMatrix<f64>) -> Self {
        let n = points.nrows();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| points.row(i).iter().copied().collect()).collect();
        Self(euclidean(&rows))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Principal submatrix over `idx` (in the given order).
    pub fn select(&self, idx: &[usize]) -> Self {
        Self(DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.0[(idx[a], idx[b])]))
    }

    /// Median of the off-diagonal entries (upper triangle).
    pub fn median_off_diagonal(&self) -> f64 {
        let n = self.n();
        let mut v: Vec<f64> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| self.0[(i, j)])
            .collect();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len();
        if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        }
    }
}

fn euclidean(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    // each row computed independently, so the result does not depend on scheduling
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| {
                    rows[i]
                        .iter()
                        .zip(&rows[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect();
    let mut d = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Euclidean distance matrix over the dataset's feature vectors.
pub fn pairwise_distances(ds: &Dataset) -> DistanceMatrix {
    let rows: Vec<Vec<f64>> = ds.instances.iter().map(|x| x.features.clone()).collect();
    DistanceMatrix(euclidean(&rows))
}
