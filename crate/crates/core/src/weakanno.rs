//! Weak annotation of unlabelled instances in bags.
//!
//! Instances of all bags sharing a non-strong label are pooled, grouped in
//! two by spectral grouping on their own similarity graph, and the smaller
//! group is relabelled with the strong label. Strong bags pass through.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{standardize, Dataset, DistanceMatrix};
use crate::error::{Error, Result};
use crate::eval::{davies_bouldin, grid_search_points, GridSpec, IndexName, SearchOptions};
use crate::simgraph::{GraphModel, GraphSpec, Symmetrize};
use crate::spectral::{spectral_grouping, Grouping};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Strong,
    Weak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedInstance {
    /// Index into the source dataset.
    pub index: usize,
    pub id: String,
    pub bag_id: String,
    pub bag_label: String,
    pub label: String,
    pub provenance: Provenance,
}

/// How the similarity graph of each bag label is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSelection {
    Fixed(GraphSpec),
    /// Davies–Bouldin grid search over the label's own instances.
    Grid(GridSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakConfig {
    pub selection: GraphSelection,
    pub seed: u64,
    /// Grid tuples whose smaller group is below this fraction of the pool are skipped.
    pub min_group_fraction: f64,
}

impl Default for WeakConfig {
    fn default() -> Self {
        Self {
            selection: GraphSelection::Grid(default_weak_grid()),
            seed: 0,
            min_group_fraction: 0.1,
        }
    }
}

/// Probabilistic threshold (min) grid with `w` and `σ` relative to `1/(n−1)`,
/// the mean of a row of initial similarities.
pub fn default_weak_grid() -> GridSpec {
    let mut g = GridSpec::new(GraphModel::ProbThreshold(Symmetrize::Min));
    g.w = vec![0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0];
    g.sigma = vec![0.1, 0.5];
    g.eps_weight = 0.01;
    g.m = -1.0;
    g.relative = true;
    g
}

/// Per-label record of the split that produced the weak labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAudit {
    pub bag_label: String,
    pub n: usize,
    pub group_sizes: Vec<usize>,
    /// Group relabelled with the strong label.
    pub strong_group: usize,
    /// Smaller over larger group size.
    pub size_ratio: f64,
    pub tie: bool,
    pub spec: GraphSpec,
    pub davies_bouldin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedTrainingSet {
    pub strong_label: Option<String>,
    /// In dataset index order.
    pub instances: Vec<AnnotatedInstance>,
    pub audits: Vec<GroupAudit>,
    pub config: Option<WeakConfig>,
}

impl AnnotatedTrainingSet {
    /// Every instance labelled with its bag label.
    pub fn from_bag_labels(ds: &Dataset) -> Self {
        let instances = (0..ds.n())
            .map(|i| {
                let bag = &ds.bags()[ds.bag_of(i)];
                AnnotatedInstance {
                    index: i,
                    id: ds.instances()[i].id.clone(),
                    bag_id: bag.id.clone(),
                    bag_label: bag.label.clone(),
                    label: bag.label.clone(),
                    provenance: Provenance::Strong,
                }
            })
            .collect();
        Self {
            strong_label: ds.strong_label().map(str::to_owned),
            instances,
            audits: Vec::new(),
            config: None,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.instances.iter().map(|a| a.label.as_str()).collect()
    }

    pub fn count(&self, provenance: Provenance) -> usize {
        self.instances.iter().filter(|a| a.provenance == provenance).count()
    }

    /// Fraction of instances whose label equals `truth` (aligned by dataset index).
    pub fn agreement(&self, truth: &[String]) -> f64 {
        let hits = self.instances.iter().filter(|a| a.label == truth[a.index]).count();
        hits as f64 / self.len() as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["instance_id", "bag_id", "bag_label", "label", "provenance"])?;
        for a in &self.instances {
            let prov = match a.provenance {
                Provenance::Strong => "strong",
                Provenance::Weak => "weak",
            };
            wtr.write_record([&a.id, &a.bag_id, &a.bag_label, &a.label, prov])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Indices of all instances in bags labelled `bag_label`, ascending.
pub fn collect_unlabelled(ds: &Dataset, bag_label: &str) -> Result<Vec<usize>> {
    if ds.strong_label() == Some(bag_label) {
        return Err(Error::Parameter(format!("`{bag_label}` is the strong label")));
    }
    let mut idx: Vec<usize> = ds
        .bags()
        .iter()
        .filter(|b| b.label == bag_label)
        .flat_map(|b| b.members.iter().copied())
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptySelection(format!("no bags labelled `{bag_label}`")));
    }
    idx.sort_unstable();
    Ok(idx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub labels: Vec<String>,
    pub strong_group: usize,
    pub tie: bool,
}

/// Labels a two-group split: the smaller group gets `strong_label`, the
/// larger `bag_label`. On equal sizes the group whose centroid lies farther
/// from `strong_centroid` keeps `bag_label`; `points` are the grouped rows.
pub fn annotate_groups(
    grouping: &Grouping,
    points: &DMatrix<f64>,
    strong_centroid: Option<&DVector<f64>>,
    bag_label: &str,
    strong_label: &str,
) -> Result<Annotation> {
    if grouping.k != 2 {
        return Err(Error::Parameter(format!(
            "annotation needs exactly 2 groups, got {}",
            grouping.k
        )));
    }
    let sizes = grouping.sizes();
    if sizes.contains(&0) {
        return Err(Error::DegenerateGrouping(format!("group sizes {sizes:?}")));
    }
    let tie = sizes[0] == sizes[1];
    let strong_group = if !tie {
        if sizes[0] < sizes[1] {
            0
        } else {
            1
        }
    } else {
        let c = strong_centroid.ok_or_else(|| {
            Error::DegenerateGrouping(format!(
                "equal group sizes {sizes:?} and no strong instances to break the tie"
            ))
        })?;
        if points.nrows() != grouping.n() {
            return Err(Error::Input("points and grouping differ in length".into()));
        }
        let dist = |g: usize| {
            let members = grouping.members(g);
            let mut centroid = DVector::zeros(points.ncols());
            for &i in &members {
                centroid += points.row(i).transpose();
            }
            centroid /= members.len() as f64;
            (centroid - c).norm()
        };
        // farther group keeps the bag label; exact distance ties favour group 0 as strong
        if dist(0) > dist(1) {
            1
        } else {
            0
        }
    };
    let labels = grouping
        .assignments
        .iter()
        .map(|&g| if g == strong_group { strong_label } else { bag_label }.to_string())
        .collect();
    Ok(Annotation {
        labels,
        strong_group,
        tie,
    })
}

struct LabelResult {
    idx: Vec<usize>,
    annotation: Annotation,
    audit: GroupAudit,
}

fn annotate_label(
    z: &Dataset,
    label: &str,
    strong: &str,
    strong_centroid: Option<&DVector<f64>>,
    cfg: &WeakConfig,
) -> Result<LabelResult> {
    let idx = collect_unlabelled(z, label)?;
    let x = z.feature_rows(&idx);
    let d = DistanceMatrix::from_points(&x);
    let (grouping, spec) = match &cfg.selection {
        GraphSelection::Fixed(spec) => {
            let spec = spec.clone().with_seed(cfg.seed);
            let g = spec.build(&d)?;
            (spectral_grouping(&g, 2, cfg.seed)?, spec)
        }
        GraphSelection::Grid(grid) => {
            let specs = grid.tuples(idx.len(), cfg.seed)?;
            let mut opts = SearchOptions::new(2, cfg.seed, IndexName::DaviesBouldin);
            opts.min_group_fraction = cfg.min_group_fraction;
            let res = grid_search_points(&x, &d, None, &specs, &opts)?;
            let spec = res.winner_spec().clone();
            (res.grouping, spec)
        }
    };
    let annotation = annotate_groups(&grouping, &x, strong_centroid, label, strong)?;
    let sizes = grouping.sizes();
    let audit = GroupAudit {
        bag_label: label.to_string(),
        n: idx.len(),
        size_ratio: *sizes.iter().min().unwrap() as f64 / *sizes.iter().max().unwrap() as f64,
        group_sizes: sizes,
        strong_group: annotation.strong_group,
        tie: annotation.tie,
        spec,
        davies_bouldin: davies_bouldin(&x, &grouping).ok().map(|v| v.value),
    };
    Ok(LabelResult { idx, annotation, audit })
}

/// Strong instances keep their label; every other bag label is processed
/// independently on the z-scored features.
pub fn build_training_set(ds: &Dataset, cfg: &WeakConfig) -> Result<AnnotatedTrainingSet> {
    let strong = ds
        .strong_label()
        .ok_or_else(|| Error::Parameter("weak annotation needs a strong label".into()))?
        .to_string();
    let (z, _) = standardize(ds);
    let strong_idx: Vec<usize> = (0..z.n()).filter(|&i| z.bag_label_of(i) == strong).collect();
    let strong_centroid = (!strong_idx.is_empty()).then(|| {
        let rows = z.feature_rows(&strong_idx);
        DVector::from_iterator(rows.ncols(), rows.column_iter().map(|c| c.mean()))
    });
    let labels: Vec<&String> = z.label_set().iter().filter(|l| **l != strong).collect();
    let results = labels
        .par_iter()
        .map(|label| {
            annotate_label(&z, label, &strong, strong_centroid.as_ref(), cfg)
                .map_err(|e| e.context(format!("weak annotation of `{label}`")))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = AnnotatedTrainingSet::from_bag_labels(ds);
    out.config = Some(cfg.clone());
    for r in results {
        for (&i, label) in r.idx.iter().zip(r.annotation.labels) {
            let entry = &mut out.instances[i];
            entry.label = label;
            entry.provenance = Provenance::Weak;
        }
        out.audits.push(r.audit);
    }
    debug_assert_eq!(out.len(), ds.n());
    Ok(out)
}
