//! Leave-one-bag-out cross-validation scored at bag level.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{knn, logistic, qda, ClassifierKind, ClassifierModel};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::weakanno::AnnotatedTrainingSet;

/// How instance predictions of a bag become one bag label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Aggregation {
    /// Plurality over all classes; a tie involving a non-strong class goes to
    /// the lowest such class.
    Majority,
    /// Non-strong when more than `tau` of the instances are predicted
    /// non-strong, then the plurality among non-strong classes.
    DisorderedFraction { tau: f64 },
}

impl Aggregation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Aggregation::DisorderedFraction { tau } if !(0.0..1.0).contains(&tau) => {
                Err(Error::Parameter(format!("tau must lie in [0, 1), got {tau}")))
            }
            _ => Ok(()),
        }
    }
}

/// Bag label from per-class vote counts; `strong` is the strong class id.
pub fn aggregate(votes: &[usize], strong: Option<usize>, rule: Aggregation) -> usize {
    let total: usize = votes.iter().sum();
    let best_among = |allowed: &dyn Fn(usize) -> bool| {
        let mut best: Option<usize> = None;
        for (c, &v) in votes.iter().enumerate() {
            if allowed(c) && best.is_none_or(|b| v > votes[b]) {
                best = Some(c);
            }
        }
        best
    };
    match (rule, strong) {
        (Aggregation::DisorderedFraction { tau }, Some(s)) if votes.len() > 1 => {
            let disordered = total - votes[s];
            if total > 0 && disordered as f64 / total as f64 > tau {
                best_among(&|c| c != s).unwrap_or(s)
            } else {
                s
            }
        }
        _ => {
            let top = votes.iter().copied().max().unwrap_or(0);
            match strong {
                Some(s) => best_among(&|c| c != s && votes[c] == top).unwrap_or(s),
                None => best_among(&|_| true).unwrap_or(0),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub kind: ClassifierKind,
    pub aggregation: Aggregation,
    pub l2: f64,
    pub ridge: f64,
    pub k_grid: Vec<usize>,
}

impl CvOptions {
    pub fn new(kind: ClassifierKind, aggregation: Aggregation) -> Self {
        Self {
            kind,
            aggregation,
            l2: logistic::DEFAULT_L2,
            ridge: qda::DEFAULT_RIDGE,
            k_grid: knn::DEFAULT_K_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub bag_id: String,
    pub true_label: String,
    pub predicted: String,
    /// Instance votes per class, in `CvResult::classes` order.
    pub votes: Vec<usize>,
    /// Classes absent from this fold's training labels.
    pub missing_classes: Vec<String>,
    /// Neighbour count chosen by the inner search (kNN only).
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub classifier: ClassifierKind,
    pub aggregation: Aggregation,
    pub classes: Vec<String>,
    /// One per bag, in dataset bag order.
    pub folds: Vec<FoldResult>,
    pub accuracy: f64,
    /// `confusion[true][predicted]` bag counts.
    pub confusion: Vec<Vec<usize>>,
}

impl CvResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["bag_id", "true", "predicted"])?;
        for f in &self.folds {
            wtr.write_record([&f.bag_id, &f.true_label, &f.predicted])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn class_index(classes: &[String], label: &str) -> Result<usize> {
    classes
        .iter()
        .position(|c| c == label)
        .ok_or_else(|| Error::Input(format!("label `{label}` is not a bag label")))
}

fn training_ids(ts: &AnnotatedTrainingSet, classes: &[String]) -> Result<Vec<usize>> {
    ts.instances.iter().map(|a| class_index(classes, &a.label)).collect()
}

/// A classifier fitted on every instance, with class ids resolved to names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    /// Class names indexed by class id.
    pub classes: Vec<String>,
    pub model: ClassifierModel,
    /// Neighbour count chosen by inner leave-one-bag-out selection (kNN only).
    pub k: Option<usize>,
}

impl TrainedClassifier {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<String>> {
        Ok(self
            .model
            .predict(x)?
            .into_iter()
            .map(|c| self.classes[c].clone())
            .collect())
    }
}

/// Fits `opts.kind` on all labels of `ts` with features from `ds` as given.
pub fn train_classifier(ts: &AnnotatedTrainingSet, ds: &Dataset, opts: &CvOptions) -> Result<TrainedClassifier> {
    if ts.len() != ds.n() {
        return Err(Error::Input(format!(
            "training set has {} instances, dataset {}",
            ts.len(),
            ds.n()
        )));
    }
    let classes: Vec<String> = ds.label_set().to_vec();
    let y = training_ids(ts, &classes)?;
    let groups: Vec<usize> = (0..ds.n()).map(|i| ds.bag_of(i)).collect();
    let (model, k) = fit(opts.kind, &ds.feature_matrix(), &y, &groups, opts)?;
    Ok(TrainedClassifier { classes, model, k })
}

fn fit(
    kind: ClassifierKind,
    x: &DMatrix<f64>,
    y: &[usize],
    groups: &[usize],
    opts: &CvOptions,
) -> Result<(ClassifierModel, Option<usize>)> {
    Ok(match kind {
        ClassifierKind::Logistic => (
            ClassifierModel::Logistic(logistic::train_logistic(x, y, opts.l2)?),
            None,
        ),
        ClassifierKind::Qda => (ClassifierModel::Qda(qda::train_qda(x, y, opts.ridge)?), None),
        ClassifierKind::Knn => {
            let k = knn::select_k(x, y, groups, &opts.k_grid)?;
            (ClassifierModel::Knn(knn::train_knn(x, y, k)?), Some(k))
        }
    })
}

/// Each bag in turn is held out; a classifier trained on the labels of `ts`
/// for all other bags predicts its instances. Features are taken from `ds`
/// as given.
pub fn leave_one_bag_out_cv(ts: &AnnotatedTrainingSet, ds: &Dataset, opts: &CvOptions) -> Result<CvResult> {
    opts.aggregation.validate()?;
    if ts.len() != ds.n() {
        return Err(Error::Input(format!(
            "training set has {} instances, dataset {}",
            ts.len(),
            ds.n()
        )));
    }
    let nb = ds.bags().len();
    if nb < 2 {
        return Err(Error::Parameter(format!("cross-validation needs >= 2 bags, got {nb}")));
    }
    let classes: Vec<String> = ds.label_set().to_vec();
    let class_of = |label: &str| class_index(&classes, label);
    let y = training_ids(ts, &classes)?;
    let strong = ds.strong_label().map(class_of).transpose()?;
    let x = ds.feature_matrix();

    let folds = (0..nb)
        .into_par_iter()
        .map(|b| -> Result<FoldResult> {
            let bag = &ds.bags()[b];
            let train: Vec<usize> = (0..ds.n()).filter(|&i| ds.bag_of(i) != b).collect();
            assert!(
                train.iter().all(|&i| !bag.members.contains(&i)),
                "held-out bag {} leaked into its training fold",
                bag.id
            );
            let xt = DMatrix::from_fn(train.len(), x.ncols(), |r, c| x[(train[r], c)]);
            let yt: Vec<usize> = train.iter().map(|&i| y[i]).collect();
            let groups: Vec<usize> = train.iter().map(|&i| ds.bag_of(i)).collect();
            let xq = DMatrix::from_fn(bag.members.len(), x.ncols(), |r, c| x[(bag.members[r], c)]);

            let mut present = yt.clone();
            present.sort_unstable();
            present.dedup();
            let missing: Vec<String> = (0..classes.len())
                .filter(|c| present.binary_search(c).is_err())
                .map(|c| classes[c].clone())
                .collect();
            if !missing.is_empty() {
                log::warn!("fold {}: training labels lack {:?}", bag.id, missing);
            }
            let (pred, k) = if present.len() == 1 {
                (vec![present[0]; bag.members.len()], None)
            } else {
                let (model, k) =
                    fit(opts.kind, &xt, &yt, &groups, opts).map_err(|e| e.context(format!("fold {}", bag.id)))?;
                (model.predict(&xq)?, k)
            };
            let mut votes = vec![0; classes.len()];
            for p in pred {
                votes[p] += 1;
            }
            let predicted = aggregate(&votes, strong, opts.aggregation);
            Ok(FoldResult {
                bag_id: bag.id.clone(),
                true_label: bag.label.clone(),
                predicted: classes[predicted].clone(),
                votes,
                missing_classes: missing,
                k,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut confusion = vec![vec![0; classes.len()]; classes.len()];
    let mut correct = 0;
    for f in &folds {
        let t = class_of(&f.true_label)?;
        let p = class_of(&f.predicted)?;
        confusion[t][p] += 1;
        if t == p {
            correct += 1;
        }
    }
    Ok(CvResult {
        classifier: opts.kind,
        aggregation: opts.aggregation,
        classes,
        accuracy: correct as f64 / nb as f64,
        folds,
        confusion,
    })
}
