//! Instance classifiers and bag-level evaluation.

pub mod cv;
pub mod knn;
pub mod logistic;
pub mod qda;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::weakanno::AnnotatedTrainingSet;

pub use cv::{leave_one_bag_out_cv, train_classifier, Aggregation, CvOptions, CvResult, FoldResult, TrainedClassifier};
pub use knn::{select_k, train_knn, KnnModel, DEFAULT_K_GRID};
pub use logistic::{train_logistic, LogisticModel, DEFAULT_L2};
pub use qda::{train_qda, QdaModel, DEFAULT_RIDGE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Logistic,
    Knn,
    Qda,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [ClassifierKind::Logistic, ClassifierKind::Knn, ClassifierKind::Qda];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Logistic => "logistic",
            ClassifierKind::Knn => "knn",
            ClassifierKind::Qda => "qda",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown classifier `{s}` (expected logistic, knn or qda)")))
    }
}

/// A trained classifier over dense class ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierModel {
    Logistic(LogisticModel),
    Knn(KnnModel),
    Qda(QdaModel),
}

/// Index of the largest entry, lowest index on ties.
fn argmax(row: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in row.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

impl ClassifierModel {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierModel::Logistic(_) => ClassifierKind::Logistic,
            ClassifierModel::Knn(_) => ClassifierKind::Knn,
            ClassifierModel::Qda(_) => ClassifierKind::Qda,
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        match self {
            ClassifierModel::Logistic(m) => {
                let pr = m.predict_proba(x)?;
                Ok(pr.row_iter().map(|r| m.classes[argmax(r.iter().copied())]).collect())
            }
            ClassifierModel::Qda(m) => {
                let pr = m.predict_proba(x)?;
                Ok(pr
                    .row_iter()
                    .map(|r| m.classes[argmax(r.iter().copied())].class)
                    .collect())
            }
            ClassifierModel::Knn(m) => m.predict(x),
        }
    }

    /// Class ids the model can output, ascending.
    pub fn classes(&self) -> Vec<usize> {
        match self {
            ClassifierModel::Logistic(m) => m.classes.clone(),
            ClassifierModel::Qda(m) => m.classes.iter().map(|c| c.class).collect(),
            ClassifierModel::Knn(m) => {
                let mut c = m.y.clone();
                c.sort_unstable();
                c.dedup();
                c
            }
        }
    }
}

/// The naive baseline: every instance inherits its bag's label.
pub fn fully_supervised_baseline(ds: &Dataset) -> AnnotatedTrainingSet {
    AnnotatedTrainingSet::from_bag_labels(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_bags, SynthConfig, STRONG};
    use crate::weakanno::{build_training_set, Provenance, WeakConfig};

    #[test]
    fn baseline_labels_every_instance_with_its_bag() {
        let ds = synth_bags(&SynthConfig {
            bags_per_class: 3,
            ..SynthConfig::default()
        })
        .unwrap();
        let ts = fully_supervised_baseline(&ds);
        assert_eq!(ts.count(Provenance::Strong), ds.n());
        for a in &ts.instances {
            assert_eq!(a.label, a.bag_label);
        }
    }

    #[test]
    fn baseline_mislabels_exactly_the_planted_normals() {
        let ds = synth_bags(&SynthConfig {
            seed: 9,
            ..SynthConfig::default()
        })
        .unwrap();
        let truth = ds.truth().unwrap();
        let ts = fully_supervised_baseline(&ds);
        let wrong = ts.instances.iter().filter(|a| a.label != truth[a.index]).count();
        let planted_normals = (0..ds.n())
            .filter(|&i| ds.bag_label_of(i) != STRONG && truth[i] == STRONG)
            .count();
        assert_eq!(wrong, planted_normals);
    }

    #[test]
    fn baseline_equals_annotation_for_strong_only() {
        let ds = Dataset::unbagged(vec![vec![0.0], vec![1.0], vec![3.0]], None, vec![])
            .unwrap()
            .with_strong_label(Some(crate::dataset::DEFAULT_BAG_LABEL.into()))
            .unwrap();
        let weak = build_training_set(&ds, &WeakConfig::default()).unwrap();
        assert_eq!(weak.instances, fully_supervised_baseline(&ds).instances);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ClassifierKind::ALL {
            assert_eq!(k.name().parse::<ClassifierKind>().unwrap(), k);
        }
    }
}
