//! Weak annotation versus the bag-label baseline on planted synthetic bags.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{all_hard_passed, Check};
use crate::classify::{fully_supervised_baseline, leave_one_bag_out_cv, Aggregation, ClassifierKind, CvOptions};
use crate::dataset::standardize;
use crate::error::{Error, Result};
use crate::synth::{synth_bags, SynthConfig};
use crate::weakanno::{build_training_set, WeakConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSuiteConfig {
    pub seeds: Vec<u64>,
    /// Generator settings; `seed` is replaced per run.
    pub synth: SynthConfig,
    pub weak: WeakConfig,
    pub classifier: ClassifierKind,
    pub aggregation: Aggregation,
    /// Required bag-accuracy gap, as a fraction.
    pub min_gap: f64,
    /// Seeds that must reach `min_gap`.
    pub min_wins: usize,
}

impl Default for SynthSuiteConfig {
    fn default() -> Self {
        Self {
            seeds: (0..20).collect(),
            synth: SynthConfig::default(),
            weak: WeakConfig::default(),
            classifier: ClassifierKind::Logistic,
            aggregation: Aggregation::DisorderedFraction { tau: 0.25 },
            min_gap: 0.05,
            min_wins: 18,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub weak_accuracy: f64,
    pub baseline_accuracy: f64,
    pub gap: f64,
    /// Fraction of instances whose training label equals the planted truth.
    pub weak_agreement: f64,
    pub baseline_agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSuiteReport {
    pub config: SynthSuiteConfig,
    pub outcomes: Vec<SeedOutcome>,
    pub wins: usize,
    pub mean_gap: f64,
    pub checks: Vec<Check>,
}

impl SynthSuiteReport {
    pub fn passed(&self) -> bool {
        all_hard_passed(&self.checks)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record([
            "seed",
            "weak_accuracy",
            "baseline_accuracy",
            "gap",
            "weak_agreement",
            "baseline_agreement",
        ])?;
        for o in &self.outcomes {
            wtr.write_record([
                o.seed.to_string(),
                o.weak_accuracy.to_string(),
                o.baseline_accuracy.to_string(),
                o.gap.to_string(),
                o.weak_agreement.to_string(),
                o.baseline_agreement.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn run_seed(cfg: &SynthSuiteConfig, seed: u64) -> Result<SeedOutcome> {
    let ds = synth_bags(&SynthConfig {
        seed,
        ..cfg.synth.clone()
    })?;
    let truth = ds
        .truth()
        .ok_or_else(|| Error::Input("synthetic set lacks truth".into()))?
        .to_vec();
    let weak = build_training_set(
        &ds,
        &WeakConfig {
            seed,
            ..cfg.weak.clone()
        },
    )?;
    let base = fully_supervised_baseline(&ds);
    let (z, _) = standardize(&ds);
    let opts = CvOptions::new(cfg.classifier, cfg.aggregation);
    let weak_cv = leave_one_bag_out_cv(&weak, &z, &opts)?;
    let base_cv = leave_one_bag_out_cv(&base, &z, &opts)?;
    Ok(SeedOutcome {
        seed,
        weak_accuracy: weak_cv.accuracy,
        baseline_accuracy: base_cv.accuracy,
        gap: weak_cv.accuracy - base_cv.accuracy,
        weak_agreement: weak.agreement(&truth),
        baseline_agreement: base.agreement(&truth),
    })
}

pub fn run_table2synth(cfg: &SynthSuiteConfig) -> Result<SynthSuiteReport> {
    cfg.synth.validate()?;
    cfg.aggregation.validate()?;
    if cfg.seeds.is_empty() {
        return Err(Error::Parameter("no seeds".into()));
    }
    let outcomes: Vec<SeedOutcome> = cfg
        .seeds
        .par_iter()
        .map(|&s| run_seed(cfg, s).map_err(|e| e.context(format!("seed {s}"))))
        .collect::<Result<_>>()?;
    // tolerance keeps an exact 5-point gap from failing on rounding
    let wins = outcomes.iter().filter(|o| o.gap >= cfg.min_gap - 1e-12).count();
    let mean_gap = outcomes.iter().map(|o| o.gap).sum::<f64>() / outcomes.len() as f64;
    let min_agree = outcomes.iter().map(|o| o.weak_agreement).fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check::hard(
            "weak_beats_baseline",
            wins >= cfg.min_wins,
            format!(
                "gap >= {:.1} points in {wins}/{} seeds (need {}); mean gap {:.1} points",
                100.0 * cfg.min_gap,
                outcomes.len(),
                cfg.min_wins,
                100.0 * mean_gap
            ),
        ),
        Check::soft(
            "weak_label_agreement",
            min_agree >= 0.9,
            format!("lowest weak-label agreement {:.3} (report threshold 0.9)", min_agree),
        ),
    ];
    Ok(SynthSuiteReport {
        config: cfg.clone(),
        outcomes,
        wins,
        mean_gap,
        checks,
    })
}
