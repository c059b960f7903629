//! Reproducible experiment suites with pass/fail checks.
//!
//! Each suite returns a typed report whose `checks` carry the verdicts.
//! Reports contain no timings, so identical inputs give identical JSON.

pub mod benchmarks;
pub mod synthetic;
pub mod toy;

use serde::{Deserialize, Serialize};

pub use benchmarks::{load_benchmark, run_table1, Benchmark, Table1Config, Table1Report, Table1Row};
pub use synthetic::{run_table2synth, SeedOutcome, SynthSuiteConfig, SynthSuiteReport};
pub use toy::{dataset_a, run_toyfig, SweepPoint, ToyConfig, ToyReport, DATASET_A_CSV};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Soft checks are reported but never fail a suite.
    pub hard: bool,
    pub detail: String,
}

impl Check {
    pub fn hard(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            hard: true,
            detail: detail.into(),
        }
    }

    pub fn soft(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            hard: false,
            ..Self::hard(name, passed, detail)
        }
    }
}

/// True when every hard check passed.
pub fn all_hard_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed || !c.hard)
}

/// Whether two label vectors induce the same partition, up to renaming.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    use std::collections::HashMap;
    if a.len() != b.len() {
        return false;
    }
    let mut fwd = HashMap::new();
    let mut bwd = HashMap::new();
    a.iter()
        .zip(b)
        .all(|(&x, &y)| *fwd.entry(x).or_insert(y) == y && *bwd.entry(y).or_insert(x) == x)
}
