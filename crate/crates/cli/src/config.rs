//! Flat run configuration: a TOML file overlaid by command-line flags.
//!
//! Every key of the file has a flag of the same name (underscores become
//! dashes). Flags win over file values.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use specweak::eval::{GridSpec, IndexName};
use specweak::experiments::Benchmark;
use specweak::weakanno::default_weak_grid;
use specweak::{Aggregation, ClassifierKind, GraphModel, Schema};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct InputArgs {
    /// CSV file with one row per instance
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Use the bundled two-group toy set instead of --data
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub toy: Option<bool>,
    /// Generate planted synthetic bags (seeded by --seed) instead of --data
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub synthetic: Option<bool>,
    #[arg(long)]
    pub id_column: Option<String>,
    #[arg(long)]
    pub bag_column: Option<String>,
    #[arg(long)]
    pub label_column: Option<String>,
    /// Instance-level reference labels, used only for scoring
    #[arg(long)]
    pub truth_column: Option<String>,
    /// Feature columns; default is every column without another role
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Bag label whose bags are fully labelled
    #[arg(long)]
    pub strong_label: Option<String>,
    #[arg(long)]
    pub delimiter: Option<char>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct GraphArgs {
    /// epsilon | knn_symmetric | knn_mutual | fully_connected |
    /// prob_threshold_min | prob_threshold_max | prob_criterion_min | prob_criterion_max
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub epsilon: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub sigma: Option<Vec<f64>>,
    /// Similarity threshold(s) of the probabilistic models
    #[arg(long, value_delimiter = ',')]
    pub w: Option<Vec<f64>>,
    /// Weight floor of the probabilistic threshold model (default 0.01)
    #[arg(long)]
    pub eps_weight: Option<f64>,
    /// Smoothing exponent of the initial similarities, < 0 (default -1)
    #[arg(long, allow_hyphen_values = true)]
    pub m: Option<f64>,
    /// Read w and sigma as multiples of 1/(n-1)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub relative: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct GroupArgs {
    /// Number of spectral groups (default 2)
    #[arg(long)]
    pub groups: Option<usize>,
    /// davies_bouldin | f1 (f1 needs a truth column)
    #[arg(long)]
    pub objective: Option<String>,
    /// Grid tuples whose smallest group is below this fraction of n are skipped
    #[arg(long)]
    pub min_group_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ClassifyArgs {
    /// logistic | knn | qda (default logistic)
    #[arg(long)]
    pub classifier: Option<String>,
    /// majority | disordered_fraction (default majority)
    #[arg(long)]
    pub aggregation: Option<String>,
    /// Threshold of the disordered_fraction rule (default 0.25)
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Train on bag labels instead of weak annotations
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub baseline: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    /// Directory holding the benchmark CSV files (default $SPECWEAK_DATA_DIR or ./data)
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Subset of banknotes, segmentation, abalone
    #[arg(long, value_delimiter = ',')]
    pub datasets: Option<Vec<String>>,
    /// Number of seeds for table2synth, starting at --seed (default 20)
    #[arg(long)]
    pub seeds: Option<u64>,
}

/// Union of every key; each command reads the ones it needs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub input: InputArgs,
    #[serde(flatten)]
    pub graph: GraphArgs,
    #[serde(flatten)]
    pub group: GroupArgs,
    #[serde(flatten)]
    pub classify: ClassifyArgs,
    #[serde(flatten)]
    pub bench: BenchArgs,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

fn as_object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

impl RunConfig {
    /// Keys accepted in a config file.
    pub fn known_keys() -> Vec<String> {
        as_object(serde_json::to_value(RunConfig::default()).expect("config serializes"))
            .keys()
            .cloned()
            .collect()
    }

    /// File values, then every flag that was given.
    pub fn merge(file: Option<&Path>, flags: &RunConfig) -> Result<RunConfig> {
        let mut merged = Map::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let table: toml::Table =
                toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
            let known = Self::known_keys();
            let unknown: Vec<&String> = table.keys().filter(|k| !known.contains(k)).collect();
            if !unknown.is_empty() {
                bail!("unknown config keys {unknown:?}; accepted keys: {}", known.join(", "));
            }
            merged = as_object(serde_json::to_value(table)?);
        }
        for (k, v) in as_object(serde_json::to_value(flags)?) {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
        serde_json::from_value(Value::Object(merged)).context("invalid config value")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("specweak-out"))
    }

    pub fn schema(&self) -> Result<Schema> {
        let i = &self.input;
        let delimiter = match i.delimiter {
            None => b',',
            Some(c) if c.is_ascii() => c as u8,
            Some(c) => bail!("delimiter must be a single ASCII character, got {c:?}"),
        };
        Ok(Schema {
            id: i.id_column.clone(),
            bag: i.bag_column.clone(),
            bag_label: i.label_column.clone(),
            truth: i.truth_column.clone(),
            features: i.features.clone().unwrap_or_default(),
            strong_label: i.strong_label.clone(),
            delimiter,
        })
    }

    /// Graph grid from the graph keys, checked before any data is read.
    /// `None` when no model was given.
    pub fn grid(&self) -> Result<Option<GridSpec>> {
        let g = &self.graph;
        let Some(name) = g.model.as_deref() else {
            let stray = [g.epsilon.is_some(), g.k.is_some(), g.sigma.is_some(), g.w.is_some()];
            if stray.iter().any(|&s| s) {
                bail!("graph parameters given without --model");
            }
            return Ok(None);
        };
        let model: GraphModel = name.parse()?;
        let mut grid = GridSpec::new(model);
        grid.epsilon = g.epsilon.clone().unwrap_or_default();
        grid.k = g.k.clone().unwrap_or_default();
        grid.sigma = g.sigma.clone().unwrap_or_default();
        grid.w = g.w.clone().unwrap_or_default();
        if let Some(e) = g.eps_weight {
            grid.eps_weight = e;
        }
        if let Some(m) = g.m {
            grid.m = m;
        }
        grid.relative = g.relative.unwrap_or(false);

        let positive = |name: &str, vs: &[f64]| -> Result<()> {
            match vs.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                Some(v) => bail!("{name} must be > 0, got {v}"),
                None => Ok(()),
            }
        };
        positive("epsilon", &grid.epsilon)?;
        positive("sigma", &grid.sigma)?;
        positive("w", &grid.w)?;
        positive("eps_weight", &[grid.eps_weight])?;
        if grid.k.contains(&0) {
            bail!("k must be >= 1");
        }
        if !(grid.m < 0.0 && grid.m.is_finite()) {
            bail!("m must be < 0, got {}", grid.m);
        }
        if !grid.relative {
            if let Some(w) = grid.w.iter().find(|&&w| w >= 1.0) {
                bail!("w must lie in (0, 1), got {w} (use --relative for multiples of 1/(n-1))");
            }
        }
        // reports missing lists (e.g. sigma for a probabilistic model)
        grid.tuples(2, 0)?;
        Ok(Some(grid))
    }

    pub fn grid_or_default(&self) -> Result<GridSpec> {
        Ok(self.grid()?.unwrap_or_else(default_weak_grid))
    }

    pub fn groups(&self) -> Result<usize> {
        let k = self.group.groups.unwrap_or(2);
        if k < 2 {
            bail!("groups must be >= 2, got {k}");
        }
        Ok(k)
    }

    pub fn objective(&self) -> Result<IndexName> {
        match self.group.objective.as_deref() {
            None | Some("davies_bouldin") => Ok(IndexName::DaviesBouldin),
            Some("f1") => Ok(IndexName::F1),
            Some(o) => bail!("unknown objective `{o}` (expected davies_bouldin or f1)"),
        }
    }

    pub fn min_group_fraction(&self, default: f64) -> Result<f64> {
        let f = self.group.min_group_fraction.unwrap_or(default);
        if !(0.0..0.5).contains(&f) {
            bail!("min_group_fraction must lie in [0, 0.5), got {f}");
        }
        Ok(f)
    }

    pub fn classifier(&self) -> Result<ClassifierKind> {
        Ok(self.classify.classifier.as_deref().unwrap_or("logistic").parse()?)
    }

    pub fn aggregation(&self) -> Result<Aggregation> {
        let agg = match self.classify.aggregation.as_deref() {
            None | Some("majority") => {
                if self.classify.tau.is_some() {
                    bail!("tau applies only to the disordered_fraction rule");
                }
                Aggregation::Majority
            }
            Some("disordered_fraction") => Aggregation::DisorderedFraction {
                tau: self.classify.tau.unwrap_or(0.25),
            },
            Some(a) => bail!("unknown aggregation `{a}` (expected majority or disordered_fraction)"),
        };
        agg.validate()?;
        Ok(agg)
    }

    pub fn benchmarks(&self) -> Result<Vec<Benchmark>> {
        match &self.bench.datasets {
            None => Ok(Benchmark::ALL.to_vec()),
            Some(names) => Ok(names.iter().map(|n| n.parse()).collect::<Result<_, _>>()?),
        }
    }
}
