//! Public grouping benchmarks: loaders and the F1 recipes per dataset.
//!
//! Data files are not shipped; [`load_benchmark`] fails with fetch
//! instructions when a file is absent.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{all_hard_passed, Check};
use crate::dataset::{load_csv, pairwise_distances, standardize, Dataset, Schema};
use crate::error::{Error, Result};
use crate::eval::{grid_search_points, GridSpec, IndexName, SearchOptions};
use crate::simgraph::{GraphModel, GraphSpec, Symmetrize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Banknotes,
    Segmentation,
    Abalone,
}

const BANKNOTE_FEATURES: [&str; 6] = ["Length", "Left", "Right", "Bottom", "Top", "Diagonal"];
const ABALONE_NUMERIC: [&str; 7] = ["Length", "Diameter", "Height", "Whole", "Shucked", "Viscera", "Shell"];

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [Benchmark::Banknotes, Benchmark::Segmentation, Benchmark::Abalone];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Banknotes => "banknotes",
            Benchmark::Segmentation => "segmentation",
            Benchmark::Abalone => "abalone",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            Benchmark::Banknotes => "banknote.csv",
            Benchmark::Segmentation => "segmentation.csv",
            Benchmark::Abalone => "abalone.csv",
        }
    }

    /// Rows and feature columns the loader insists on.
    pub fn shape(self) -> (usize, usize) {
        match self {
            Benchmark::Banknotes => (200, 6),
            Benchmark::Segmentation => (2310, 19),
            Benchmark::Abalone => (4177, 9),
        }
    }

    /// Number of spectral groups.
    pub fn groups(self) -> usize {
        match self {
            Benchmark::Banknotes => 2,
            Benchmark::Segmentation => 7,
            Benchmark::Abalone => 10,
        }
    }

    pub fn fetch_instructions(self, dir: &Path) -> String {
        let target = dir.join(self.file_name());
        let how = match self {
            Benchmark::Banknotes => "Swiss banknotes (200 notes). One source is the `banknote` data of the R \
                 package mclust:\n  Rscript -e 'data(banknote, package=\"mclust\"); write.csv(banknote, \"banknote.csv\", row.names=FALSE)'\n\
                 Required columns: Status,Length,Left,Right,Bottom,Top,Diagonal"
                .to_string(),
            Benchmark::Segmentation => "UCI Image Segmentation. Download segmentation.data and segmentation.test from\n  \
                 https://archive.ics.uci.edu/dataset/50/image+segmentation\n\
                 drop the 5 preamble lines of each, concatenate (2310 rows) and prepend the header\n  \
                 class,REGION-CENTROID-COL,REGION-CENTROID-ROW,REGION-PIXEL-COUNT,SHORT-LINE-DENSITY-5,\
                 SHORT-LINE-DENSITY-2,VEDGE-MEAN,VEDGE-SD,HEDGE-MEAN,HEDGE-SD,INTENSITY-MEAN,RAWRED-MEAN,\
                 RAWBLUE-MEAN,RAWGREEN-MEAN,EXRED-MEAN,EXBLUE-MEAN,EXGREEN-MEAN,VALUE-MEAN,SATURATION-MEAN,HUE-MEAN"
                .to_string(),
            Benchmark::Abalone => "UCI Abalone. Download abalone.data from\n  https://archive.ics.uci.edu/dataset/1/abalone\n\
                 and prepend the header\n  Sex,Length,Diameter,Height,Whole,Shucked,Viscera,Shell,Rings"
                .to_string(),
        };
        format!("{how}\nSave it as {} (or set SPECWEAK_DATA_DIR).", target.display())
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Benchmark::ALL.into_iter().find(|b| b.name() == s).ok_or_else(|| {
            Error::Parameter(format!(
                "unknown benchmark `{s}` (expected banknotes, segmentation or abalone)"
            ))
        })
    }
}

/// `SPECWEAK_DATA_DIR`, falling back to `./data`.
pub fn default_data_dir() -> PathBuf {
    std::env::var_os("SPECWEAK_DATA_DIR").map_or_else(|| PathBuf::from("data"), PathBuf::from)
}

fn check_shape(b: Benchmark, ds: &Dataset) -> Result<()> {
    let (n, p) = b.shape();
    if ds.n() != n || ds.p() != p {
        return Err(Error::Integrity(format!(
            "{b}: expected {n} rows x {p} features, found {} x {}",
            ds.n(),
            ds.p()
        )));
    }
    Ok(())
}

/// Loads and verifies a benchmark file from `dir`.
pub fn load_benchmark(b: Benchmark, dir: &Path) -> Result<Dataset> {
    let path = dir.join(b.file_name());
    if !path.is_file() {
        return Err(Error::MissingDataset {
            name: b.name().into(),
            path: path.display().to_string(),
            instructions: b.fetch_instructions(dir),
        });
    }
    let ds = match b {
        Benchmark::Banknotes => load_csv(
            &path,
            &Schema {
                truth: Some("Status".into()),
                features: BANKNOTE_FEATURES.iter().map(|s| s.to_string()).collect(),
                ..Schema::default()
            },
        )?,
        Benchmark::Segmentation => load_csv(
            &path,
            &Schema {
                truth: Some("class".into()),
                ..Schema::default()
            },
        )?,
        Benchmark::Abalone => load_abalone(&path)?,
    };
    check_shape(b, &ds)?;
    Ok(ds)
}

/// Sex becomes two indicators (M, F; infants are the reference) next to
/// the seven measurements; Rings become ten equal-frequency bins.
fn load_abalone(path: &Path) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}` (header: {headers:?})")))
    };
    let sex = col("Sex")?;
    let rings = col("Rings")?;
    let numeric: Vec<usize> = ABALONE_NUMERIC.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let mut features = Vec::new();
    let mut ring_values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |c: usize| -> Result<f64> {
            let raw = rec.get(c).unwrap_or("").trim();
            raw.parse().map_err(|_| Error::Parse {
                row: row + 1,
                column: headers[c].clone(),
                message: format!("`{raw}` is not a number"),
            })
        };
        let mut f: Vec<f64> = numeric.iter().map(|&c| parse(c)).collect::<Result<_>>()?;
        let s = rec.get(sex).unwrap_or("").trim();
        if !matches!(s, "M" | "F" | "I") {
            return Err(Error::Parse {
                row: row + 1,
                column: "Sex".into(),
                message: format!("`{s}` is not one of M, F, I"),
            });
        }
        f.push(if s == "M" { 1.0 } else { 0.0 });
        f.push(if s == "F" { 1.0 } else { 0.0 });
        features.push(f);
        ring_values.push(parse(rings)?);
    }
    let truth = quantile_bins(&ring_values, 10)
        .into_iter()
        .map(|b| format!("q{b}"))
        .collect();
    let mut names: Vec<String> = ABALONE_NUMERIC.iter().map(|s| s.to_string()).collect();
    names.extend(["SexM".to_string(), "SexF".to_string()]);
    Dataset::unbagged(features, Some(truth), names)
}

/// Equal-frequency bins: value `v` goes to `floor(bins · #{x < v} / n)`,
/// so tied values share a bin and some bins may stay empty.
pub fn quantile_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = values.len();
    values
        .iter()
        .map(|v| {
            let below = sorted.partition_point(|x| x < v);
            (bins * below / n).min(bins - 1)
        })
        .collect()
}

/// Drops rows whose feature vector repeats an earlier row; zero distances
/// are undefined for the ratio similarities. Returns the kept row indices.
pub fn dedup_features(ds: &Dataset) -> Result<(Dataset, Vec<usize>)> {
    let mut seen = HashSet::new();
    let mut keep = Vec::new();
    for (i, inst) in ds.instances().iter().enumerate() {
        let key: Vec<u64> = inst.features.iter().map(|v| (v + 0.0).to_bits()).collect();
        if seen.insert(key) {
            keep.push(i);
        }
    }
    let features = keep.iter().map(|&i| ds.instances()[i].features.clone()).collect();
    let truth = ds.truth().map(|t| keep.iter().map(|&i| t[i].clone()).collect());
    let out = Dataset::unbagged(features, truth, ds.feature_names().to_vec())?;
    Ok((out, keep))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Target {
    /// Hard lower bound on F1.
    AtLeast(f64),
    /// Soft band `center ± half_width`.
    Band { center: f64, half_width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub benchmark: Benchmark,
    pub grids: Vec<GridSpec>,
    pub target: Target,
}

fn prob_grids(model: GraphModel, abs_w: &[f64], abs_sigma: &[f64], rel_w: &[f64], rel_sigma: &[f64]) -> Vec<GridSpec> {
    let mut out = Vec::new();
    if !abs_w.is_empty() {
        let mut g = GridSpec::new(model);
        g.w = abs_w.to_vec();
        g.sigma = abs_sigma.to_vec();
        out.push(g);
    }
    if !rel_w.is_empty() {
        let mut g = GridSpec::new(model);
        g.w = rel_w.to_vec();
        g.sigma = rel_sigma.to_vec();
        g.relative = true;
        out.push(g);
    }
    out
}

/// One recipe per graph model under test.
pub fn recipes(b: Benchmark) -> Vec<Recipe> {
    let rel_w = [0.5, 1.0, 1.5, 2.0, 3.0];
    let rel_sigma = [0.1, 0.5];
    match b {
        Benchmark::Banknotes => {
            let abs_w = [0.01, 0.02, 0.05, 0.1, 0.2];
            let abs_sigma = [0.05, 0.1, 0.2, 0.5];
            let rel_w = [0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0];
            let rel_sigma = [0.1, 0.5, 1.0];
            [Symmetrize::Min, Symmetrize::Max]
                .into_iter()
                .flat_map(|s| [GraphModel::ProbThreshold(s), GraphModel::ProbCriterion(s)])
                .map(|model| Recipe {
                    benchmark: b,
                    grids: prob_grids(model, &abs_w, &abs_sigma, &rel_w, &rel_sigma),
                    target: Target::AtLeast(0.99),
                })
                .collect()
        }
        // larger sets get relative grids only: each tuple costs a dense eigendecomposition
        Benchmark::Segmentation => vec![Recipe {
            benchmark: b,
            grids: prob_grids(GraphModel::ProbThreshold(Symmetrize::Min), &[], &[], &rel_w, &rel_sigma),
            target: Target::Band {
                center: 0.581,
                half_width: 0.10,
            },
        }],
        Benchmark::Abalone => vec![Recipe {
            benchmark: b,
            grids: prob_grids(
                GraphModel::ProbThreshold(Symmetrize::Max),
                &[],
                &[],
                &[1.0, 2.0, 3.0],
                &[0.5],
            ),
            target: Target::Band {
                center: 0.903,
                half_width: 0.10,
            },
        }],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table1Config {
    pub data_dir: PathBuf,
    pub datasets: Vec<Benchmark>,
    pub seed: u64,
}

impl Default for Table1Config {
    fn default() -> Self {
        Self {
            data_dir: default_data_dir(),
            datasets: Benchmark::ALL.to_vec(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub dataset: Benchmark,
    pub model: GraphModel,
    pub n: usize,
    pub duplicates_dropped: usize,
    pub tuples: usize,
    pub f1: f64,
    pub winner: GraphSpec,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub rows: Vec<Table1Row>,
    pub checks: Vec<Check>,
}

impl Table1Report {
    pub fn passed(&self) -> bool {
        all_hard_passed(&self.checks)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["dataset", "model", "n", "duplicates_dropped", "tuples", "f1", "winner"])?;
        for r in &self.rows {
            wtr.write_record([
                r.dataset.to_string(),
                r.model.to_string(),
                r.n.to_string(),
                r.duplicates_dropped.to_string(),
                r.tuples.to_string(),
                r.f1.to_string(),
                serde_json::to_string(&r.winner)?,
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn run_recipe(ds: &Dataset, recipe: &Recipe, seed: u64) -> Result<(Table1Row, Check)> {
    let (dedup, keep) = dedup_features(ds)?;
    let (z, _) = standardize(&dedup);
    let d = pairwise_distances(&z);
    let truth = z
        .truth_indices()
        .ok_or_else(|| Error::Input(format!("{} has no truth labels", recipe.benchmark)))?;
    let mut specs = Vec::new();
    for g in &recipe.grids {
        specs.extend(g.tuples(z.n(), seed)?);
    }
    let opts = SearchOptions::new(recipe.benchmark.groups(), seed, IndexName::F1);
    let res = grid_search_points(&z.feature_matrix(), &d, Some(&truth), &specs, &opts)?;
    let model = specs[0].model();
    let name = format!("{}_{}", recipe.benchmark, model);
    let f1 = res.value;
    let check = match recipe.target {
        Target::AtLeast(min) => Check::hard(name, f1 >= min, format!("F1 = {f1:.4} (need >= {min})")),
        Target::Band { center, half_width } => Check::soft(
            name,
            (f1 - center).abs() <= half_width,
            format!("F1 = {f1:.4} (reference {center} +- {half_width})"),
        ),
    };
    let row = Table1Row {
        dataset: recipe.benchmark,
        model,
        n: z.n(),
        duplicates_dropped: ds.n() - keep.len(),
        tuples: specs.len(),
        f1,
        winner: res.winner_spec().clone(),
        target: recipe.target.clone(),
    };
    Ok((row, check))
}

/// Every requested dataset must be present before any work starts.
pub fn run_table1(cfg: &Table1Config) -> Result<Table1Report> {
    let loaded: Vec<(Benchmark, Dataset)> = cfg
        .datasets
        .iter()
        .map(|&b| load_benchmark(b, &cfg.data_dir).map(|ds| (b, ds)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (b, ds) in &loaded {
        for recipe in recipes(*b) {
            let (row, check) = run_recipe(ds, &recipe, cfg.seed)?;
            log::info!("{}", check.detail);
            rows.push(row);
            checks.push(check);
        }
    }
    Ok(Table1Report { rows, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_file_names_the_fetch_steps() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_benchmark(Benchmark::Banknotes, dir.path()).unwrap_err();
        match err {
            Error::MissingDataset { name, instructions, .. } => {
                assert_eq!(name, "banknotes");
                assert!(instructions.contains("banknote.csv"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn wrong_shape_is_an_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("banknote.csv"),
            "Status,Length,Left,Right,Bottom,Top,Diagonal\ngenuine,1,2,3,4,5,6\n",
        )
        .unwrap();
        assert!(matches!(
            load_benchmark(Benchmark::Banknotes, dir.path()),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn abalone_rows_are_encoded() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("abalone.csv");
        std::fs::write(
            &path,
            "Sex,Length,Diameter,Height,Whole,Shucked,Viscera,Shell,Rings\n\
             M,0.455,0.365,0.095,0.514,0.2245,0.101,0.15,15\n\
             F,0.53,0.42,0.135,0.677,0.2565,0.1415,0.21,9\n\
             I,0.33,0.255,0.08,0.205,0.0895,0.0395,0.055,7\n",
        )
        .unwrap();
        let ds = load_abalone(&path).unwrap();
        assert_eq!(ds.p(), 9);
        assert_eq!(&ds.instances()[0].features[7..], &[1.0, 0.0]);
        assert_eq!(&ds.instances()[2].features[7..], &[0.0, 0.0]);
        assert_eq!(ds.truth().unwrap(), &["q6", "q3", "q0"]);
    }

    #[test]
    fn quantile_bins_keep_ties_together() {
        assert_eq!(quantile_bins(&[1.0, 2.0, 2.0, 3.0], 2), vec![0, 0, 0, 1]);
        assert_eq!(quantile_bins(&[4.0, 3.0, 2.0, 1.0], 4), vec![3, 2, 1, 0]);
    }

    #[test]
    fn duplicates_are_dropped_keeping_the_first() {
        let ds = Dataset::unbagged(
            vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![0.0, 1.0], vec![-0.0, 1.0]],
            Some(vec!["a".into(), "b".into(), "c".into(), "d".into()]),
            vec![],
        )
        .unwrap();
        let (out, keep) = dedup_features(&ds).unwrap();
        assert_eq!(keep, vec![0, 1]);
        assert_eq!(out.truth().unwrap(), &["a", "b"]);
    }

    #[test]
    fn names_round_trip() {
        for b in Benchmark::ALL {
            assert_eq!(b.name().parse::<Benchmark>().unwrap(), b);
        }
    }
}
