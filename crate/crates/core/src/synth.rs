//! Synthetic planted bags: one strong class and two disordered classes.
//!
//! Class centres sit at the origin (strong), `separation·e₁` and
//! `separation·e₂`. Every instance of a disordered bag is independently
//! disordered with probability `mix`, otherwise drawn from the strong class.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Bag, Dataset, Instance};
use crate::error::{Error, Result};

pub const STRONG: &str = "normal";
pub const DISORDERED: [&str; 2] = ["myopathic", "neurogenic"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub bags_per_class: usize,
    pub normal_bag_size: usize,
    pub disordered_bag_size: usize,
    /// Probability that an instance of a disordered bag is disordered; in (0.5, 1).
    pub mix: f64,
    /// Distance between the strong centre and each disordered centre, in noise sd units.
    pub separation: f64,
    pub dim: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            bags_per_class: 20,
            normal_bag_size: 10,
            disordered_bag_size: 10,
            mix: 0.7,
            separation: 4.0,
            dim: 2,
            noise_sd: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mix > 0.5 && self.mix < 1.0) {
            return Err(Error::Parameter(format!("mix must lie in (0.5, 1), got {}", self.mix)));
        }
        if self.bags_per_class == 0 || self.normal_bag_size == 0 || self.disordered_bag_size == 0 {
            return Err(Error::Parameter("bag counts and sizes must be positive".into()));
        }
        if self.dim < 2 {
            return Err(Error::Parameter(format!("dim must be >= 2, got {}", self.dim)));
        }
        if !(self.separation > 0.0 && self.noise_sd > 0.0) {
            return Err(Error::Parameter("separation and noise_sd must be > 0".into()));
        }
        Ok(())
    }

    fn centre(&self, class: usize) -> DVector<f64> {
        let mut c = DVector::zeros(self.dim);
        if class > 0 {
            c[class - 1] = self.separation;
        }
        c
    }
}

/// Generates the planted dataset; the planted instance classes are kept as
/// truth labels, and `normal` is the strong label.
pub fn synth_bags(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::Parameter(e.to_string()))?;
    let names: Vec<&str> = std::iter::once(STRONG).chain(DISORDERED).collect();
    let centres: Vec<DVector<f64>> = (0..3).map(|c| cfg.centre(c)).collect();
    let mut instances = Vec::new();
    let mut bags = Vec::new();
    let mut truth = Vec::new();
    for (class, name) in names.iter().enumerate() {
        let size = if class == 0 {
            cfg.normal_bag_size
        } else {
            cfg.disordered_bag_size
        };
        for b in 0..cfg.bags_per_class {
            let bag_id = format!("{name}-{b:02}");
            let mut members = Vec::with_capacity(size);
            for m in 0..size {
                let planted = if class == 0 || rng.random::<f64>() < cfg.mix {
                    class
                } else {
                    0
                };
                let features = centres[planted].iter().map(|c| c + noise.sample(&mut rng)).collect();
                members.push(instances.len());
                instances.push(Instance {
                    id: format!("{bag_id}-{m:02}"),
                    features,
                });
                truth.push(names[planted].to_string());
            }
            bags.push(Bag {
                id: bag_id,
                label: name.to_string(),
                members,
            });
        }
    }
    let feature_names = (1..=cfg.dim).map(|j| format!("f{j}")).collect();
    Dataset::new(instances, bags, Some(STRONG.into()), Some(truth), feature_names)
}
