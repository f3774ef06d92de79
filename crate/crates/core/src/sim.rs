//! Case-control data simulator with a two-SNP logistic disease model.
//!
//! Genotypes are drawn per SNP under Hardy-Weinberg equilibrium with a
//! per-SNP minor allele frequency sampled from a configured range, coded as
//! allele counts 0/1/2. A binary environmental factor `e ~ Bernoulli(0.5)` is
//! drawn per subject but never emitted as a column. Disease status comes
//! from
//!
//! `logit P(Y=1 | g1, g2, e) = b0 + b (g1 + g2 + g1 g2 + g1 e + g2 e)`
//!
//! with `b0 = -5` and `b = 0.4` by default, and subjects are rejection
//! sampled until exactly the requested numbers of cases and controls are
//! collected. SNPs are simulated independently; no linkage disequilibrium.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math::logistic;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_cases: usize,
    pub n_controls: usize,
    /// Number of SNP columns.
    pub p: usize,
    /// Exactly two causal SNP indices.
    pub causal: [usize; 2],
    /// Logistic intercept.
    pub intercept: f64,
    /// Shared effect size of the five causal terms.
    pub effect: f64,
    /// Minor allele frequency range for non-causal SNPs.
    pub maf_range: (f64, f64),
    /// Minor allele frequency range for the causal SNPs.
    pub causal_maf_range: (f64, f64),
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_cases: 1000,
            n_controls: 1000,
            p: 100,
            causal: [0, 1],
            intercept: -5.0,
            effect: 0.4,
            maf_range: (0.05, 0.4),
            causal_maf_range: (0.3, 0.45),
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Reads a configuration from a JSON file; missing fields take their
    /// defaults.
    pub fn from_json_file(path: &std::path::Path) -> Result<SimConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| Error::invalid(format!("simulator config {}: {}", path.display(), e)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cases == 0 || self.n_controls == 0 {
            return Err(Error::invalid("case and control quotas must be positive"));
        }
        if self.p < 2 {
            return Err(Error::invalid("at least two SNPs are required"));
        }
        if self.causal[0] >= self.p || self.causal[1] >= self.p || self.causal[0] == self.causal[1]
        {
            return Err(Error::invalid(format!(
                "causal indices {:?} must be distinct and below p = {}",
                self.causal, self.p
            )));
        }
        for (lo, hi) in [self.maf_range, self.causal_maf_range] {
            if !(0.0 < lo && lo <= hi && hi < 1.0) {
                return Err(Error::invalid(format!(
                    "allele frequency range ({}, {}) is not within (0, 1)",
                    lo, hi
                )));
            }
        }
        Ok(())
    }

    /// Disease probability for one genotype/environment combination.
    pub fn disease_probability(&self, g1: u8, g2: u8, e: u8) -> f64 {
        let g1 = g1 as f64;
        let g2 = g2 as f64;
        let e = e as f64;
        logistic(
            self.intercept + self.effect * (g1 + g2 + g1 * g2 + g1 * e + g2 * e),
        )
    }
}

/// Hardy-Weinberg genotype draw for allele frequency `maf`.
fn draw_genotype(maf: f64, rng: &mut ChaCha8Rng) -> u8 {
    let u: f64 = rng.random();
    let p0 = (1.0 - maf) * (1.0 - maf);
    let p1 = 2.0 * maf * (1.0 - maf);
    if u < p0 {
        0
    } else if u < p0 + p1 {
        1
    } else {
        2
    }
}

/// Draws a dataset with exactly `n_cases` cases and `n_controls` controls.
///
/// Byte-identical across runs for a fixed configuration: a single ChaCha
/// stream drives allele frequencies and subject draws in a fixed order.
pub fn simulate_dataset(cfg: &SimConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mafs: Vec<f64> = (0..cfg.p)
        .map(|j| {
            let (lo, hi) = if cfg.causal.contains(&j) {
                cfg.causal_maf_range
            } else {
                cfg.maf_range
            };
            rng.random_range(lo..=hi)
        })
        .collect();

    let target = cfg.n_cases + cfg.n_controls;
    let max_draws = target.saturating_mul(20_000).max(1_000_000);
    let mut cases: Vec<Vec<u8>> = Vec::with_capacity(cfg.n_cases);
    let mut controls: Vec<Vec<u8>> = Vec::with_capacity(cfg.n_controls);
    let mut draws = 0usize;
    while (cases.len() < cfg.n_cases || controls.len() < cfg.n_controls) && draws < max_draws {
        draws += 1;
        let genotypes: Vec<u8> = mafs.iter().map(|&m| draw_genotype(m, &mut rng)).collect();
        let e = u8::from(rng.random::<f64>() < 0.5);
        let prob = cfg.disease_probability(genotypes[cfg.causal[0]], genotypes[cfg.causal[1]], e);
        let y = u8::from(rng.random::<f64>() < prob);
        if y == 1 {
            if cases.len() < cfg.n_cases {
                let mut row = genotypes;
                row.push(1);
                cases.push(row);
            }
        } else if controls.len() < cfg.n_controls {
            let mut row = genotypes;
            row.push(0);
            controls.push(row);
        }
    }
    if cases.len() < cfg.n_cases || controls.len() < cfg.n_controls {
        return Err(Error::numerical(format!(
            "quota not reached after {} draws ({} cases, {} controls)",
            draws,
            cases.len(),
            controls.len()
        )));
    }

    let mut names: Vec<String> = (0..cfg.p).map(|j| format!("snp{}", j + 1)).collect();
    names.push("aff".into());
    let mut dims = vec![3usize; cfg.p];
    dims.push(2);
    let rows: Vec<Vec<u8>> = controls.into_iter().chain(cases).collect();
    Dataset::from_rows(names, dims, &rows)
}
