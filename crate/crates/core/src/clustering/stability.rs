//! Choice of the number of clusters by resampling stability.
//!
//! Each run keeps a random fraction of the time positions (order preserved),
//! rebuilds representation, distance matrix and clustering, and records the
//! partition found for every candidate `K`. The score of `K` is the mean
//! agreement over all pairs of runs; the most stable `K` wins, ties going to
//! the smallest. Run `r` draws from its own ChaCha stream `(seed, r)`, so the
//! report does not depend on how runs are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cluster, linkage, Agreement, Method};
use crate::distance::{distance_matrix, DistanceParams};
use crate::ingestion::IncrementPanel;
use crate::representation::{represent, RepresentationConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub runs: usize,
    pub subsample_fraction: f64,
    pub seed: u64,
    pub method: Method,
    pub agreement: Agreement,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            k_min: 2,
            k_max: 10,
            runs: 20,
            subsample_fraction: 0.7,
            seed: 0,
            method: Method::Average,
            agreement: Agreement::AdjustedRand,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub k_range: Vec<usize>,
    /// Mean pairwise agreement per candidate, in `[0, 1]`.
    pub scores: Vec<f64>,
    /// Standard deviation of the pairwise agreements per candidate.
    pub dispersion: Vec<f64>,
    pub selected_k: usize,
    pub runs: usize,
    pub subsample_fraction: f64,
    pub seed: u64,
    pub agreement: Agreement,
}

/// Sorted time positions kept by each run.
pub fn draw_subsamples(m: usize, runs: usize, fraction: f64, seed: u64) -> Result<Vec<Vec<usize>>> {
    if !(0.5..1.0).contains(&fraction) {
        return Err(Error::Parameter(format!(
            "subsample fraction must lie in [0.5, 1), got {fraction}"
        )));
    }
    let keep = (fraction * m as f64).floor() as usize;
    if keep < 2 {
        return Err(Error::DegenerateSample(format!(
            "a {fraction} subsample of {m} observations keeps {keep}; at least 2 are needed"
        )));
    }
    Ok((0..runs)
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(run as u64);
            let mut idx = rand::seq::index::sample(&mut rng, m, keep).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect())
}

pub fn stability_select_k(
    panel: &IncrementPanel,
    params: &DistanceParams,
    representation: &RepresentationConfig,
    config: &StabilityConfig,
) -> Result<StabilityReport> {
    check_config(panel.n_series(), config)?;
    let subsamples =
        draw_subsamples(panel.n_obs(), config.runs, config.subsample_fraction, config.seed)?;
    stability_from_subsamples(panel, params, representation, config, &subsamples)
}

/// Stability scores for explicit subsamples, one run per entry.
pub fn stability_from_subsamples(
    panel: &IncrementPanel,
    params: &DistanceParams,
    representation: &RepresentationConfig,
    config: &StabilityConfig,
    subsamples: &[Vec<usize>],
) -> Result<StabilityReport> {
    check_config(panel.n_series(), config)?;
    if subsamples.len() != config.runs {
        return Err(Error::Dimension {
            expected: config.runs,
            got: subsamples.len(),
        });
    }
    let ks: Vec<usize> = (config.k_min..=config.k_max).collect();

    // partitions[run][candidate]
    let partitions: Vec<Vec<Vec<usize>>> = subsamples
        .par_iter()
        .map(|positions| {
            if positions.len() < 2 {
                return Err(Error::DegenerateSample(format!(
                    "subsample keeps {} observations; at least 2 are needed",
                    positions.len()
                )));
            }
            let sub = panel.select_observations(positions)?;
            let rep = represent(&sub, representation)?;
            let matrix = distance_matrix(&rep, params)?;
            match config.method.linkage() {
                Some(l) => {
                    let dendro = linkage(&matrix, l);
                    ks.iter().map(|&k| dendro.cut(k)).collect()
                }
                None => ks
                    .iter()
                    .map(|&k| cluster(&matrix, k, config.method).map(|a| a.labels))
                    .collect(),
            }
        })
        .collect::<Result<_>>()?;

    let mut scores = Vec::with_capacity(ks.len());
    let mut dispersion = Vec::with_capacity(ks.len());
    for c in 0..ks.len() {
        let mut values = Vec::new();
        for r in 0..config.runs {
            for s in r + 1..config.runs {
                values.push(config.agreement.score(&partitions[r][c], &partitions[s][c])?);
            }
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
        scores.push(mean);
        dispersion.push(var.sqrt());
    }

    let mut best = 0;
    for c in 1..ks.len() {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    Ok(StabilityReport {
        selected_k: ks[best],
        k_range: ks,
        scores,
        dispersion,
        runs: config.runs,
        subsample_fraction: config.subsample_fraction,
        seed: config.seed,
        agreement: config.agreement,
    })
}

fn check_config(n: usize, config: &StabilityConfig) -> Result<()> {
    if config.runs < 2 {
        return Err(Error::Parameter(format!("need at least 2 runs, got {}", config.runs)));
    }
    if !(0.5..1.0).contains(&config.subsample_fraction) {
        return Err(Error::Parameter(format!(
            "subsample fraction must lie in [0.5, 1), got {}",
            config.subsample_fraction
        )));
    }
    if config.k_min < 2 || config.k_min > config.k_max || config.k_max + 1 > n {
        return Err(Error::Parameter(format!(
            "k range {}..={} must lie within [2, N − 1] with N = {n}",
            config.k_min, config.k_max
        )));
    }
    Ok(())
}
