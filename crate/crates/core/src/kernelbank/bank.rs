use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cluster::ClusterSet;
use super::conv::Kernel;
use super::ridge::{learn_kernel_with, RidgePenalty};
use super::sampling::{Patch, TrainSample};
use crate::imagecore::pyramid::{to_level, ScaleSpace};
use crate::seed;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BankConfig {
    /// Kernels generated per boosting round.
    pub bank_size: usize,
    pub filter_sizes: Vec<usize>,
    /// Trace-relative ridge penalty.
    pub ridge_lambda: f64,
    /// Source channels to draw from; empty means every channel of the stack.
    pub channels: Vec<String>,
    /// Pyramid scales to draw from.
    pub scales: Vec<f64>,
    /// Negatives per kernel are subsampled to at most this many.
    pub max_negatives: usize,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            bank_size: 30,
            filter_sizes: vec![5, 7, 9, 11, 15],
            ridge_lambda: 1e-3,
            channels: Vec::new(),
            scales: vec![1.0],
            max_negatives: 2000,
        }
    }
}

impl BankConfig {
    pub fn max_radius(&self) -> usize {
        self.filter_sizes.iter().copied().max().unwrap_or(1) / 2
    }
}

pub struct BankInputs<'a> {
    /// One scale space per training image, indexed by `TrainSample::image`.
    pub spaces: &'a [ScaleSpace<'a>],
    pub samples: &'a [TrainSample],
    /// Current pseudo-residuals, aligned with `samples`.
    pub residuals: &'a [f64],
    /// Clustering of the positive samples (in sample order); `None` is one cluster.
    pub clusters: Option<&'a ClusterSet>,
}

#[derive(Debug, Default)]
pub struct BankOutcome {
    pub kernels: Vec<Kernel>,
    /// Kernel slots that failed, with the reason.
    pub skipped: Vec<(usize, String)>,
    /// Kernels solved with the minimum-norm pseudo-inverse.
    pub pseudo_inverse: usize,
}

/// Draws `bank_size` kernels. Each one picks a filter size, a source channel,
/// a scale and a positive cluster uniformly, then learns a ridge filter
/// separating that cluster from the (subsampled) negatives, with the current
/// residual magnitudes as weights. Kernel `i` gets id `first_id + i` and its
/// own derived seed, so the bank does not depend on evaluation order.
pub fn generate_bank(
    inputs: &BankInputs<'_>,
    cfg: &BankConfig,
    first_id: u32,
    rng_seed: u64,
) -> Result<BankOutcome> {
    if cfg.bank_size == 0 {
        return Ok(BankOutcome::default());
    }
    if cfg.filter_sizes.is_empty() || cfg.filter_sizes.iter().any(|s| s % 2 == 0) {
        return Err(Error::param(
            "filter sizes must be a non-empty list of odd sides",
        ));
    }
    if inputs.residuals.len() != inputs.samples.len() {
        return Err(Error::param("residuals are not aligned with samples"));
    }
    let space0 = inputs
        .spaces
        .first()
        .ok_or_else(|| Error::param("no training images"))?;
    let channels: Vec<String> = if cfg.channels.is_empty() {
        space0.stack().names().map(String::from).collect()
    } else {
        cfg.channels.clone()
    };
    let scales = if cfg.scales.is_empty() {
        vec![1.0]
    } else {
        cfg.scales.clone()
    };

    let pos_idx: Vec<usize> = (0..inputs.samples.len())
        .filter(|&i| inputs.samples[i].label > 0)
        .collect();
    let neg_idx: Vec<usize> = (0..inputs.samples.len())
        .filter(|&i| inputs.samples[i].label < 0)
        .collect();
    let k = inputs.clusters.map_or(1, |c| c.k);
    if let Some(c) = inputs.clusters {
        if c.assignment.len() != pos_idx.len() {
            return Err(Error::param(
                "cluster assignment does not cover the positive samples",
            ));
        }
    }

    let build = |slot: usize| -> Result<(Kernel, bool)> {
        let mut rng = seed::rng(seed::derive(rng_seed, slot as u64));
        let side = cfg.filter_sizes[rng.gen_range(0..cfg.filter_sizes.len())];
        let channel = &channels[rng.gen_range(0..channels.len())];
        let scale = scales[rng.gen_range(0..scales.len())];
        let cluster = rng.gen_range(0..k);
        let positives: Vec<usize> = match inputs.clusters {
            Some(c) => c.members(cluster).map(|j| pos_idx[j]).collect(),
            None => pos_idx.clone(),
        };
        let negatives: Vec<usize> = if neg_idx.len() > cfg.max_negatives {
            let mut pick = index::sample(&mut rng, neg_idx.len(), cfg.max_negatives).into_vec();
            pick.sort_unstable();
            pick.into_iter().map(|j| neg_idx[j]).collect()
        } else {
            neg_idx.clone()
        };
        let patch = |i: usize| -> Result<Patch> {
            let s = &inputs.samples[i];
            let level = inputs.spaces[s.image].level(channel, scale)?;
            if side > level.width().min(level.height()) {
                return Err(Error::param(format!(
                    "filter side {side} exceeds the level size"
                )));
            }
            let cx = to_level(s.x, scale, level.width());
            let cy = to_level(s.y, scale, level.height());
            Ok(Patch::extract(&level, cx, cy, side, channel))
        };
        let pp = positives
            .iter()
            .map(|&i| patch(i))
            .collect::<Result<Vec<_>>>()?;
        let np = negatives
            .iter()
            .map(|&i| patch(i))
            .collect::<Result<Vec<_>>>()?;
        let weights: Vec<f64> = positives
            .iter()
            .chain(&negatives)
            .map(|&i| inputs.residuals[i].abs())
            .collect();
        let fit = learn_kernel_with(
            &pp,
            &np,
            &weights,
            RidgePenalty::TraceRelative(cfg.ridge_lambda),
        )?;
        let mut kernel = fit.kernel;
        kernel.id = first_id + slot as u32;
        kernel.scale = scale;
        Ok((kernel, fit.pseudo_inverse))
    };

    let results: Vec<Result<(Kernel, bool)>> =
        (0..cfg.bank_size).into_par_iter().map(build).collect();
    let mut out = BankOutcome::default();
    for (slot, r) in results.into_iter().enumerate() {
        match r {
            Ok((k, pseudo)) => {
                out.pseudo_inverse += pseudo as usize;
                out.kernels.push(k);
            }
            Err(e) => out.skipped.push((slot, e.to_string())),
        }
    }
    Ok(out)
}
