use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::features::dense_planes;
use super::train::TrainConfig;
use super::tree::{FeatureKey, RegressionTree, TreeNode};
use crate::imagecore::pyramid::ScaleSpace;
use crate::imagecore::{ChannelStack, ImagePlane, ScoreMap};
use crate::kernelbank::Kernel;
use crate::pooling::RegionTable;
use crate::Result;

pub const LOSS_ID: &str = "binomial-deviance";

/// A trained KernelBoost classifier: `F(x) = F0 + ν Σ tree(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub base_score: f64,
    pub shrinkage: f64,
    pub trees: Vec<RegressionTree>,
    /// Kernels referenced by at least one tree, ordered by id.
    pub kernels: Vec<Kernel>,
    pub config: TrainConfig,
    pub loss: String,
    /// Training deviance after each round.
    pub train_loss: Vec<f64>,
    /// Rounds whose tree did not lower the training loss.
    pub stalled_rounds: Vec<usize>,
}

impl BoostModel {
    pub fn constant(base_score: f64, config: TrainConfig) -> Self {
        Self {
            base_score,
            shrinkage: config.shrinkage,
            trees: Vec::new(),
            kernels: Vec::new(),
            config,
            loss: LOSS_ID.to_string(),
            train_loss: Vec::new(),
            stalled_rounds: Vec::new(),
        }
    }

    /// Distinct feature keys used by the trees, in a fixed order.
    pub fn feature_keys(&self) -> Vec<FeatureKey> {
        let mut seen = Vec::new();
        for t in &self.trees {
            for k in t.keys() {
                if !seen.contains(k) {
                    seen.push(*k);
                }
            }
        }
        seen
    }

    /// Channels the model reads.
    pub fn channels(&self) -> BTreeSet<String> {
        self.kernels.iter().map(|k| k.channel.clone()).collect()
    }

    pub fn needs_superpixels(&self) -> bool {
        self.feature_keys()
            .iter()
            .any(|k| k.pool.needs_superpixels())
    }

    /// Superpixel regions for `stack` when the model's tests need them.
    pub fn regions_for(&self, stack: &ChannelStack) -> Result<Option<RegionTable>> {
        if !self.needs_superpixels() {
            return Ok(None);
        }
        let sp = self.config.superpixels.unwrap_or_default();
        let img = stack.require(&self.config.superpixel_channel)?;
        Ok(Some(sp.regions(img)?))
    }
}

/// Dense raw scores over every pixel of `stack`.
pub fn predict_scores(model: &BoostModel, stack: &ChannelStack) -> Result<ScoreMap> {
    let regions = model.regions_for(stack)?;
    predict_scores_with(model, stack, regions.as_ref())
}

pub fn predict_scores_with(
    model: &BoostModel,
    stack: &ChannelStack,
    regions: Option<&RegionTable>,
) -> Result<ScoreMap> {
    for c in model.channels() {
        stack.require(&c)?;
    }
    let space = ScaleSpace::new(stack);
    let keys = model.feature_keys();
    let planes = dense_planes(&space, regions, &model.kernels, &keys)?;
    let slots: Vec<&ImagePlane> = keys.iter().map(|k| planes[k].as_ref()).collect();
    // trees with plane indices in place of keys
    let compiled: Vec<Vec<(usize, f64, u32, u32, f64)>> = model
        .trees
        .iter()
        .map(|t| {
            t.nodes
                .iter()
                .map(|n| match n {
                    TreeNode::Leaf { value } => (usize::MAX, 0.0, 0, 0, *value),
                    TreeNode::Split { test, left, right } => {
                        let slot = keys.iter().position(|k| *k == test.key).unwrap();
                        (slot, test.threshold, *left, *right, 0.0)
                    }
                })
                .collect()
        })
        .collect();
    let (w, h) = stack.dims();
    let mut out = vec![model.base_score; w * h];
    for tree in &compiled {
        for (p, f) in out.iter_mut().enumerate() {
            let mut i = 0usize;
            let v = loop {
                let (slot, tau, l, r, value) = tree[i];
                if slot == usize::MAX {
                    break value;
                }
                i = if slots[slot].data()[p] <= tau { l } else { r } as usize;
            };
            *f += model.shrinkage * v;
        }
    }
    Ok(ScoreMap::raw(ImagePlane::from_vec_unchecked(w, h, out)))
}
