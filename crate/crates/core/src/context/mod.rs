//! Context cascades: Auto-Context chains, Expanded Trees and Knotted Trees,
//! plus the fusion stage that turns their score maps into a segmentation.

mod data;
mod pipeline;
mod predict;
mod sets;
mod zcut;

use serde::{Deserialize, Serialize};

pub use data::{Dataset, LabeledImage};
pub use pipeline::train_context;
pub use predict::{predict_context, predict_context_volume, ContextPrediction};
pub use sets::{split_sets, PixelSets, SplitConfig};
pub use zcut::{train_zcut, zcut_maps, ZcutModels};

use crate::fusion::{ForestModel, FusionConfig};
use crate::gradboost::{BoostModel, TrainConfig};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    AutoContext,
    Expanded,
    Knotted,
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "autocontext" => Ok(Self::AutoContext),
            "expanded" => Ok(Self::Expanded),
            "knotted" => Ok(Self::Knotted),
            _ => Err(Error::Config(format!("unknown architecture `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContextConfig {
    pub architecture: Architecture,
    /// Settings shared by every classifier in the cascade. Its seed is replaced
    /// by one derived from `seed` and the classifier's position.
    pub base: TrainConfig,
    pub split: SplitConfig,
    /// Auto-Context chain length.
    pub stages: usize,
    /// Feed normalized maps to later classifiers; raw scores otherwise.
    pub normalize: bool,
    pub fusion: FusionConfig,
    /// Add maps from classifiers trained on XZ and YZ reslices of volumes.
    pub zcut: bool,
    pub seed: u64,
}

impl Default for ContextConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Knotted,
            base: TrainConfig::ikb(),
            split: SplitConfig::default(),
            stages: 3,
            normalize: true,
            fusion: FusionConfig::default(),
            zcut: false,
            seed: 0,
        }
    }
}

impl ContextConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.split.validate()?;
        self.fusion.snowflake.validate()?;
        if self.architecture == Architecture::AutoContext && self.stages == 0 {
            return Err(Error::param("auto-context needs at least one stage"));
        }
        if self.fusion.max_per_class == 0 {
            return Err(Error::param("fusion needs at least one pixel per class"));
        }
        Ok(())
    }
}

/// One boosted classifier of a cascade.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    /// Position in the cascade: `0` for the first classifier, then branch
    /// letters (`P`, `PN`, ...) or `A{stage}` for Auto-Context stages.
    pub path: String,
    pub level: usize,
    /// Channel name of this classifier's score map.
    pub map: String,
    /// Score maps in its channel stack, in order.
    pub inputs: Vec<String>,
    pub model: BoostModel,
    /// Set when the branch had too few samples and reuses another classifier.
    pub copied_from: Option<String>,
    /// Eligible training pixels in the classifier's set.
    pub set_size: usize,
    /// Pixels of that set whose score sign disagrees with the label.
    pub misclassified: usize,
}

/// Training-set misclassification of a whole cascade level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: usize,
    pub pixels: usize,
    pub misclassified: usize,
}

/// The cascade for one class (the positive class in binary problems).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    /// `None` for a binary problem; otherwise the class handled 1-vs-all.
    pub class: Option<i32>,
    pub classifiers: Vec<Classifier>,
    pub levels: Vec<LevelStats>,
}

impl Pipeline {
    pub fn maps(&self) -> impl Iterator<Item = &str> {
        self.classifiers.iter().map(|c| c.map.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextModel {
    pub config: ContextConfig,
    /// Label values known to the fusion forest, ascending.
    pub classes: Vec<i32>,
    pub pipelines: Vec<Pipeline>,
    pub zcut: Option<ZcutModels>,
    /// Channels sampled by the fusion descriptor, in order.
    pub fusion_channels: Vec<String>,
    pub forest: ForestModel,
}

impl ContextModel {
    pub fn map_count(&self) -> usize {
        self.pipelines.iter().map(|p| p.classifiers.len()).sum()
    }

    pub fn is_binary(&self) -> bool {
        self.pipelines.len() == 1 && self.pipelines[0].class.is_none()
    }
}

pub(crate) fn map_name(class: Option<i32>, path: &str) -> String {
    match class {
        Some(c) => format!("c{c}:map:{path}"),
        None => format!("map:{path}"),
    }
}

pub(crate) const ZCUT_XZ: &str = "zcut:xz";
pub(crate) const ZCUT_YZ: &str = "zcut:yz";
