use serde::{Deserialize, Serialize};

use super::metrics::ThresholdMetric;
use crate::context::{Architecture, ContextConfig, SplitConfig};
use crate::fusion::FusionConfig;
use crate::gradboost::TrainConfig;
use crate::imagecore::FeatureSpec;
use crate::kernelbank::BankConfig;
use crate::pooling::{SlicParams, SuperpixelConfig};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImagecoreSection {
    /// Rescale input intensities to [0, 1] by the integer type's range.
    pub normalize_input: bool,
    pub features: FeatureSpec,
}

impl Default for ImagecoreSection {
    fn default() -> Self {
        Self {
            normalize_input: true,
            features: FeatureSpec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolingSection {
    pub window_max: bool,
    pub radius: usize,
    pub superpixels: bool,
    pub slic: SlicParams,
    pub erosion: usize,
    pub dilation: usize,
    pub superpixel_channel: String,
}

impl Default for PoolingSection {
    fn default() -> Self {
        let t = TrainConfig::ikb();
        let sp = SuperpixelConfig::default();
        Self {
            window_max: t.pooling,
            radius: t.pool_radius,
            superpixels: false,
            slic: sp.slic,
            erosion: sp.erosion,
            dilation: sp.dilation,
            superpixel_channel: t.superpixel_channel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradboostSection {
    pub rounds: usize,
    pub depth: usize,
    pub shrinkage: f64,
    pub thresholds: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub clustering: bool,
    pub clusters: usize,
    pub cluster_patch: usize,
    pub cluster_channel: String,
}

impl Default for GradboostSection {
    fn default() -> Self {
        let t = TrainConfig::ikb();
        Self {
            rounds: t.rounds,
            depth: t.depth,
            shrinkage: t.shrinkage,
            thresholds: t.thresholds,
            n_pos: t.n_pos,
            n_neg: t.n_neg,
            clustering: t.clustering,
            clusters: t.clusters,
            cluster_patch: t.cluster_patch,
            cluster_channel: t.cluster_channel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextSection {
    pub architecture: Architecture,
    pub stages: usize,
    pub normalize: bool,
    pub zcut: bool,
    pub split: SplitConfig,
}

impl Default for ContextSection {
    fn default() -> Self {
        let c = ContextConfig::default();
        Self {
            architecture: c.architecture,
            stages: c.stages,
            normalize: c.normalize,
            zcut: c.zcut,
            split: c.split,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessSection {
    pub seed: u64,
    pub threshold_metric: ThresholdMetric,
    /// Choose the binary threshold per image; one pooled threshold otherwise.
    pub per_image_threshold: bool,
}

impl Default for HarnessSection {
    fn default() -> Self {
        Self {
            seed: 0,
            threshold_metric: ThresholdMetric::Accuracy,
            per_image_threshold: true,
        }
    }
}

/// The full configuration file, one section per module.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub imagecore: ImagecoreSection,
    pub kernelbank: BankConfig,
    pub pooling: PoolingSection,
    pub gradboost: GradboostSection,
    pub context: ContextSection,
    pub fusion: FusionConfig,
    pub harness: HarnessSection,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn train_config(&self) -> TrainConfig {
        let g = &self.gradboost;
        let p = &self.pooling;
        TrainConfig {
            rounds: g.rounds,
            depth: g.depth,
            shrinkage: g.shrinkage,
            thresholds: g.thresholds,
            n_pos: g.n_pos,
            n_neg: g.n_neg,
            bank: self.kernelbank.clone(),
            clustering: g.clustering,
            clusters: g.clusters,
            cluster_patch: g.cluster_patch,
            cluster_channel: g.cluster_channel.clone(),
            pooling: p.window_max,
            pool_radius: p.radius,
            superpixels: p.superpixels.then_some(SuperpixelConfig {
                slic: p.slic,
                erosion: p.erosion,
                dilation: p.dilation,
            }),
            superpixel_channel: p.superpixel_channel.clone(),
            seed: self.harness.seed,
        }
    }

    pub fn context_config(&self) -> ContextConfig {
        ContextConfig {
            architecture: self.context.architecture,
            base: self.train_config(),
            split: self.context.split.clone(),
            stages: self.context.stages,
            normalize: self.context.normalize,
            fusion: self.fusion.clone(),
            zcut: self.context.zcut,
            seed: self.harness.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.context_config().validate()
    }
}

/// Every default setting as TOML.
pub fn defaults_toml() -> String {
    let body = Config::default().to_toml().expect("defaults serialize");
    format!(
        "# Unset optional keys: fusion.fake3d (off), fusion.forest.max_depth (no cap),\n\
         # fusion.forest.m_try (ceil(sqrt(descriptor length))).\n\n{body}"
    )
}
