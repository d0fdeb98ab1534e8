use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{dense_planes, feature_planes};
use super::loss::{base_score, pseudo_residuals, total_deviance};
use super::model::BoostModel;
use super::tree::{fit_tree, FeatureKey, Part, TreeConfig};
use crate::imagecore::pyramid::ScaleSpace;
use crate::imagecore::{ChannelStack, LabelMap, Mask};
use crate::kernelbank::{
    cluster_positives, generate_bank, sample_locations, BankConfig, BankInputs, ClusterSet, Kernel,
    Patch, SampleSource, TrainSample,
};
use crate::pooling::{Combiner, PoolOp, PoolSpec, RegionTable, RegionVariant, SuperpixelConfig};
use crate::seed;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub rounds: usize,
    pub depth: usize,
    pub shrinkage: f64,
    /// Quantile thresholds tried per candidate test.
    pub thresholds: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub bank: BankConfig,
    /// Cluster positive samples by appearance before drawing kernels.
    pub clustering: bool,
    pub clusters: usize,
    pub cluster_patch: usize,
    pub cluster_channel: String,
    /// POSNEG parts with window-max pooling as extra candidate tests.
    pub pooling: bool,
    pub pool_radius: usize,
    /// Superpixel pooling candidates; `None` disables them.
    pub superpixels: Option<SuperpixelConfig>,
    pub superpixel_channel: String,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::ikb()
    }
}

impl TrainConfig {
    /// Improved KernelBoost: pooling and clustering on.
    pub fn ikb() -> Self {
        Self {
            rounds: 200,
            depth: 3,
            shrinkage: 0.1,
            thresholds: 10,
            n_pos: 1000,
            n_neg: 1000,
            bank: BankConfig::default(),
            clustering: true,
            clusters: 5,
            cluster_patch: 9,
            cluster_channel: "image".into(),
            pooling: true,
            pool_radius: 3,
            superpixels: None,
            superpixel_channel: "image".into(),
            seed: 0,
        }
    }

    /// Plain KernelBoost: no pooling, no clustering.
    pub fn kb() -> Self {
        Self {
            clustering: false,
            pooling: false,
            ..Self::ikb()
        }
    }

    /// (part, pooling) combinations tried for every kernel.
    pub fn candidate_specs(&self) -> Vec<(Part, PoolSpec)> {
        let mut out = vec![(Part::Raw, PoolSpec::None)];
        if self.pooling {
            let wm = PoolSpec::WindowMax {
                radius: self.pool_radius,
            };
            out.extend([
                (Part::Pos, PoolSpec::None),
                (Part::Neg, PoolSpec::None),
                (Part::Pos, wm),
                (Part::Neg, wm),
            ]);
        }
        if self.superpixels.is_some() {
            for part in [Part::Pos, Part::Neg] {
                for op in [PoolOp::Mean, PoolOp::Max] {
                    for variant in [RegionVariant::Eroded, RegionVariant::Dilated] {
                        out.push((part, PoolSpec::Superpixel { op, variant }));
                    }
                }
                out.push((
                    part,
                    PoolSpec::SuperpixelContrast {
                        op: PoolOp::Mean,
                        combiner: Combiner::Difference,
                    },
                ));
            }
        }
        out
    }

    /// Minimum distance of training samples from the border.
    pub fn margin(&self) -> usize {
        let min_scale = self.bank.scales.iter().copied().fold(1.0, f64::min);
        let filter = (self.bank.max_radius() as f64 / min_scale).ceil() as usize;
        filter + if self.pooling { self.pool_radius } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.depth == 0 || self.thresholds == 0 {
            return Err(Error::param(
                "rounds, tree depth and thresholds must be at least 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.shrinkage) {
            return Err(Error::param("shrinkage must lie in [0, 1]"));
        }
        if self.clustering && (self.clusters == 0 || self.cluster_patch % 2 == 0) {
            return Err(Error::param(
                "clustering needs k >= 1 and an odd patch size",
            ));
        }
        if self.bank.scales.iter().any(|&s| !(s > 0.0 && s <= 1.0)) {
            return Err(Error::param("bank scales must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// One training image: its channels, labels and optional restrictions.
#[derive(Clone, Copy)]
pub struct TrainImage<'a> {
    pub stack: &'a ChannelStack,
    pub labels: &'a LabelMap,
    pub mask: Option<&'a Mask>,
    /// Pixels allowed as training samples (row-major).
    pub restrict: Option<&'a [bool]>,
}

impl<'a> TrainImage<'a> {
    pub fn new(stack: &'a ChannelStack, labels: &'a LabelMap) -> Self {
        Self {
            stack,
            labels,
            mask: None,
            restrict: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: usize,
    pub loss: f64,
    pub kernels: usize,
    pub skipped: usize,
    pub leaves: usize,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub samples: Vec<TrainSample>,
    /// Final raw scores of the samples, tracked incrementally.
    pub scores: Vec<f64>,
    pub rounds: Vec<RoundStats>,
}

impl TrainReport {
    /// Fraction of samples whose score sign matches the label.
    pub fn accuracy(&self) -> f64 {
        let ok = self
            .samples
            .iter()
            .zip(&self.scores)
            .filter(|(s, &f)| (f > 0.0) == (s.label > 0))
            .count();
        ok as f64 / self.samples.len().max(1) as f64
    }
}

struct Setup<'a> {
    samples: Vec<TrainSample>,
    y: Vec<f64>,
    spaces: Vec<ScaleSpace<'a>>,
    regions: Vec<Option<RegionTable>>,
    clusters: Option<ClusterSet>,
    /// Sample indices per image.
    by_image: Vec<Vec<usize>>,
}

fn setup<'a>(images: &[TrainImage<'a>], cfg: &TrainConfig) -> Result<Setup<'a>> {
    cfg.validate()?;
    if images.is_empty() {
        return Err(Error::param("no training images"));
    }
    let sources: Vec<SampleSource<'_>> = images
        .iter()
        .map(|im| {
            im.labels.ensure_dims(im.stack.dims())?;
            Ok(SampleSource {
                labels: im.labels,
                mask: im.mask,
                restrict: im.restrict,
            })
        })
        .collect::<Result<_>>()?;
    let samples = sample_locations(
        &sources,
        cfg.n_pos,
        cfg.n_neg,
        cfg.margin(),
        seed::derive_str(cfg.seed, "samples"),
    )?;
    if samples.iter().filter(|s| s.label > 0).count() < 1
        || samples.iter().filter(|s| s.label < 0).count() < 1
    {
        return Err(Error::param("training needs samples of both classes"));
    }
    let y: Vec<f64> = samples.iter().map(|s| s.label as f64).collect();
    let spaces: Vec<ScaleSpace<'a>> = images.iter().map(|im| ScaleSpace::new(im.stack)).collect();
    let regions = images
        .iter()
        .map(|im| match &cfg.superpixels {
            Some(sp) => sp
                .regions(im.stack.require(&cfg.superpixel_channel)?)
                .map(Some),
            None => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut by_image = vec![Vec::new(); images.len()];
    for (i, s) in samples.iter().enumerate() {
        by_image[s.image].push(i);
    }
    let clusters = if cfg.clustering {
        let patches: Vec<Patch> = samples
            .iter()
            .filter(|s| s.label > 0)
            .map(|s| {
                let plane = images[s.image].stack.require(&cfg.cluster_channel)?;
                Ok(
                    Patch::extract(plane, s.x, s.y, cfg.cluster_patch, &cfg.cluster_channel)
                        .zero_mean(),
                )
            })
            .collect::<Result<_>>()?;
        Some(cluster_positives(
            &patches,
            cfg.clusters,
            seed::derive_str(cfg.seed, "clusters"),
        )?)
    } else {
        None
    };
    Ok(Setup {
        samples,
        y,
        spaces,
        regions,
        clusters,
        by_image,
    })
}

/// Sample values of every (kernel, spec) feature: `columns[kernel * specs + spec][sample]`.
fn sample_columns(
    st: &Setup<'_>,
    kernels: &[Kernel],
    specs: &[(Part, PoolSpec)],
) -> Result<Vec<Vec<f64>>> {
    let n = st.samples.len();
    let per_kernel: Vec<Result<Vec<Vec<f64>>>> = kernels
        .par_iter()
        .map(|k| {
            let mut cols = vec![vec![0.0; n]; specs.len()];
            for (img, idx) in st.by_image.iter().enumerate() {
                if idx.is_empty() {
                    continue;
                }
                let planes = feature_planes(&st.spaces[img], st.regions[img].as_ref(), k, specs)?;
                for &i in idx {
                    let s = &st.samples[i];
                    for (c, p) in planes.iter().enumerate() {
                        cols[c][i] = p.get(s.x, s.y);
                    }
                }
            }
            Ok(cols)
        })
        .collect();
    let mut out = Vec::with_capacity(kernels.len() * specs.len());
    for c in per_kernel {
        out.extend(c?);
    }
    Ok(out)
}

fn run_rounds(
    st: &Setup<'_>,
    cfg: &TrainConfig,
    model: &mut BoostModel,
    f: &mut [f64],
    rounds: std::ops::Range<usize>,
) -> Result<Vec<RoundStats>> {
    let specs = cfg.candidate_specs();
    let tree_cfg = TreeConfig {
        max_depth: cfg.depth,
        thresholds: cfg.thresholds,
    };
    let bank_seed = seed::derive_str(cfg.seed, "bank");
    let mut stats = Vec::new();
    let mut loss = total_deviance(&st.y, f);
    for round in rounds {
        let r = pseudo_residuals(&st.y, f);
        let inputs = BankInputs {
            spaces: &st.spaces,
            samples: &st.samples,
            residuals: &r,
            clusters: st.clusters.as_ref(),
        };
        let first_id = u32::try_from(round * cfg.bank.bank_size)
            .map_err(|_| Error::param("too many kernels"))?;
        let bank = generate_bank(
            &inputs,
            &cfg.bank,
            first_id,
            seed::derive(bank_seed, round as u64),
        )?;
        let columns = sample_columns(st, &bank.kernels, &specs)?;
        let keys: Vec<FeatureKey> = bank
            .kernels
            .iter()
            .flat_map(|k| {
                specs.iter().map(move |&(part, pool)| FeatureKey {
                    kernel: k.id,
                    part,
                    pool,
                })
            })
            .collect();
        let (tree, out) = fit_tree(&columns, &keys, &r, tree_cfg)?;
        for (fi, o) in f.iter_mut().zip(&out) {
            *fi += model.shrinkage * o;
        }
        for key in tree.keys() {
            if !model.kernels.iter().any(|k| k.id == key.kernel) {
                let k = bank.kernels.iter().find(|k| k.id == key.kernel).unwrap();
                model.kernels.push(k.clone());
            }
        }
        model.kernels.sort_by_key(|k| k.id);
        let new_loss = total_deviance(&st.y, f);
        if !(new_loss < loss) {
            model.stalled_rounds.push(round);
        }
        loss = new_loss;
        model.train_loss.push(loss);
        stats.push(RoundStats {
            round,
            loss,
            kernels: bank.kernels.len(),
            skipped: bank.skipped.len(),
            leaves: tree
                .nodes
                .iter()
                .filter(|n| matches!(n, super::tree::TreeNode::Leaf { .. }))
                .count(),
        });
        model.trees.push(tree);
    }
    Ok(stats)
}

pub fn train_kernelboost(images: &[TrainImage<'_>], cfg: &TrainConfig) -> Result<BoostModel> {
    train_kernelboost_report(images, cfg).map(|(m, _)| m)
}

/// Trains and also returns the sample set with its incrementally tracked scores.
pub fn train_kernelboost_report(
    images: &[TrainImage<'_>],
    cfg: &TrainConfig,
) -> Result<(BoostModel, TrainReport)> {
    let st = setup(images, cfg)?;
    let n_pos = st.samples.iter().filter(|s| s.label > 0).count();
    let f0 = base_score(n_pos, st.samples.len() - n_pos);
    let mut model = BoostModel::constant(f0, cfg.clone());
    let mut f = vec![f0; st.samples.len()];
    let rounds = run_rounds(&st, cfg, &mut model, &mut f, 0..cfg.rounds)?;
    Ok((
        model,
        TrainReport {
            samples: st.samples,
            scores: f,
            rounds,
        },
    ))
}

/// Continues training for `extra` rounds on the same data. The result equals
/// an uninterrupted run with `rounds + extra` rounds.
pub fn resume_kernelboost(
    mut model: BoostModel,
    images: &[TrainImage<'_>],
    extra: usize,
) -> Result<(BoostModel, TrainReport)> {
    let cfg = model.config.clone();
    let st = setup(images, &cfg)?;
    let keys = model.feature_keys();
    let mut f = vec![model.base_score; st.samples.len()];
    let mut planes = Vec::with_capacity(images.len());
    for (img, space) in st.spaces.iter().enumerate() {
        planes.push(if st.by_image[img].is_empty() {
            Default::default()
        } else {
            dense_planes(space, st.regions[img].as_ref(), &model.kernels, &keys)?
        });
    }
    for tree in &model.trees {
        for (i, s) in st.samples.iter().enumerate() {
            let v = tree.eval(|k| planes[s.image][k].get(s.x, s.y));
            f[i] += model.shrinkage * v;
        }
    }
    let done = model.trees.len();
    let rounds = run_rounds(&st, &cfg, &mut model, &mut f, done..done + extra)?;
    model.config.rounds = done + extra;
    Ok((
        model,
        TrainReport {
            samples: st.samples,
            scores: f,
            rounds,
        },
    ))
}
