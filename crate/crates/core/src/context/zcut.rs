//! Classifiers run on XZ and YZ reslices of a volume, with their score
//! maps brought back to XY geometry.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use crate::gradboost::{predict_scores, train_kernelboost, BoostModel, TrainConfig, TrainImage};
use crate::imagecore::{
    normalize_value, reslice, ChannelStack, ImagePlane, LabelMap, ReslicePlane, Volume,
};
use crate::kernelbank::{count_eligible, SampleSource};
use crate::seed;
use crate::{Error, Result};

/// One classifier per reslice orientation, each reading only the `image` channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZcutModels {
    pub xz: BoostModel,
    pub yz: BoostModel,
}

fn image_volume(slices: &[ChannelStack]) -> Result<Volume> {
    Volume::new(
        slices
            .iter()
            .map(|s| s.require("image").map(|p| p.as_ref().clone()))
            .collect::<Result<_>>()?,
    )
}

fn label_volume(labels: &[LabelMap]) -> Result<Volume> {
    Volume::new(
        labels
            .iter()
            .map(|l| {
                ImagePlane::new(
                    l.width(),
                    l.height(),
                    l.labels().iter().map(|&v| v as f64).collect(),
                )
            })
            .collect::<Result<_>>()?,
    )
}

fn to_labels(plane: &ImagePlane) -> Result<LabelMap> {
    LabelMap::new(
        plane.width(),
        plane.height(),
        plane.data().iter().map(|&v| v as i32).collect(),
    )
}

fn train_orientation(
    data: &Dataset,
    base: &TrainConfig,
    orientation: ReslicePlane,
    rng_seed: u64,
) -> Result<BoostModel> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for vol in &data.volumes {
        let stacks: Vec<ChannelStack> = vol.iter().map(|s| s.stack.clone()).collect();
        let masked: Vec<LabelMap> = vol
            .iter()
            .map(|s| {
                let e = s.eligible()?;
                let raw = s
                    .labels
                    .labels()
                    .iter()
                    .zip(&e)
                    .map(|(&l, &e)| if e { l } else { LabelMap::IGNORE })
                    .collect();
                LabelMap::new(s.labels.width(), s.labels.height(), raw)
            })
            .collect::<Result<_>>()?;
        let iv = reslice(&image_volume(&stacks)?, orientation);
        let lv = reslice(&label_volume(&masked)?, orientation);
        for (img, lab) in iv.into_slices().into_iter().zip(lv.slices()) {
            images.push(ChannelStack::from_image(img));
            labels.push(to_labels(lab)?);
        }
    }
    let mut cfg = base.clone();
    cfg.seed = rng_seed;
    cfg.bank.channels = vec!["image".into()];
    let sources: Vec<SampleSource<'_>> = labels.iter().map(SampleSource::new).collect();
    let (pos, neg) = count_eligible(&sources, cfg.margin())?;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate(
            "reslices have no eligible pixels of one class; the volume may be too thin for the filter sizes".into(),
        ));
    }
    cfg.n_pos = cfg.n_pos.min(pos);
    cfg.n_neg = cfg.n_neg.min(neg);
    let train: Vec<TrainImage<'_>> = images
        .iter()
        .zip(&labels)
        .map(|(s, l)| TrainImage::new(s, l))
        .collect();
    train_kernelboost(&train, &cfg)
}

/// Trains the XZ and YZ classifiers on resliced training volumes.
pub fn train_zcut(data: &Dataset, base: &TrainConfig, rng_seed: u64) -> Result<ZcutModels> {
    Ok(ZcutModels {
        xz: train_orientation(
            data,
            base,
            ReslicePlane::XZ,
            seed::derive_str(rng_seed, "xz"),
        )?,
        yz: train_orientation(
            data,
            base,
            ReslicePlane::YZ,
            seed::derive_str(rng_seed, "yz"),
        )?,
    })
}

/// Normalized XZ and YZ score volumes of a volume given as slices, in XY geometry.
pub fn zcut_maps(slices: &[ChannelStack], models: &ZcutModels) -> Result<[Volume; 2]> {
    let vol = image_volume(slices)?;
    let run = |model: &BoostModel, orientation| -> Result<Volume> {
        let r = reslice(&vol, orientation);
        let maps = r
            .slices()
            .par_iter()
            .map(|s| {
                let stack = ChannelStack::from_image(s.clone());
                Ok(predict_scores(model, &stack)?.plane.map(normalize_value))
            })
            .collect::<Result<Vec<_>>>()?;
        let back = reslice(&Volume::with_axes(maps, r.axes())?, orientation);
        let (w, h, d) = vol.dims();
        if back.dims() != (w, h, d) {
            return Err(Error::DimensionMismatch {
                expected: (w, h),
                found: (back.dims().0, back.dims().1),
            });
        }
        Ok(back)
    };
    Ok([
        run(&models.xz, ReslicePlane::XZ)?,
        run(&models.yz, ReslicePlane::YZ)?,
    ])
}
