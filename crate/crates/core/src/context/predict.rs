use std::sync::Arc;

use super::pipeline::{apply, channel_kind};
use super::zcut::zcut_maps;
use super::{ContextModel, ZCUT_XZ, ZCUT_YZ};
use crate::fusion::{argmax, DescriptorSource};
use crate::imagecore::{ChannelKind, ChannelStack, ImagePlane, LabelMap, ScoreMap};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct ContextPrediction {
    /// Every classifier's map in model order, as fed to later stages.
    pub maps: Vec<(String, ScoreMap)>,
    /// Fusion probability of each class, in `ContextModel::classes` order.
    pub probabilities: Vec<ImagePlane>,
    pub labels: LabelMap,
    /// `2p - 1` for the positive class of a binary model.
    pub scores: Option<ScoreMap>,
}

pub fn predict_context(model: &ContextModel, stack: &ChannelStack) -> Result<ContextPrediction> {
    let mut out = predict_context_volume(model, std::slice::from_ref(stack))?;
    Ok(out.remove(0))
}

/// Runs every classifier densely on each slice, then the fusion forest.
pub fn predict_context_volume(
    model: &ContextModel,
    slices: &[ChannelStack],
) -> Result<Vec<ContextPrediction>> {
    if slices.is_empty() {
        return Err(Error::param("no slices to predict"));
    }
    let normalize = model.config.normalize;
    let kind = channel_kind(normalize);
    let mut stacks = Vec::with_capacity(slices.len());
    let mut all_maps = Vec::with_capacity(slices.len());
    for slice in slices {
        let mut stack = slice.clone();
        let mut maps = Vec::new();
        for p in &model.pipelines {
            for c in &p.classifiers {
                let plane = match &c.copied_from {
                    Some(src) => {
                        let name = super::map_name(p.class, src);
                        stack.require(&name)?.clone()
                    }
                    None => apply(&c.model, &stack, normalize)?.0,
                };
                stack.push_shared(c.map.clone(), kind, plane.clone())?;
                maps.push((
                    c.map.clone(),
                    ScoreMap {
                        plane: Arc::unwrap_or_clone(plane),
                        normalized: normalize,
                    },
                ));
            }
        }
        stacks.push(stack);
        all_maps.push(maps);
    }
    if let Some(z) = &model.zcut {
        let [xz, yz] = zcut_maps(slices, z)?;
        for (name, vol) in [(ZCUT_XZ, xz), (ZCUT_YZ, yz)] {
            for (stack, plane) in stacks.iter_mut().zip(vol.into_slices()) {
                stack.push(name, ChannelKind::Score, plane)?;
            }
        }
    }

    let planes = stacks
        .iter()
        .map(|s| {
            model
                .fusion_channels
                .iter()
                .map(|c| s.require(c).map(|p| p.as_ref()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let source = DescriptorSource::new(
        planes,
        &model.config.fusion.snowflake,
        model.config.fusion.fake3d,
    )?;
    let (w, h) = source.dims();
    let mut out = Vec::with_capacity(slices.len());
    for (z, maps) in all_maps.into_iter().enumerate() {
        let probabilities = source.predict_dense(&model.forest, z)?;
        let labels = (0..w * h)
            .map(|i| {
                let p: Vec<f64> = probabilities.iter().map(|pl| pl.data()[i]).collect();
                model.classes[argmax(&p)]
            })
            .collect();
        let scores = if model.is_binary() {
            let pos = model
                .classes
                .iter()
                .position(|&c| c == LabelMap::POSITIVE)
                .unwrap();
            Some(ScoreMap::normalized(
                probabilities[pos].map(|p| (2.0 * p - 1.0).clamp(-1.0, 1.0)),
            )?)
        } else {
            None
        };
        out.push(ContextPrediction {
            maps,
            probabilities,
            labels: LabelMap::new(w, h, labels)?,
            scores,
        });
    }
    Ok(out)
}
