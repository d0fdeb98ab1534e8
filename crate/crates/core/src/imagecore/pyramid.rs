use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::filters::gaussian_smooth;
use super::plane::ImagePlane;
use super::stack::ChannelStack;
use crate::{Error, Result};

/// Size of a pyramid level: ⌈dim · scale⌉.
pub fn scaled_dim(dim: usize, scale: f64) -> usize {
    ((dim as f64 * scale) - 1e-9).ceil().max(1.0) as usize
}

/// Full-resolution coordinate → level coordinate. Level pixel `i` covers the
/// full-resolution pixels whose centers fall in `[i/s, (i+1)/s)`.
#[inline]
pub fn to_level(coord: usize, scale: f64, level_dim: usize) -> usize {
    (((coord as f64 + 0.5) * scale).floor() as usize).min(level_dim - 1)
}

pub fn downscale(image: &ImagePlane, scale: f64) -> Result<ImagePlane> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::param(format!(
            "pyramid scale must lie in (0, 1], got {scale}"
        )));
    }
    if scale == 1.0 {
        return Ok(image.clone());
    }
    let blurred = gaussian_smooth(image, 0.5 / scale);
    let (w, h) = image.dims();
    let (lw, lh) = (scaled_dim(w, scale), scaled_dim(h, scale));
    let src = |i: usize, n: usize| (((i as f64 + 0.5) / scale).floor() as usize).min(n - 1);
    let mut data = Vec::with_capacity(lw * lh);
    for y in 0..lh {
        let sy = src(y, h);
        for x in 0..lw {
            data.push(blurred.get(src(x, w), sy));
        }
    }
    Ok(ImagePlane::from_vec_unchecked(lw, lh, data))
}

/// Nearest-neighbour upsampling of a level back to `(width, height)`.
pub fn upsample_nearest(level: &ImagePlane, scale: f64, width: usize, height: usize) -> ImagePlane {
    if level.dims() == (width, height) {
        return level.clone();
    }
    let (lw, lh) = level.dims();
    let xs: Vec<usize> = (0..width).map(|x| to_level(x, scale, lw)).collect();
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        let ly = to_level(y, scale, lh);
        data.extend(xs.iter().map(|&lx| level.get(lx, ly)));
    }
    ImagePlane::from_vec_unchecked(width, height, data)
}

/// Anti-aliased pyramid, one plane per requested scale (in the given order).
pub fn build_pyramid(image: &ImagePlane, scales: &[f64]) -> Result<Vec<ImagePlane>> {
    if scales.is_empty() {
        return Err(Error::param("pyramid scale list is empty"));
    }
    if !scales.contains(&1.0) {
        return Err(Error::param("pyramid scale list must contain 1"));
    }
    scales.iter().map(|&s| downscale(image, s)).collect()
}

/// Lazily computed pyramid levels of every channel of a stack, keyed by
/// (channel, scale). Scale 1 returns the channel plane itself.
pub struct ScaleSpace<'a> {
    stack: &'a ChannelStack,
    levels: Mutex<HashMap<(String, u64), Arc<ImagePlane>>>,
}

impl<'a> ScaleSpace<'a> {
    pub fn new(stack: &'a ChannelStack) -> Self {
        Self {
            stack,
            levels: Mutex::new(HashMap::new()),
        }
    }

    pub fn stack(&self) -> &'a ChannelStack {
        self.stack
    }

    pub fn level(&self, channel: &str, scale: f64) -> Result<Arc<ImagePlane>> {
        let base = self.stack.require(channel)?;
        if scale == 1.0 {
            return Ok(base.clone());
        }
        let key = (channel.to_string(), scale.to_bits());
        if let Some(p) = self.levels.lock().unwrap().get(&key) {
            return Ok(p.clone());
        }
        let lvl = Arc::new(downscale(base, scale)?);
        self.levels.lock().unwrap().insert(key, lvl.clone());
        Ok(lvl)
    }
}
