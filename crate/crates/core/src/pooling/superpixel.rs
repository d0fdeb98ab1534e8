use serde::{Deserialize, Serialize};

use super::slic::SuperpixelMap;
use crate::imagecore::ImagePlane;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolOp {
    Max,
    Mean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionVariant {
    Eroded,
    Dilated,
    Original,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Combiner {
    Difference,
    AbsDifference,
    RatioSafe,
}

pub const RATIO_TAU: f64 = 1e-6;

/// Per-superpixel pixel sets (row-major indices, ascending).
#[derive(Clone, Debug, PartialEq)]
pub struct RegionTable {
    pub map: SuperpixelMap,
    pub erosion: usize,
    pub dilation: usize,
    pub original: Vec<Vec<u32>>,
    pub eroded: Vec<Vec<u32>>,
    pub dilated: Vec<Vec<u32>>,
}

impl RegionTable {
    /// Superpixels whose eroded set is empty.
    pub fn empty_eroded(&self) -> Vec<usize> {
        (0..self.eroded.len())
            .filter(|&s| self.eroded[s].is_empty())
            .collect()
    }

    pub fn region(&self, superpixel: usize, variant: RegionVariant) -> &[u32] {
        match variant {
            RegionVariant::Original => &self.original[superpixel],
            RegionVariant::Dilated => &self.dilated[superpixel],
            RegionVariant::Eroded if self.eroded[superpixel].is_empty() => {
                &self.original[superpixel]
            }
            RegionVariant::Eroded => &self.eroded[superpixel],
        }
    }
}

/// Erosion by `e` (pixels outside the image count as background) and
/// dilation by `d`, both with a square structuring element of side
/// `2·amount + 1`.
pub fn region_variants(map: &SuperpixelMap, e: usize, d: usize) -> RegionTable {
    let (w, h) = map.dims();
    let k = map.count();
    let labels = map.labels();
    let mut original = vec![Vec::new(); k];
    let mut eroded = vec![Vec::new(); k];
    let mut dilated = vec![Vec::new(); k];
    let mut seen = Vec::with_capacity((2 * d + 1).pow(2));
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let l = labels[p];
            original[l as usize].push(p as u32);

            let inside = x >= e && y >= e && x + e < w && y + e < h;
            if inside
                && (y - e..=y + e).all(|yy| (x - e..=x + e).all(|xx| labels[yy * w + xx] == l))
            {
                eroded[l as usize].push(p as u32);
            }

            seen.clear();
            for yy in y.saturating_sub(d)..=(y + d).min(h - 1) {
                for xx in x.saturating_sub(d)..=(x + d).min(w - 1) {
                    let q = labels[yy * w + xx];
                    if !seen.contains(&q) {
                        seen.push(q);
                    }
                }
            }
            for &q in &seen {
                dilated[q as usize].push(p as u32);
            }
        }
    }
    RegionTable {
        map: map.clone(),
        erosion: e,
        dilation: d,
        original,
        eroded,
        dilated,
    }
}

fn reduce(plane: &ImagePlane, region: &[u32], op: PoolOp) -> f64 {
    let data = plane.data();
    match op {
        PoolOp::Max => region
            .iter()
            .map(|&p| data[p as usize])
            .fold(f64::NEG_INFINITY, f64::max),
        PoolOp::Mean => region.iter().map(|&p| data[p as usize]).sum::<f64>() / region.len() as f64,
    }
}

/// Every pixel receives `op` of `plane` over the chosen region of its own
/// superpixel. Empty eroded regions fall back to the superpixel itself.
pub fn superpixel_pool(
    plane: &ImagePlane,
    regions: &RegionTable,
    op: PoolOp,
    variant: RegionVariant,
) -> Result<ImagePlane> {
    plane.ensure_same_dims(regions.map.dims())?;
    let stats: Vec<f64> = (0..regions.map.count())
        .map(|s| reduce(plane, regions.region(s, variant), op))
        .collect();
    let (w, h) = plane.dims();
    let out = regions
        .map
        .labels()
        .iter()
        .map(|&l| stats[l as usize])
        .collect();
    Ok(ImagePlane::from_vec_unchecked(w, h, out))
}

pub fn combine(a: f64, b: f64, combiner: Combiner) -> f64 {
    match combiner {
        Combiner::Difference => a - b,
        Combiner::AbsDifference => (a - b).abs(),
        Combiner::RatioSafe => (a + RATIO_TAU) / (b + RATIO_TAU),
    }
}

/// Elementwise combination of two pooled planes.
pub fn superpixel_feature(
    a: &ImagePlane,
    b: &ImagePlane,
    combiner: Combiner,
) -> Result<ImagePlane> {
    a.ensure_same_dims(b.dims())?;
    let out = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| combine(x, y, combiner))
        .collect();
    Ok(ImagePlane::from_vec_unchecked(a.width(), a.height(), out))
}
