//! Window-max pooling, SLIC superpixels and superpixel pooling.

mod maxpool;
mod slic;
mod superpixel;

use serde::{Deserialize, Serialize};

pub use maxpool::max_pool;
pub use slic::{slic, SlicParams, SuperpixelMap};
pub use superpixel::{
    combine, region_variants, superpixel_feature, superpixel_pool, Combiner, PoolOp, RegionTable,
    RegionVariant, RATIO_TAU,
};

use crate::imagecore::ImagePlane;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolSpec {
    None,
    WindowMax {
        radius: usize,
    },
    Superpixel {
        op: PoolOp,
        variant: RegionVariant,
    },
    /// `combiner(pool(dilated), pool(eroded))` of the same superpixel.
    SuperpixelContrast {
        op: PoolOp,
        combiner: Combiner,
    },
}

impl PoolSpec {
    pub fn needs_superpixels(&self) -> bool {
        matches!(
            self,
            PoolSpec::Superpixel { .. } | PoolSpec::SuperpixelContrast { .. }
        )
    }

    /// Extra border margin this pooling reads around a pixel.
    pub fn radius(&self) -> usize {
        match self {
            PoolSpec::WindowMax { radius } => *radius,
            _ => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuperpixelConfig {
    pub slic: SlicParams,
    pub erosion: usize,
    pub dilation: usize,
}

impl Default for SuperpixelConfig {
    fn default() -> Self {
        Self {
            slic: SlicParams::default(),
            erosion: 2,
            dilation: 2,
        }
    }
}

impl SuperpixelConfig {
    pub fn regions(&self, image: &ImagePlane) -> Result<RegionTable> {
        let map = slic(image, self.slic)?;
        Ok(region_variants(&map, self.erosion, self.dilation))
    }
}

pub fn apply_pool(
    plane: &ImagePlane,
    spec: PoolSpec,
    regions: Option<&RegionTable>,
) -> Result<ImagePlane> {
    let need = || regions.ok_or_else(|| Error::param("superpixel pooling requires a region table"));
    match spec {
        PoolSpec::None => Ok(plane.clone()),
        PoolSpec::WindowMax { radius } => Ok(max_pool(plane, radius)),
        PoolSpec::Superpixel { op, variant } => superpixel_pool(plane, need()?, op, variant),
        PoolSpec::SuperpixelContrast { op, combiner } => {
            let r = need()?;
            let outer = superpixel_pool(plane, r, op, RegionVariant::Dilated)?;
            let inner = superpixel_pool(plane, r, op, RegionVariant::Eroded)?;
            superpixel_feature(&outer, &inner, combiner)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn superpixel_specs_require_regions() {
        let p = ImagePlane::filled(8, 8, 1.0).unwrap();
        let spec = PoolSpec::Superpixel {
            op: PoolOp::Mean,
            variant: RegionVariant::Eroded,
        };
        assert!(apply_pool(&p, spec, None).is_err());
        let regions = SuperpixelConfig::default().regions(&p).unwrap();
        assert_eq!(apply_pool(&p, spec, Some(&regions)).unwrap(), p);
        let contrast = PoolSpec::SuperpixelContrast {
            op: PoolOp::Max,
            combiner: Combiner::Difference,
        };
        assert!(apply_pool(&p, contrast, Some(&regions))
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn spec_round_trips_through_toml() {
        #[derive(Serialize, Deserialize, PartialEq, Debug)]
        struct W {
            p: Vec<PoolSpec>,
        }
        let w = W {
            p: vec![
                PoolSpec::None,
                PoolSpec::WindowMax { radius: 3 },
                PoolSpec::SuperpixelContrast {
                    op: PoolOp::Mean,
                    combiner: Combiner::RatioSafe,
                },
            ],
        };
        let s = toml::to_string(&w).unwrap();
        assert_eq!(toml::from_str::<W>(&s).unwrap(), w);
    }
}
