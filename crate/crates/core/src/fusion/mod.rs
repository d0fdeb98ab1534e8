//! Snowflake descriptors and the random-forest fusion classifier.

mod forest;
mod snowflake;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use forest::{
    argmax, predict_forest, train_forest, DecisionTree, ForestConfig, ForestModel, ForestNode,
};
pub use snowflake::{
    fake3d_descriptor, fake3d_slices, snowflake_descriptor, snowflake_into, SnowflakeSpec,
};

use crate::imagecore::ImagePlane;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub forest: ForestConfig,
    pub snowflake: SnowflakeSpec,
    /// Training pixels per class are subsampled to at most this many.
    pub max_per_class: usize,
    /// Slice offset D of the fake-3D descriptor; `None` uses the slice alone.
    pub fake3d: Option<usize>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            forest: ForestConfig::default(),
            snowflake: SnowflakeSpec::default(),
            max_per_class: 200_000,
            fake3d: None,
        }
    }
}

/// The fusion planes of every slice of a volume (one slice for 2-D data),
/// all with the same channel order and dimensions.
pub struct DescriptorSource<'a> {
    pub slices: Vec<Vec<&'a ImagePlane>>,
    offsets: Vec<(isize, isize)>,
    fake3d: Option<usize>,
}

impl<'a> DescriptorSource<'a> {
    pub fn new(
        slices: Vec<Vec<&'a ImagePlane>>,
        spec: &SnowflakeSpec,
        fake3d: Option<usize>,
    ) -> Result<Self> {
        spec.validate()?;
        let first = slices
            .first()
            .ok_or_else(|| Error::param("no slices to describe"))?;
        let dims = first
            .first()
            .ok_or_else(|| Error::param("no fusion channels"))?
            .dims();
        for s in &slices {
            if s.len() != first.len() {
                return Err(Error::param("slices differ in channel count"));
            }
            for p in s {
                p.ensure_same_dims(dims)?;
            }
        }
        Ok(Self {
            slices,
            offsets: spec.offsets(),
            fake3d,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.slices[0][0].dims()
    }

    pub fn len(&self) -> usize {
        let single = self.slices[0].len() * self.offsets.len();
        if self.fake3d.is_some() {
            3 * single
        } else {
            single
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn describe_into(&self, x: usize, y: usize, z: usize, out: &mut Vec<f64>) {
        match self.fake3d {
            None => snowflake_into(&self.slices[z], x, y, &self.offsets, out),
            Some(d) => {
                for s in fake3d_slices(z, d, self.slices.len()) {
                    snowflake_into(&self.slices[s], x, y, &self.offsets, out);
                }
            }
        }
    }

    /// Class probability planes of slice `z`, one per forest class.
    pub fn predict_dense(&self, model: &ForestModel, z: usize) -> Result<Vec<ImagePlane>> {
        if self.len() != model.dim {
            return Err(Error::DimensionMismatch {
                expected: (model.dim, 1),
                found: (self.len(), 1),
            });
        }
        let (w, h) = self.dims();
        let k = model.n_classes();
        let rows: Vec<Vec<f64>> = (0..h)
            .into_par_iter()
            .map(|y| {
                let mut desc = Vec::with_capacity(self.len());
                let mut row = Vec::with_capacity(w * k);
                for x in 0..w {
                    desc.clear();
                    self.describe_into(x, y, z, &mut desc);
                    row.extend(model.predict_unchecked(&desc));
                }
                row
            })
            .collect();
        Ok((0..k)
            .map(|c| {
                let data = rows
                    .iter()
                    .flat_map(|r| r.chunks(k).map(move |p| p[c]))
                    .collect();
                ImagePlane::from_vec_unchecked(w, h, data)
            })
            .collect())
    }
}
