use serde::{Deserialize, Serialize};

use super::plane::ImagePlane;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReslicePlane {
    XZ,
    YZ,
}

/// An ordered stack of equally sized slices. `axes` names the original axis
/// running along (columns, rows, slices).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Volume {
    slices: Vec<ImagePlane>,
    axes: [Axis; 3],
}

impl Volume {
    pub fn new(slices: Vec<ImagePlane>) -> Result<Self> {
        Self::with_axes(slices, [Axis::X, Axis::Y, Axis::Z])
    }

    pub fn with_axes(slices: Vec<ImagePlane>, axes: [Axis; 3]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::param("a volume needs at least one slice"))?;
        let dims = first.dims();
        for s in &slices {
            s.ensure_same_dims(dims)?;
        }
        Ok(Self { slices, axes })
    }

    pub fn slices(&self) -> &[ImagePlane] {
        &self.slices
    }

    pub fn into_slices(self) -> Vec<ImagePlane> {
        self.slices
    }

    pub fn axes(&self) -> [Axis; 3] {
        self.axes
    }

    /// (width, height, depth)
    pub fn dims(&self) -> (usize, usize, usize) {
        let (w, h) = self.slices[0].dims();
        (w, h, self.slices.len())
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.slices[z].get(x, y)
    }
}

/// Swap the slice axis with the row axis (XZ) or the column axis (YZ).
/// Voxel `(x, y, z)` lands at `(x, z)` of slice `y` for XZ, and at `(z, y)`
/// of slice `x` for YZ; both maps are involutions.
pub fn reslice(volume: &Volume, plane: ReslicePlane) -> Volume {
    let (w, h, d) = volume.dims();
    let [a0, a1, a2] = volume.axes;
    match plane {
        ReslicePlane::XZ => {
            let slices = (0..h)
                .map(|y| {
                    let mut data = Vec::with_capacity(w * d);
                    for z in 0..d {
                        let row = &volume.slices[z].data()[y * w..(y + 1) * w];
                        data.extend_from_slice(row);
                    }
                    ImagePlane::from_vec_unchecked(w, d, data)
                })
                .collect();
            Volume {
                slices,
                axes: [a0, a2, a1],
            }
        }
        ReslicePlane::YZ => {
            let slices = (0..w)
                .map(|x| {
                    let mut data = Vec::with_capacity(d * h);
                    for y in 0..h {
                        for z in 0..d {
                            data.push(volume.slices[z].get(x, y));
                        }
                    }
                    ImagePlane::from_vec_unchecked(d, h, data)
                })
                .collect();
            Volume {
                slices,
                axes: [a2, a1, a0],
            }
        }
    }
}
