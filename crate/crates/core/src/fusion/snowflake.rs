use serde::{Deserialize, Serialize};

use crate::imagecore::{ChannelStack, ImagePlane};
use crate::{Error, Result};

/// Centre plus the corners and side midpoints of nested squares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SnowflakeSpec {
    pub half_sides: Vec<usize>,
    pub include_center: bool,
}

impl Default for SnowflakeSpec {
    fn default() -> Self {
        Self {
            half_sides: vec![2, 5],
            include_center: true,
        }
    }
}

impl SnowflakeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.half_sides.first().is_some_and(|&h| h == 0)
            || self.half_sides.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::param(
                "snowflake half-sides must be positive and strictly increasing",
            ));
        }
        if self.half_sides.is_empty() && !self.include_center {
            return Err(Error::param("snowflake samples no points"));
        }
        Ok(())
    }

    /// Offsets in serialization order: centre, then per square clockwise
    /// from the top-left corner.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let mut out = Vec::with_capacity(self.points_per_channel());
        if self.include_center {
            out.push((0, 0));
        }
        for &h in &self.half_sides {
            let h = h as isize;
            out.extend([
                (-h, -h),
                (0, -h),
                (h, -h),
                (h, 0),
                (h, h),
                (0, h),
                (-h, h),
                (-h, 0),
            ]);
        }
        out
    }

    pub fn points_per_channel(&self) -> usize {
        usize::from(self.include_center) + 8 * self.half_sides.len()
    }

    pub fn len(&self, channels: usize) -> usize {
        channels * self.points_per_channel()
    }
}

/// Appends the descriptor of `planes` at `(x, y)` to `out`, channel-major.
/// Offsets falling outside the image are clamped to the border.
pub fn snowflake_into(
    planes: &[&ImagePlane],
    x: usize,
    y: usize,
    offsets: &[(isize, isize)],
    out: &mut Vec<f64>,
) {
    for p in planes {
        for &(dx, dy) in offsets {
            out.push(p.get_clamped(x as isize + dx, y as isize + dy));
        }
    }
}

pub fn snowflake_descriptor(
    stack: &ChannelStack,
    x: usize,
    y: usize,
    spec: &SnowflakeSpec,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if x >= stack.width() || y >= stack.height() {
        return Err(Error::param(format!(
            "location ({x}, {y}) is outside the image"
        )));
    }
    let planes: Vec<&ImagePlane> = stack.channels().iter().map(|c| c.plane.as_ref()).collect();
    let mut out = Vec::with_capacity(spec.len(planes.len()));
    snowflake_into(&planes, x, y, &spec.offsets(), &mut out);
    Ok(out)
}

/// Slices used by the fake-3D descriptor: `z-D`, `z`, `z+D`, clamped.
pub fn fake3d_slices(z: usize, d: usize, depth: usize) -> [usize; 3] {
    let last = depth.saturating_sub(1);
    [
        z.saturating_sub(d).min(last),
        z.min(last),
        (z + d).min(last),
    ]
}

/// Snowflake descriptors of slices `z-D`, `z`, `z+D` concatenated.
pub fn fake3d_descriptor(
    slices: &[ChannelStack],
    x: usize,
    y: usize,
    z: usize,
    d: usize,
    spec: &SnowflakeSpec,
) -> Result<Vec<f64>> {
    if z >= slices.len() {
        return Err(Error::param(format!(
            "slice {z} is outside a {}-slice volume",
            slices.len()
        )));
    }
    let mut out = Vec::new();
    for s in fake3d_slices(z, d, slices.len()) {
        out.extend(snowflake_descriptor(&slices[s], x, y, spec)?);
    }
    Ok(out)
}
