use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A single-channel raster of finite reals, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::param(format!(
                "plane data has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                x: i % width,
                y: i / width,
                value: data[i],
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Constructor for internal paths whose arithmetic cannot produce
    /// non-finite values from finite input.
    pub(crate) fn from_vec_unchecked(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Sample with half-sample symmetric reflection outside the bounds.
    #[inline]
    pub fn get_reflect(&self, x: isize, y: isize) -> f64 {
        self.get(reflect_index(x, self.width), reflect_index(y, self.height))
    }

    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.get(cx, cy)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImagePlane {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        ImagePlane {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn ensure_same_dims(&self, other: (usize, usize)) -> Result<()> {
        if self.dims() != other {
            return Err(Error::DimensionMismatch {
                expected: other,
                found: self.dims(),
            });
        }
        Ok(())
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

pub(crate) fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    Ok(())
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`), valid for
/// any offset and any `n >= 1`.
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Per-pixel ground truth. Binary tasks use `+1` (foreground) and `-1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<i32>,
}

impl LabelMap {
    pub const IGNORE: i32 = i32::MIN;
    pub const POSITIVE: i32 = 1;
    pub const NEGATIVE: i32 = -1;

    pub fn new(width: usize, height: usize, labels: Vec<i32>) -> Result<Self> {
        check_dims(width, height)?;
        if labels.len() != width * height {
            return Err(Error::param(format!(
                "label data has {} values, expected {}x{}",
                labels.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, label: i32) -> Result<Self> {
        Self::new(width, height, vec![label; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn ensure_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                found: self.dims(),
            });
        }
        Ok(())
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> i32 {
        self.labels[y * self.width + x]
    }

    /// Checks that every non-IGNORE label belongs to `classes`.
    pub fn validate_classes(&self, classes: &[i32]) -> Result<()> {
        if let Some(i) = self
            .labels
            .iter()
            .position(|l| *l != Self::IGNORE && !classes.contains(l))
        {
            return Err(Error::param(format!(
                "label {} at ({}, {}) is not in the class set {:?}",
                self.labels[i],
                i % self.width,
                i / self.width,
                classes
            )));
        }
        Ok(())
    }

    /// One-versus-all view: `+1` where the label equals `class`, `-1` elsewhere,
    /// IGNORE preserved.
    pub fn one_vs_all(&self, class: i32) -> LabelMap {
        let labels = self
            .labels
            .iter()
            .map(|&l| match l {
                Self::IGNORE => Self::IGNORE,
                l if l == class => Self::POSITIVE,
                _ => Self::NEGATIVE,
            })
            .collect();
        LabelMap {
            width: self.width,
            height: self.height,
            labels,
        }
    }
}

/// Per-pixel usability flag; `true` pixels take part in training and scoring.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::param("mask size does not match its dimensions"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn all(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![true; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Pixels that count for training and metrics: masked in and not IGNORE.
pub fn eligible(labels: &LabelMap, mask: Option<&Mask>) -> Result<Vec<bool>> {
    if let Some(m) = mask {
        if m.dims() != labels.dims() {
            return Err(Error::DimensionMismatch {
                expected: labels.dims(),
                found: m.dims(),
            });
        }
    }
    Ok(labels
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| l != LabelMap::IGNORE && mask.is_none_or(|m| m.data()[i]))
        .collect())
}

/// A classifier output plane; `normalized` marks values mapped into [-1, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreMap {
    pub plane: ImagePlane,
    pub normalized: bool,
}

impl ScoreMap {
    pub fn raw(plane: ImagePlane) -> Self {
        Self {
            plane,
            normalized: false,
        }
    }

    /// Wraps an already normalized plane, checking the range.
    pub fn normalized(plane: ImagePlane) -> Result<Self> {
        check_normalized(&plane)?;
        Ok(Self {
            plane,
            normalized: true,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.plane.dims()
    }
}

pub(crate) fn check_normalized(plane: &ImagePlane) -> Result<()> {
    if let Some(i) = plane.data().iter().position(|v| !(-1.0..=1.0).contains(v)) {
        return Err(Error::NotNormalized {
            x: i % plane.width(),
            y: i / plane.width(),
            value: plane.data()[i],
        });
    }
    Ok(())
}
