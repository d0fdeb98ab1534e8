use serde::{Deserialize, Serialize};

use crate::imagecore::ScoreMap;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    /// Half-width of the band of uncertain scores shared by both sets.
    pub epsilon: f64,
    /// Recursion levels after the first classifier.
    pub max_levels: usize,
    /// Recursion continues while both branches misclassify more than this
    /// fraction of their training pixels.
    pub min_misclassified_fraction: f64,
    /// Minimum eligible pixels of each class for a branch to be trained.
    pub min_samples: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            max_levels: 2,
            min_misclassified_fraction: 0.01,
            min_samples: 50,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::param(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if !(self.min_misclassified_fraction >= 0.0) {
            return Err(Error::param(
                "misclassification threshold must be non-negative",
            ));
        }
        Ok(())
    }
}

/// Positive set `P = {s > -ε}` and negative set `N = {s < ε}`, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PixelSets {
    pub pos: Vec<bool>,
    pub neg: Vec<bool>,
}

impl PixelSets {
    pub fn restrict(mut self, allowed: &[bool]) -> Self {
        for ((p, n), &a) in self.pos.iter_mut().zip(self.neg.iter_mut()).zip(allowed) {
            *p &= a;
            *n &= a;
        }
        self
    }
}

pub fn split_sets(scores: &ScoreMap, epsilon: f64) -> Result<PixelSets> {
    if !scores.normalized {
        return Err(Error::param("set splitting needs a normalized score map"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let d = scores.plane.data();
    Ok(PixelSets {
        pos: d.iter().map(|&s| s > -epsilon).collect(),
        neg: d.iter().map(|&s| s < epsilon).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::ImagePlane;

    #[test]
    fn band_membership() {
        let m =
            ScoreMap::normalized(ImagePlane::new(3, 1, vec![0.8, -0.3, -0.9]).unwrap()).unwrap();
        let s = split_sets(&m, 0.5).unwrap();
        assert_eq!(s.pos, vec![true, true, false]);
        assert_eq!(s.neg, vec![false, true, true]);
        let raw = ScoreMap::raw(ImagePlane::new(3, 1, vec![0.8, -0.3, -0.9]).unwrap());
        assert!(split_sets(&raw, 0.5).is_err());
        assert!(split_sets(&m, 1.0).is_err());
    }
}
