use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::imagecore::plane::{ImagePlane, LabelMap, Mask};
use crate::seed;
use crate::{Error, Result};

/// A training location. `weight` carries the boosting pseudo-residual
/// magnitude when the sample is used for kernel learning.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSample {
    pub image: usize,
    pub x: usize,
    pub y: usize,
    pub label: i8,
    pub weight: f64,
}

/// One image's contribution to sampling.
#[derive(Clone, Copy)]
pub struct SampleSource<'a> {
    pub labels: &'a LabelMap,
    pub mask: Option<&'a Mask>,
    /// Optional pixel subset (row-major), e.g. a branch's positive set.
    pub restrict: Option<&'a [bool]>,
}

impl<'a> SampleSource<'a> {
    pub fn new(labels: &'a LabelMap) -> Self {
        Self {
            labels,
            mask: None,
            restrict: None,
        }
    }
}

fn eligible_pixels(
    sources: &[SampleSource<'_>],
    margin: usize,
) -> Result<(Vec<(usize, usize)>, Vec<(usize, usize)>)> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (img, s) in sources.iter().enumerate() {
        let (w, h) = s.labels.dims();
        if let Some(m) = s.mask {
            if m.dims() != (w, h) {
                return Err(Error::DimensionMismatch {
                    expected: (w, h),
                    found: m.dims(),
                });
            }
        }
        if let Some(r) = s.restrict {
            if r.len() != w * h {
                return Err(Error::param("restrict set does not match the label map"));
            }
        }
        if w <= 2 * margin || h <= 2 * margin {
            continue;
        }
        for y in margin..h - margin {
            for x in margin..w - margin {
                let i = y * w + x;
                if s.mask.is_some_and(|m| !m.data()[i]) || s.restrict.is_some_and(|r| !r[i]) {
                    continue;
                }
                match s.labels.labels()[i] {
                    LabelMap::POSITIVE => pos.push((img, i)),
                    LabelMap::NEGATIVE => neg.push((img, i)),
                    _ => {}
                }
            }
        }
    }
    Ok((pos, neg))
}

/// Number of eligible (positive, negative) pixels.
pub fn count_eligible(sources: &[SampleSource<'_>], margin: usize) -> Result<(usize, usize)> {
    let (p, n) = eligible_pixels(sources, margin)?;
    Ok((p.len(), n.len()))
}

/// Uniform draw without replacement of `n_pos` positive and `n_neg` negative
/// locations at least `margin` pixels from every border. Positives come
/// first; within a class samples are in scan order.
pub fn sample_locations(
    sources: &[SampleSource<'_>],
    n_pos: usize,
    n_neg: usize,
    margin: usize,
    rng_seed: u64,
) -> Result<Vec<TrainSample>> {
    let (pos, neg) = eligible_pixels(sources, margin)?;
    let mut rng = seed::rng(rng_seed);
    let mut out = Vec::with_capacity(n_pos + n_neg);
    for (pool, n, label, class) in [
        (&pos, n_pos, 1i8, "positive"),
        (&neg, n_neg, -1i8, "negative"),
    ] {
        if n == 0 {
            continue;
        }
        if pool.len() < n {
            return Err(Error::SampleShortfall {
                class,
                needed: n,
                available: pool.len(),
            });
        }
        let mut picked = index::sample(&mut rng, pool.len(), n).into_vec();
        picked.sort_unstable();
        for k in picked {
            let (image, i) = pool[k];
            let w = sources[image].labels.width();
            out.push(TrainSample {
                image,
                x: i % w,
                y: i / w,
                label,
                weight: 1.0,
            });
        }
    }
    Ok(out)
}

/// A square patch of one channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub side: usize,
    pub values: Vec<f64>,
    pub channel: String,
}

impl Patch {
    /// Extracts the `side`×`side` window centred on `(cx, cy)` with reflect
    /// padding.
    pub fn extract(plane: &ImagePlane, cx: usize, cy: usize, side: usize, channel: &str) -> Self {
        let r = (side / 2) as isize;
        let mut values = Vec::with_capacity(side * side);
        for dy in -r..=r {
            for dx in -r..=r {
                values.push(plane.get_reflect(cx as isize + dx, cy as isize + dy));
            }
        }
        Self {
            side,
            values,
            channel: channel.to_string(),
        }
    }

    /// The patch minus its own mean.
    pub fn zero_mean(&self) -> Patch {
        let m = self.values.iter().sum::<f64>() / self.values.len() as f64;
        Patch {
            side: self.side,
            values: self.values.iter().map(|v| v - m).collect(),
            channel: self.channel.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checker(w: usize, h: usize) -> LabelMap {
        LabelMap::new(
            w,
            h,
            (0..w * h)
                .map(|i| if (i / w + i % w) % 2 == 0 { 1 } else { -1 })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn all_ignore_is_a_shortfall() {
        let l = LabelMap::filled(5, 5, LabelMap::IGNORE).unwrap();
        let err = sample_locations(&[SampleSource::new(&l)], 1, 0, 0, 3).unwrap_err();
        assert!(matches!(
            err,
            Error::SampleShortfall {
                class: "positive",
                ..
            }
        ));
    }

    #[test]
    fn zero_request_is_empty() {
        let l = LabelMap::filled(5, 5, LabelMap::IGNORE).unwrap();
        assert!(sample_locations(&[SampleSource::new(&l)], 0, 0, 0, 3)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn exhausting_the_pool_returns_every_eligible_pixel() {
        let l = checker(10, 10);
        let s = sample_locations(&[SampleSource::new(&l)], 50, 0, 0, 9).unwrap();
        let mut got: Vec<(usize, usize)> = s.iter().map(|t| (t.x, t.y)).collect();
        got.sort_unstable();
        // oracle: enumerate every positive pixel
        let mut want = Vec::new();
        for x in 0..10 {
            for y in 0..10 {
                if (x + y) % 2 == 0 {
                    want.push((x, y));
                }
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn honours_mask_margin_and_restrict() {
        let l = checker(12, 12);
        let m = Mask::new(12, 12, (0..144).map(|i| i % 12 < 8).collect()).unwrap();
        let restrict: Vec<bool> = (0..144).map(|i| i / 12 < 9).collect();
        let src = SampleSource {
            labels: &l,
            mask: Some(&m),
            restrict: Some(&restrict),
        };
        let s = sample_locations(&[src], 10, 10, 2, 1).unwrap();
        for t in &s {
            assert!(t.x >= 2 && t.x < 8 && t.y >= 2 && t.y < 9);
            assert_eq!(l.get(t.x, t.y) as i8, t.label);
        }
        let (p, n) = count_eligible(&[src], 2).unwrap();
        assert_eq!(p + n, 6 * 7);
    }

    #[test]
    fn deterministic_given_seed() {
        let l = checker(30, 30);
        let a = sample_locations(&[SampleSource::new(&l)], 40, 40, 1, 5).unwrap();
        let b = sample_locations(&[SampleSource::new(&l)], 40, 40, 1, 5).unwrap();
        let c = sample_locations(&[SampleSource::new(&l)], 40, 40, 1, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
