use super::plane::{ImagePlane, ScoreMap};
use crate::{Error, Result};

/// Maps a raw boosting score to `2p - 1` with `p = 1 / (1 + exp(-2F))`,
/// which is `tanh(F)`.
#[inline]
pub fn normalize_value(raw: f64) -> f64 {
    let a = raw.abs();
    let v = 2.0 / (1.0 + (-2.0 * a).exp()) - 1.0;
    v.copysign(raw)
}

pub fn normalize_scores(raw: &ScoreMap) -> Result<ScoreMap> {
    if raw.normalized {
        return Err(Error::AlreadyNormalized);
    }
    let w = raw.plane.width();
    let mut out = Vec::with_capacity(raw.plane.len());
    for (i, &v) in raw.plane.data().iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                x: i % w,
                y: i / w,
                value: v,
            });
        }
        out.push(normalize_value(v));
    }
    Ok(ScoreMap {
        plane: ImagePlane::from_vec_unchecked(w, raw.plane.height(), out),
        normalized: true,
    })
}
