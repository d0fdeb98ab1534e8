//! Binomial deviance `L(y, F) = ln(1 + exp(-2yF))` and its Newton leaf.

/// Leaf values are clamped to `[-LEAF_CAP, LEAF_CAP]`.
pub const LEAF_CAP: f64 = 4.0;

pub fn deviance(y: f64, f: f64) -> f64 {
    let m = -2.0 * y * f;
    if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    }
}

pub fn total_deviance(labels: &[f64], scores: &[f64]) -> f64 {
    labels
        .iter()
        .zip(scores)
        .map(|(&y, &f)| deviance(y, f))
        .sum()
}

/// Negative gradient `2y / (1 + exp(2yF))`.
pub fn pseudo_residual(y: f64, f: f64) -> f64 {
    let e = (2.0 * y * f).exp();
    if e.is_infinite() {
        0.0
    } else {
        2.0 * y / (1.0 + e)
    }
}

pub fn pseudo_residuals(labels: &[f64], scores: &[f64]) -> Vec<f64> {
    labels
        .iter()
        .zip(scores)
        .map(|(&y, &f)| pseudo_residual(y, f))
        .collect()
}

/// One Newton step `Σr / Σ|r|(2-|r|)`, clamped to `±LEAF_CAP`.
pub fn newton_leaf(residuals: impl Iterator<Item = f64>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for r in residuals {
        num += r;
        den += r.abs() * (2.0 - r.abs());
    }
    if den <= f64::MIN_POSITIVE {
        return if num == 0.0 {
            0.0
        } else {
            LEAF_CAP.copysign(num)
        };
    }
    (num / den).clamp(-LEAF_CAP, LEAF_CAP)
}

/// `½ ln(p / (1-p))` for the positive fraction `p`.
pub fn base_score(n_pos: usize, n_neg: usize) -> f64 {
    if n_pos == 0 || n_neg == 0 {
        return 0.0;
    }
    0.5 * (n_pos as f64 / n_neg as f64).ln()
}
