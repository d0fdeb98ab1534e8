//! Weighted ridge regression of ±1 targets on flattened patches.
//!
//! Minimizes `Σ w_i (y_i - k·x_i - b)² + λ‖k‖²` with the bias unpenalized.
//! The problem is centred on the weighted means, after which the normal
//! equations `(XcᵀWXc + λI) k = XcᵀW yc` are solved by Cholesky; with `λ = 0`
//! the minimum-norm solution is taken from an SVD.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::conv::Kernel;
use super::sampling::Patch;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RidgePenalty {
    Absolute(f64),
    /// λ · trace(XcᵀWXc) / n, invariant to rescaling the weights.
    TraceRelative(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelFit {
    pub kernel: Kernel,
    /// The normal matrix was rank deficient and the minimum-norm solution was used.
    pub pseudo_inverse: bool,
}

pub fn learn_kernel(
    positives: &[Patch],
    negatives: &[Patch],
    weights: &[f64],
    lambda: f64,
) -> Result<KernelFit> {
    learn_kernel_with(
        positives,
        negatives,
        weights,
        RidgePenalty::Absolute(lambda),
    )
}

pub fn learn_kernel_with(
    positives: &[Patch],
    negatives: &[Patch],
    weights: &[f64],
    penalty: RidgePenalty,
) -> Result<KernelFit> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::KernelLearning(
            "need at least one patch per class".into(),
        ));
    }
    let m = positives.len() + negatives.len();
    if weights.len() != m {
        return Err(Error::param(format!(
            "{} weights for {m} patches",
            weights.len()
        )));
    }
    let lam = match penalty {
        RidgePenalty::Absolute(l) | RidgePenalty::TraceRelative(l) => l,
    };
    if !(lam >= 0.0) {
        return Err(Error::param(format!(
            "ridge penalty must be non-negative, got {lam}"
        )));
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::param(
            "patch weights must be finite and non-negative",
        ));
    }
    let side = positives[0].side;
    let channel = &positives[0].channel;
    let n = side * side;
    if positives
        .iter()
        .chain(negatives)
        .any(|p| p.side != side || &p.channel != channel)
    {
        return Err(Error::param("patches must share side and channel"));
    }
    let wsum: f64 = weights.iter().sum();
    if !(wsum > 0.0) {
        return Err(Error::KernelLearning("all patch weights are zero".into()));
    }

    let rows = || {
        positives
            .iter()
            .map(|p| (p, 1.0))
            .chain(negatives.iter().map(|p| (p, -1.0)))
    };
    let mut xbar = vec![0.0; n];
    let mut ybar = 0.0;
    for ((p, y), &w) in rows().zip(weights) {
        for (a, v) in xbar.iter_mut().zip(&p.values) {
            *a += w * v;
        }
        ybar += w * y;
    }
    xbar.iter_mut().for_each(|v| *v /= wsum);
    ybar /= wsum;

    // Z = diag(√w) Xc, t = diag(√w) yc
    let mut z = DMatrix::<f64>::zeros(m, n);
    let mut t = DVector::<f64>::zeros(m);
    for (i, ((p, y), &w)) in rows().zip(weights).enumerate() {
        let sw = w.sqrt();
        for j in 0..n {
            z[(i, j)] = sw * (p.values[j] - xbar[j]);
        }
        t[i] = sw * (y - ybar);
    }
    let zt = z.transpose();
    let mut a = &zt * &z;
    let rhs = &zt * &t;
    let lam = match penalty {
        RidgePenalty::Absolute(l) => l,
        RidgePenalty::TraceRelative(l) => l * a.trace() / n as f64,
    };

    let (k, pseudo) = if lam > 0.0 {
        for i in 0..n {
            a[(i, i)] += lam;
        }
        match a.clone().cholesky() {
            Some(ch) => (ch.solve(&rhs), false),
            None => min_norm_solve(a, &rhs)?,
        }
    } else {
        min_norm_solve(a, &rhs)?
    };
    let bias = ybar - k.iter().zip(&xbar).map(|(a, b)| a * b).sum::<f64>();
    let kernel = Kernel::new(side, k.iter().copied().collect(), bias, channel.clone())?;
    Ok(KernelFit {
        kernel,
        pseudo_inverse: pseudo,
    })
}

fn min_norm_solve(a: DMatrix<f64>, rhs: &DVector<f64>) -> Result<(DVector<f64>, bool)> {
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-12 * svd.singular_values.len() as f64;
    let deficient = svd.singular_values.iter().any(|&s| s <= tol);
    let x = svd
        .solve(rhs, tol)
        .map_err(|e| Error::KernelLearning(e.to_string()))?;
    Ok((x, deficient))
}
