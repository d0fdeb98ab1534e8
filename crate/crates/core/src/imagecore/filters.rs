//! Separable Gaussian filtering and the built-in feature-channel bank.
//!
//! All filters are correlations with reflect padding. They are evaluated in
//! "difference form", `sum_k * x[i] + Σ w[j] (x[i+j] - x[i])`, where `sum_k`
//! is the analytic tap sum (1 for smoothing, 0 for derivatives). A constant
//! input is therefore reproduced exactly by smoothing and mapped to exactly
//! zero by every derivative filter.

use serde::{Deserialize, Serialize};

use super::plane::{reflect_index, ImagePlane};
use super::stack::{ChannelKind, ChannelStack};
use crate::{Error, Result};

pub const DEFAULT_SIGMAS: [f64; 6] = [0.7, 1.0, 1.6, 3.5, 5.0, 10.0];

/// Sampled Gaussian derivative taps over `[-radius, radius]`, radius = ⌈3σ⌉.
/// Returns the taps and their analytic sum.
pub fn gaussian_taps(sigma: f64, order: u8) -> (Vec<f64>, f64) {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let g: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = g.iter().sum();
    let s2 = sigma * sigma;
    match order {
        0 => (g.iter().map(|v| v / norm).collect(), 1.0),
        // correlation taps, so the sign is that of the flipped derivative
        1 => (
            (-radius..=radius)
                .zip(&g)
                .map(|(i, v)| i as f64 / s2 * v / norm)
                .collect(),
            0.0,
        ),
        _ => {
            let mut t: Vec<f64> = (-radius..=radius)
                .zip(&g)
                .map(|(i, v)| ((i * i) as f64 / (s2 * s2) - 1.0 / s2) * v / norm)
                .collect();
            let mean = t.iter().sum::<f64>() / t.len() as f64;
            t.iter_mut().for_each(|v| *v -= mean);
            (t, 0.0)
        }
    }
}

fn correlate_line(src: &[f64], stride: usize, n: usize, taps: &[f64], sum_k: f64, out: &mut [f64]) {
    let r = (taps.len() / 2) as isize;
    for i in 0..n {
        let xi = src[i * stride];
        let mut acc = 0.0;
        for (k, w) in taps.iter().enumerate() {
            let j = reflect_index(i as isize + k as isize - r, n);
            acc += w * (src[j * stride] - xi);
        }
        out[i] = sum_k * xi + acc;
    }
}

pub fn correlate_rows(plane: &ImagePlane, taps: &[f64], sum_k: f64) -> ImagePlane {
    let (w, h) = plane.dims();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let row = &plane.data()[y * w..(y + 1) * w];
        correlate_line(row, 1, w, taps, sum_k, &mut out[y * w..(y + 1) * w]);
    }
    ImagePlane::from_vec_unchecked(w, h, out)
}

pub fn correlate_cols(plane: &ImagePlane, taps: &[f64], sum_k: f64) -> ImagePlane {
    let (w, h) = plane.dims();
    let mut out = vec![0.0; w * h];
    let mut col = vec![0.0; h];
    let mut res = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = plane.get(x, y);
        }
        correlate_line(&col, 1, h, taps, sum_k, &mut res);
        for y in 0..h {
            out[y * w + x] = res[y];
        }
    }
    ImagePlane::from_vec_unchecked(w, h, out)
}

/// Separable Gaussian derivative: `dx` along x, `dy` along y.
pub fn gaussian_derivative(plane: &ImagePlane, sigma: f64, dx: u8, dy: u8) -> ImagePlane {
    let (tx, sx) = gaussian_taps(sigma, dx);
    let (ty, sy) = gaussian_taps(sigma, dy);
    correlate_cols(&correlate_rows(plane, &tx, sx), &ty, sy)
}

pub fn gaussian_smooth(plane: &ImagePlane, sigma: f64) -> ImagePlane {
    gaussian_derivative(plane, sigma, 0, 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureGenerator {
    Gaussian,
    GradientMagnitude,
    Laplacian,
    /// Larger eigenvalue of the structure tensor (inner scale σ, outer σ/2).
    StructureTensorEigenvalues,
    /// Larger eigenvalue of the Hessian at scale σ.
    HessianEigenvalues,
}

impl FeatureGenerator {
    pub fn name(self) -> &'static str {
        match self {
            FeatureGenerator::Gaussian => "gaussian",
            FeatureGenerator::GradientMagnitude => "gradient-magnitude",
            FeatureGenerator::Laplacian => "laplacian",
            FeatureGenerator::StructureTensorEigenvalues => "structure-tensor-eigenvalues",
            FeatureGenerator::HessianEigenvalues => "hessian-eigenvalues",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSpec {
    pub generators: Vec<FeatureGenerator>,
    pub sigmas: Vec<f64>,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            generators: Vec::new(),
            sigmas: DEFAULT_SIGMAS.to_vec(),
        }
    }
}

fn larger_eigenvalue(a: f64, b: f64, c: f64) -> f64 {
    let m = 0.5 * (a + c);
    let d = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    m + d
}

pub fn feature_channel_name(generator: FeatureGenerator, sigma: f64) -> String {
    format!("{}({})", generator.name(), sigma)
}

pub fn compute_feature(
    image: &ImagePlane,
    generator: FeatureGenerator,
    sigma: f64,
) -> Result<ImagePlane> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::param(format!(
            "feature sigma must be positive, got {sigma}"
        )));
    }
    let (w, h) = image.dims();
    let zip3 =
        |a: &ImagePlane, b: &ImagePlane, c: &ImagePlane, f: &dyn Fn(f64, f64, f64) -> f64| {
            let data = a
                .data()
                .iter()
                .zip(b.data())
                .zip(c.data())
                .map(|((&a, &b), &c)| f(a, b, c))
                .collect();
            ImagePlane::from_vec_unchecked(w, h, data)
        };
    Ok(match generator {
        FeatureGenerator::Gaussian => gaussian_smooth(image, sigma),
        FeatureGenerator::GradientMagnitude => {
            let gx = gaussian_derivative(image, sigma, 1, 0);
            let gy = gaussian_derivative(image, sigma, 0, 1);
            zip3(&gx, &gy, &gy, &|a, b, _| (a * a + b * b).sqrt())
        }
        FeatureGenerator::Laplacian => {
            let xx = gaussian_derivative(image, sigma, 2, 0);
            let yy = gaussian_derivative(image, sigma, 0, 2);
            zip3(&xx, &yy, &yy, &|a, b, _| a + b)
        }
        FeatureGenerator::StructureTensorEigenvalues => {
            let gx = gaussian_derivative(image, sigma, 1, 0);
            let gy = gaussian_derivative(image, sigma, 0, 1);
            let outer = 0.5 * sigma;
            let jxx = gaussian_smooth(&zip3(&gx, &gx, &gx, &|a, _, _| a * a), outer);
            let jxy = gaussian_smooth(&zip3(&gx, &gy, &gy, &|a, b, _| a * b), outer);
            let jyy = gaussian_smooth(&zip3(&gy, &gy, &gy, &|a, _, _| a * a), outer);
            zip3(&jxx, &jxy, &jyy, &larger_eigenvalue)
        }
        FeatureGenerator::HessianEigenvalues => {
            let xx = gaussian_derivative(image, sigma, 2, 0);
            let xy = gaussian_derivative(image, sigma, 1, 1);
            let yy = gaussian_derivative(image, sigma, 0, 2);
            zip3(&xx, &xy, &yy, &larger_eigenvalue)
        }
    })
}

/// One feature channel per (generator, σ), in generator-major order.
pub fn compute_feature_channels(image: &ImagePlane, spec: &FeatureSpec) -> Result<ChannelStack> {
    if let Some(s) = spec.sigmas.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::param(format!(
            "feature sigma must be positive, got {s}"
        )));
    }
    let mut stack = ChannelStack::new(image.width(), image.height())?;
    for &g in &spec.generators {
        for &s in &spec.sigmas {
            stack.push(
                feature_channel_name(g, s),
                ChannelKind::Feature,
                compute_feature(image, g, s)?,
            )?;
        }
    }
    Ok(stack)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [FeatureGenerator; 5] = [
        FeatureGenerator::Gaussian,
        FeatureGenerator::GradientMagnitude,
        FeatureGenerator::Laplacian,
        FeatureGenerator::StructureTensorEigenvalues,
        FeatureGenerator::HessianEigenvalues,
    ];

    #[test]
    fn derivatives_of_constant_are_exactly_zero() {
        let img = ImagePlane::filled(17, 13, 0.37).unwrap();
        for g in ALL.iter().skip(1) {
            for s in [0.7, 1.6, 5.0] {
                let f = compute_feature(&img, *g, s).unwrap();
                assert!(f.data().iter().all(|&v| v == 0.0), "{g:?} σ={s}");
            }
        }
        let smooth = compute_feature(&img, FeatureGenerator::Gaussian, 3.5).unwrap();
        assert!(smooth.data().iter().all(|&v| v == 0.37));
    }

    #[test]
    fn gaussian_of_impulse_matches_sampled_kernel() {
        let sigma = 1.6;
        let n = 21;
        let c = 10;
        let img =
            ImagePlane::from_fn(n, n, |x, y| if x == c && y == c { 1.0 } else { 0.0 }).unwrap();
        let out = gaussian_smooth(&img, sigma);
        // oracle: truncated sampled Gaussian, normalized over its support
        let r = (3.0 * sigma).ceil() as i64;
        let g = |i: i64| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp();
        let z: f64 = (-r..=r).map(g).sum();
        for x in 0..n {
            let d = x as i64 - c as i64;
            let want = if d.abs() <= r {
                g(0) / z * g(d) / z
            } else {
                0.0
            };
            assert!((out.get(x, c) - want).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn default_sigmas_give_six_channels_per_generator() {
        let img = ImagePlane::from_fn(24, 24, |x, y| ((x * y) % 7) as f64 / 7.0).unwrap();
        let spec = FeatureSpec {
            generators: vec![
                FeatureGenerator::Gaussian,
                FeatureGenerator::HessianEigenvalues,
            ],
            ..FeatureSpec::default()
        };
        let s = compute_feature_channels(&img, &spec).unwrap();
        assert_eq!(s.len(), 12);
        assert!(s.names().all(|n| n.contains('(')));
        let again = compute_feature_channels(&img, &spec).unwrap();
        for (a, b) in s.channels().iter().zip(again.channels()) {
            assert_eq!(a.plane, b.plane);
        }
    }

    #[test]
    fn rejects_non_positive_sigma() {
        let img = ImagePlane::filled(8, 8, 0.0).unwrap();
        let spec = FeatureSpec {
            generators: vec![FeatureGenerator::Gaussian],
            sigmas: vec![1.0, 0.0],
        };
        assert!(compute_feature_channels(&img, &spec).is_err());
    }

    #[test]
    fn first_derivative_of_ramp_is_unit_slope_inside() {
        let img = ImagePlane::from_fn(40, 5, |x, _| x as f64).unwrap();
        let d = gaussian_derivative(&img, 1.0, 1, 0);
        assert!((d.get(20, 2) - 1.0).abs() < 0.05);
    }
}
