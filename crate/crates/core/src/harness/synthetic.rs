//! Procedural datasets with exact ground truth.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::context::LabeledImage;
use crate::imagecore::filters::gaussian_smooth;
use crate::imagecore::{compute_feature_channels, ChannelStack, FeatureSpec, ImagePlane, LabelMap};
use crate::seed;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    TextureMosaic,
    BlobWorld,
    AnisotropicVolume,
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "texture-mosaic" => Ok(Self::TextureMosaic),
            "blob-world" => Ok(Self::BlobWorld),
            "anisotropic-volume" => Ok(Self::AnisotropicVolume),
            _ => Err(Error::Config(format!("unknown synthetic kind `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub size: usize,
    /// Slices of the anisotropic volume; ignored by the 2-D kinds.
    pub depth: usize,
    /// Standard deviation of the additive Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Default noise and depth for `kind`.
    pub fn new(kind: SyntheticKind, size: usize, seed: u64) -> Self {
        let noise = match kind {
            SyntheticKind::TextureMosaic => 0.08,
            SyntheticKind::BlobWorld => 0.15,
            SyntheticKind::AnisotropicVolume => 0.35,
        };
        Self {
            kind,
            size,
            depth: 32,
            noise,
            seed,
        }
    }
}

/// Generated slices (one for the 2-D kinds) and their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Synthetic {
    pub images: Vec<ImagePlane>,
    pub labels: Vec<LabelMap>,
}

impl Synthetic {
    /// Slices as labeled images with `image` plus the requested feature channels.
    pub fn labeled(&self, features: &FeatureSpec) -> Result<Vec<LabeledImage>> {
        self.images
            .iter()
            .zip(&self.labels)
            .map(|(img, lab)| {
                let mut stack = ChannelStack::from_image(img.clone());
                stack.extend_from(&compute_feature_channels(img, features)?)?;
                Ok(LabeledImage::new(stack, lab.clone()))
            })
            .collect()
    }
}

pub const TEXTURE_TARGET: (f64, f64) = (0.0, 6.0);
pub const TEXTURE_OTHER: (f64, f64) = (60.0, 11.0);

/// `sin(2π (x cos θ + y sin θ) / λ)` for `(θ in degrees, λ)`.
pub fn grating(x: usize, y: usize, (theta, lambda): (f64, f64)) -> f64 {
    let t = theta.to_radians();
    (2.0 * PI * (x as f64 * t.cos() + y as f64 * t.sin()) / lambda).sin()
}

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Synthetic> {
    if spec.size < 8 {
        return Err(Error::param("synthetic images need a size of at least 8"));
    }
    if !(spec.noise >= 0.0) {
        return Err(Error::param("noise level must be non-negative"));
    }
    let noise = Normal::new(0.0, spec.noise).expect("finite non-negative sigma");
    let mut rng = seed::rng(seed::derive_str(spec.seed, "synthetic"));
    let n = spec.size;
    match spec.kind {
        SyntheticKind::TextureMosaic => {
            let h = n / 2;
            let mut img = Vec::with_capacity(n * n);
            let mut lab = Vec::with_capacity(n * n);
            for y in 0..n {
                for x in 0..n {
                    let target = (x < h) == (y < h);
                    let g = grating(
                        x,
                        y,
                        if target {
                            TEXTURE_TARGET
                        } else {
                            TEXTURE_OTHER
                        },
                    );
                    img.push(0.5 + 0.3 * g + noise.sample(&mut rng));
                    lab.push(if target {
                        LabelMap::POSITIVE
                    } else {
                        LabelMap::NEGATIVE
                    });
                }
            }
            Ok(Synthetic {
                images: vec![ImagePlane::new(n, n, img)?],
                labels: vec![LabelMap::new(n, n, lab)?],
            })
        }
        SyntheticKind::BlobWorld => {
            let field = ImagePlane::new(
                n,
                n,
                (0..n * n)
                    .map(|_| rng.sample(rand_distr::StandardNormal))
                    .collect(),
            )?;
            let field = gaussian_smooth(&field, n as f64 / 20.0);
            let fg: Vec<bool> = field.data().iter().map(|&v| v > 0.0).collect();
            let soft = gaussian_smooth(
                &ImagePlane::new(n, n, fg.iter().map(|&f| f as u8 as f64).collect())?,
                1.0,
            );
            let mut img = Vec::with_capacity(n * n);
            for y in 0..n {
                for x in 0..n {
                    let i = y * n + x;
                    let base = if near_boundary(&fg, n, x, y, 1) {
                        0.5
                    } else {
                        0.3 + 0.4 * soft.data()[i]
                    };
                    img.push(base + noise.sample(&mut rng));
                }
            }
            let lab = fg
                .iter()
                .map(|&f| {
                    if f {
                        LabelMap::POSITIVE
                    } else {
                        LabelMap::NEGATIVE
                    }
                })
                .collect();
            Ok(Synthetic {
                images: vec![ImagePlane::new(n, n, img)?],
                labels: vec![LabelMap::new(n, n, lab)?],
            })
        }
        SyntheticKind::AnisotropicVolume => {
            if spec.depth == 0 {
                return Err(Error::param("volume depth must be at least 1"));
            }
            let plates = [n / 4, 3 * n / 4];
            let (y0, y1) = (n / 8, n - n / 8);
            let columns: Vec<usize> = (4..n - 4)
                .filter(|&x| plates.iter().all(|&p| x.abs_diff(p) > 5))
                .collect();
            if columns.is_empty() {
                return Err(Error::param(
                    "anisotropic volumes need a size of at least 24",
                ));
            }
            let tubes: Vec<(f64, f64)> = (0..3)
                .map(|_| {
                    let cx = columns[rng.gen_range(0..columns.len())];
                    (cx as f64, rng.gen_range(4..n - 4) as f64)
                })
                .collect();
            let fg: Vec<bool> = (0..n * n)
                .map(|i| {
                    let (x, y) = ((i % n) as f64, (i / n) as f64);
                    let plate = plates.iter().any(|&p| (x - p as f64).abs() <= 1.0)
                        && (y0..y1).contains(&(i / n));
                    plate
                        || tubes
                            .iter()
                            .any(|&(cx, cy)| (x - cx).powi(2) + (y - cy).powi(2) <= 9.0)
                })
                .collect();
            let lab = LabelMap::new(
                n,
                n,
                fg.iter()
                    .map(|&f| {
                        if f {
                            LabelMap::POSITIVE
                        } else {
                            LabelMap::NEGATIVE
                        }
                    })
                    .collect(),
            )?;
            let mut images = Vec::with_capacity(spec.depth);
            for _ in 0..spec.depth {
                let offset: f64 = rng.gen_range(-0.05..0.05);
                let data = fg
                    .iter()
                    .map(|&f| 0.3 + 0.4 * f as u8 as f64 + offset + noise.sample(&mut rng))
                    .collect();
                images.push(ImagePlane::new(n, n, data)?);
            }
            Ok(Synthetic {
                images,
                labels: vec![lab; spec.depth],
            })
        }
    }
}

fn near_boundary(fg: &[bool], n: usize, x: usize, y: usize, r: usize) -> bool {
    let f = fg[y * n + x];
    (y.saturating_sub(r)..(y + r + 1).min(n))
        .any(|yy| (x.saturating_sub(r)..(x + r + 1).min(n)).any(|xx| fg[yy * n + xx] != f))
}
