use serde::{Deserialize, Serialize};

use crate::imagecore::plane::ImagePlane;
use crate::imagecore::pyramid::{upsample_nearest, ScaleSpace};
use crate::{Error, Result};

/// A learned correlation filter bound to a source channel at a pyramid scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub id: u32,
    pub side: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub channel: String,
    pub scale: f64,
}

impl Kernel {
    pub fn new(
        side: usize,
        weights: Vec<f64>,
        bias: f64,
        channel: impl Into<String>,
    ) -> Result<Self> {
        if side % 2 == 0 || weights.len() != side * side {
            return Err(Error::param(format!(
                "kernel side {side} must be odd and match {} weights",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
            return Err(Error::KernelLearning("non-finite kernel weights".into()));
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(Error::KernelLearning("all-zero kernel".into()));
        }
        Ok(Self {
            id: 0,
            side,
            weights,
            bias,
            channel: channel.into(),
            scale: 1.0,
        })
    }

    pub fn radius(&self) -> usize {
        self.side / 2
    }
}

/// Same-size correlation (no kernel flip) with reflect padding, plus bias.
pub fn convolve(channel: &ImagePlane, kernel: &Kernel) -> Result<ImagePlane> {
    let (w, h) = channel.dims();
    let f = kernel.side;
    if f > w.min(h) {
        return Err(Error::param(format!(
            "kernel side {f} exceeds channel size {w}x{h}"
        )));
    }
    let r = f / 2;
    let pw = w + 2 * r;
    let ph = h + 2 * r;
    let mut padded = Vec::with_capacity(pw * ph);
    for y in 0..ph {
        for x in 0..pw {
            padded.push(channel.get_reflect(x as isize - r as isize, y as isize - r as isize));
        }
    }
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..f {
                let row = &padded[(y + ky) * pw + x..(y + ky) * pw + x + f];
                let wrow = &kernel.weights[ky * f..(ky + 1) * f];
                for (a, b) in wrow.iter().zip(row) {
                    acc += a * b;
                }
            }
            out.push(acc + kernel.bias);
        }
    }
    Ok(ImagePlane::from_vec_unchecked(w, h, out))
}

/// Response of a kernel at full resolution: correlation on the kernel's
/// pyramid level, upsampled by nearest neighbour.
pub fn kernel_response(space: &ScaleSpace<'_>, kernel: &Kernel) -> Result<ImagePlane> {
    let level = space.level(&kernel.channel, kernel.scale)?;
    let resp = convolve(&level, kernel)?;
    let (w, h) = space.stack().dims();
    Ok(upsample_nearest(&resp, kernel.scale, w, h))
}

/// Splits a response into its positive part and the negation of its
/// negative part: `pos - neg == response`, `pos * neg == 0`.
pub fn posneg(response: &ImagePlane) -> (ImagePlane, ImagePlane) {
    let (w, h) = response.dims();
    let pos = response
        .data()
        .iter()
        .map(|&v| if v > 0.0 { v } else { 0.0 })
        .collect();
    let neg = response
        .data()
        .iter()
        .map(|&v| if v < 0.0 { -v } else { 0.0 })
        .collect();
    (
        ImagePlane::from_vec_unchecked(w, h, pos),
        ImagePlane::from_vec_unchecked(w, h, neg),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(img: &ImagePlane, k: &Kernel) -> ImagePlane {
        let r = k.side as isize / 2;
        ImagePlane::from_fn(img.width(), img.height(), |x, y| {
            let mut acc = 0.0;
            for ky in 0..k.side {
                for kx in 0..k.side {
                    let v =
                        img.get_reflect(x as isize + kx as isize - r, y as isize + ky as isize - r);
                    acc += k.weights[ky * k.side + kx] * v;
                }
            }
            acc + k.bias
        })
        .unwrap()
    }

    #[test]
    fn identity_and_box_kernels() {
        let img = ImagePlane::from_fn(6, 5, |x, y| (x * 7 + y * 3) as f64 / 11.0).unwrap();
        let mut id = vec![0.0; 9];
        id[4] = 1.0;
        let k = Kernel::new(3, id, 0.0, "image").unwrap();
        assert_eq!(convolve(&img, &k).unwrap(), img);
        let c = ImagePlane::filled(6, 5, 0.25).unwrap();
        let bx = Kernel::new(3, vec![1.0; 9], 0.0, "image").unwrap();
        assert!(convolve(&c, &bx)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 9.0 * 0.25));
    }

    #[test]
    fn random_instance_matches_naive_loop() {
        let img =
            ImagePlane::from_fn(7, 7, |x, y| ((x * 31 + y * 17) % 13) as f64 / 13.0 - 0.4).unwrap();
        let k = Kernel::new(
            3,
            (0..9).map(|i| (i as f64 * 0.37).sin()).collect(),
            0.1,
            "image",
        )
        .unwrap();
        assert_eq!(convolve(&img, &k).unwrap(), naive(&img, &k));
    }

    #[test]
    fn oversized_kernel_rejected() {
        let img = ImagePlane::filled(4, 9, 0.0).unwrap();
        let k = Kernel::new(5, vec![1.0; 25], 0.0, "image").unwrap();
        assert!(convolve(&img, &k).is_err());
        assert!(Kernel::new(3, vec![0.0; 9], 0.0, "image").is_err());
        assert!(Kernel::new(4, vec![1.0; 16], 0.0, "image").is_err());
    }

    #[test]
    fn posneg_example() {
        let p = ImagePlane::new(3, 1, vec![1.0, -2.0, 0.0]).unwrap();
        let (pos, neg) = posneg(&p);
        assert_eq!(pos.data(), &[1.0, 0.0, 0.0]);
        assert_eq!(neg.data(), &[0.0, 2.0, 0.0]);
        let all_neg = ImagePlane::filled(2, 2, -0.5).unwrap();
        assert!(posneg(&all_neg).0.data().iter().all(|&v| v == 0.0));
    }

    proptest! {
        #[test]
        fn posneg_reconstructs_and_has_disjoint_support(v in proptest::collection::vec(-1e6f64..1e6, 1..64)) {
            let n = v.len();
            let p = ImagePlane::new(n, 1, v.clone()).unwrap();
            let (pos, neg) = posneg(&p);
            for i in 0..n {
                prop_assert_eq!(pos.data()[i] - neg.data()[i], v[i]);
                prop_assert_eq!(pos.data()[i] * neg.data()[i], 0.0);
            }
        }
    }
}
