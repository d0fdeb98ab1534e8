use std::collections::VecDeque;

use crate::imagecore::ImagePlane;

/// Sliding maximum of `src` over windows `[i-r, i+r]` clamped to the line.
fn line_max(src: &[f64], r: usize, out: &mut [f64]) {
    let n = src.len();
    let mut dq: VecDeque<usize> = VecDeque::with_capacity(2 * r + 2);
    let mut next = 0;
    for i in 0..n {
        let hi = (i + r).min(n - 1);
        while next <= hi {
            while dq.back().is_some_and(|&j| src[j] <= src[next]) {
                dq.pop_back();
            }
            dq.push_back(next);
            next += 1;
        }
        let lo = i.saturating_sub(r);
        while dq.front().is_some_and(|&j| j < lo) {
            dq.pop_front();
        }
        out[i] = src[*dq.front().unwrap()];
    }
}

/// Maximum over the `(2r+1)²` window clamped to the image, computed
/// separably with a monotonic deque.
pub fn max_pool(plane: &ImagePlane, radius: usize) -> ImagePlane {
    if radius == 0 {
        return plane.clone();
    }
    let (w, h) = plane.dims();
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        line_max(
            &plane.data()[y * w..(y + 1) * w],
            radius,
            &mut rows[y * w..(y + 1) * w],
        );
    }
    let mut out = vec![0.0; w * h];
    let mut col = vec![0.0; h];
    let mut res = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = rows[y * w + x];
        }
        line_max(&col, radius, &mut res);
        for y in 0..h {
            out[y * w + x] = res[y];
        }
    }
    ImagePlane::from_vec_unchecked(w, h, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(p: &ImagePlane, r: usize) -> ImagePlane {
        let (w, h) = p.dims();
        ImagePlane::from_fn(w, h, |x, y| {
            let mut m = f64::NEG_INFINITY;
            for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                    m = m.max(p.get(xx, yy));
                }
            }
            m
        })
        .unwrap()
    }

    fn plane_strategy() -> impl Strategy<Value = ImagePlane> {
        (1usize..=32, 1usize..=32).prop_flat_map(|(w, h)| {
            proptest::collection::vec(-10.0f64..10.0, w * h)
                .prop_map(move |v| ImagePlane::new(w, h, v).unwrap())
        })
    }

    #[test]
    fn trivial_cases() {
        let p = ImagePlane::from_fn(9, 9, |x, y| (x * 7 + y * 3) as f64 % 5.0).unwrap();
        assert_eq!(max_pool(&p, 0), p);
        let c = ImagePlane::filled(6, 4, -2.5).unwrap();
        assert_eq!(max_pool(&c, 3), c);
        assert_eq!(max_pool(&p, 2), naive(&p, 2));
    }

    proptest! {
        #[test]
        fn matches_window_scan(p in plane_strategy(), r in 0usize..=5) {
            prop_assert_eq!(max_pool(&p, r), naive(&p, r));
        }

        #[test]
        fn larger_windows_dominate(p in plane_strategy(), r1 in 0usize..4, r2 in 0usize..4) {
            let a = max_pool(&p, r1);
            let b = max_pool(&p, r1 + r2);
            prop_assert!(a.data().iter().zip(b.data()).all(|(x, y)| x <= y));
        }
    }
}
