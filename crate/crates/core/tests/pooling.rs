use std::collections::VecDeque;

use kernelseg::imagecore::ImagePlane;
use kernelseg::pooling::{max_pool, slic, SlicParams};
use kernelseg::seed;
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #[test]
    fn wider_windows_dominate(
        w in 1usize..32, h in 1usize..32, r1 in 0usize..5, r2 in 0usize..5,
        v in prop::collection::vec(-1.0f64..1.0, 1024),
    ) {
        let p = ImagePlane::new(w, h, v[..w * h].to_vec()).unwrap();
        let a = max_pool(&p, r1);
        let b = max_pool(&p, r1 + r2);
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!(x <= y);
        }
        for (x, y) in p.data().iter().zip(a.data()) {
            prop_assert!(x <= y);
        }
    }
}

fn connected(labels: &[u32], w: usize, h: usize, label: u32) -> bool {
    let start = labels.iter().position(|&l| l == label).unwrap();
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut reached = 0;
    while let Some(i) = queue.pop_front() {
        reached += 1;
        let (x, y) = (i % w, i / w);
        let mut next = Vec::new();
        if x > 0 {
            next.push(i - 1);
        }
        if x + 1 < w {
            next.push(i + 1);
        }
        if y > 0 {
            next.push(i - w);
        }
        if y + 1 < h {
            next.push(i + w);
        }
        for j in next {
            if !seen[j] && labels[j] == label {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    reached == labels.iter().filter(|&&l| l == label).count()
}

#[test]
fn superpixels_partition_into_connected_parts() {
    for s in 0..4u64 {
        let mut rng = seed::rng(s);
        let (w, h) = (rng.gen_range(20..50), rng.gen_range(20..50));
        let img = ImagePlane::from_fn(
            w,
            h,
            |x, y| if (x / 9 + y / 7) % 2 == 0 { 0.2 } else { 0.8 },
        )
        .unwrap();
        let data: Vec<f64> = img
            .data()
            .iter()
            .map(|v| v + rng.gen_range(-0.1..0.1))
            .collect();
        let img = ImagePlane::new(w, h, data).unwrap();
        let sp = slic(
            &img,
            SlicParams {
                region_size: 6,
                ..SlicParams::default()
            },
        )
        .unwrap();
        assert_eq!(sp.labels().len(), w * h);
        assert!(sp.count() >= 1);
        for l in 0..sp.count() as u32 {
            assert!(sp.labels().contains(&l), "label {l} unused");
            assert!(connected(sp.labels(), w, h, l), "label {l} not 4-connected");
        }
        assert!(sp.labels().iter().all(|&l| (l as usize) < sp.count()));
    }
}
