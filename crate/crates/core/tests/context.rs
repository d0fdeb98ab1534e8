use kernelseg::context::{
    predict_context, predict_context_volume, split_sets, train_context, train_zcut, zcut_maps,
    Architecture, ContextConfig, Dataset, LabeledImage,
};
use kernelseg::gradboost::TrainConfig;
use kernelseg::harness::{gen_synthetic, SyntheticKind, SyntheticSpec};
use kernelseg::imagecore::{ChannelStack, FeatureSpec, ImagePlane, LabelMap, ScoreMap};
use kernelseg::seed;
use proptest::prelude::*;
use rand::Rng;

fn blobs(size: usize, s: u64) -> Dataset {
    let g = gen_synthetic(&SyntheticSpec::new(SyntheticKind::BlobWorld, size, s)).unwrap();
    Dataset::from_images(g.labeled(&FeatureSpec::default()).unwrap())
}

fn quick(arch: Architecture) -> ContextConfig {
    let mut base = TrainConfig::ikb();
    base.rounds = 4;
    base.n_pos = 120;
    base.n_neg = 120;
    base.bank.bank_size = 3;
    base.bank.filter_sizes = vec![3, 5];
    base.clusters = 2;
    base.cluster_patch = 5;
    let mut cfg = ContextConfig {
        architecture: arch,
        base,
        stages: 3,
        seed: 5,
        ..ContextConfig::default()
    };
    cfg.split.min_samples = 5;
    cfg.split.min_misclassified_fraction = 0.0;
    cfg.fusion.forest.n_trees = 8;
    cfg.fusion.max_per_class = 400;
    cfg
}

#[test]
fn band_examples() {
    let m = ScoreMap::normalized(ImagePlane::new(3, 1, vec![0.8, -0.3, -0.9]).unwrap()).unwrap();
    let s = split_sets(&m, 0.5).unwrap();
    assert_eq!((s.pos[0], s.neg[0]), (true, false));
    assert_eq!((s.pos[1], s.neg[1]), (true, true));
    assert_eq!((s.pos[2], s.neg[2]), (false, true));
}

proptest! {
    #[test]
    fn sets_cover_and_overlap_on_the_band(v in prop::collection::vec(-1.0f64..=1.0, 1..64), eps in 0.01f64..0.99) {
        let n = v.len();
        let m = ScoreMap::normalized(ImagePlane::new(n, 1, v.clone()).unwrap()).unwrap();
        let s = split_sets(&m, eps).unwrap();
        for i in 0..n {
            prop_assert!(s.pos[i] || s.neg[i]);
            prop_assert_eq!(s.pos[i] && s.neg[i], v[i].abs() < eps);
        }
    }
}

#[test]
fn zero_levels_is_the_first_classifier_plus_fusion() {
    let mut cfg = quick(Architecture::Knotted);
    cfg.split.max_levels = 0;
    let m = train_context(&blobs(48, 1), &cfg).unwrap();
    assert_eq!(m.map_count(), 1);
    assert_eq!(
        m.fusion_channels,
        vec!["image".to_string(), "map:0".to_string()]
    );
    assert!(m.is_binary());
}

#[test]
fn knotted_levels_and_recipes() {
    let mut cfg = quick(Architecture::Knotted);
    cfg.split.max_levels = 2;
    let data = blobs(48, 2);
    let m = train_context(&data, &cfg).unwrap();
    let p = &m.pipelines[0];
    let paths: Vec<&str> = p.classifiers.iter().map(|c| c.path.as_str()).collect();
    assert_eq!(paths, ["0", "P", "N", "PP", "NN"]);
    assert_eq!(m.map_count(), 5);
    for c in &p.classifiers {
        assert_eq!(c.inputs.len(), c.level);
    }
    assert_eq!(p.classifiers[3].inputs, ["map:0", "map:P"]);
    assert_eq!(p.classifiers[4].inputs, ["map:0", "map:N"]);
    assert_eq!(m.fusion_channels.len(), 1 + 5);
    assert_eq!(p.levels.len(), 3);

    let pred = predict_context(&m, &data.volumes[0][0].stack).unwrap();
    assert_eq!(pred.maps.len(), 5);
    assert!(pred
        .maps
        .iter()
        .all(|(_, s)| s.normalized && s.plane.data().iter().all(|v| v.abs() <= 1.0)));
    let scores = pred.scores.unwrap();
    assert!(scores.plane.data().iter().all(|v| v.abs() <= 1.0));
}

#[test]
fn autocontext_stage_consumes_every_previous_map() {
    let cfg = quick(Architecture::AutoContext);
    let m = train_context(&blobs(48, 3), &cfg).unwrap();
    let p = &m.pipelines[0];
    assert_eq!(p.classifiers.len(), 3);
    assert_eq!(p.classifiers[2].inputs, ["map:0", "map:A1"]);
    for c in &p.classifiers {
        assert_eq!(c.set_size, p.classifiers[0].set_size);
    }

    let mut one = cfg.clone();
    one.stages = 1;
    assert_eq!(train_context(&blobs(48, 3), &one).unwrap().map_count(), 1);
}

#[test]
fn depth_one_expanded_matches_knotted_branches() {
    let data = blobs(48, 4);
    let mut k = quick(Architecture::Knotted);
    k.split.max_levels = 1;
    let mut e = k.clone();
    e.architecture = Architecture::Expanded;
    let mk = train_context(&data, &k).unwrap();
    let me = train_context(&data, &e).unwrap();
    let (ck, ce) = (&mk.pipelines[0].classifiers, &me.pipelines[0].classifiers);
    assert_eq!(ck.len(), 3);
    assert_eq!(ce.len(), 3);
    for (a, b) in ck.iter().zip(ce) {
        assert!(a.copied_from.is_none());
        assert_eq!(a.path, b.path);
        assert_eq!(a.model, b.model);
        assert_eq!(a.set_size, b.set_size);
    }
}

#[test]
fn expanded_paths_shrink() {
    let mut cfg = quick(Architecture::Expanded);
    cfg.split.max_levels = 2;
    let m = train_context(&blobs(48, 6), &cfg).unwrap();
    let cs = &m.pipelines[0].classifiers;
    for c in cs.iter().skip(1) {
        let parent = &c.path[..c.path.len() - 1];
        let parent = if parent.is_empty() { "0" } else { parent };
        let p = cs.iter().find(|x| x.path == parent).unwrap();
        assert!(
            c.set_size <= p.set_size,
            "{} larger than {}",
            c.path,
            p.path
        );
        assert_eq!(c.inputs.len(), c.level);
    }
}

#[test]
fn sample_shortfall_stops_or_copies() {
    let data = blobs(48, 7);
    let mut e = quick(Architecture::Expanded);
    e.split.min_samples = 48 * 48;
    assert_eq!(train_context(&data, &e).unwrap().map_count(), 1);

    let mut k = quick(Architecture::Knotted);
    k.split.min_samples = 48 * 48;
    let m = train_context(&data, &k).unwrap();
    let cs = &m.pipelines[0].classifiers;
    assert_eq!(cs.len(), 5);
    assert!(cs[0].copied_from.is_none());
    assert_eq!(cs[1].copied_from.as_deref(), Some("0"));
    assert_eq!(cs[2].copied_from.as_deref(), Some("0"));
    assert_eq!(cs[3].copied_from.as_deref(), Some(cs[1].path.as_str()));
    assert_eq!(cs[4].copied_from.as_deref(), Some(cs[2].path.as_str()));
    for c in &cs[1..] {
        assert_eq!(c.model, cs[0].model);
        assert!(c.set_size <= cs[0].set_size);
    }

    let pred = predict_context(&m, &data.volumes[0][0].stack).unwrap();
    assert_eq!(pred.maps.len(), 5);
    for w in pred.maps.windows(2) {
        assert_eq!(w[0].1.plane.data(), w[1].1.plane.data());
    }
}

#[test]
fn replay_is_bit_identical() {
    let data = blobs(40, 8);
    let cfg = quick(Architecture::Knotted);
    let a = train_context(&data, &cfg).unwrap();
    let b = train_context(&data, &cfg).unwrap();
    assert_eq!(a, b);
    let stack = &blobs(40, 9).volumes[0][0].stack;
    let pa = predict_context(&a, stack).unwrap();
    let pb = predict_context(&b, stack).unwrap();
    assert_eq!(pa.labels, pb.labels);
    for (x, y) in pa.probabilities.iter().zip(&pb.probabilities) {
        assert_eq!(x.data(), y.data());
    }
}

/// Three vertical bands of rising intensity labeled 0, 1 and 2.
fn three_bands(w: usize, s: u64) -> LabeledImage {
    let mut rng = seed::rng(s);
    let class = |i: usize| (3 * (i % w) / w) as i32;
    let img = (0..w * w)
        .map(|i| 0.2 + 0.3 * class(i) as f64 + rng.gen_range(-0.1..0.1))
        .collect();
    let labels = LabelMap::new(w, w, (0..w * w).map(class).collect()).unwrap();
    LabeledImage::new(
        ChannelStack::from_image(ImagePlane::new(w, w, img).unwrap()),
        labels,
    )
}

#[test]
fn multi_label_runs_one_pipeline_per_class() {
    let data = Dataset::from_images(vec![three_bands(45, 1)]);
    let mut cfg = quick(Architecture::Knotted);
    cfg.split.max_levels = 1;
    let m = train_context(&data, &cfg).unwrap();
    assert_eq!(m.classes, vec![0, 1, 2]);
    assert!(!m.is_binary());
    assert_eq!(m.pipelines.len(), 3);
    assert_eq!(m.pipelines[1].classifiers[0].map, "c1:map:0");
    let pred = predict_context(&m, &three_bands(45, 2).stack).unwrap();
    assert!(pred.scores.is_none());
    assert_eq!(pred.probabilities.len(), 3);
    assert!(pred.labels.labels().iter().all(|l| (0..3).contains(l)));
    let truth = three_bands(45, 2).labels;
    let right = pred
        .labels
        .labels()
        .iter()
        .zip(truth.labels())
        .filter(|(a, b)| a == b)
        .count();
    assert!(right as f64 > 0.8 * 45.0 * 45.0, "{right}");
}

#[test]
fn raw_maps_when_normalization_is_off() {
    let data = blobs(48, 10);
    let mut cfg = quick(Architecture::AutoContext);
    cfg.stages = 2;
    cfg.normalize = false;
    cfg.base.rounds = 10;
    cfg.base.shrinkage = 1.0;
    let m = train_context(&data, &cfg).unwrap();
    let pred = predict_context(&m, &data.volumes[0][0].stack).unwrap();
    assert!(pred.maps.iter().all(|(_, s)| !s.normalized));
    assert!(pred.maps[0].1.plane.data().iter().any(|v| v.abs() > 1.0));
}

#[test]
fn zcut_geometry_and_constant_input() {
    let mut spec = SyntheticSpec::new(SyntheticKind::AnisotropicVolume, 24, 3);
    spec.depth = 14;
    let g = gen_synthetic(&spec).unwrap();
    let data = Dataset {
        volumes: vec![g.labeled(&FeatureSpec::default()).unwrap()],
    };
    let base = quick(Architecture::Knotted).base;
    let z = train_zcut(&data, &base, 1).unwrap();

    let stacks: Vec<ChannelStack> = data.slices().map(|s| s.stack.clone()).collect();
    for v in zcut_maps(&stacks, &z).unwrap() {
        assert_eq!(v.dims(), (24, 24, 14));
    }
    let flat: Vec<ChannelStack> = (0..6)
        .map(|_| ChannelStack::from_image(ImagePlane::filled(10, 12, 0.4).unwrap()))
        .collect();
    for v in zcut_maps(&flat, &z).unwrap() {
        assert_eq!(v.dims(), (10, 12, 6));
        let first = v.get(0, 0, 0);
        for s in v.slices() {
            assert!(s.data().iter().all(|&x| x == first));
        }
    }
}

#[test]
fn zcut_maps_reach_fusion() {
    let mut spec = SyntheticSpec::new(SyntheticKind::AnisotropicVolume, 24, 4);
    spec.depth = 14;
    let g = gen_synthetic(&spec).unwrap();
    let data = Dataset {
        volumes: vec![g.labeled(&FeatureSpec::default()).unwrap()],
    };
    let mut cfg = quick(Architecture::Knotted);
    cfg.split.max_levels = 0;
    cfg.zcut = true;
    cfg.fusion.fake3d = Some(2);
    let m = train_context(&data, &cfg).unwrap();
    assert_eq!(m.fusion_channels, ["image", "map:0", "zcut:xz", "zcut:yz"]);
    let stacks: Vec<ChannelStack> = data.slices().map(|s| s.stack.clone()).collect();
    let preds = predict_context_volume(&m, &stacks).unwrap();
    assert_eq!(preds.len(), 14);
}
