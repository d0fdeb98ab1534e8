use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kernelseg::context::{predict_context_volume, train_context};
use kernelseg::gradboost::{predict_scores, train_kernelboost, BoostModel, TrainImage};
use kernelseg::harness::manifest::{
    DatasetManifest, ItemEntry, LoadOptions, SplitEntry, VolumeEntry,
};
use kernelseg::harness::{
    best_threshold, best_threshold_many, evaluate_labels, gen_synthetic as generate, load_model,
    metrics_table, save_model, threshold_labels, write_metrics_csv, write_training_log, Config,
    MetricsReport, ModelFile, SyntheticKind,
};
use kernelseg::imagecore::io::{save_float_plane, save_png, save_png16, save_u8_values};
use kernelseg::imagecore::{normalize_scores, ChannelStack, ImagePlane, LabelMap, Mask, ScoreMap};
use kernelseg::kernelbank::{count_eligible, Kernel, SampleSource};
use kernelseg::pooling::slic;

use crate::{DumpArgs, EvaluateArgs, GenArgs, PredictArgs, TrainArgs};

fn load_config(path: Option<&Path>) -> Result<Config> {
    let cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Config::from_toml(&text)?
        }
        None => Config::default(),
    };
    Ok(cfg)
}

fn load_options(cfg: &Config) -> LoadOptions {
    LoadOptions {
        raw_intensities: !cfg.imagecore.normalize_input,
        features: cfg.imagecore.features.clone(),
    }
}

fn split<'a>(m: &'a DatasetManifest, name: &str) -> &'a SplitEntry {
    if name == "train" {
        &m.train
    } else {
        &m.test
    }
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let mut cfg = load_config(a.settings.config.as_deref())?;
    if let Some(s) = a.settings.seed {
        cfg.harness.seed = s;
    }
    if let Some(arch) = a.architecture {
        cfg.context.architecture = arch;
    }
    if let Some((size, m)) = a.superpixels {
        cfg.pooling.superpixels = true;
        cfg.pooling.slic.region_size = size;
        cfg.pooling.slic.compactness = m;
    }
    if let Some(d) = a.fake3d {
        cfg.fusion.fake3d = Some(d);
    }
    if let Some(h) = &a.snowflake {
        cfg.fusion.snowflake.half_sides = h.clone();
    }
    if a.no_normalize {
        cfg.context.normalize = false;
    }
    cfg.validate()?;

    let (manifest, root) = DatasetManifest::load(&a.data)?;
    let data = manifest.load_dataset(&root, &manifest.train, &load_options(&cfg))?;
    if data.n_slices() == 0 {
        bail!("{} lists no training images", a.data.display());
    }
    if let Some(dir) = &a.debug_dir {
        export_superpixels(dir, data.slices().map(|s| &s.stack), &cfg)?;
    }

    let model = if a.boost_only {
        if data.classes() != [LabelMap::NEGATIVE, LabelMap::POSITIVE] {
            bail!(
                "--boost-only needs exactly the labels -1 and 1, found {:?}",
                data.classes()
            );
        }
        let mut tc = cfg.train_config();
        let sources: Vec<SampleSource<'_>> = data
            .slices()
            .map(|s| SampleSource {
                labels: &s.labels,
                mask: s.mask.as_ref(),
                restrict: None,
            })
            .collect();
        let (pos, neg) = count_eligible(&sources, tc.margin())?;
        tc.n_pos = tc.n_pos.min(pos);
        tc.n_neg = tc.n_neg.min(neg);
        let images: Vec<TrainImage<'_>> = data
            .slices()
            .map(|s| TrainImage {
                stack: &s.stack,
                labels: &s.labels,
                mask: s.mask.as_ref(),
                restrict: None,
            })
            .collect();
        let m = train_kernelboost(&images, &tc)?;
        eprintln!(
            "trained {} rounds, final training loss {:.4}",
            m.trees.len(),
            m.train_loss.last().copied().unwrap_or(f64::NAN)
        );
        if let Some(log) = &a.log {
            let mut out = String::from("round,loss\n");
            for (r, l) in m.train_loss.iter().enumerate() {
                writeln!(out, "{r},{l}")?;
            }
            fs::write(log, out).with_context(|| format!("writing {}", log.display()))?;
        }
        ModelFile::Boost(m)
    } else {
        let m = train_context(&data, &cfg.context_config())?;
        for p in &m.pipelines {
            let name = p
                .class
                .map_or_else(|| "binary".to_string(), |c| format!("class {c}"));
            for l in &p.levels {
                eprintln!(
                    "{name} level {}: {} of {} training pixels misclassified",
                    l.level, l.misclassified, l.pixels
                );
            }
        }
        if let Some(log) = &a.log {
            let f = fs::File::create(log).with_context(|| format!("creating {}", log.display()))?;
            write_training_log(f, &m)?;
        }
        ModelFile::Context(m)
    };
    save_model(&a.out, &model).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!("model written to {}", a.out.display());
    Ok(())
}

fn export_superpixels<'a>(
    dir: &Path,
    stacks: impl Iterator<Item = &'a ChannelStack>,
    cfg: &Config,
) -> Result<()> {
    if !cfg.pooling.superpixels {
        return Ok(());
    }
    fs::create_dir_all(dir)?;
    for (i, stack) in stacks.enumerate() {
        let map = slic(
            stack.require(&cfg.pooling.superpixel_channel)?,
            cfg.pooling.slic,
        )?;
        let (w, h) = map.dims();
        let plane = ImagePlane::new(
            w,
            h,
            map.labels().iter().map(|&l| l as f64 / 65535.0).collect(),
        )?;
        save_png16(&dir.join(format!("superpixels_{i:03}.png")), &plane)?;
    }
    Ok(())
}

struct SlicePrediction {
    /// Normalized binary score, absent for multi-label models.
    score: Option<ScoreMap>,
    labels: LabelMap,
}

fn predict_volume(model: &ModelFile, stacks: &[ChannelStack]) -> Result<Vec<SlicePrediction>> {
    match model {
        ModelFile::Boost(m) => stacks
            .iter()
            .map(|s| {
                let score = normalize_scores(&predict_scores(m, s)?)?;
                let labels = threshold_labels(&score, 0.0);
                Ok(SlicePrediction {
                    score: Some(score),
                    labels,
                })
            })
            .collect(),
        ModelFile::Context(m) => Ok(predict_context_volume(m, stacks)?
            .into_iter()
            .map(|p| SlicePrediction {
                score: p.scores,
                labels: p.labels,
            })
            .collect()),
    }
}

struct Loaded {
    name: String,
    stack: ChannelStack,
    labels: Option<LabelMap>,
    mask: Option<Mask>,
}

/// Loads one volume (a single 2-D item or a list of slices) with output names.
fn load_volume(
    m: &DatasetManifest,
    root: &Path,
    items: &[&ItemEntry],
    first: usize,
    opts: &LoadOptions,
) -> Result<Vec<Loaded>> {
    items
        .iter()
        .enumerate()
        .map(|(k, item)| {
            let l = m
                .load_item(root, item, opts)
                .with_context(|| format!("loading {}", item.image.display()))?;
            let stem = item
                .image
                .file_stem()
                .map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned());
            Ok(Loaded {
                name: format!("{:04}_{stem}", first + k),
                stack: l.stack,
                labels: l.labels,
                mask: l.mask,
            })
        })
        .collect()
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let model = load_model(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let (manifest, root) = DatasetManifest::load(&a.data)?;
    let values: Vec<(i32, u16)> = manifest
        .classes
        .iter()
        .map(|c| (c.label, c.value))
        .collect();
    fs::create_dir_all(&a.out)?;
    let mut n = 0;
    for vol in split(&manifest, &a.split).volumes() {
        let loaded = load_volume(&manifest, &root, &vol, n, &load_options(&cfg))?;
        n += loaded.len();
        let stacks: Vec<ChannelStack> = loaded.iter().map(|l| l.stack.clone()).collect();
        for (l, p) in loaded.iter().zip(predict_volume(&model, &stacks)?) {
            if let Some(s) = &p.score {
                save_float_plane(&a.out.join(format!("{}_score.kfp", l.name)), &s.plane)?;
                save_png(
                    &a.out.join(format!("{}_score.png", l.name)),
                    &s.plane,
                    -1.0,
                    1.0,
                )?;
            }
            write_labels(
                &a.out.join(format!("{}_labels.png", l.name)),
                &p.labels,
                &values,
            )?;
        }
    }
    if n == 0 {
        bail!("the {} split lists no images", a.split);
    }
    eprintln!("wrote predictions for {n} images to {}", a.out.display());
    Ok(())
}

fn write_labels(path: &Path, labels: &LabelMap, values: &[(i32, u16)]) -> Result<()> {
    let value = |l: i32| values.iter().find(|v| v.0 == l).map_or(0, |v| v.1);
    let (w, h) = labels.dims();
    let raw: Vec<u16> = labels.labels().iter().map(|&l| value(l)).collect();
    if raw.iter().all(|&v| v <= 255) {
        save_u8_values(
            path,
            w,
            h,
            &raw.iter().map(|&v| v as u8).collect::<Vec<_>>(),
        )?;
    } else {
        save_png16(
            path,
            &ImagePlane::new(w, h, raw.iter().map(|&v| v as f64 / 65535.0).collect())?,
        )?;
    }
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let metric = a.metric.unwrap_or(cfg.harness.threshold_metric);
    let per_image = cfg.harness.per_image_threshold && !a.global_threshold;
    let model = load_model(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let (manifest, root) = DatasetManifest::load(&a.data)?;

    let mut names = Vec::new();
    let mut preds = Vec::new();
    let mut truth = Vec::new();
    for vol in split(&manifest, &a.split).volumes() {
        let loaded = load_volume(&manifest, &root, &vol, names.len(), &load_options(&cfg))?;
        let stacks: Vec<ChannelStack> = loaded.iter().map(|l| l.stack.clone()).collect();
        preds.extend(predict_volume(&model, &stacks)?);
        for l in loaded {
            let gt = l
                .labels
                .with_context(|| format!("{} has no label file", l.name))?;
            names.push(l.name);
            truth.push((gt, l.mask));
        }
    }
    if names.is_empty() {
        bail!("the {} split lists no images", a.split);
    }

    let binary = preds.iter().all(|p| p.score.is_some());
    let global = if binary && !per_image {
        let items: Vec<_> = preds
            .iter()
            .zip(&truth)
            .map(|(p, (g, m))| (p.score.as_ref().unwrap(), g, m.as_ref()))
            .collect();
        Some(best_threshold_many(&items, metric)?.0)
    } else {
        None
    };
    let mut rows = Vec::new();
    for ((name, p), (gt, mask)) in names.into_iter().zip(&preds).zip(&truth) {
        let report = match &p.score {
            Some(score) => {
                let tau = match global {
                    Some(t) => t,
                    None => best_threshold(score, gt, mask.as_ref(), metric)?.0,
                };
                let mut r = evaluate_labels(&threshold_labels(score, tau), gt, mask.as_ref())?;
                r.threshold = Some(tau);
                r
            }
            None => evaluate_labels(&p.labels, gt, mask.as_ref())?,
        };
        rows.push((name, report));
    }
    if rows.len() > 1 {
        rows.push(("mean".into(), mean_report(rows.iter().map(|r| &r.1))));
    }
    print!("{}", metrics_table(&rows));
    if let Some(path) = &a.csv {
        let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_metrics_csv(f, &rows)?;
    }
    Ok(())
}

fn mean_report<'a>(reports: impl Iterator<Item = &'a MetricsReport>) -> MetricsReport {
    let r: Vec<&MetricsReport> = reports.collect();
    let mean = |f: fn(&MetricsReport) -> f64| r.iter().map(|x| f(x)).sum::<f64>() / r.len() as f64;
    MetricsReport {
        accuracy: mean(|x| x.accuracy),
        voc: mean(|x| x.voc),
        f_measure: mean(|x| x.f_measure),
        dice: mean(|x| x.dice),
        rand_index: mean(|x| x.rand_index),
        per_class: Vec::new(),
        threshold: None,
    }
}

pub fn gen_synthetic(a: &GenArgs) -> Result<()> {
    let mut spec = kernelseg::harness::SyntheticSpec::new(a.kind, a.size, a.seed);
    if let Some(d) = a.depth {
        spec.depth = d;
    }
    if let Some(n) = a.noise {
        spec.noise = n;
    }
    fs::create_dir_all(&a.out)?;
    let mut manifest = DatasetManifest::default();
    for (name, count, offset) in [("train", a.train, 0), ("test", a.test, a.train)] {
        let entry = if name == "train" {
            &mut manifest.train
        } else {
            &mut manifest.test
        };
        for k in 0..count {
            spec.seed = a.seed + (offset + k) as u64;
            let g = generate(&spec)?;
            let mut slices = Vec::new();
            for (z, (img, lab)) in g.images.iter().zip(&g.labels).enumerate() {
                let stem = if a.kind == SyntheticKind::AnisotropicVolume {
                    format!("{name}_{k:02}_z{z:03}")
                } else {
                    format!("{name}_{k:02}")
                };
                let image = PathBuf::from(format!("{stem}.png"));
                let labels = PathBuf::from(format!("{stem}_gt.png"));
                save_png16(&a.out.join(&image), img)?;
                let gt: Vec<u8> = lab
                    .labels()
                    .iter()
                    .map(|&l| if l == LabelMap::POSITIVE { 255 } else { 0 })
                    .collect();
                save_u8_values(&a.out.join(&labels), lab.width(), lab.height(), &gt)?;
                slices.push(ItemEntry {
                    image,
                    labels: Some(labels),
                    mask: None,
                    channels: Default::default(),
                });
            }
            if a.kind == SyntheticKind::AnisotropicVolume {
                entry.volumes.push(VolumeEntry { slices });
            } else {
                entry.items.extend(slices);
            }
        }
    }
    let path = a.out.join("data.toml");
    fs::write(&path, manifest.to_toml()?)?;
    eprintln!("manifest written to {}", path.display());
    Ok(())
}

pub fn dump_kernels(a: &DumpArgs) -> Result<()> {
    if a.zoom == 0 {
        bail!("--zoom must be at least 1");
    }
    let model = load_model(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let mut groups: Vec<(String, &BoostModel)> = Vec::new();
    match &model {
        ModelFile::Boost(m) => groups.push((String::new(), m)),
        ModelFile::Context(m) => {
            for p in &m.pipelines {
                for c in p.classifiers.iter().filter(|c| c.copied_from.is_none()) {
                    groups.push((c.map.replace(':', "_"), &c.model));
                }
            }
            if let Some(z) = &m.zcut {
                groups.push(("zcut_xz".into(), &z.xz));
                groups.push(("zcut_yz".into(), &z.yz));
            }
        }
    }
    let mut total = 0;
    for (sub, m) in groups {
        let dir = a.out.join(sub);
        fs::create_dir_all(&dir)?;
        let mut index = String::from("id,side,channel,scale,bias,file\n");
        for k in &m.kernels {
            let file = format!("kernel_{:05}.png", k.id);
            save_png_tile(&dir.join(&file), k, a.zoom)?;
            writeln!(
                index,
                "{},{},{},{},{},{file}",
                k.id, k.side, k.channel, k.scale, k.bias
            )?;
            total += 1;
        }
        fs::write(dir.join("kernels.csv"), index)?;
    }
    eprintln!("wrote {total} kernels to {}", a.out.display());
    Ok(())
}

/// Weights scaled symmetrically so zero maps to mid-gray.
fn save_png_tile(path: &Path, k: &Kernel, zoom: usize) -> Result<()> {
    let side = k.side * zoom;
    let plane = ImagePlane::from_fn(side, side, |x, y| k.weights[(y / zoom) * k.side + x / zoom])?;
    let m = k.weights.iter().fold(0.0f64, |a, w| a.max(w.abs()));
    let m = if m > 0.0 { m } else { 1.0 };
    save_png(path, &plane, -m, m)?;
    Ok(())
}
