use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::index;
use rayon::prelude::*;

use super::data::Dataset;
use super::zcut::{train_zcut, zcut_maps};
use super::{
    map_name, Architecture, Classifier, ContextConfig, ContextModel, LevelStats, Pipeline, ZCUT_XZ,
    ZCUT_YZ,
};
use crate::fusion::{train_forest, DescriptorSource};
use crate::gradboost::{predict_scores, train_kernelboost, BoostModel, TrainImage};
use crate::imagecore::{normalize_value, ChannelKind, ChannelStack, ImagePlane, LabelMap, Mask};
use crate::kernelbank::{count_eligible, SampleSource};
use crate::seed;
use crate::{Error, Result};

type Sets = Vec<Vec<bool>>;

struct Slice<'a> {
    base: &'a ChannelStack,
    labels: LabelMap,
    mask: Option<&'a Mask>,
    /// Labeled, unmasked pixels far enough from the border to be sampled.
    eligible: Vec<bool>,
}

fn interior(eligible: &[bool], (w, h): (usize, usize), margin: usize) -> Vec<bool> {
    eligible
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let (x, y) = (i % w, i / w);
            e && x >= margin && y >= margin && x + margin < w && y + margin < h
        })
        .collect()
}

/// Dense output of one classifier on every training slice.
#[derive(Clone)]
pub(super) struct MapSet {
    /// The plane pushed into later stacks (normalized unless disabled).
    pub channel: Vec<Arc<ImagePlane>>,
    pub norm: Vec<Arc<ImagePlane>>,
}

pub(super) fn channel_kind(normalize: bool) -> ChannelKind {
    if normalize {
        ChannelKind::Score
    } else {
        ChannelKind::External
    }
}

/// Applies `model` densely and returns (channel plane, normalized plane).
pub(super) fn apply(
    model: &BoostModel,
    stack: &ChannelStack,
    normalize: bool,
) -> Result<(Arc<ImagePlane>, Arc<ImagePlane>)> {
    let raw = predict_scores(model, stack)?.plane;
    let norm = Arc::new(raw.map(normalize_value));
    if normalize {
        Ok((norm.clone(), norm))
    } else {
        Ok((Arc::new(raw), norm))
    }
}

struct Run<'a> {
    cfg: &'a ContextConfig,
    class: Option<i32>,
    slices: Vec<Slice<'a>>,
}

impl Run<'_> {
    fn stack(
        &self,
        i: usize,
        chain: &[String],
        maps: &HashMap<String, MapSet>,
    ) -> Result<ChannelStack> {
        let mut s = self.slices[i].base.clone();
        for name in chain {
            s.push_shared(
                name.clone(),
                channel_kind(self.cfg.normalize),
                maps[name].channel[i].clone(),
            )?;
        }
        Ok(s)
    }

    fn sources<'s>(&'s self, sets: Option<&'s Sets>) -> Vec<SampleSource<'s>> {
        self.slices
            .iter()
            .enumerate()
            .map(|(i, s)| SampleSource {
                labels: &s.labels,
                mask: s.mask,
                restrict: sets.map(|v| v[i].as_slice()),
            })
            .collect()
    }

    /// (set size, misclassified) of normalized maps over `sets`.
    fn tally(&self, sets: Option<&Sets>, norm: &[Arc<ImagePlane>]) -> (usize, usize) {
        let mut size = 0;
        let mut wrong = 0;
        for (i, s) in self.slices.iter().enumerate() {
            let labels = s.labels.labels();
            for (p, &e) in s.eligible.iter().enumerate() {
                if !e || sets.is_some_and(|v| !v[i][p]) {
                    continue;
                }
                size += 1;
                if (norm[i].data()[p] > 0.0) != (labels[p] == LabelMap::POSITIVE) {
                    wrong += 1;
                }
            }
        }
        (size, wrong)
    }

    /// Eligible pixels of `within` (all eligible when `None`) whose
    /// normalized score satisfies `keep`.
    fn band(
        &self,
        norm: &[Arc<ImagePlane>],
        within: Option<&Sets>,
        keep: impl Fn(f64) -> bool,
    ) -> Sets {
        self.slices
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.eligible
                    .iter()
                    .enumerate()
                    .map(|(p, &e)| e && within.is_none_or(|w| w[i][p]) && keep(norm[i].data()[p]))
                    .collect()
            })
            .collect()
    }

    /// Trains one classifier on `sets` (all eligible pixels when `None`).
    /// Returns `None` when a restricted set has too few samples of a class.
    fn train(
        &self,
        path: &str,
        level: usize,
        chain: &[String],
        sets: Option<&Sets>,
        maps: &HashMap<String, MapSet>,
    ) -> Result<Option<(Classifier, MapSet)>> {
        let base = &self.cfg.base;
        let (pos, neg) = count_eligible(&self.sources(sets), base.margin())?;
        match sets {
            Some(_)
                if pos < self.cfg.split.min_samples.max(1)
                    || neg < self.cfg.split.min_samples.max(1) =>
            {
                return Ok(None)
            }
            None if pos == 0 || neg == 0 => {
                return Err(Error::SampleShortfall {
                    class: if pos == 0 { "positive" } else { "negative" },
                    needed: 1,
                    available: 0,
                })
            }
            _ => {}
        }
        let map = map_name(self.class, path);
        let mut tc = base.clone();
        tc.seed = seed::derive_str(self.cfg.seed, &map);
        tc.n_pos = tc.n_pos.min(pos);
        tc.n_neg = tc.n_neg.min(neg);
        let stacks = (0..self.slices.len())
            .map(|i| self.stack(i, chain, maps))
            .collect::<Result<Vec<_>>>()?;
        let images: Vec<TrainImage<'_>> = stacks
            .iter()
            .zip(&self.slices)
            .enumerate()
            .map(|(i, (st, s))| TrainImage {
                stack: st,
                labels: &s.labels,
                mask: s.mask,
                restrict: sets.map(|v| v[i].as_slice()),
            })
            .collect();
        let model = train_kernelboost(&images, &tc)?;
        let outs = stacks
            .par_iter()
            .map(|st| apply(&model, st, self.cfg.normalize))
            .collect::<Result<Vec<_>>>()?;
        let (channel, norm): (Vec<_>, Vec<_>) = outs.into_iter().unzip();
        let (set_size, misclassified) = self.tally(sets, &norm);
        Ok(Some((
            Classifier {
                path: path.to_string(),
                level,
                map,
                inputs: chain.to_vec(),
                model,
                copied_from: None,
                set_size,
                misclassified,
            },
            MapSet { channel, norm },
        )))
    }

    /// A branch that reuses `source` because its own set was too small.
    fn copy(
        &self,
        source: &Classifier,
        path: &str,
        level: usize,
        sets: &Sets,
        maps: &HashMap<String, MapSet>,
    ) -> (Classifier, MapSet) {
        let m = maps[&source.map].clone();
        let (set_size, misclassified) = self.tally(Some(sets), &m.norm);
        (
            Classifier {
                path: path.to_string(),
                level,
                map: map_name(self.class, path),
                inputs: source.inputs.clone(),
                model: source.model.clone(),
                copied_from: Some(source.path.clone()),
                set_size,
                misclassified,
            },
            m,
        )
    }

    fn above_threshold(&self, c: &Classifier) -> bool {
        c.misclassified as f64 > self.cfg.split.min_misclassified_fraction * c.set_size as f64
    }

    fn root(&self, maps: &mut HashMap<String, MapSet>) -> Result<Classifier> {
        let (c, m) = self
            .train("0", 0, &[], None, maps)?
            .expect("unrestricted training never falls short");
        maps.insert(c.map.clone(), m);
        Ok(c)
    }

    fn knotted(&self, maps: &mut HashMap<String, MapSet>) -> Result<Pipeline> {
        let eps = self.cfg.split.epsilon;
        let root = self.root(maps)?;
        let mut levels = vec![LevelStats {
            level: 0,
            pixels: root.set_size,
            misclassified: root.misclassified,
        }];
        let norm0 = &maps[&root.map].norm;
        let mut sets = [
            self.band(norm0, None, |v| v > -eps),
            self.band(norm0, None, |v| v < eps),
        ];
        let mut chains = [vec![root.map.clone()], vec![root.map.clone()]];
        let mut go_on = self.above_threshold(&root);
        let mut classifiers = vec![root];
        let mut prev = [0usize, 0usize];

        for level in 1..=self.cfg.split.max_levels {
            if !go_on {
                break;
            }
            let paths = ["P".repeat(level), "N".repeat(level)];
            let (rp, rn) = rayon::join(
                || self.train(&paths[0], level, &chains[0], Some(&sets[0]), maps),
                || self.train(&paths[1], level, &chains[1], Some(&sets[1]), maps),
            );
            let mut branch = Vec::with_capacity(2);
            for (b, r) in [rp, rn].into_iter().enumerate() {
                branch.push(match r? {
                    Some(x) => x,
                    None => self.copy(&classifiers[prev[b]], &paths[b], level, &sets[b], maps),
                });
            }
            let (np, nn) = (&branch[0].1.norm, &branch[1].1.norm);
            let mut wrong = 0;
            let mut pixels = 0;
            for (i, s) in self.slices.iter().enumerate() {
                let labels = s.labels.labels();
                for (p, &e) in s.eligible.iter().enumerate() {
                    if !e {
                        continue;
                    }
                    let score = match (sets[0][i][p], sets[1][i][p]) {
                        (true, true) => np[i].data()[p] + nn[i].data()[p],
                        (true, false) => np[i].data()[p],
                        _ => nn[i].data()[p],
                    };
                    pixels += 1;
                    if (score > 0.0) != (labels[p] == LabelMap::POSITIVE) {
                        wrong += 1;
                    }
                }
            }
            levels.push(LevelStats {
                level,
                pixels,
                misclassified: wrong,
            });
            // a pixel joins P (N) if any branch that processed it puts it there
            let pp = self.band(np, Some(&sets[0]), |v| v > -eps);
            let np_ = self.band(nn, Some(&sets[1]), |v| v > -eps);
            let pn = self.band(np, Some(&sets[0]), |v| v < eps);
            let nn_ = self.band(nn, Some(&sets[1]), |v| v < eps);
            sets = [union(pp, &np_), union(pn, &nn_)];
            go_on = branch.iter().all(|(c, _)| self.above_threshold(c));
            for (b, (c, m)) in branch.into_iter().enumerate() {
                chains[b].push(c.map.clone());
                maps.insert(c.map.clone(), m);
                prev[b] = classifiers.len();
                classifiers.push(c);
            }
        }
        Ok(Pipeline {
            class: self.class,
            classifiers,
            levels,
        })
    }

    fn expanded(&self, maps: &mut HashMap<String, MapSet>) -> Result<Pipeline> {
        let eps = self.cfg.split.epsilon;
        let root = self.root(maps)?;
        let mut levels = vec![LevelStats {
            level: 0,
            pixels: root.set_size,
            misclassified: root.misclassified,
        }];
        let all: Sets = self.slices.iter().map(|s| s.eligible.clone()).collect();
        // (branch letters, map, set, chain)
        let mut frontier = vec![(String::new(), root.map.clone(), all, vec![root.map.clone()])];
        let mut classifiers = vec![root];
        for level in 1..=self.cfg.split.max_levels {
            let mut jobs = Vec::new();
            for (letters, map, set, chain) in &frontier {
                let norm = &maps[map].norm;
                jobs.push((
                    format!("{letters}P"),
                    self.band(norm, Some(set), |v| v > -eps),
                    chain.clone(),
                ));
                jobs.push((
                    format!("{letters}N"),
                    self.band(norm, Some(set), |v| v < eps),
                    chain.clone(),
                ));
            }
            let results = jobs
                .par_iter()
                .map(|(path, set, chain)| self.train(path, level, chain, Some(set), maps))
                .collect::<Result<Vec<_>>>()?;
            let mut next = Vec::new();
            let mut stats = LevelStats {
                level,
                pixels: 0,
                misclassified: 0,
            };
            for ((path, set, mut chain), r) in jobs.into_iter().zip(results) {
                if let Some((c, m)) = r {
                    stats.pixels += c.set_size;
                    stats.misclassified += c.misclassified;
                    chain.push(c.map.clone());
                    maps.insert(c.map.clone(), m);
                    next.push((path, c.map.clone(), set, chain));
                    classifiers.push(c);
                }
            }
            if next.is_empty() {
                break;
            }
            levels.push(stats);
            frontier = next;
        }
        Ok(Pipeline {
            class: self.class,
            classifiers,
            levels,
        })
    }

    fn autocontext(&self, maps: &mut HashMap<String, MapSet>) -> Result<Pipeline> {
        let root = self.root(maps)?;
        let mut levels = vec![LevelStats {
            level: 0,
            pixels: root.set_size,
            misclassified: root.misclassified,
        }];
        let mut chain = vec![root.map.clone()];
        let mut classifiers = vec![root];
        for stage in 1..self.cfg.stages {
            let (c, m) = self
                .train(&format!("A{stage}"), stage, &chain, None, maps)?
                .expect("unrestricted training never falls short");
            levels.push(LevelStats {
                level: stage,
                pixels: c.set_size,
                misclassified: c.misclassified,
            });
            chain.push(c.map.clone());
            maps.insert(c.map.clone(), m);
            classifiers.push(c);
        }
        Ok(Pipeline {
            class: self.class,
            classifiers,
            levels,
        })
    }
}

fn union(mut a: Sets, b: &Sets) -> Sets {
    for (x, y) in a.iter_mut().zip(b) {
        for (p, &q) in x.iter_mut().zip(y) {
            *p |= q;
        }
    }
    a
}

/// Trains the configured cascade for every class, then the fusion forest.
pub fn train_context(data: &Dataset, cfg: &ContextConfig) -> Result<ContextModel> {
    cfg.validate()?;
    let slices: Vec<_> = data.slices().collect();
    let first = slices
        .first()
        .ok_or_else(|| Error::param("empty training set"))?;
    let eligible = slices
        .iter()
        .map(|s| s.eligible())
        .collect::<Result<Vec<_>>>()?;
    let image_channels: Vec<String> = first
        .stack
        .channels()
        .iter()
        .filter(|c| c.kind == ChannelKind::Image)
        .map(|c| c.name.clone())
        .collect();
    if image_channels.is_empty() {
        return Err(Error::param("fusion needs at least one image channel"));
    }
    let classes = data.classes();
    if classes.len() < 2 {
        return Err(Error::Degenerate(
            "training labels contain a single class".into(),
        ));
    }
    let binary = classes == [LabelMap::NEGATIVE, LabelMap::POSITIVE];
    let targets: Vec<Option<i32>> = if binary {
        vec![None]
    } else {
        classes.iter().map(|&c| Some(c)).collect()
    };

    let mut pipelines = Vec::new();
    let mut maps = HashMap::new();
    for class in targets {
        let run = Run {
            cfg,
            class,
            slices: slices
                .iter()
                .zip(&eligible)
                .map(|(s, e)| Slice {
                    base: &s.stack,
                    labels: class.map_or_else(|| s.labels.clone(), |c| s.labels.one_vs_all(c)),
                    mask: s.mask.as_ref(),
                    eligible: interior(e, s.stack.dims(), cfg.base.margin()),
                })
                .collect(),
        };
        pipelines.push(match cfg.architecture {
            Architecture::Knotted => run.knotted(&mut maps)?,
            Architecture::Expanded => run.expanded(&mut maps)?,
            Architecture::AutoContext => run.autocontext(&mut maps)?,
        });
    }

    let mut fusion_channels = image_channels.clone();
    fusion_channels.extend(pipelines.iter().flat_map(|p| p.maps().map(String::from)));

    let zcut = if cfg.zcut {
        let z = train_zcut(data, &cfg.base, seed::derive_str(cfg.seed, "zcut"))?;
        let mut xz = Vec::new();
        let mut yz = Vec::new();
        for vol in &data.volumes {
            let stacks: Vec<ChannelStack> = vol.iter().map(|s| s.stack.clone()).collect();
            let [a, b] = zcut_maps(&stacks, &z)?;
            xz.extend(a.into_slices().into_iter().map(Arc::new));
            yz.extend(b.into_slices().into_iter().map(Arc::new));
        }
        for (name, planes) in [(ZCUT_XZ, xz), (ZCUT_YZ, yz)] {
            maps.insert(
                name.to_string(),
                MapSet {
                    channel: planes.clone(),
                    norm: planes,
                },
            );
            fusion_channels.push(name.to_string());
        }
        Some(z)
    } else {
        None
    };

    let forest = train_fusion(data, &eligible, &fusion_channels, &maps, cfg)?;
    Ok(ContextModel {
        config: cfg.clone(),
        classes,
        pipelines,
        zcut,
        fusion_channels,
        forest,
    })
}

fn train_fusion(
    data: &Dataset,
    eligible: &[Vec<bool>],
    channels: &[String],
    maps: &HashMap<String, MapSet>,
    cfg: &ContextConfig,
) -> Result<crate::fusion::ForestModel> {
    // (volume, slice, flat slice index, pixel) per class
    let classes = data.classes();
    let mut by_class: Vec<Vec<(usize, usize, usize, usize)>> = vec![Vec::new(); classes.len()];
    let mut flat = 0;
    for (v, vol) in data.volumes.iter().enumerate() {
        for (z, s) in vol.iter().enumerate() {
            for (p, &e) in eligible[flat].iter().enumerate() {
                if e {
                    let c = classes.binary_search(&s.labels.labels()[p]).unwrap();
                    by_class[c].push((v, z, flat, p));
                }
            }
            flat += 1;
        }
    }
    let mut rng = seed::rng(seed::derive_str(cfg.seed, "fusion"));
    let mut picked = Vec::new();
    for pool in &by_class {
        let n = pool.len().min(cfg.fusion.max_per_class);
        let mut idx = index::sample(&mut rng, pool.len(), n).into_vec();
        idx.sort_unstable();
        picked.extend(idx.into_iter().map(|i| pool[i]));
    }

    let mut flat_of = Vec::new();
    let mut start = 0;
    for vol in &data.volumes {
        flat_of.push(start);
        start += vol.len();
    }
    let sources = data
        .volumes
        .iter()
        .zip(&flat_of)
        .map(|(vol, &f0)| {
            let planes = vol
                .iter()
                .enumerate()
                .map(|(z, s)| fusion_planes(&s.stack, channels, maps, f0 + z))
                .collect::<Result<Vec<_>>>()?;
            DescriptorSource::new(planes, &cfg.fusion.snowflake, cfg.fusion.fake3d)
        })
        .collect::<Result<Vec<_>>>()?;
    let dim = sources[0].len();
    let mut rows = Vec::with_capacity(picked.len() * dim);
    let mut labels = Vec::with_capacity(picked.len());
    for &(v, z, f, p) in &picked {
        let w = sources[v].dims().0;
        sources[v].describe_into(p % w, p / w, z, &mut rows);
        labels.push(data.volumes[v][z].labels.labels()[p]);
        debug_assert!(eligible[f][p]);
    }
    let mut forest = cfg.fusion.forest.clone();
    forest.seed = seed::derive(seed::derive_str(cfg.seed, "forest"), cfg.fusion.forest.seed);
    train_forest(&rows, dim, &labels, &forest)
}

fn fusion_planes<'a>(
    stack: &'a ChannelStack,
    channels: &[String],
    maps: &'a HashMap<String, MapSet>,
    slice: usize,
) -> Result<Vec<&'a ImagePlane>> {
    channels
        .iter()
        .map(|c| match maps.get(c) {
            Some(m) => Ok(m.channel[slice].as_ref()),
            None => stack.require(c).map(|p| p.as_ref()),
        })
        .collect()
}
