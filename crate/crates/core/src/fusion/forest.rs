//! Random forest of Gini CART trees.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    /// Coordinates tried per split; `None` is ⌈√dim⌉.
    pub m_try: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            min_leaf: 5,
            max_depth: None,
            bootstrap: true,
            m_try: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ForestNode {
    Leaf {
        probs: Vec<f64>,
    },
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<ForestNode>,
}

impl DecisionTree {
    pub fn leaf_probs(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                ForestNode::Leaf { probs } => return probs,
                ForestNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature as usize] <= *threshold {
                        *left
                    } else {
                        *right
                    } as usize
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    /// Label value of each class index, ascending.
    pub classes: Vec<i32>,
    pub dim: usize,
    pub m_try: usize,
    pub trees: Vec<DecisionTree>,
}

impl ForestModel {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Probability per class (in `classes` order).
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: (self.dim, 1),
                found: (x.len(), 1),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.classes.len()];
        for t in &self.trees {
            for (a, p) in acc.iter_mut().zip(t.leaf_probs(x)) {
                *a += p;
            }
        }
        let s: f64 = acc.iter().sum();
        acc.iter_mut().for_each(|v| *v /= s);
        acc
    }

    /// Label with the highest probability (lowest class index on ties).
    pub fn predict_label(&self, x: &[f64]) -> Result<i32> {
        let p = self.predict(x)?;
        Ok(self.classes[argmax(&p)])
    }
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

pub fn predict_forest(model: &ForestModel, descriptor: &[f64]) -> Result<Vec<f64>> {
    model.predict(descriptor)
}

struct Builder<'a> {
    data: &'a [f64],
    dim: usize,
    y: &'a [usize],
    k: usize,
    min_leaf: usize,
    max_depth: usize,
    m_try: usize,
}

impl Builder<'_> {
    fn x(&self, i: usize, f: usize) -> f64 {
        self.data[i * self.dim + f]
    }

    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn grow(
        &self,
        idx: &mut [usize],
        depth: usize,
        rng: &mut impl Rng,
        nodes: &mut Vec<ForestNode>,
    ) -> u32 {
        let me = nodes.len();
        let counts = self.counts(idx);
        let n = idx.len();
        nodes.push(ForestNode::Leaf {
            probs: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.max_depth || n < 2 * self.min_leaf {
            return me as u32;
        }
        let gini_sum = |c: &[usize], m: usize| -> f64 {
            // m · gini = m - Σc²/m
            if m == 0 {
                return 0.0;
            }
            m as f64 - c.iter().map(|&v| (v * v) as f64).sum::<f64>() / m as f64
        };
        let parent = gini_sum(&counts, n);
        let features = index::sample(rng, self.dim, self.m_try.min(self.dim)).into_vec();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for &f in &features {
            order.sort_by(|&a, &b| self.x(a, f).total_cmp(&self.x(b, f)));
            let mut left = vec![0usize; self.k];
            for pos in 0..n - 1 {
                left[self.y[order[pos]]] += 1;
                let nl = pos + 1;
                let (a, b) = (self.x(order[pos], f), self.x(order[pos + 1], f));
                if a == b || nl < self.min_leaf || n - nl < self.min_leaf {
                    continue;
                }
                let right: Vec<usize> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let imp = gini_sum(&left, nl) + gini_sum(&right, n - nl);
                if best.is_none_or(|(b, _, _)| imp < b) {
                    let mut t = 0.5 * (a + b);
                    if t >= b {
                        t = a;
                    }
                    best = Some((imp, f, t));
                }
            }
        }
        let Some((imp, f, t)) = best else {
            return me as u32;
        };
        if !(imp < parent - 1e-12) {
            return me as u32;
        }
        let split = partition(idx, |i| self.x(i, f) <= t);
        let (l, r) = idx.split_at_mut(split);
        let left = self.grow(l, depth + 1, rng, nodes);
        let right = self.grow(r, depth + 1, rng, nodes);
        nodes[me] = ForestNode::Split {
            feature: f as u32,
            threshold: t,
            left,
            right,
        };
        me as u32
    }
}

/// Stable in-place partition; returns the size of the `true` part.
fn partition(v: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (a, b): (Vec<usize>, Vec<usize>) = v.iter().partition(|&&i| pred(i));
    let k = a.len();
    v[..k].copy_from_slice(&a);
    v[k..].copy_from_slice(&b);
    k
}

/// `data` is row-major with `dim` coordinates per descriptor.
pub fn train_forest(
    data: &[f64],
    dim: usize,
    labels: &[i32],
    cfg: &ForestConfig,
) -> Result<ForestModel> {
    if dim == 0 || data.len() != dim * labels.len() {
        return Err(Error::param(
            "descriptor matrix does not match the label count",
        ));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("descriptors must be finite"));
    }
    if cfg.n_trees == 0 || cfg.min_leaf == 0 {
        return Err(Error::param(
            "forest needs at least one tree and min_leaf >= 1",
        ));
    }
    let mut classes: Vec<i32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::param("forest training needs at least two classes"));
    }
    let y: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).unwrap())
        .collect();
    let m_try = cfg
        .m_try
        .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize)
        .clamp(1, dim);
    let b = Builder {
        data,
        dim,
        y: &y,
        k: classes.len(),
        min_leaf: cfg.min_leaf,
        max_depth: cfg.max_depth.unwrap_or(usize::MAX),
        m_try,
    };
    let n = labels.len();
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive(cfg.seed, t as u64));
            let mut idx: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut nodes = Vec::new();
            b.grow(&mut idx, 0, &mut rng, &mut nodes);
            DecisionTree { nodes }
        })
        .collect();
    Ok(ForestModel {
        classes,
        dim,
        m_try,
        trees,
    })
}
