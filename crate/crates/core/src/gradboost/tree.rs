//! Regression trees over precomputed candidate feature columns.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::newton_leaf;
use crate::pooling::PoolSpec;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Part {
    Raw,
    Pos,
    Neg,
}

/// A dense feature: kernel response, optionally split by POSNEG, then pooled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureKey {
    pub kernel: u32,
    pub part: Part,
    pub pool: PoolSpec,
}

/// Samples with feature value `<= threshold` go left.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeTest {
    pub key: FeatureKey,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        test: NodeTest,
        left: u32,
        right: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    /// Root at index 0.
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf { value }],
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn eval(&self, mut feature: impl FnMut(&FeatureKey) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { test, left, right } => {
                    i = if feature(&test.key) <= test.threshold {
                        *left
                    } else {
                        *right
                    } as usize;
                }
            }
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &FeatureKey> {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Split { test, .. } => Some(&test.key),
            TreeNode::Leaf { .. } => None,
        })
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + go(nodes, *left as usize).max(go(nodes, *right as usize))
                }
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    /// Quantile thresholds tried per candidate test.
    pub thresholds: usize,
}

/// `Q` thresholds at the `j/(Q+1)` quantiles of ascending `sorted`,
/// deduplicated.
pub fn quantile_thresholds(sorted: &[f64], q: usize) -> Vec<f64> {
    let n = sorted.len();
    let mut out: Vec<f64> = (1..=q)
        .map(|j| {
            let idx = (j * n).div_ceil(q + 1).max(1) - 1;
            sorted[idx.min(n - 1)]
        })
        .collect();
    out.dedup();
    out
}

/// Best threshold for one column over `subset`: maximal reduction of the
/// residual sum of squares. Returns `(gain, threshold)`.
fn best_split(column: &[f64], residuals: &[f64], subset: &[usize], q: usize) -> Option<(f64, f64)> {
    let mut vals: Vec<(f64, f64)> = subset.iter().map(|&i| (column[i], residuals[i])).collect();
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = vals.len();
    let sorted: Vec<f64> = vals.iter().map(|v| v.0).collect();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in &vals {
        prefix.push(prefix.last().unwrap() + v.1);
    }
    let total = prefix[n];
    let base = total * total / n as f64;
    let mut best: Option<(f64, f64)> = None;
    for tau in quantile_thresholds(&sorted, q) {
        let nl = sorted.partition_point(|&v| v <= tau);
        if nl == 0 || nl == n {
            continue;
        }
        let sl = prefix[nl];
        let sr = total - sl;
        let gain = sl * sl / nl as f64 + sr * sr / (n - nl) as f64 - base;
        if best.is_none_or(|(g, _)| gain > g) {
            best = Some((gain, tau));
        }
    }
    best
}

/// Greedy depth-first induction. `columns[c][i]` is candidate `c`'s value on
/// sample `i`. Returns the tree and each sample's leaf value.
pub fn fit_tree(
    columns: &[Vec<f64>],
    keys: &[FeatureKey],
    residuals: &[f64],
    cfg: TreeConfig,
) -> Result<(RegressionTree, Vec<f64>)> {
    let n = residuals.len();
    if n < 2 {
        return Err(Error::param("a regression tree needs at least two samples"));
    }
    if columns.len() != keys.len() || columns.iter().any(|c| c.len() != n) {
        return Err(Error::param("feature columns are not aligned with samples"));
    }
    if cfg.thresholds == 0 {
        return Err(Error::param("at least one threshold per test is required"));
    }
    let mut tree = RegressionTree { nodes: Vec::new() };
    let mut outputs = vec![0.0; n];
    let all: Vec<usize> = (0..n).collect();
    grow(
        columns,
        keys,
        residuals,
        cfg,
        &all,
        cfg.max_depth,
        &mut tree,
        &mut outputs,
    );
    Ok((tree, outputs))
}

#[allow(clippy::too_many_arguments)]
fn grow(
    columns: &[Vec<f64>],
    keys: &[FeatureKey],
    residuals: &[f64],
    cfg: TreeConfig,
    subset: &[usize],
    depth_left: usize,
    tree: &mut RegressionTree,
    outputs: &mut [f64],
) -> u32 {
    let me = tree.nodes.len();
    tree.nodes.push(TreeNode::Leaf { value: 0.0 });
    let make_leaf = |tree: &mut RegressionTree, outputs: &mut [f64]| {
        let value = newton_leaf(subset.iter().map(|&i| residuals[i]));
        tree.nodes[me] = TreeNode::Leaf { value };
        for &i in subset {
            outputs[i] = value;
        }
        me as u32
    };
    if depth_left == 0 || subset.len() < 2 {
        return make_leaf(tree, outputs);
    }
    let splits: Vec<Option<(f64, f64)>> = columns
        .par_iter()
        .map(|c| best_split(c, residuals, subset, cfg.thresholds))
        .collect();
    let mut best: Option<(usize, f64, f64)> = None;
    for (c, s) in splits.into_iter().enumerate() {
        if let Some((gain, tau)) = s {
            if best.is_none_or(|(_, g, _)| gain > g) {
                best = Some((c, gain, tau));
            }
        }
    }
    let sumsq: f64 = subset.iter().map(|&i| residuals[i] * residuals[i]).sum();
    let Some((c, _, tau)) = best.filter(|&(_, g, _)| g > 1e-10 * sumsq) else {
        return make_leaf(tree, outputs);
    };
    let (l, r): (Vec<usize>, Vec<usize>) = subset.iter().partition(|&&i| columns[c][i] <= tau);
    let left = grow(
        columns,
        keys,
        residuals,
        cfg,
        &l,
        depth_left - 1,
        tree,
        outputs,
    );
    let right = grow(
        columns,
        keys,
        residuals,
        cfg,
        &r,
        depth_left - 1,
        tree,
        outputs,
    );
    tree.nodes[me] = TreeNode::Split {
        test: NodeTest {
            key: keys[c],
            threshold: tau,
        },
        left,
        right,
    };
    me as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn key(k: u32) -> FeatureKey {
        FeatureKey {
            kernel: k,
            part: Part::Raw,
            pool: PoolSpec::None,
        }
    }

    const STUMP: TreeConfig = TreeConfig {
        max_depth: 1,
        thresholds: 8,
    };

    #[test]
    fn two_sample_stump() {
        let (t, out) = fit_tree(&[vec![0.3, 0.9]], &[key(0)], &[1.0, -1.0], STUMP).unwrap();
        assert_eq!(t.depth(), 1);
        assert_eq!(out, vec![1.0, -1.0]);
        let TreeNode::Split { test, .. } = &t.nodes[0] else {
            panic!()
        };
        assert_eq!(test.threshold, 0.3);
    }

    #[test]
    fn equal_residuals_give_a_single_leaf() {
        let cols = vec![vec![1.0, 2.0, 3.0, 4.0], vec![4.0, 1.0, 3.0, 2.0]];
        let (t, _) = fit_tree(&cols, &[key(0), key(1)], &[0.5; 4], STUMP).unwrap();
        assert!(t.is_leaf());
        let (t, _) = fit_tree(&[vec![2.0; 4]], &[key(0)], &[1.0, -1.0, 1.0, -1.0], STUMP).unwrap();
        assert!(t.is_leaf(), "constant responses cannot split");
    }

    #[test]
    fn quantiles() {
        let s: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(quantile_thresholds(&s, 1), vec![4.0]);
        assert_eq!(quantile_thresholds(&s, 4), vec![1.0, 3.0, 5.0, 7.0]);
        assert_eq!(quantile_thresholds(&[5.0], 3), vec![5.0]);
    }

    /// Exhaustive scan over every (candidate, threshold) pair with the SSE
    /// computed from scratch for each partition.
    pub(crate) fn oracle_stump(cols: &[Vec<f64>], r: &[f64], q: usize) -> Option<(usize, f64)> {
        let sse = |idx: &[usize]| {
            if idx.is_empty() {
                return 0.0;
            }
            let m = idx.iter().map(|&i| r[i]).sum::<f64>() / idx.len() as f64;
            idx.iter().map(|&i| (r[i] - m).powi(2)).sum::<f64>()
        };
        let all: Vec<usize> = (0..r.len()).collect();
        let parent = sse(&all);
        let mut best: Option<(usize, f64, f64)> = None;
        for (c, col) in cols.iter().enumerate() {
            let mut sorted = col.clone();
            sorted.sort_by(f64::total_cmp);
            for tau in quantile_thresholds(&sorted, q) {
                let (l, rr): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| col[i] <= tau);
                if l.is_empty() || rr.is_empty() {
                    continue;
                }
                let s = sse(&l) + sse(&rr);
                if best.is_none_or(|(_, _, b)| s < b) {
                    best = Some((c, tau, s));
                }
            }
        }
        best.filter(|b| parent - b.2 > 1e-10 * r.iter().map(|v| v * v).sum::<f64>())
            .map(|(c, t, _)| (c, t))
    }

    #[test]
    fn stump_matches_exhaustive_oracle() {
        let mut rng = crate::seed::rng(31);
        for _ in 0..200 {
            let n = rng.gen_range(2..=64);
            let m = rng.gen_range(1..=8);
            let cols: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let keys: Vec<FeatureKey> = (0..m as u32).map(key).collect();
            let (t, _) = fit_tree(&cols, &keys, &r, STUMP).unwrap();
            let got = match &t.nodes[0] {
                TreeNode::Split { test, .. } => Some((test.key.kernel as usize, test.threshold)),
                TreeNode::Leaf { .. } => None,
            };
            assert_eq!(got, oracle_stump(&cols, &r, 8));
        }
    }

    #[test]
    fn outputs_match_evaluation_and_depth_is_bounded() {
        let mut rng = crate::seed::rng(4);
        let n = 200;
        let cols: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..n).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let r: Vec<f64> = (0..n)
            .map(|i| if cols[2][i] > 0.4 { 1.0 } else { -0.7 })
            .collect();
        let keys: Vec<FeatureKey> = (0..5).map(key).collect();
        let cfg = TreeConfig {
            max_depth: 3,
            thresholds: 10,
        };
        let (t, out) = fit_tree(&cols, &keys, &r, cfg).unwrap();
        assert!(t.depth() <= 3);
        for i in 0..n {
            assert_eq!(t.eval(|k| cols[k.kernel as usize][i]), out[i]);
            let v = out[i];
            assert!(v.is_finite() && v.abs() <= super::super::loss::LEAF_CAP);
        }
    }
}
