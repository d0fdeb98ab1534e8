//! k-means over positive patches (Lloyd iterations, k-means++ seeding).

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sampling::Patch;
use crate::seed;
use crate::{Error, Result};

const MAX_ITERS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub k: usize,
    /// The k that was asked for; larger than `k` when there were fewer patches.
    pub requested_k: usize,
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after every assignment and update step.
    pub objective_history: Vec<f64>,
}

impl ClusterSet {
    /// Every patch in one cluster.
    pub fn single(n: usize) -> Self {
        Self {
            k: 1,
            requested_k: 1,
            assignment: vec![0; n],
            centroids: Vec::new(),
            objective_history: Vec::new(),
        }
    }

    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c == cluster)
            .map(|(i, _)| i)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &a in &self.assignment {
            s[a] += 1;
        }
        s
    }
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn objective(points: &[&[f64]], assignment: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &a)| dist2(p, &centroids[a]))
        .sum()
}

fn update_centroids(
    points: &[&[f64]],
    assignment: &[usize],
    k: usize,
    dim: usize,
) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignment) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p.iter()) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

/// Moves the point of the largest cluster farthest from its centroid into
/// each empty cluster. Never increases the objective.
fn repair_empty(points: &[&[f64]], assignment: &mut [usize], centroids: &mut [Vec<f64>]) {
    let k = centroids.len();
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignment.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let largest = (0..k)
            .max_by_key(|&c| (counts[c], std::cmp::Reverse(c)))
            .unwrap();
        let far = (0..points.len())
            .filter(|&i| assignment[i] == largest)
            .max_by(|&i, &j| {
                dist2(points[i], &centroids[largest])
                    .total_cmp(&dist2(points[j], &centroids[largest]))
                    .then(j.cmp(&i))
            })
            .unwrap();
        assignment[far] = empty;
        centroids[empty] = points[far].to_vec();
        let members: Vec<&[f64]> = (0..points.len())
            .filter(|&i| assignment[i] == largest)
            .map(|i| points[i])
            .collect();
        let dim = points[far].len();
        let mut c = vec![0.0; dim];
        for m in &members {
            for (s, v) in c.iter_mut().zip(m.iter()) {
                *s += v;
            }
        }
        c.iter_mut().for_each(|v| *v /= members.len() as f64);
        centroids[largest] = c;
    }
}

fn assign(points: &[&[f64]], centroids: &[Vec<f64>]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for (c, cen) in centroids.iter().enumerate() {
                let d = dist2(p, cen);
                if d < bd {
                    bd = d;
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn plus_plus_init(points: &[&[f64]], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, points[first])).collect();
    while centroids.len() < k {
        let total: f64 = (0..n).filter(|&i| !chosen[i]).map(|i| d2[i]).sum();
        let pick = if total > 0.0 {
            let mut t = rng.gen::<f64>() * total;
            let mut pick = None;
            for i in (0..n).filter(|&i| !chosen[i]) {
                t -= d2[i];
                if t <= 0.0 && d2[i] > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| (0..n).rev().find(|&i| !chosen[i] && d2[i] > 0.0).unwrap())
        } else {
            // only duplicates left: pick uniformly among unchosen points
            let rest: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            rest[rng.gen_range(0..rest.len())]
        };
        chosen[pick] = true;
        centroids.push(points[pick].to_vec());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, points[pick]));
        }
    }
    centroids
}

/// Clusters raw patch vectors into `k` groups. `k` is lowered to the number
/// of patches when there are fewer (see `requested_k`).
pub fn cluster_positives(patches: &[Patch], k: usize, rng_seed: u64) -> Result<ClusterSet> {
    let first = patches
        .first()
        .ok_or_else(|| Error::param("cannot cluster an empty patch set"))?;
    if k == 0 {
        return Err(Error::param("cluster count must be at least 1"));
    }
    if patches
        .iter()
        .any(|p| p.side != first.side || p.channel != first.channel)
    {
        return Err(Error::param(
            "patches to cluster must share side and channel",
        ));
    }
    let points: Vec<&[f64]> = patches.iter().map(|p| p.values.as_slice()).collect();
    let requested_k = k;
    let k = k.min(points.len());
    let dim = first.values.len();
    let mut rng = seed::rng(rng_seed);

    let mut centroids = plus_plus_init(&points, k, &mut rng);
    let mut assignment = assign(&points, &centroids);
    repair_empty(&points, &mut assignment, &mut centroids);
    let mut history = vec![objective(&points, &assignment, &centroids)];
    for _ in 0..MAX_ITERS {
        centroids = update_centroids(&points, &assignment, k, dim);
        history.push(objective(&points, &assignment, &centroids));
        let mut next = assign(&points, &centroids);
        repair_empty(&points, &mut next, &mut centroids);
        let changed = next != assignment;
        assignment = next;
        history.push(objective(&points, &assignment, &centroids));
        if !changed {
            break;
        }
    }
    Ok(ClusterSet {
        k,
        requested_k,
        assignment,
        centroids,
        objective_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn patch(values: Vec<f64>) -> Patch {
        let side = (values.len() as f64).sqrt() as usize;
        Patch {
            side,
            values,
            channel: "image".into(),
        }
    }

    #[test]
    fn single_cluster_centroid_is_the_mean() {
        let ps: Vec<Patch> = (0..7)
            .map(|i| patch(vec![i as f64, 2.0 * i as f64, 1.0, -(i as f64)]))
            .collect();
        let c = cluster_positives(&ps, 1, 4).unwrap();
        let want = [3.0, 6.0, 1.0, -3.0];
        for (a, b) in c.centroids[0].iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn separates_two_groups_like_the_best_partition() {
        let mut ps = Vec::new();
        for i in 0..6 {
            ps.push(patch(vec![0.0 + 0.01 * i as f64; 9]));
            ps.push(patch(vec![1.0 - 0.01 * i as f64; 9]));
        }
        let c = cluster_positives(&ps, 2, 11).unwrap();
        // oracle: brute force over all 2-partitions of 12 points
        let pts: Vec<&[f64]> = ps.iter().map(|p| p.values.as_slice()).collect();
        let mut best = f64::INFINITY;
        let mut best_mask = 0u32;
        for mask in 1u32..(1 << 12) - 1 {
            let a: Vec<usize> = (0..12).map(|i| ((mask >> i) & 1) as usize).collect();
            let cen = update_centroids(&pts, &a, 2, 9);
            let o = objective(&pts, &a, &cen);
            if o < best {
                best = o;
                best_mask = mask;
            }
        }
        for i in 0..12 {
            for j in 0..12 {
                let same_oracle = ((best_mask >> i) & 1) == ((best_mask >> j) & 1);
                assert_eq!(c.assignment[i] == c.assignment[j], same_oracle);
            }
        }
    }

    #[test]
    fn k_equal_to_count_gives_singletons() {
        let ps: Vec<Patch> = (0..5)
            .map(|i| patch(vec![i as f64, (i * i) as f64, 0.0, 1.0]))
            .collect();
        let c = cluster_positives(&ps, 5, 2).unwrap();
        assert_eq!(c.sizes(), vec![1; 5]);
        assert_eq!(*c.objective_history.last().unwrap(), 0.0);
    }

    #[test]
    fn k_is_lowered_when_patches_are_few() {
        let ps: Vec<Patch> = (0..3).map(|i| patch(vec![i as f64; 4])).collect();
        let c = cluster_positives(&ps, 8, 2).unwrap();
        assert_eq!((c.k, c.requested_k), (3, 8));
    }

    #[test]
    fn duplicates_still_fill_every_cluster() {
        let ps: Vec<Patch> = (0..6).map(|_| patch(vec![0.5; 4])).collect();
        let c = cluster_positives(&ps, 3, 2).unwrap();
        assert!(c.sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn rejects_mixed_patches() {
        let a = patch(vec![0.0; 9]);
        let b = patch(vec![0.0; 25]);
        assert!(cluster_positives(&[a, b], 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn lloyd_objective_never_increases(
            seed in 0u64..1000,
            k in 1usize..6,
            pts in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 4), 6..40),
        ) {
            let ps: Vec<Patch> = pts.into_iter().map(patch).collect();
            let c = cluster_positives(&ps, k, seed).unwrap();
            for w in c.objective_history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()));
            }
            prop_assert!(c.sizes().iter().all(|&s| s > 0));
            let again = cluster_positives(&ps, k, seed).unwrap();
            prop_assert_eq!(c, again);
        }
    }
}
