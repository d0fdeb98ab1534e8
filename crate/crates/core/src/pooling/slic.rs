//! SLIC superpixels on a single intensity channel.

use serde::{Deserialize, Serialize};

use crate::imagecore::ImagePlane;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlicParams {
    /// Grid interval S in pixels.
    pub region_size: usize,
    pub compactness: f64,
    pub iterations: usize,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            region_size: 10,
            compactness: 0.1,
            iterations: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperpixelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    count: usize,
    pub params: SlicParams,
}

impl SuperpixelMap {
    /// Builds a map from explicit labels, relabelling to `0..K` in scan order.
    pub fn from_labels(
        width: usize,
        height: usize,
        labels: &[u32],
        params: SlicParams,
    ) -> Result<Self> {
        if labels.len() != width * height || labels.is_empty() {
            return Err(Error::InvalidDimensions { width, height });
        }
        let (labels, count) = compact(labels);
        Ok(Self {
            width,
            height,
            labels,
            count,
            params,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }
}

fn compact(labels: &[u32]) -> (Vec<u32>, usize) {
    let mut map = std::collections::HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let n = map.len() as u32;
            *map.entry(*l).or_insert(n)
        })
        .collect();
    (out, map.len())
}

fn gradient(img: &ImagePlane, x: usize, y: usize) -> f64 {
    let (x, y) = (x as isize, y as isize);
    let gx = img.get_clamped(x + 1, y) - img.get_clamped(x - 1, y);
    let gy = img.get_clamped(x, y + 1) - img.get_clamped(x, y - 1);
    gx * gx + gy * gy
}

#[derive(Clone, Copy)]
struct Center {
    i: f64,
    x: f64,
    y: f64,
}

pub fn slic(image: &ImagePlane, params: SlicParams) -> Result<SuperpixelMap> {
    let s = params.region_size;
    if s < 2 {
        return Err(Error::param("SLIC region size must be at least 2"));
    }
    if !(params.compactness > 0.0) {
        return Err(Error::param("SLIC compactness must be positive"));
    }
    let (w, h) = image.dims();
    if w < s || h < s {
        return SuperpixelMap::from_labels(w, h, &vec![0; w * h], params);
    }

    let nx = ((w as f64 / s as f64).round() as usize).max(1);
    let ny = ((h as f64 / s as f64).round() as usize).max(1);
    let mut centers = Vec::with_capacity(nx * ny);
    for gy in 0..ny {
        for gx in 0..nx {
            let cx = ((gx as f64 + 0.5) * w as f64 / nx as f64) as usize;
            let cy = ((gy as f64 + 0.5) * h as f64 / ny as f64) as usize;
            let (mut bx, mut by) = (cx.min(w - 1), cy.min(h - 1));
            let mut best = gradient(image, bx, by);
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (px, py) = (cx as isize + dx, cy as isize + dy);
                    if px < 0 || py < 0 || px >= w as isize || py >= h as isize {
                        continue;
                    }
                    let g = gradient(image, px as usize, py as usize);
                    if g < best {
                        best = g;
                        bx = px as usize;
                        by = py as usize;
                    }
                }
            }
            centers.push(Center {
                i: image.get(bx, by),
                x: bx as f64,
                y: by as f64,
            });
        }
    }

    let spatial = (params.compactness / s as f64).powi(2);
    let mut labels = vec![u32::MAX; w * h];
    let mut dist = vec![f64::INFINITY; w * h];
    for _ in 0..params.iterations.max(1) {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        for (k, c) in centers.iter().enumerate() {
            let x0 = (c.x - s as f64).floor().max(0.0) as usize;
            let x1 = ((c.x + s as f64).ceil() as usize).min(w - 1);
            let y0 = (c.y - s as f64).floor().max(0.0) as usize;
            let y1 = ((c.y + s as f64).ceil() as usize).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let di = image.get(x, y) - c.i;
                    let dx = x as f64 - c.x;
                    let dy = y as f64 - c.y;
                    let d = di * di + spatial * (dx * dx + dy * dy);
                    let p = y * w + x;
                    if d < dist[p] {
                        dist[p] = d;
                        labels[p] = k as u32;
                    }
                }
            }
        }
        let mut acc = vec![(0.0, 0.0, 0.0, 0usize); centers.len()];
        for (p, &l) in labels.iter().enumerate() {
            if l == u32::MAX {
                continue;
            }
            let a = &mut acc[l as usize];
            a.0 += image.data()[p];
            a.1 += (p % w) as f64;
            a.2 += (p / w) as f64;
            a.3 += 1;
        }
        for (c, a) in centers.iter_mut().zip(&acc) {
            if a.3 > 0 {
                let n = a.3 as f64;
                *c = Center {
                    i: a.0 / n,
                    x: a.1 / n,
                    y: a.2 / n,
                };
            }
        }
    }
    // pixels outside every search window go to the spatially nearest center
    for p in 0..w * h {
        if labels[p] == u32::MAX {
            let (x, y) = ((p % w) as f64, (p / w) as f64);
            let k = centers
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    let da = (a.1.x - x).powi(2) + (a.1.y - y).powi(2);
                    let db = (b.1.x - x).powi(2) + (b.1.y - y).powi(2);
                    da.total_cmp(&db)
                })
                .unwrap()
                .0;
            labels[p] = k as u32;
        }
    }
    enforce_connectivity(w, h, &mut labels);
    SuperpixelMap::from_labels(w, h, &labels, params)
}

/// 4-connected components of equal labels, returned as a component id per
/// pixel plus each component's label and size.
fn components(w: usize, h: usize, labels: &[u32]) -> (Vec<usize>, Vec<(u32, usize)>) {
    let mut comp = vec![usize::MAX; w * h];
    let mut info = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = info.len();
        let l = labels[start];
        let mut size = 0;
        comp[start] = id;
        stack.push(start);
        while let Some(p) = stack.pop() {
            size += 1;
            let (x, y) = (p % w, p / w);
            let mut visit = |q: usize| {
                if comp[q] == usize::MAX && labels[q] == l {
                    comp[q] = id;
                    stack.push(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
        }
        info.push((l, size));
    }
    (comp, info)
}

/// Keeps the largest component of each label and merges every other
/// component into the largest adjacent kept superpixel.
fn enforce_connectivity(w: usize, h: usize, labels: &mut [u32]) {
    let (comp, info) = components(w, h, labels);
    let mut kept: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
    for (c, &(l, size)) in info.iter().enumerate() {
        let e = kept.entry(l).or_insert(c);
        if info[*e].1 < size {
            *e = c;
        }
    }
    // resolved label per component; None for orphans not yet merged
    let mut resolved: Vec<Option<u32>> = info
        .iter()
        .enumerate()
        .map(|(c, &(l, _))| (kept[&l] == c).then_some(l))
        .collect();
    let mut size_of: std::collections::HashMap<u32, usize> =
        kept.iter().map(|(&l, &c)| (l, info[c].1)).collect();

    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); info.len()];
    for p in 0..w * h {
        let (x, y) = (p % w, p / w);
        for q in [(x + 1 < w).then(|| p + 1), (y + 1 < h).then(|| p + w)]
            .into_iter()
            .flatten()
        {
            let (a, b) = (comp[p], comp[q]);
            if a != b {
                neighbours[a].push(b);
                neighbours[b].push(a);
            }
        }
    }
    for n in &mut neighbours {
        n.sort_unstable();
        n.dedup();
    }
    loop {
        let mut progress = false;
        let mut pending = false;
        for c in 0..info.len() {
            if resolved[c].is_some() {
                continue;
            }
            let target = neighbours[c]
                .iter()
                .filter_map(|&n| resolved[n])
                .max_by(|a, b| size_of[a].cmp(&size_of[b]).then(b.cmp(a)));
            match target {
                Some(t) => {
                    resolved[c] = Some(t);
                    *size_of.get_mut(&t).unwrap() += info[c].1;
                    progress = true;
                }
                None => pending = true,
            }
        }
        if !pending || !progress {
            break;
        }
    }
    for (p, l) in labels.iter_mut().enumerate() {
        if let Some(r) = resolved[comp[p]] {
            *l = r;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(s: usize, m: f64) -> SlicParams {
        SlicParams {
            region_size: s,
            compactness: m,
            iterations: 10,
        }
    }

    fn check_partition(sp: &SuperpixelMap) {
        let mut sizes = vec![0usize; sp.count()];
        for &l in sp.labels() {
            sizes[l as usize] += 1;
        }
        assert!(sizes.iter().all(|&s| s > 0));
        assert_eq!(sizes.iter().sum::<usize>(), sp.width() * sp.height());
        let (_, info) = components(sp.width(), sp.height(), sp.labels());
        assert_eq!(
            info.len(),
            sp.count(),
            "every superpixel is one 4-connected part"
        );
    }

    #[test]
    fn uniform_image_gives_a_grid() {
        let img = ImagePlane::filled(60, 60, 0.4).unwrap();
        let sp = slic(&img, params(20, 0.1)).unwrap();
        assert_eq!(sp.count(), 9);
        check_partition(&sp);
        // each cell centre carries a distinct label and cell bodies agree within 1 px of the grid lines
        for gy in 0..3 {
            for gx in 0..3 {
                let l = sp.label(gx * 20 + 10, gy * 20 + 10);
                for y in gy * 20 + 1..gy * 20 + 19 {
                    for x in gx * 20 + 1..gx * 20 + 19 {
                        assert_eq!(sp.label(x, y), l, "({x},{y})");
                    }
                }
            }
        }
    }

    #[test]
    fn two_tone_boundary_follows_the_edge() {
        let img = ImagePlane::from_fn(40, 40, |x, _| if x < 20 { 0.1 } else { 0.9 }).unwrap();
        let sp = slic(&img, params(20, 10.0)).unwrap();
        check_partition(&sp);
        let left: std::collections::HashSet<u32> = (0..40)
            .flat_map(|y| (0..19).map(move |x| (x, y)))
            .map(|(x, y)| sp.label(x, y))
            .collect();
        let right: std::collections::HashSet<u32> = (0..40)
            .flat_map(|y| (21..40).map(move |x| (x, y)))
            .map(|(x, y)| sp.label(x, y))
            .collect();
        assert!(left.is_disjoint(&right));
    }

    #[test]
    fn small_image_is_one_superpixel() {
        let img = ImagePlane::from_fn(7, 30, |x, y| (x + y) as f64).unwrap();
        let sp = slic(&img, params(10, 0.1)).unwrap();
        assert_eq!(sp.count(), 1);
    }

    #[test]
    fn noisy_image_is_a_connected_partition() {
        use rand::Rng;
        let mut rng = crate::seed::rng(8);
        let img =
            ImagePlane::new(50, 37, (0..50 * 37).map(|_| rng.gen::<f64>()).collect()).unwrap();
        for m in [0.01, 0.1, 1.0] {
            let sp = slic(&img, params(6, m)).unwrap();
            check_partition(&sp);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let img = ImagePlane::filled(10, 10, 0.0).unwrap();
        assert!(slic(&img, params(1, 0.1)).is_err());
        assert!(slic(&img, params(4, 0.0)).is_err());
    }
}
