//! Dense feature planes shared by training and inference.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::tree::{FeatureKey, Part};
use crate::imagecore::pyramid::ScaleSpace;
use crate::imagecore::ImagePlane;
use crate::kernelbank::{kernel_response, posneg, Kernel};
use crate::pooling::{apply_pool, PoolSpec, RegionTable};
use crate::{Error, Result};

/// Planes for one kernel and several (part, pooling) combinations. The
/// response and its POSNEG split are computed once.
pub fn feature_planes(
    space: &ScaleSpace<'_>,
    regions: Option<&RegionTable>,
    kernel: &Kernel,
    specs: &[(Part, PoolSpec)],
) -> Result<Vec<ImagePlane>> {
    let raw = kernel_response(space, kernel)?;
    let split = specs
        .iter()
        .any(|(p, _)| *p != Part::Raw)
        .then(|| posneg(&raw));
    specs
        .iter()
        .map(|&(part, pool)| {
            let src = match (part, &split) {
                (Part::Raw, _) => &raw,
                (Part::Pos, Some((pos, _))) => pos,
                (Part::Neg, Some((_, neg))) => neg,
                _ => unreachable!("POSNEG split computed when a part needs it"),
            };
            apply_pool(src, pool, regions)
        })
        .collect()
}

/// Every distinct feature plane needed by `keys`, computed once per kernel.
pub fn dense_planes(
    space: &ScaleSpace<'_>,
    regions: Option<&RegionTable>,
    kernels: &[Kernel],
    keys: &[FeatureKey],
) -> Result<HashMap<FeatureKey, Arc<ImagePlane>>> {
    let by_id: HashMap<u32, &Kernel> = kernels.iter().map(|k| (k.id, k)).collect();
    let mut groups: Vec<(u32, Vec<(Part, PoolSpec)>)> = Vec::new();
    for k in keys {
        match groups.iter_mut().find(|(id, _)| *id == k.kernel) {
            Some((_, specs)) => {
                if !specs.contains(&(k.part, k.pool)) {
                    specs.push((k.part, k.pool));
                }
            }
            None => groups.push((k.kernel, vec![(k.part, k.pool)])),
        }
    }
    let computed: Vec<Result<Vec<(FeatureKey, Arc<ImagePlane>)>>> = groups
        .par_iter()
        .map(|(id, specs)| {
            let kernel = by_id
                .get(id)
                .ok_or_else(|| Error::Format(format!("model references unknown kernel {id}")))?;
            let planes = feature_planes(space, regions, kernel, specs)?;
            Ok(specs
                .iter()
                .zip(planes)
                .map(|(&(part, pool), p)| {
                    (
                        FeatureKey {
                            kernel: *id,
                            part,
                            pool,
                        },
                        Arc::new(p),
                    )
                })
                .collect())
        })
        .collect();
    let mut out = HashMap::new();
    for c in computed {
        out.extend(c?);
    }
    Ok(out)
}
