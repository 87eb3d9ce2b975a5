//! Distance-adaptive KNN recoloring: transfer attributes from a colored
//! source cloud onto arbitrary query geometry by averaging, per query, the
//! colors of exactly those nearest neighbors that share the minimal squared
//! distance.

use thiserror::Error;

use crate::cloud::PointCloud;
use crate::spatial::{NeighborSet, SpatialIndex};

/// Neighborhood size used by the recoloring stage.
pub const DEFAULT_RECOLOR_K: usize = 8;

#[derive(Debug, Error)]
pub enum PaeError {
    #[error("recoloring source cloud has no attributes")]
    MissingAttributes,
    #[error("recoloring source cloud is empty")]
    EmptySource,
}

/// Attributes produced by [`recolor`], aligned with the query geometry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecolorResult {
    /// One RGB triple per query point.
    pub attrs: Vec<[u8; 3]>,
    /// Number of equidistant nearest neighbors that contributed per point.
    pub k_t: Vec<usize>,
}

/// Distance-adaptive KNN: retrieve the `k` nearest neighbors of `query`,
/// then keep exactly those whose squared distance equals the smallest
/// squared distance among them (exact integer comparison).
///
/// The result preserves the index's total order, so the kept neighbors are
/// a prefix of the plain KNN answer.
pub fn da_knn(index: &SpatialIndex<'_>, query: [u32; 3], k: usize) -> NeighborSet {
    let mut found = index.knn(query, k);
    debug_assert!(!found.indices.is_empty());
    let best = found.sq_dists[0];
    let keep = found.sq_dists.iter().take_while(|&&d| d == best).count();
    found.indices.truncate(keep);
    found.sq_dists.truncate(keep);
    found
}

/// Recolor `geometry` from `source`: each query point receives the
/// per-channel mean color of its distance-adaptive nearest neighbors,
/// computed in floating point and rounded half up once at the end.
pub fn recolor(
    geometry: &PointCloud,
    source: &PointCloud,
    k: usize,
) -> Result<RecolorResult, PaeError> {
    assert!(k >= 1, "recoloring requires k >= 1");
    let src_attrs = source.attrs().ok_or(PaeError::MissingAttributes)?;
    let index = SpatialIndex::build(source).map_err(|_| PaeError::EmptySource)?;

    let mut attrs = Vec::with_capacity(geometry.len());
    let mut k_t = Vec::with_capacity(geometry.len());
    for &q in geometry.coords() {
        let kept = da_knn(&index, q, k);
        let n = kept.indices.len() as f64;
        let mut rgb = [0u8; 3];
        for ch in 0..3 {
            let sum: f64 = kept
                .indices
                .iter()
                .map(|&i| src_attrs[i][ch] as f64)
                .sum();
            rgb[ch] = ((sum / n) + 0.5).floor() as u8;
        }
        attrs.push(rgb);
        k_t.push(kept.indices.len());
    }
    Ok(RecolorResult { attrs, k_t })
}

#[cfg(test)]
mod tests {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::spatial::{morton_encode_unchecked, sq_dist};

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, depth: u8) -> PointCloud {
        let max = crate::cloud::grid_max(depth);
        let mut seen = std::collections::HashSet::new();
        let mut coords = Vec::new();
        let mut attrs = Vec::new();
        while coords.len() < n {
            let c = [
                rng.gen_range(0..=max),
                rng.gen_range(0..=max),
                rng.gen_range(0..=max),
            ];
            if seen.insert(c) {
                coords.push(c);
                attrs.push([rng.gen(), rng.gen(), rng.gen()]);
            }
        }
        PointCloud::new(coords, Some(attrs), depth).unwrap()
    }

    /// Brute force: order every source point by (squared distance, Morton
    /// key, index), take the first k, keep the minimal-distance prefix.
    fn da_knn_oracle(coords: &[[u32; 3]], query: [u32; 3], k: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..coords.len()).collect();
        order.sort_by_key(|&i| {
            (
                sq_dist(coords[i], query),
                morton_encode_unchecked(coords[i]),
                i,
            )
        });
        order.truncate(k);
        let best = sq_dist(coords[order[0]], query);
        order
            .into_iter()
            .filter(|&i| sq_dist(coords[i], query) == best)
            .collect()
    }

    #[test]
    fn coincident_query_keeps_only_the_zero_distance_point() {
        let cloud = PointCloud::new(
            vec![[3, 3, 3], [3, 3, 4], [0, 0, 0]],
            None,
            4,
        )
        .unwrap();
        let index = SpatialIndex::build(&cloud).unwrap();
        let kept = da_knn(&index, [3, 3, 3], 3);
        assert_eq!(kept.indices, vec![0]);
        assert_eq!(kept.sq_dists, vec![0]);
    }

    #[test]
    fn pinned_equidistant_pair() {
        // Query (0,0,0) against {(1,0,0),(0,1,0),(0,0,2)}: the two unit-
        // distance points tie at d* = 1 and the third is dropped.
        let cloud = PointCloud::new(
            vec![[1, 0, 0], [0, 1, 0], [0, 0, 2]],
            None,
            3,
        )
        .unwrap();
        let index = SpatialIndex::build(&cloud).unwrap();
        let kept = da_knn(&index, [0, 0, 0], 3);
        assert_eq!(kept.sq_dists, vec![1, 1]);
        let mut ids = kept.indices.clone();
        ids.sort_unstable();
        assert_eq!(ids, vec![0, 1]);
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0da0);
        for trial in 0..10 {
            let cloud = random_cloud(&mut rng, 500, 6);
            let index = SpatialIndex::build(&cloud).unwrap();
            for _ in 0..100 {
                let q = [
                    rng.gen_range(0..=63),
                    rng.gen_range(0..=63),
                    rng.gen_range(0..=63),
                ];
                let k = rng.gen_range(1..=8);
                let got = da_knn(&index, q, k);
                let want = da_knn_oracle(cloud.coords(), q, k);
                assert_eq!(got.indices, want, "trial {trial} query {q:?} k {k}");
            }
        }
    }

    #[test]
    fn recolor_is_identity_on_matching_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0da1);
        let cloud = random_cloud(&mut rng, 2000, 6);
        let result = recolor(&cloud.without_attrs(), &cloud, DEFAULT_RECOLOR_K).unwrap();
        assert_eq!(result.attrs.as_slice(), cloud.attrs().unwrap());
        assert!(result.k_t.iter().all(|&kt| kt == 1));
    }

    #[test]
    fn recolor_averages_equidistant_neighbors() {
        let source = PointCloud::new(
            vec![[0, 0, 1], [0, 0, 3]],
            Some(vec![[100, 0, 0], [200, 0, 0]]),
            3,
        )
        .unwrap();
        let query = PointCloud::new(vec![[0, 0, 2]], None, 3).unwrap();
        let result = recolor(&query, &source, 8).unwrap();
        assert_eq!(result.attrs, vec![[150, 0, 0]]);
        assert_eq!(result.k_t, vec![2]);
    }

    #[test]
    fn recolor_matches_independent_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0da2);
        for _ in 0..5 {
            let source = random_cloud(&mut rng, 400, 5);
            // Query geometry: a mix of jittered source points and fresh ones.
            let mut q = Vec::new();
            for _ in 0..200 {
                if rng.gen_bool(0.5) {
                    let base = source.coords()[rng.gen_range(0..source.len())];
                    q.push([
                        (base[0] + rng.gen_range(0..2)).min(31),
                        base[1],
                        (base[2] + rng.gen_range(0..2)).min(31),
                    ]);
                } else {
                    q.push([
                        rng.gen_range(0..=31),
                        rng.gen_range(0..=31),
                        rng.gen_range(0..=31),
                    ]);
                }
            }
            let geometry = crate::cloud::merge_voxels(&q, None, 5);
            let got = recolor(&geometry, &source, 8).unwrap();
            let src_attrs = source.attrs().unwrap();
            for (i, &query) in geometry.coords().iter().enumerate() {
                let kept = da_knn_oracle(source.coords(), query, 8);
                let mut want = [0u8; 3];
                for ch in 0..3 {
                    let sum: f64 = kept.iter().map(|&j| src_attrs[j][ch] as f64).sum();
                    want[ch] = ((sum / kept.len() as f64) + 0.5).floor() as u8;
                }
                assert_eq!(got.attrs[i], want, "query {query:?}");
                assert_eq!(got.k_t[i], kept.len());
            }
        }
    }

    #[test]
    fn output_channels_stay_within_contributor_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0da3);
        let source = random_cloud(&mut rng, 600, 5);
        let src_attrs = source.attrs().unwrap();
        let mut q = Vec::new();
        for _ in 0..300 {
            q.push([
                rng.gen_range(0..=31),
                rng.gen_range(0..=31),
                rng.gen_range(0..=31),
            ]);
        }
        let geometry = crate::cloud::merge_voxels(&q, None, 5);
        let got = recolor(&geometry, &source, 8).unwrap();
        let index = SpatialIndex::build(&source).unwrap();
        for (i, &query) in geometry.coords().iter().enumerate() {
            let kept = da_knn(&index, query, 8);
            assert!((1..=8).contains(&got.k_t[i]));
            assert_eq!(got.k_t[i], kept.indices.len());
            for ch in 0..3 {
                let lo = kept.indices.iter().map(|&j| src_attrs[j][ch]).min().unwrap();
                let hi = kept.indices.iter().map(|&j| src_attrs[j][ch]).max().unwrap();
                assert!(got.attrs[i][ch] >= lo && got.attrs[i][ch] <= hi);
            }
        }
    }

    #[test]
    fn distance_adaptive_beats_plain_k_mean_on_subset_geometry() {
        // When every query coincides with a source point, the distance-
        // adaptive rule copies colors exactly; averaging all k neighbors
        // does not. Compare attribute MSE of both rules against the truth.
        let mut rng = ChaCha8Rng::seed_from_u64(0x0da4);
        let source = random_cloud(&mut rng, 800, 5);
        let src_attrs = source.attrs().unwrap();
        let subset: Vec<[u32; 3]> = source
            .coords()
            .iter()
            .copied()
            .step_by(3)
            .collect();
        let truth: Vec<[u8; 3]> = source
            .attrs()
            .unwrap()
            .iter()
            .copied()
            .step_by(3)
            .collect();
        let geometry = PointCloud::new(subset, None, 5).unwrap();

        let adaptive = recolor(&geometry, &source, 8).unwrap();
        let index = SpatialIndex::build(&source).unwrap();
        let mut mse_adaptive = 0.0;
        let mut mse_plain = 0.0;
        for (i, &q) in geometry.coords().iter().enumerate() {
            let all = index.knn(q, 8);
            for ch in 0..3 {
                let d = adaptive.attrs[i][ch] as f64 - truth[i][ch] as f64;
                mse_adaptive += d * d;
                let mean: f64 = all
                    .indices
                    .iter()
                    .map(|&j| src_attrs[j][ch] as f64)
                    .sum::<f64>()
                    / all.indices.len() as f64;
                let d = ((mean + 0.5).floor()) - truth[i][ch] as f64;
                mse_plain += d * d;
            }
        }
        assert_eq!(mse_adaptive, 0.0);
        assert!(mse_plain > 0.0);
    }

    #[test]
    fn recolor_requires_source_attributes() {
        let source = PointCloud::new(vec![[0, 0, 0]], None, 1).unwrap();
        let query = PointCloud::new(vec![[1, 1, 1]], None, 1).unwrap();
        assert!(matches!(
            recolor(&query, &source, 8),
            Err(PaeError::MissingAttributes)
        ));
    }
}
