//! Kd-tree partitioning of a cloud into size-bounded parts, used to cut
//! large inputs down to trainable pieces.

use crate::cloud::PointCloud;

/// Recursively halve `cloud` at the median of its widest axis until every
/// part holds at most `max_points` points. Parts are disjoint, preserve
/// the input's relative point order internally, and their union is the
/// input multiset. Parts are returned in recursion order (lower half of
/// the split axis first).
pub fn partition_kdtree(cloud: &PointCloud, max_points: usize) -> Vec<PointCloud> {
    assert!(max_points >= 1, "partition_kdtree requires max_points >= 1");
    if cloud.len() <= max_points {
        return vec![cloud.clone()];
    }
    let mut indices: Vec<u32> = (0..cloud.len() as u32).collect();
    let mut leaves: Vec<Vec<u32>> = Vec::new();
    split(cloud.coords(), &mut indices, max_points, &mut leaves);
    leaves
        .into_iter()
        .map(|mut part| {
            part.sort_unstable();
            let coords = part
                .iter()
                .map(|&i| cloud.coords()[i as usize])
                .collect();
            let attrs = cloud
                .attrs()
                .map(|a| part.iter().map(|&i| a[i as usize]).collect());
            PointCloud::new(coords, attrs, cloud.depth())
                .expect("partition of a valid cloud is valid")
        })
        .collect()
}

fn split(
    coords: &[[u32; 3]],
    indices: &mut [u32],
    max_points: usize,
    leaves: &mut Vec<Vec<u32>>,
) {
    if indices.len() <= max_points {
        leaves.push(indices.to_vec());
        return;
    }
    let mut min = [u32::MAX; 3];
    let mut max = [0u32; 3];
    for &i in indices.iter() {
        for axis in 0..3 {
            min[axis] = min[axis].min(coords[i as usize][axis]);
            max[axis] = max[axis].max(coords[i as usize][axis]);
        }
    }
    let ext = [max[0] - min[0], max[1] - min[1], max[2] - min[2]];
    let widest = *ext.iter().max().unwrap();
    let axis = ext.iter().position(|&e| e == widest).unwrap();
    let mid = indices.len() / 2;
    indices.select_nth_unstable_by_key(mid, |&i| (coords[i as usize][axis], i));
    let (left, right) = indices.split_at_mut(mid);
    split(coords, left, max_points, leaves);
    split(coords, right, max_points, leaves);
}

#[cfg(test)]
mod tests {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_cloud(rng: &mut impl Rng, n: usize, depth: u8) -> PointCloud {
        let side = 1u32 << depth;
        let coords = (0..n)
            .map(|_| {
                [
                    rng.gen_range(0..side),
                    rng.gen_range(0..side),
                    rng.gen_range(0..side),
                ]
            })
            .collect();
        let attrs = (0..n).map(|_| rng.gen()).collect();
        PointCloud::new(coords, Some(attrs), depth).unwrap()
    }

    #[test]
    fn small_cloud_stays_whole() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let cloud = random_cloud(&mut rng, 50, 6);
        let parts = partition_kdtree(&cloud, 100);
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0], cloud);
    }

    #[test]
    fn uniform_quarter_million_splits_into_even_quarters() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let cloud = random_cloud(&mut rng, 250_000, 10);
        let parts = partition_kdtree(&cloud, 100_000);
        assert_eq!(parts.len(), 4);
        for part in &parts {
            let quarter = cloud.len() as i64 / 4;
            assert!((part.len() as i64 - quarter).abs() <= 1, "{}", part.len());
        }
    }

    #[test]
    fn parts_respect_bound_and_union_is_input_multiset() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..10 {
            let n = rng.gen_range(1..5000);
            let max_points = rng.gen_range(1..1200);
            let cloud = random_cloud(&mut rng, n, 7);
            let parts = partition_kdtree(&cloud, max_points);
            let mut merged: Vec<([u32; 3], [u8; 3])> = Vec::new();
            for part in &parts {
                assert!(part.len() <= max_points);
                assert!(!part.is_empty());
                let attrs = part.attrs().unwrap();
                merged.extend(part.coords().iter().copied().zip(attrs.iter().copied()));
            }
            let mut want: Vec<([u32; 3], [u8; 3])> = cloud
                .coords()
                .iter()
                .copied()
                .zip(cloud.attrs().unwrap().iter().copied())
                .collect();
            merged.sort_unstable();
            want.sort_unstable();
            assert_eq!(merged, want);
        }
    }
}
