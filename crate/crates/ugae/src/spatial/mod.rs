//! Deterministic spatial indexing: Morton (Z-order) keys, exact kd-tree
//! KNN over integer voxel grids, kd-tree dataset partitioning, and PCA
//! normal estimation.
//!
//! Everything here is exact or order-fixed: squared distances are integer
//! arithmetic, neighbor ties are broken by (squared distance, Morton key,
//! index), and batch results are assembled in input order. Repeated runs
//! produce identical results on any platform.

mod kdtree;
mod morton;
mod normals;
mod partition;

#[cfg(test)]
pub(crate) use kdtree::sq_dist;
pub use kdtree::{NeighborSet, SpatialIndex};
pub use morton::{morton_decode, morton_encode, morton_encode_unchecked, MortonKey};
pub use normals::{estimate_normals, sym3_smallest_eigenvector, NormalField};
pub use partition::partition_kdtree;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("coordinate ({},{},{}) is outside the depth-{depth} grid", coord[0], coord[1], coord[2])]
    OutOfGrid { coord: [u32; 3], depth: u8 },
    #[error("cannot build a spatial index over an empty cloud")]
    EmptyCloud,
    #[error("normal estimation requires 3 <= k <= point count, got k={k} over {points} points")]
    BadNeighborhood { k: usize, points: usize },
}
