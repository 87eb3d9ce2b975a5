//! Voxelized point cloud representation.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::spatial::morton_encode_unchecked;

/// Maximum supported grid bit depth.
pub const MAX_DEPTH: u8 = 16;

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("depth {0} out of range (1..=16)")]
    InvalidDepth(u8),
    #[error("coordinate {coord:?} at index {index} exceeds grid for depth {depth}")]
    CoordinateOutOfRange {
        index: usize,
        coord: [u32; 3],
        depth: u8,
    },
    #[error("attribute count {attrs} does not match point count {points}")]
    AttributeCountMismatch { attrs: usize, points: usize },
    #[error("point cloud is empty")]
    Empty,
}

/// A voxelized point cloud: integer coordinates on a `2^depth` grid with
/// optional 8-bit RGB attributes.
///
/// Immutable after construction. Voxelized clouds (from [`voxelize`] or the
/// codec) are duplicate-free and Morton-sorted; clouds loaded from arbitrary
/// files carry whatever the file held.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointCloud {
    coords: Vec<[u32; 3]>,
    attrs: Option<Vec<[u8; 3]>>,
    depth: u8,
}

impl PointCloud {
    pub fn new(
        coords: Vec<[u32; 3]>,
        attrs: Option<Vec<[u8; 3]>>,
        depth: u8,
    ) -> Result<Self, CloudError> {
        if depth == 0 || depth > MAX_DEPTH {
            return Err(CloudError::InvalidDepth(depth));
        }
        let max = grid_max(depth);
        for (index, &coord) in coords.iter().enumerate() {
            if coord.iter().any(|&c| c > max) {
                return Err(CloudError::CoordinateOutOfRange {
                    index,
                    coord,
                    depth,
                });
            }
        }
        if let Some(a) = &attrs {
            if a.len() != coords.len() {
                return Err(CloudError::AttributeCountMismatch {
                    attrs: a.len(),
                    points: coords.len(),
                });
            }
        }
        Ok(Self {
            coords,
            attrs,
            depth,
        })
    }

    pub fn coords(&self) -> &[[u32; 3]] {
        &self.coords
    }

    pub fn attrs(&self) -> Option<&[[u8; 3]]> {
        self.attrs.as_deref()
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Largest valid coordinate component, `2^depth - 1`.
    pub fn grid_max(&self) -> u32 {
        grid_max(self.depth)
    }

    /// Same geometry without attributes.
    pub fn without_attrs(&self) -> PointCloud {
        PointCloud {
            coords: self.coords.clone(),
            attrs: None,
            depth: self.depth,
        }
    }

    /// Returns a copy sorted by Morton key. Attributes follow their points.
    pub fn morton_sorted(&self) -> PointCloud {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by_key(|&i| morton_encode_unchecked(self.coords[i]));
        PointCloud {
            coords: order.iter().map(|&i| self.coords[i]).collect(),
            attrs: self
                .attrs
                .as_ref()
                .map(|a| order.iter().map(|&i| a[i]).collect()),
            depth: self.depth,
        }
    }
}

pub fn grid_max(depth: u8) -> u32 {
    (1u32 << depth) - 1
}

/// Voxelize raw float points onto a `2^depth` grid.
///
/// Input already on the grid (integral within 1e-6 and inside
/// `[0, 2^depth - 1]`) passes through unchanged apart from duplicate
/// merging; anything else is translated to the origin and uniformly scaled
/// so the widest bounding-box axis spans the grid. Duplicate voxels merge
/// with per-channel mean attributes, ties rounded half up. A degenerate
/// bounding box (all points identical) lands on the grid origin.
///
/// The output is duplicate-free and Morton-sorted.
pub fn voxelize(
    points: &[[f64; 3]],
    attrs: Option<&[[u8; 3]]>,
    depth: u8,
) -> Result<PointCloud, CloudError> {
    if points.is_empty() {
        return Err(CloudError::Empty);
    }
    if depth == 0 || depth > MAX_DEPTH {
        return Err(CloudError::InvalidDepth(depth));
    }
    if let Some(a) = attrs {
        if a.len() != points.len() {
            return Err(CloudError::AttributeCountMismatch {
                attrs: a.len(),
                points: points.len(),
            });
        }
    }
    let max = grid_max(depth) as f64;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for axis in 0..3 {
            lo[axis] = lo[axis].min(p[axis]);
            hi[axis] = hi[axis].max(p[axis]);
        }
    }
    let on_grid = points.iter().all(|p| {
        p.iter()
            .all(|&c| c >= 0.0 && c <= max && (c - c.round()).abs() <= 1e-6)
    });
    let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0f64, f64::max);
    let voxels: Vec<[u32; 3]> = points
        .iter()
        .map(|p| {
            let mut v = [0u32; 3];
            for axis in 0..3 {
                let c = if on_grid {
                    p[axis]
                } else if extent == 0.0 {
                    0.0
                } else {
                    (p[axis] - lo[axis]) * max / extent
                };
                v[axis] = (c.round().clamp(0.0, max)) as u32;
            }
            v
        })
        .collect();
    Ok(merge_voxels(&voxels, attrs, depth))
}

/// Merge duplicate voxels (mean attribute per channel, rounded half up)
/// and return the cloud in Morton order.
pub(crate) fn merge_voxels(
    voxels: &[[u32; 3]],
    attrs: Option<&[[u8; 3]]>,
    depth: u8,
) -> PointCloud {
    // Keyed by Morton code so the result is already in canonical order.
    let mut cells: BTreeMap<u64, ([u32; 3], [u64; 3], u64)> = BTreeMap::new();
    for (i, &v) in voxels.iter().enumerate() {
        let key = morton_encode_unchecked(v);
        let entry = cells.entry(key).or_insert((v, [0; 3], 0));
        if let Some(a) = attrs {
            for ch in 0..3 {
                entry.1[ch] += a[i][ch] as u64;
            }
        }
        entry.2 += 1;
    }
    let coords: Vec<[u32; 3]> = cells.values().map(|&(v, _, _)| v).collect();
    let attrs = attrs.map(|_| {
        cells
            .values()
            .map(|&(_, sums, n)| {
                let mut rgb = [0u8; 3];
                for ch in 0..3 {
                    rgb[ch] = ((sums[ch] as f64 / n as f64) + 0.5).floor() as u8;
                }
                rgb
            })
            .collect()
    });
    PointCloud {
        coords,
        attrs,
        depth,
    }
}
