//! Morton (Z-order) keys: the canonical total order on voxels.
//!
//! The key interleaves coordinate bits with x in the lowest position:
//! bit `3i` of the key is bit `i` of x, bit `3i+1` is bit `i` of y, and
//! bit `3i+2` is bit `i` of z. Sorting duplicate-free voxels by key is a
//! deterministic total order, used as the transmission order of the codec
//! and the tie-break everywhere a choice would otherwise be arbitrary.

use crate::cloud::{grid_max, MAX_DEPTH};

use super::SpatialError;

/// A bit-interleaved voxel key of `3 * depth` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MortonKey(pub u64);

/// Spread the low 16 bits of `v` so bit i lands at bit 3i.
#[inline]
fn spread16(v: u32) -> u64 {
    let mut v = v as u64 & 0xFFFF;
    v = (v | v << 32) & 0x001F_0000_0000_FFFF;
    v = (v | v << 16) & 0x001F_0000_FF00_00FF;
    v = (v | v << 8) & 0x100F_00F0_0F00_F00F;
    v = (v | v << 4) & 0x10C3_0C30_C30C_30C3;
    v = (v | v << 2) & 0x1249_2492_4924_9249;
    v
}

/// Inverse of [`spread16`]: gather every third bit back into the low 16.
#[inline]
fn compact16(v: u64) -> u32 {
    let mut v = v & 0x1249_2492_4924_9249;
    v = (v | v >> 2) & 0x10C3_0C30_C30C_30C3;
    v = (v | v >> 4) & 0x100F_00F0_0F00_F00F;
    v = (v | v >> 8) & 0x001F_0000_FF00_00FF;
    v = (v | v >> 16) & 0x001F_0000_0000_FFFF;
    v = (v | v >> 32) & 0x001F_FFFF;
    v as u32
}

/// Interleave a coordinate without a grid check. Because high bits are
/// zero for coordinates that fit a shallower grid, the resulting order
/// matches [`morton_encode`] at every depth the coordinate fits.
#[inline]
pub fn morton_encode_unchecked(coord: [u32; 3]) -> u64 {
    debug_assert!(coord.iter().all(|&c| c <= grid_max(MAX_DEPTH)));
    spread16(coord[0]) | spread16(coord[1]) << 1 | spread16(coord[2]) << 2
}

/// Morton key of a coordinate on the `2^depth` grid.
pub fn morton_encode(coord: [u32; 3], depth: u8) -> Result<MortonKey, SpatialError> {
    if depth == 0 || depth > MAX_DEPTH || coord.iter().any(|&c| c > grid_max(depth)) {
        return Err(SpatialError::OutOfGrid { coord, depth });
    }
    Ok(MortonKey(morton_encode_unchecked(coord)))
}

/// Coordinate of a Morton key on the `2^depth` grid.
pub fn morton_decode(key: MortonKey, depth: u8) -> Result<[u32; 3], SpatialError> {
    let coord = [
        compact16(key.0),
        compact16(key.0 >> 1),
        compact16(key.0 >> 2),
    ];
    if depth == 0 || depth > MAX_DEPTH || coord.iter().any(|&c| c > grid_max(depth)) {
        return Err(SpatialError::OutOfGrid { coord, depth });
    }
    Ok(coord)
}
