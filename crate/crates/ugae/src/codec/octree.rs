//! Lossless octree geometry coding.
//!
//! The occupied space is divided recursively into octants, breadth-first;
//! each occupied node contributes one occupancy byte (bit j = child j
//! occupied, with child index (z<<2)|(y<<1)|x taken from the coordinate
//! bits of the node's level). Bytes are entropy-coded bit by bit with an
//! adaptive binary arithmetic coder, one context per child slot. Because
//! child order follows the coordinate bit interleave, decoding yields the
//! voxel set in Morton order.

use crate::cloud::{grid_max, MAX_DEPTH};
use crate::spatial::morton_encode_unchecked;

use super::arith::{BinaryModel, BitDecoder, BitEncoder};
use super::CodecError;

fn validate(coords: &[[u32; 3]], depth: u8) -> Result<Vec<[u32; 3]>, CodecError> {
    if coords.is_empty() {
        return Err(CodecError::EmptyInput);
    }
    if depth == 0 || depth > MAX_DEPTH {
        return Err(CodecError::Cloud(
            crate::cloud::CloudError::InvalidDepth(depth),
        ));
    }
    let max = grid_max(depth);
    for (index, &coord) in coords.iter().enumerate() {
        if coord.iter().any(|&c| c > max) {
            return Err(CodecError::Cloud(
                crate::cloud::CloudError::CoordinateOutOfRange { index, coord, depth },
            ));
        }
    }
    let mut sorted = coords.to_vec();
    sorted.sort_unstable_by_key(|&c| morton_encode_unchecked(c));
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(CodecError::DuplicateInput);
    }
    Ok(sorted)
}

#[inline]
fn child_slot(coord: [u32; 3], bit: u8) -> u8 {
    (((coord[2] >> bit) & 1) << 2 | ((coord[1] >> bit) & 1) << 1 | ((coord[0] >> bit) & 1)) as u8
}

/// The raw breadth-first occupancy bytes, before entropy coding. Exposed
/// for inspection and testing; [`encode_octree`] is this plus the
/// arithmetic coder.
pub fn octree_occupancy_bytes(coords: &[[u32; 3]], depth: u8) -> Result<Vec<u8>, CodecError> {
    let sorted = validate(coords, depth)?;
    let mut bytes = Vec::new();
    // Level-synchronous traversal over ranges of the Morton-sorted array:
    // within a node's range the child slot is non-decreasing, so children
    // are contiguous sub-ranges.
    let mut spans: Vec<(usize, usize)> = vec![(0, sorted.len())];
    for level in 0..depth {
        let bit = depth - 1 - level;
        let mut next = Vec::new();
        for &(start, end) in &spans {
            let mut byte = 0u8;
            let mut i = start;
            for slot in 0..8u8 {
                let run_start = i;
                while i < end && child_slot(sorted[i], bit) == slot {
                    i += 1;
                }
                if i > run_start {
                    byte |= 1 << slot;
                    if level + 1 < depth {
                        next.push((run_start, i));
                    }
                }
            }
            debug_assert_eq!(i, end);
            bytes.push(byte);
        }
        spans = next;
    }
    Ok(bytes)
}

/// Encode a duplicate-free voxel set losslessly. The input need not be
/// sorted; the coded set is inherently order-free and decodes in Morton
/// order.
pub fn encode_octree(coords: &[[u32; 3]], depth: u8) -> Result<Vec<u8>, CodecError> {
    let bytes = octree_occupancy_bytes(coords, depth)?;
    let mut enc = BitEncoder::new();
    let mut models: [BinaryModel; 8] = Default::default();
    for byte in bytes {
        for (slot, model) in models.iter_mut().enumerate() {
            enc.encode(model, (byte >> slot) & 1 == 1);
        }
    }
    Ok(enc.finish())
}

/// Decode an octree payload back to the exact voxel set, in Morton order.
pub fn decode_octree(bytes: &[u8], depth: u8) -> Result<Vec<[u32; 3]>, CodecError> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(CodecError::Cloud(
            crate::cloud::CloudError::InvalidDepth(depth),
        ));
    }
    let mut dec = BitDecoder::new(bytes);
    let mut models: [BinaryModel; 8] = Default::default();
    let mut cells: Vec<[u32; 3]> = vec![[0, 0, 0]];
    for level in 0..depth {
        let bit = depth - 1 - level;
        let mut next = Vec::new();
        for &origin in &cells {
            let mut byte = 0u8;
            for (slot, model) in models.iter_mut().enumerate() {
                if dec.decode(model)? {
                    byte |= 1 << slot;
                }
            }
            if byte == 0 {
                return Err(CodecError::CorruptStream {
                    offset: dec.position(),
                    detail: "occupied node with no occupied children".to_string(),
                });
            }
            for slot in 0..8u32 {
                if byte & (1 << slot) != 0 {
                    next.push([
                        origin[0] | (slot & 1) << bit,
                        origin[1] | ((slot >> 1) & 1) << bit,
                        origin[2] | ((slot >> 2) & 1) << bit,
                    ]);
                }
            }
        }
        cells = next;
    }
    Ok(cells)
}
