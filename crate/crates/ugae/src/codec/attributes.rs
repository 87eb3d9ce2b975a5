//! Predictive attribute coding.
//!
//! Colors travel in YUV. Points are coded in Morton order; each point is
//! predicted from the nearest already-coded point (ties by Morton order,
//! the first point from neutral zero), and the per-channel prediction
//! residual is quantized with a uniform step derived from the attribute
//! quantization parameter, then entropy-coded. Prediction runs closed
//! loop — on reconstructed values — so encoder and decoder stay in
//! lockstep and the decoder reproduces the quantized YUV exactly.

use crate::color::{rgb_to_yuv, yuv_to_rgb, YuvColor};
use crate::spatial::{morton_encode_unchecked, SpatialIndex};

use super::arith::{BinaryModel, BitDecoder, BitEncoder};
use super::CodecError;

/// Residual quantization step for an attribute quantization parameter:
/// 2^((qp−4)/6), a logarithmic ladder of ~6 qp per octave (qp 4 → exact
/// integer-residual coding).
pub fn quantization_step(qp: u8) -> f64 {
    2f64.powf((f64::from(qp) - 4.0) / 6.0)
}

/// Longest accepted magnitude prefix; anything longer marks a corrupt
/// stream (residuals are bounded by the YUV range over the smallest step).
const MAX_MAGNITUDE_BITS: usize = 24;

struct ResidualModels {
    nonzero: [BinaryModel; 3],
    length: Vec<[BinaryModel; 3]>,
}

impl ResidualModels {
    fn new() -> Self {
        Self {
            nonzero: Default::default(),
            length: (0..MAX_MAGNITUDE_BITS).map(|_| Default::default()).collect(),
        }
    }
}

fn check_input(coords: &[[u32; 3]]) -> Result<(), CodecError> {
    if coords.is_empty() {
        return Err(CodecError::EmptyInput);
    }
    let sorted = coords
        .windows(2)
        .all(|w| morton_encode_unchecked(w[0]) < morton_encode_unchecked(w[1]));
    if !sorted {
        return Err(CodecError::UnsortedInput);
    }
    Ok(())
}

/// Encode one quantized residual: a nonzero flag, a sign (bypass), and the
/// magnitude as a unary bit-length prefix plus raw low bits.
fn encode_residual(
    enc: &mut BitEncoder,
    models: &mut ResidualModels,
    channel: usize,
    idx: i64,
) {
    enc.encode(&mut models.nonzero[channel], idx != 0);
    if idx == 0 {
        return;
    }
    enc.encode_bypass(idx < 0);
    let magnitude = idx.unsigned_abs();
    let n_bits = (64 - magnitude.leading_zeros()) as usize; // >= 1
    debug_assert!(n_bits <= MAX_MAGNITUDE_BITS);
    for pos in 0..n_bits - 1 {
        enc.encode(&mut models.length[pos][channel], true);
    }
    enc.encode(&mut models.length[n_bits - 1][channel], false);
    for pos in (0..n_bits - 1).rev() {
        enc.encode_bypass((magnitude >> pos) & 1 == 1);
    }
}

fn decode_residual(
    dec: &mut BitDecoder,
    models: &mut ResidualModels,
    channel: usize,
) -> Result<i64, CodecError> {
    if !dec.decode(&mut models.nonzero[channel])? {
        return Ok(0);
    }
    let negative = dec.decode_bypass()?;
    let mut n_bits = 1usize;
    while dec.decode(&mut models.length[n_bits - 1][channel])? {
        n_bits += 1;
        if n_bits > MAX_MAGNITUDE_BITS {
            return Err(CodecError::CorruptStream {
                offset: dec.position(),
                detail: "residual magnitude prefix too long".to_string(),
            });
        }
    }
    let mut magnitude = 1u64;
    for _ in 0..n_bits - 1 {
        magnitude = (magnitude << 1) | u64::from(dec.decode_bypass()?);
    }
    Ok(if negative {
        -(magnitude as i64)
    } else {
        magnitude as i64
    })
}

/// The shared closed-loop prediction walk. `residual_of` turns the
/// channel prediction into a quantized residual index (encoder: quantize
/// the true residual and emit it; decoder: read it from the stream);
/// both sides then reconstruct identically.
fn prediction_walk(
    coords: &[[u32; 3]],
    step: f64,
    mut residual_of: impl FnMut(usize, usize, f64) -> Result<i64, CodecError>,
) -> Result<Vec<[f64; 3]>, CodecError> {
    let index = SpatialIndex::from_coords(coords).expect("checked non-empty");
    let mut recon: Vec<[f64; 3]> = Vec::with_capacity(coords.len());
    for i in 0..coords.len() {
        let pred = if i == 0 {
            [0.0, 0.0, 0.0]
        } else {
            let prev = index.knn_where(coords[i], 1, |j| j < i);
            recon[prev.indices[0]]
        };
        let mut point = [0.0; 3];
        for c in 0..3 {
            let idx = residual_of(i, c, pred[c])?;
            point[c] = pred[c] + idx as f64 * step;
        }
        recon.push(point);
    }
    Ok(recon)
}

pub(crate) fn encode_attributes_with_recon(
    coords: &[[u32; 3]],
    attrs: &[[u8; 3]],
    qp: u8,
) -> Result<(Vec<u8>, Vec<[f64; 3]>), CodecError> {
    check_input(coords)?;
    if coords.len() != attrs.len() {
        return Err(CodecError::LengthMismatch {
            coords: coords.len(),
            attrs: attrs.len(),
        });
    }
    let step = quantization_step(qp);
    let yuv: Vec<[f64; 3]> = attrs
        .iter()
        .map(|&rgb| {
            let c = rgb_to_yuv(rgb);
            [c.y, c.u, c.v]
        })
        .collect();
    let mut enc = BitEncoder::new();
    let mut models = ResidualModels::new();
    let recon = prediction_walk(coords, step, |i, c, pred| {
        // Quantize the true residual: round half away from zero.
        let idx = ((yuv[i][c] - pred) / step).round() as i64;
        encode_residual(&mut enc, &mut models, c, idx);
        Ok(idx)
    })?;
    Ok((enc.finish(), recon))
}

/// Encode RGB attributes of a Morton-sorted, duplicate-free voxel
/// sequence.
pub fn encode_attributes(
    coords: &[[u32; 3]],
    attrs: &[[u8; 3]],
    qp: u8,
) -> Result<Vec<u8>, CodecError> {
    Ok(encode_attributes_with_recon(coords, attrs, qp)?.0)
}

/// Decode attributes for the given coordinate sequence (the same order
/// the encoder saw). Returns one RGB triple per coordinate.
pub fn decode_attributes(
    bytes: &[u8],
    coords: &[[u32; 3]],
    qp: u8,
) -> Result<Vec<[u8; 3]>, CodecError> {
    check_input(coords)?;
    let step = quantization_step(qp);
    let mut dec = BitDecoder::new(bytes);
    let mut models = ResidualModels::new();
    let recon = prediction_walk(coords, step, |_, c, _| {
        decode_residual(&mut dec, &mut models, c)
    })?;
    Ok(recon
        .into_iter()
        .map(|p| yuv_to_rgb(YuvColor { y: p[0], u: p[1], v: p[2] }))
        .collect())
}
