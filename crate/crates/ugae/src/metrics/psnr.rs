//! Geometry and color PSNR with nearest-neighbor correspondence.
//!
//! All directional errors are accumulated in input order and the symmetric
//! value is the worse (max) of the two directions, so results are invariant
//! to which cloud is called "reference" where the definition says so, and
//! bit-reproducible everywhere.

use crate::cloud::PointCloud;
use crate::color::rgb_to_yuv;
use crate::spatial::{NormalField, SpatialIndex};

use super::MetricsError;

/// A PSNR value: either finite decibels or an exact-match marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Db(f64),
    Lossless,
}

impl Psnr {
    pub fn db(self) -> Option<f64> {
        match self {
            Psnr::Db(v) => Some(v),
            Psnr::Lossless => None,
        }
    }

    /// The dB value, with lossless mapped to `cap` (for weighted averages
    /// where one channel is exact but others are not).
    pub fn db_or(self, cap: f64) -> f64 {
        match self {
            Psnr::Db(v) => v,
            Psnr::Lossless => cap,
        }
    }

    pub fn is_lossless(self) -> bool {
        matches!(self, Psnr::Lossless)
    }
}

/// Cap substituted for a lossless channel inside the YUV weighted mean.
const LOSSLESS_CHANNEL_DB: f64 = 100.0;

fn check_nonempty(a: &PointCloud, b: &PointCloud) -> Result<(), MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    Ok(())
}

fn psnr_from_mse(peak_sq: f64, mse: f64) -> Psnr {
    if mse == 0.0 {
        Psnr::Lossless
    } else {
        Psnr::Db(10.0 * (peak_sq / mse).log10())
    }
}

/// Mean squared nearest-neighbor distance from every point of `from`
/// to the cloud indexed by `to`. Exact integer accumulation.
fn directional_sq_error(from: &PointCloud, to: &SpatialIndex<'_>) -> f64 {
    let mut sum: u128 = 0;
    for &p in from.coords() {
        sum += to.knn(p, 1).sq_dists[0] as u128;
    }
    sum as f64 / from.len() as f64
}

/// Point-to-point geometry PSNR: symmetric nearest-neighbor MSE against a
/// peak of `3 * peak^2` (the `peak` argument is the grid maximum,
/// `2^depth - 1`). Returns the lossless marker when the clouds coincide.
pub fn d1_psnr(
    reference: &PointCloud,
    degraded: &PointCloud,
    peak: u32,
) -> Result<Psnr, MetricsError> {
    check_nonempty(reference, degraded)?;
    let ref_index = SpatialIndex::build(reference).map_err(|_| MetricsError::EmptyCloud)?;
    let deg_index = SpatialIndex::build(degraded).map_err(|_| MetricsError::EmptyCloud)?;
    let fwd = directional_sq_error(reference, &deg_index);
    let bwd = directional_sq_error(degraded, &ref_index);
    let peak_sq = 3.0 * (peak as f64) * (peak as f64);
    Ok(psnr_from_mse(peak_sq, fwd.max(bwd)))
}

/// Point-to-plane geometry PSNR: each correspondence error is projected
/// onto the reference-side normal of the matched reference point before
/// squaring; both directions use reference normals.
pub fn d2_psnr(
    reference: &PointCloud,
    degraded: &PointCloud,
    reference_normals: &NormalField,
    peak: u32,
) -> Result<Psnr, MetricsError> {
    check_nonempty(reference, degraded)?;
    if reference_normals.normals.len() != reference.len() {
        return Err(MetricsError::NormalCountMismatch {
            normals: reference_normals.normals.len(),
            points: reference.len(),
        });
    }
    let ref_index = SpatialIndex::build(reference).map_err(|_| MetricsError::EmptyCloud)?;
    let deg_index = SpatialIndex::build(degraded).map_err(|_| MetricsError::EmptyCloud)?;

    let projected = |from: [u32; 3], to: [u32; 3], normal: [f64; 3]| -> f64 {
        let mut dot = 0.0;
        for axis in 0..3 {
            dot += (to[axis] as f64 - from[axis] as f64) * normal[axis];
        }
        dot * dot
    };

    // Reference -> degraded: project onto the reference point's own normal.
    let mut fwd = 0.0;
    for (i, &p) in reference.coords().iter().enumerate() {
        let nearest = deg_index.knn(p, 1).indices[0];
        fwd += projected(p, degraded.coords()[nearest], reference_normals.normals[i]);
    }
    let fwd = fwd / reference.len() as f64;

    // Degraded -> reference: project onto the matched reference normal.
    let mut bwd = 0.0;
    for &q in degraded.coords() {
        let j = ref_index.knn(q, 1).indices[0];
        bwd += projected(reference.coords()[j], q, reference_normals.normals[j]);
    }
    let bwd = bwd / degraded.len() as f64;

    let peak_sq = 3.0 * (peak as f64) * (peak as f64);
    Ok(psnr_from_mse(peak_sq, fwd.max(bwd)))
}

/// Per-channel color PSNR values in YUV space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPsnrs {
    pub y: Psnr,
    pub u: Psnr,
    pub v: Psnr,
}

/// Per-channel YUV MSE from every point of `from` to its nearest point in
/// the `to` cloud (geometry-nearest, colors compared in YUV).
fn directional_color_mse(
    from: &PointCloud,
    from_attrs: &[[u8; 3]],
    to_attrs: &[[u8; 3]],
    to_index: &SpatialIndex<'_>,
) -> [f64; 3] {
    let mut sums = [0.0f64; 3];
    for (i, &p) in from.coords().iter().enumerate() {
        let j = to_index.knn(p, 1).indices[0];
        let a = rgb_to_yuv(from_attrs[i]);
        let b = rgb_to_yuv(to_attrs[j]);
        let d = [a.y - b.y, a.u - b.u, a.v - b.v];
        for c in 0..3 {
            sums[c] += d[c] * d[c];
        }
    }
    let n = from.len() as f64;
    [sums[0] / n, sums[1] / n, sums[2] / n]
}

/// Color PSNR per YUV channel with nearest-neighbor correspondence,
/// symmetric by taking the worse direction per channel. Peak is 255.
pub fn color_channel_psnrs(
    reference: &PointCloud,
    degraded: &PointCloud,
) -> Result<ChannelPsnrs, MetricsError> {
    check_nonempty(reference, degraded)?;
    let ref_attrs = reference.attrs().ok_or(MetricsError::MissingAttributes)?;
    let deg_attrs = degraded.attrs().ok_or(MetricsError::MissingAttributes)?;
    let ref_index = SpatialIndex::build(reference).map_err(|_| MetricsError::EmptyCloud)?;
    let deg_index = SpatialIndex::build(degraded).map_err(|_| MetricsError::EmptyCloud)?;

    let fwd = directional_color_mse(reference, ref_attrs, deg_attrs, &deg_index);
    let bwd = directional_color_mse(degraded, deg_attrs, ref_attrs, &ref_index);

    let peak_sq = 255.0 * 255.0;
    Ok(ChannelPsnrs {
        y: psnr_from_mse(peak_sq, fwd[0].max(bwd[0])),
        u: psnr_from_mse(peak_sq, fwd[1].max(bwd[1])),
        v: psnr_from_mse(peak_sq, fwd[2].max(bwd[2])),
    })
}

/// Luma-only color PSNR.
pub fn y_psnr(reference: &PointCloud, degraded: &PointCloud) -> Result<Psnr, MetricsError> {
    Ok(color_channel_psnrs(reference, degraded)?.y)
}

/// The 14:1:1 channel weighting.
fn weighted_yuv_db(y: f64, u: f64, v: f64) -> f64 {
    (14.0 * y + u + v) / 16.0
}

/// Weighted color PSNR: (14 * Y + U + V) / 16. Lossless only when every
/// channel is lossless; otherwise exact channels enter the mean at
/// 100 dB.
pub fn yuv_psnr(reference: &PointCloud, degraded: &PointCloud) -> Result<Psnr, MetricsError> {
    let ch = color_channel_psnrs(reference, degraded)?;
    if ch.y.is_lossless() && ch.u.is_lossless() && ch.v.is_lossless() {
        return Ok(Psnr::Lossless);
    }
    Ok(Psnr::Db(weighted_yuv_db(
        ch.y.db_or(LOSSLESS_CHANNEL_DB),
        ch.u.db_or(LOSSLESS_CHANNEL_DB),
        ch.v.db_or(LOSSLESS_CHANNEL_DB),
    )))
}
