//! Region diagnostics: label the top fraction of points by color
//! roughness (distance to neighboring colors) or by reconstruction error,
//! and measure how strongly the two sets overlap.

use crate::cloud::PointCloud;
use crate::color::rgb_to_yuv;
use crate::spatial::{morton_encode_unchecked, SpatialIndex};

use super::MetricsError;

/// Boolean membership flags for a top-fraction point set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionLabels {
    pub labels: Vec<bool>,
}

impl RegionLabels {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of points labeled as members of the high set.
    pub fn high_count(&self) -> usize {
        self.labels.iter().filter(|&&b| b).count()
    }
}

/// Euclidean distance between two colors in YUV space.
fn yuv_distance(a: [u8; 3], b: [u8; 3]) -> f64 {
    let (a, b) = (rgb_to_yuv(a), rgb_to_yuv(b));
    let d = [a.y - b.y, a.u - b.u, a.v - b.v];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Label the top `ceil(fraction * N)` points by descending score.
/// Equal scores are admitted in ascending Morton-key order, so the
/// labeling is unique and platform-independent.
fn label_top_fraction(
    coords: &[[u32; 3]],
    scores: &[f64],
    fraction: f64,
) -> RegionLabels {
    assert!(
        fraction > 0.0 && fraction <= 1.0,
        "fraction must lie in (0, 1], got {fraction}"
    );
    let n = scores.len();
    let take = ((fraction * n as f64).ceil() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| morton_encode_unchecked(coords[a]).cmp(&morton_encode_unchecked(coords[b])))
            .then_with(|| a.cmp(&b))
    });
    let mut labels = vec![false; n];
    for &i in &order[..take] {
        labels[i] = true;
    }
    RegionLabels { labels }
}

/// High-frequency regions: score each point by the mean YUV distance from
/// its color to the colors of its `k` nearest neighbors (itself excluded),
/// then label the top fraction.
pub fn classify_frequency(
    cloud: &PointCloud,
    k: usize,
    fraction: f64,
) -> Result<RegionLabels, MetricsError> {
    assert!(k >= 1, "classification requires k >= 1");
    let attrs = cloud.attrs().ok_or(MetricsError::MissingAttributes)?;
    let index = SpatialIndex::build(cloud).map_err(|_| MetricsError::EmptyCloud)?;

    let mut scores = Vec::with_capacity(cloud.len());
    for (i, &p) in cloud.coords().iter().enumerate() {
        let hood = index.knn_where(p, k, |j| j != i);
        if hood.indices.is_empty() {
            scores.push(0.0);
            continue;
        }
        let sum: f64 = hood
            .indices
            .iter()
            .map(|&j| yuv_distance(attrs[i], attrs[j]))
            .sum();
        scores.push(sum / hood.indices.len() as f64);
    }
    Ok(label_top_fraction(cloud.coords(), &scores, fraction))
}

/// High-loss regions: score each point by the YUV-space norm of the
/// difference between its reference and degraded colors (same geometry),
/// then label the top fraction.
pub fn classify_loss(
    coords: &[[u32; 3]],
    reference: &[[u8; 3]],
    degraded: &[[u8; 3]],
    fraction: f64,
) -> Result<RegionLabels, MetricsError> {
    if coords.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    if reference.len() != degraded.len() {
        return Err(MetricsError::LengthMismatch {
            left: reference.len(),
            right: degraded.len(),
        });
    }
    if coords.len() != reference.len() {
        return Err(MetricsError::LengthMismatch {
            left: coords.len(),
            right: reference.len(),
        });
    }
    let scores: Vec<f64> = reference
        .iter()
        .zip(degraded)
        .map(|(&a, &b)| yuv_distance(a, b))
        .collect();
    Ok(label_top_fraction(coords, &scores, fraction))
}

/// Fraction of `a`'s high set that also belongs to `b`'s high set:
/// |a AND b| / |a|.
pub fn overlap_ratio(a: &RegionLabels, b: &RegionLabels) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let a_count = a.high_count();
    assert!(a_count > 0, "overlap base set must be non-empty");
    let both = a
        .labels
        .iter()
        .zip(&b.labels)
        .filter(|&(&x, &y)| x && y)
        .count();
    Ok(both as f64 / a_count as f64)
}
