//! Objective quality metrics for compressed point clouds: geometry PSNR
//! (point-to-point D1, point-to-plane D2), color PSNR (Y and weighted YUV),
//! high-frequency / high-loss region diagnostics, and Bjøntegaard-delta
//! rate/quality summaries built on Akima interpolation.

mod bd;
mod psnr;
mod regions;

pub use bd::{akima_interpolate, bd_br, bd_psnr, RDCurve, RDPoint};
pub use psnr::{color_channel_psnrs, d1_psnr, d2_psnr, y_psnr, yuv_psnr, ChannelPsnrs, Psnr};
pub use regions::{classify_frequency, classify_loss, overlap_ratio, RegionLabels};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::codec::RateLevel;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cannot measure an empty cloud")]
    EmptyCloud,
    #[error("cloud has no attributes")]
    MissingAttributes,
    #[error("normal field covers {normals} points but the cloud has {points}")]
    NormalCountMismatch { normals: usize, points: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("interpolation query {query} lies outside the knot range [{lo}, {hi}]")]
    QueryOutOfRange { query: f64, lo: f64, hi: f64 },
    #[error("interpolation needs at least 2 knots with strictly increasing x")]
    BadKnots,
    #[error("a rate-distortion curve needs >= 2 points with positive, strictly increasing rates")]
    BadCurve,
    #[error("rate-to-quality inversion needs strictly increasing quality along each curve")]
    NonMonotoneQuality,
    #[error("rate-distortion curves share no common {axis} interval")]
    NoOverlap { axis: &'static str },
}

/// One evaluated (cloud, rate level) result, as written to metric CSVs.
///
/// PSNR columns hold either a dB value or the lossless marker; overlap
/// columns are ratios in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub cloud: String,
    pub rate: RateLevel,
    pub bpip_geom: f64,
    pub bpip_attr: f64,
    pub d1: Psnr,
    pub d2: Psnr,
    pub y_psnr: Psnr,
    pub yuv_psnr: Psnr,
    pub overlap_pre: f64,
    pub overlap_post: f64,
}

pub const METRICS_CSV_HEADER: &str =
    "cloud,rate_level,bpip_geom,bpip_attr,d1,d2,y_psnr,yuv_psnr,overlap_pre,overlap_post";

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.cloud,
            self.rate.name(),
            self.bpip_geom,
            self.bpip_attr,
            self.d1,
            self.d2,
            self.y_psnr,
            self.yuv_psnr,
            self.overlap_pre,
            self.overlap_post
        )
    }

    pub fn from_csv(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(format!("expected 10 CSV fields, got {}", fields.len()));
        }
        let num = |s: &str| -> Result<f64, String> {
            s.parse::<f64>().map_err(|e| format!("bad number {s:?}: {e}"))
        };
        Ok(MetricsRow {
            cloud: fields[0].to_string(),
            rate: RateLevel::from_str(fields[1]).map_err(|e| e.to_string())?,
            bpip_geom: num(fields[2])?,
            bpip_attr: num(fields[3])?,
            d1: fields[4].parse()?,
            d2: fields[5].parse()?,
            y_psnr: fields[6].parse()?,
            yuv_psnr: fields[7].parse()?,
            overlap_pre: num(fields[8])?,
            overlap_post: num(fields[9])?,
        })
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Db(v) => write!(f, "{v}"),
            Psnr::Lossless => write!(f, "lossless"),
        }
    }
}

impl FromStr for Psnr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "lossless" {
            return Ok(Psnr::Lossless);
        }
        s.parse::<f64>()
            .map(Psnr::Db)
            .map_err(|e| format!("bad PSNR value {s:?}: {e}"))
    }
}
