//! Lossy point-cloud codec simulator: geometry quantization plus lossless
//! octree coding, predictive attribute coding, adaptive binary arithmetic
//! entropy coding, the five-level rate ladder, and the byte-exact
//! bitstream container with bits-per-input-point accounting.
//!
//! This is an internal reference codec: rate/distortion comparisons are
//! meaningful between its own configurations (baseline vs enhanced), not
//! against any external encoder.

mod arith;
mod attributes;
mod octree;

pub use arith::{BitDecoder, BitEncoder, BinaryModel};
pub use attributes::{decode_attributes, encode_attributes, quantization_step};
pub use octree::{decode_octree, encode_octree, octree_occupancy_bytes};

use thiserror::Error;

use crate::cloud::{grid_max, merge_voxels, CloudError, PointCloud};
use crate::spatial::morton_encode_unchecked;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("position quantization scale must lie in (0, 1], got {0}")]
    BadScale(f64),
    #[error("cannot encode an empty point set")]
    EmptyInput,
    #[error("input coordinates contain duplicate voxels")]
    DuplicateInput,
    #[error("input coordinates are not in Morton order")]
    UnsortedInput,
    #[error("corrupt stream at byte {offset}: {detail}")]
    CorruptStream { offset: usize, detail: String },
    #[error("{coords} coordinates but {attrs} attribute triples")]
    LengthMismatch { coords: usize, attrs: usize },
    #[error("unknown rate level {0:?} (expected R01..R05)")]
    UnknownRateLevel(String),
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

/// Round to the nearest integer, ties toward negative infinity.
///
/// This is the codec's single coordinate-rounding convention, shared by
/// quantization, dequantization, and the quantization-preimage expansion
/// so that the three stay mutually consistent.
pub(crate) fn round_half_down(x: f64) -> f64 {
    (x - 0.5).ceil()
}

/// The five operating points of the rate ladder, coarsest first: position
/// quantization scale and attribute quantization parameter move together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RateLevel {
    R01,
    R02,
    R03,
    R04,
    R05,
}

impl RateLevel {
    pub const ALL: [RateLevel; 5] = [
        RateLevel::R01,
        RateLevel::R02,
        RateLevel::R03,
        RateLevel::R04,
        RateLevel::R05,
    ];

    /// Position quantization scale: coordinates are multiplied by this
    /// before rounding.
    pub fn pqs(self) -> f64 {
        match self {
            RateLevel::R01 => 0.125,
            RateLevel::R02 => 0.25,
            RateLevel::R03 => 0.5,
            RateLevel::R04 => 0.75,
            RateLevel::R05 => 0.875,
        }
    }

    /// Attribute quantization parameter (larger = coarser).
    pub fn qp(self) -> u8 {
        match self {
            RateLevel::R01 => 51,
            RateLevel::R02 => 46,
            RateLevel::R03 => 40,
            RateLevel::R04 => 34,
            RateLevel::R05 => 28,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RateLevel::R01 => "R01",
            RateLevel::R02 => "R02",
            RateLevel::R03 => "R03",
            RateLevel::R04 => "R04",
            RateLevel::R05 => "R05",
        }
    }

    /// Stable one-based ordinal, lowest rate first.
    pub fn code(self) -> u8 {
        match self {
            RateLevel::R01 => 1,
            RateLevel::R02 => 2,
            RateLevel::R03 => 3,
            RateLevel::R04 => 4,
            RateLevel::R05 => 5,
        }
    }

    fn from_code(code: u8) -> Result<Self, CodecError> {
        Self::ALL
            .into_iter()
            .find(|r| r.code() == code)
            .ok_or_else(|| CodecError::UnknownRateLevel(format!("code {code}")))
    }
}

impl std::str::FromStr for RateLevel {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| CodecError::UnknownRateLevel(s.to_string()))
    }
}

impl std::fmt::Display for RateLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Grid depth of the quantized geometry for an original `depth` and scale:
/// the smallest depth that holds the largest possible scaled coordinate.
pub fn quantized_depth(depth: u8, pqs: f64) -> u8 {
    let max = round_half_down(grid_max(depth) as f64 * pqs) as u32;
    let mut d = 1u8;
    while grid_max(d) < max {
        d += 1;
    }
    d
}

/// Scale every coordinate by `pqs` and round (ties down); collapsed
/// duplicates are merged and attributes dropped — the pipeline recolors
/// the final geometry from the original cloud afterwards. The result is
/// duplicate-free and Morton-sorted on the reduced grid.
pub fn quantize_geometry(cloud: &PointCloud, pqs: f64) -> Result<PointCloud, CodecError> {
    if !(pqs > 0.0 && pqs <= 1.0) {
        return Err(CodecError::BadScale(pqs));
    }
    let depth = quantized_depth(cloud.depth(), pqs);
    let coords: Vec<[u32; 3]> = cloud
        .coords()
        .iter()
        .map(|c| {
            [
                round_half_down(c[0] as f64 * pqs) as u32,
                round_half_down(c[1] as f64 * pqs) as u32,
                round_half_down(c[2] as f64 * pqs) as u32,
            ]
        })
        .collect();
    Ok(merge_voxels(&coords, None, depth))
}

/// Map quantized coordinates back to the original `depth` grid:
/// round(x / pqs), ties down, clamped to the grid. Distinct voxels stay
/// distinct (for pqs ≤ 1); the result is re-sorted into Morton order,
/// which scaling does not preserve.
pub fn dequantize_geometry(
    lossy: &PointCloud,
    pqs: f64,
    depth: u8,
) -> Result<PointCloud, CodecError> {
    if !(pqs > 0.0 && pqs <= 1.0) {
        return Err(CodecError::BadScale(pqs));
    }
    let max = grid_max(depth);
    let mut coords: Vec<[u32; 3]> = lossy
        .coords()
        .iter()
        .map(|c| {
            [
                (round_half_down(c[0] as f64 / pqs) as u32).min(max),
                (round_half_down(c[1] as f64 / pqs) as u32).min(max),
                (round_half_down(c[2] as f64 / pqs) as u32).min(max),
            ]
        })
        .collect();
    coords.sort_unstable_by_key(|&c| morton_encode_unchecked(c));
    coords.dedup();
    Ok(PointCloud::new(coords, None, depth)?)
}

/// Bits per input point: how many coded bits a section costs per point
/// of the *original* cloud.
pub fn bpip(n_bytes: usize, n_input_points: usize) -> f64 {
    assert!(n_input_points >= 1, "bpip needs at least one input point");
    8.0 * n_bytes as f64 / n_input_points as f64
}

const MAGIC: [u8; 4] = *b"UGAE";
const VERSION: u8 = 1;
/// Container bytes besides the two payloads: magic, version, depth, rate,
/// three u32 counters, and two u32 payload lengths.
pub const HEADER_LEN: usize = 4 + 1 + 1 + 1 + 4 + 4 + 4 + 4 + 4;

/// The transmitted artifact: header fields plus the two entropy-coded
/// payloads. Self-contained — decoding needs no side information beyond
/// the shared enhancement model.
///
/// `enhanced_count` is the number of geometry-enhancement points the
/// decoder must select (the transmitted K); zero marks a baseline stream
/// whose geometry is used as decoded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitstream {
    pub depth: u8,
    pub rate: RateLevel,
    pub original_count: u32,
    pub lossy_count: u32,
    pub enhanced_count: u32,
    pub geometry: Vec<u8>,
    pub attributes: Vec<u8>,
}

impl Bitstream {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(HEADER_LEN + self.geometry.len() + self.attributes.len());
        buf.extend_from_slice(&MAGIC);
        buf.push(VERSION);
        buf.push(self.depth);
        buf.push(self.rate.code());
        buf.extend_from_slice(&self.original_count.to_le_bytes());
        buf.extend_from_slice(&self.lossy_count.to_le_bytes());
        buf.extend_from_slice(&self.enhanced_count.to_le_bytes());
        buf.extend_from_slice(&(self.geometry.len() as u32).to_le_bytes());
        buf.extend_from_slice(&self.geometry);
        buf.extend_from_slice(&(self.attributes.len() as u32).to_le_bytes());
        buf.extend_from_slice(&self.attributes);
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let corrupt = |offset: usize, detail: &str| CodecError::CorruptStream {
            offset,
            detail: detail.to_string(),
        };
        if bytes.len() < 4 || bytes[..4] != MAGIC {
            return Err(corrupt(0, "missing UGAE magic"));
        }
        if bytes.len() < 19 {
            return Err(corrupt(bytes.len(), "truncated header"));
        }
        if bytes[4] != VERSION {
            return Err(corrupt(4, "unsupported version"));
        }
        let depth = bytes[5];
        let rate = RateLevel::from_code(bytes[6])
            .map_err(|_| corrupt(6, "unknown rate level code"))?;
        let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        let original_count = u32_at(7);
        let lossy_count = u32_at(11);
        let enhanced_count = u32_at(15);
        let geom_len = u32_at(19) as usize;
        let geom_start = 23;
        if bytes.len() < geom_start + geom_len + 4 {
            return Err(corrupt(bytes.len(), "truncated geometry payload"));
        }
        let geometry = bytes[geom_start..geom_start + geom_len].to_vec();
        let attr_len_off = geom_start + geom_len;
        let attr_len = u32_at(attr_len_off) as usize;
        let attr_start = attr_len_off + 4;
        if bytes.len() != attr_start + attr_len {
            return Err(corrupt(
                bytes.len().min(attr_start + attr_len),
                "attribute payload length mismatch",
            ));
        }
        let attributes = bytes[attr_start..].to_vec();
        Ok(Self {
            depth,
            rate,
            original_count,
            lossy_count,
            enhanced_count,
            geometry,
            attributes,
        })
    }

    pub fn total_len(&self) -> usize {
        HEADER_LEN + self.geometry.len() + self.attributes.len()
    }

    pub fn header_bpip(&self) -> f64 {
        bpip(HEADER_LEN, self.original_count as usize)
    }

    pub fn geometry_bpip(&self) -> f64 {
        bpip(self.geometry.len(), self.original_count as usize)
    }

    pub fn attribute_bpip(&self) -> f64 {
        bpip(self.attributes.len(), self.original_count as usize)
    }

    pub fn total_bpip(&self) -> f64 {
        bpip(self.total_len(), self.original_count as usize)
    }
}

#[cfg(test)]
mod tests {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn rate_ladder_is_exact() {
        let want = [
            ("R01", 0.125, 51),
            ("R02", 0.25, 46),
            ("R03", 0.5, 40),
            ("R04", 0.75, 34),
            ("R05", 0.875, 28),
        ];
        for (rate, (name, pqs, qp)) in RateLevel::ALL.into_iter().zip(want) {
            assert_eq!(rate.name(), name);
            assert_eq!(rate.pqs(), pqs);
            assert_eq!(rate.qp(), qp);
            assert_eq!(name.parse::<RateLevel>().unwrap(), rate);
        }
        assert!("R06".parse::<RateLevel>().is_err());
    }

    #[test]
    fn rounding_convention_sends_halves_down() {
        assert_eq!(round_half_down(2.5), 2.0);
        assert_eq!(round_half_down(2.4), 2.0);
        assert_eq!(round_half_down(2.6), 3.0);
        assert_eq!(round_half_down(0.5), 0.0);
        assert_eq!(round_half_down(3.0), 3.0);
    }

    #[test]
    fn unit_scale_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let coords: Vec<[u32; 3]> = (0..200)
            .map(|_| [rng.gen_range(0..256), rng.gen_range(0..256), rng.gen_range(0..256)])
            .collect();
        let cloud = merge_voxels(&coords, None, 8);
        let q = quantize_geometry(&cloud, 1.0).unwrap();
        assert_eq!(q, cloud);
        let dq = dequantize_geometry(&q, 1.0, 8).unwrap();
        assert_eq!(dq, cloud);
    }

    #[test]
    fn eighth_scale_maps_eight_to_one_and_back() {
        let cloud = PointCloud::new(vec![[8, 8, 8]], None, 4).unwrap();
        let q = quantize_geometry(&cloud, 0.125).unwrap();
        assert_eq!(q.coords(), &[[1, 1, 1]]);
        let dq = dequantize_geometry(&q, 0.125, 4).unwrap();
        assert_eq!(dq.coords(), &[[8, 8, 8]]);
    }

    #[test]
    fn quantizing_never_grows_the_cloud_and_error_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        for rate in RateLevel::ALL {
            let pqs = rate.pqs();
            let coords: Vec<[u32; 3]> = (0..3000)
                .map(|_| [rng.gen_range(0..512), rng.gen_range(0..512), rng.gen_range(0..512)])
                .collect();
            let cloud = merge_voxels(&coords, None, 9);
            let lossy = quantize_geometry(&cloud, pqs).unwrap();
            assert!(lossy.len() <= cloud.len());
            assert!(lossy.len() >= 1);
            let bound = (0.5 / pqs).ceil() as i64;
            // Every original point must have its own quantized voxel within
            // the bound once mapped back.
            for &c in cloud.coords() {
                let v = [
                    round_half_down(c[0] as f64 * pqs) as u32,
                    round_half_down(c[1] as f64 * pqs) as u32,
                    round_half_down(c[2] as f64 * pqs) as u32,
                ];
                let back = [
                    round_half_down(v[0] as f64 / pqs) as i64,
                    round_half_down(v[1] as f64 / pqs) as i64,
                    round_half_down(v[2] as f64 / pqs) as i64,
                ];
                for axis in 0..3 {
                    assert!(
                        (back[axis] - c[axis] as i64).abs() <= bound,
                        "pqs={pqs} axis={axis} {c:?} -> {v:?} -> {back:?}"
                    );
                }
            }
            // Dequantization keeps voxels distinct and Morton-sorted.
            let dq = dequantize_geometry(&lossy, pqs, 9).unwrap();
            assert_eq!(dq.len(), lossy.len());
        }
    }

    #[test]
    fn quantized_depth_tracks_scaled_extent() {
        assert_eq!(quantized_depth(8, 1.0), 8);
        assert_eq!(quantized_depth(8, 0.5), 7);
        // 255·0.125 = 31.875 rounds up to 32, which needs a sixth bit.
        assert_eq!(quantized_depth(8, 0.125), 6);
        // 255·0.75 = 191.25 → 191 still needs 8 bits.
        assert_eq!(quantized_depth(8, 0.75), 8);
        assert_eq!(quantized_depth(8, 0.875), 8);
        assert_eq!(quantized_depth(1, 0.125), 1);
    }

    #[test]
    fn bpip_is_eight_bytes_over_points() {
        assert_eq!(bpip(125, 1000), 1.0);
        assert_eq!(bpip(0, 42), 0.0);
    }

    #[test]
    fn bitstream_sections_add_up() {
        let stream = Bitstream {
            depth: 8,
            rate: RateLevel::R03,
            original_count: 1000,
            lossy_count: 700,
            enhanced_count: 0,
            geometry: vec![1; 250],
            attributes: vec![2; 125],
        };
        let total = stream.header_bpip() + stream.geometry_bpip() + stream.attribute_bpip();
        assert!((stream.total_bpip() - total).abs() < 1e-12);
        assert_eq!(stream.total_len(), HEADER_LEN + 375);
    }

    #[test]
    fn container_round_trips_byte_exactly() {
        let stream = Bitstream {
            depth: 10,
            rate: RateLevel::R05,
            original_count: 123_456,
            lossy_count: 99_999,
            enhanced_count: 123_456,
            geometry: (0..=255).collect(),
            attributes: vec![7; 33],
        };
        let bytes = stream.to_bytes();
        assert_eq!(bytes.len(), stream.total_len());
        assert_eq!(&bytes[..4], b"UGAE");
        assert_eq!(Bitstream::from_bytes(&bytes).unwrap(), stream);
    }

    #[test]
    fn container_rejects_corruption() {
        let stream = Bitstream {
            depth: 4,
            rate: RateLevel::R01,
            original_count: 10,
            lossy_count: 5,
            enhanced_count: 0,
            geometry: vec![1, 2, 3],
            attributes: vec![4, 5],
        };
        let good = stream.to_bytes();
        assert!(Bitstream::from_bytes(&good[..good.len() - 1]).is_err());
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            Bitstream::from_bytes(&bad_magic),
            Err(CodecError::CorruptStream { offset: 0, .. })
        ));
        let mut bad_rate = good.clone();
        bad_rate[6] = 9;
        assert!(Bitstream::from_bytes(&bad_rate).is_err());
        let mut extra = good;
        extra.push(0);
        assert!(Bitstream::from_bytes(&extra).is_err());
    }

    #[test]
    fn rejects_bad_scales() {
        let cloud = PointCloud::new(vec![[0, 0, 0]], None, 2).unwrap();
        assert!(quantize_geometry(&cloud, 0.0).is_err());
        assert!(quantize_geometry(&cloud, 1.5).is_err());
        assert!(dequantize_geometry(&cloud, -0.5, 2).is_err());
    }
}
