//! End-to-end compression runs shared by the command-line tool and the
//! integration tests: quantize, entropy-code, optionally enhance the
//! geometry, recolor, code the attributes, and mirror the whole thing at
//! the decoder.
//!
//! The two modes differ only in which geometry carries the attributes:
//! the baseline recolors onto the dequantized lossy geometry, while the
//! enhanced mode recolors onto the top-K geometry that the decoder can
//! rebuild with the shared occupancy model. The transmitted payloads are
//! identical in structure either way — lossy geometry plus coded
//! attributes — so the bitstream never carries enhanced coordinates.

use thiserror::Error;

use crate::cloud::{grid_max, CloudError, PointCloud};
use crate::codec::{
    decode_attributes, decode_octree, dequantize_geometry, encode_attributes, encode_octree,
    quantize_geometry, quantized_depth, Bitstream, CodecError, RateLevel,
};
use crate::learner::Mlp;
use crate::metrics::{
    classify_frequency, classify_loss, d1_psnr, d2_psnr, overlap_ratio, y_psnr, yuv_psnr,
    MetricsError, MetricsRow,
};
use crate::pae::{recolor, PaeError, DEFAULT_RECOLOR_K};
use crate::poae::{enhance_attributes, PoaeError};
use crate::poge::{enhance_geometry, PogeError};
use crate::spatial::{estimate_normals, SpatialError};

/// Neighborhood size for the reference normals behind the D2 metric.
pub const DEFAULT_NORMALS_K: usize = 9;
/// Neighborhood size for the high-frequency region classifier.
pub const FREQUENCY_K: usize = 8;
/// Fraction used for both high-loss and high-frequency region sets.
pub const REGION_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Baseline,
    Ugae,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Ugae => "ugae",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "ugae" => Ok(Mode::Ugae),
            other => Err(format!("unknown mode {other:?} (baseline|ugae)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("input cloud has no attributes")]
    MissingAttributes,
    #[error("enhanced-geometry stream requires an occupancy model")]
    MissingPogeModel,
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Poge(#[from] PogeError),
    #[error(transparent)]
    Pae(#[from] PaeError),
    #[error(transparent)]
    Poae(#[from] PoaeError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Everything the encoder produces: the transmittable container and the
/// recolored cloud (attribute-coder input), which doubles as the
/// reference for attribute-loss diagnostics.
#[derive(Debug, Clone)]
pub struct EncodeResult {
    pub bitstream: Bitstream,
    /// The attribute-carrier geometry with its recolored attributes.
    pub recolored: PointCloud,
}

/// Compress one cloud at one rate level. `poge` is consulted only in
/// enhanced mode, where the selection count K = the original point count
/// is recorded in the header for the decoder to repeat.
pub fn encode(
    original: &PointCloud,
    rate: RateLevel,
    mode: Mode,
    poge: Option<&Mlp>,
    recolor_k: usize,
) -> Result<EncodeResult, PipelineError> {
    if original.attrs().is_none() {
        return Err(PipelineError::MissingAttributes);
    }
    let pqs = rate.pqs();
    let lossy = quantize_geometry(original, pqs)?;
    let geometry = encode_octree(lossy.coords(), lossy.depth())?;

    let (carrier, enhanced_count) = match mode {
        Mode::Baseline => (dequantize_geometry(&lossy, pqs, original.depth())?, 0u32),
        Mode::Ugae => {
            let model = poge.ok_or(PipelineError::MissingPogeModel)?;
            let enhanced =
                enhance_geometry(model, &lossy, pqs, original.depth(), original.len())?;
            let count = enhanced.k_selected as u32;
            (
                PointCloud::new(enhanced.coords, None, original.depth())?,
                count,
            )
        }
    };

    let recolored_attrs = recolor(&carrier, original, recolor_k)?.attrs;
    let attributes = encode_attributes(carrier.coords(), &recolored_attrs, rate.qp())?;
    let bitstream = Bitstream {
        depth: original.depth(),
        rate,
        original_count: original.len() as u32,
        lossy_count: lossy.len() as u32,
        enhanced_count,
        geometry,
        attributes,
    };
    let recolored = PointCloud::new(
        carrier.coords().to_vec(),
        Some(recolored_attrs),
        original.depth(),
    )?;
    Ok(EncodeResult {
        bitstream,
        recolored,
    })
}

/// The decoder's output plus the attributes as they stood before
/// attribute enhancement (identical to the final ones when no attribute
/// model ran) — kept for the loss-region diagnostics.
#[derive(Debug, Clone)]
pub struct DecodeResult {
    pub cloud: PointCloud,
    pub pre_enhancement_attrs: Vec<[u8; 3]>,
}

/// Reconstruct a cloud from a parsed container. A stream with a recorded
/// selection count needs the same occupancy model the encoder used; the
/// attribute model, when given, runs as the final stage.
pub fn decode(
    bitstream: &Bitstream,
    poge: Option<&Mlp>,
    poae: Option<&Mlp>,
) -> Result<DecodeResult, PipelineError> {
    let pqs = bitstream.rate.pqs();
    let lossy_depth = quantized_depth(bitstream.depth, pqs);
    let lossy_coords = decode_octree(&bitstream.geometry, lossy_depth)?;
    let lossy = PointCloud::new(lossy_coords, None, lossy_depth)?;

    let carrier = if bitstream.enhanced_count == 0 {
        dequantize_geometry(&lossy, pqs, bitstream.depth)?
    } else {
        let model = poge.ok_or(PipelineError::MissingPogeModel)?;
        let enhanced = enhance_geometry(
            model,
            &lossy,
            pqs,
            bitstream.depth,
            bitstream.enhanced_count as usize,
        )?;
        PointCloud::new(enhanced.coords, None, bitstream.depth)?
    };

    let attrs = decode_attributes(&bitstream.attributes, carrier.coords(), bitstream.rate.qp())?;
    let decoded = PointCloud::new(
        carrier.coords().to_vec(),
        Some(attrs.clone()),
        bitstream.depth,
    )?;
    let final_cloud = match poae {
        Some(model) => {
            let enhanced_attrs = enhance_attributes(model, &decoded)?;
            PointCloud::new(
                carrier.coords().to_vec(),
                Some(enhanced_attrs),
                bitstream.depth,
            )?
        }
        None => decoded,
    };
    Ok(DecodeResult {
        cloud: final_cloud,
        pre_enhancement_attrs: attrs,
    })
}

/// Score one finished run against its original: geometry and color PSNRs,
/// payload rates, and the overlap between high-loss and high-frequency
/// regions before and after attribute enhancement. The recolored cloud
/// from the encoder serves as the attribute reference, since it is what
/// the attribute coder was asked to transmit.
pub fn evaluate(
    cloud_name: &str,
    original: &PointCloud,
    enc: &EncodeResult,
    dec: &DecodeResult,
) -> Result<MetricsRow, PipelineError> {
    let peak = grid_max(original.depth());
    let decoded = &dec.cloud;

    let d1 = d1_psnr(original, decoded, peak)?;
    let normals = estimate_normals(original, DEFAULT_NORMALS_K)?;
    let d2 = d2_psnr(original, decoded, &normals, peak)?;
    let y = y_psnr(original, decoded)?;
    let yuv = yuv_psnr(original, decoded)?;

    let reference_attrs = enc
        .recolored
        .attrs()
        .expect("recolored cloud always carries attributes");
    let frequency = classify_frequency(&enc.recolored, FREQUENCY_K, REGION_FRACTION)?;
    let final_attrs = decoded
        .attrs()
        .expect("decoded cloud always carries attributes");
    let loss_pre = classify_loss(
        decoded.coords(),
        reference_attrs,
        &dec.pre_enhancement_attrs,
        REGION_FRACTION,
    )?;
    let loss_post = classify_loss(decoded.coords(), reference_attrs, final_attrs, REGION_FRACTION)?;
    let overlap_pre = overlap_ratio(&loss_pre, &frequency)?;
    let overlap_post = overlap_ratio(&loss_post, &frequency)?;

    Ok(MetricsRow {
        cloud: cloud_name.to_string(),
        rate: enc.bitstream.rate,
        bpip_geom: enc.bitstream.geometry_bpip(),
        bpip_attr: enc.bitstream.attribute_bpip(),
        d1,
        d2,
        y_psnr: y,
        yuv_psnr: yuv,
        overlap_pre,
        overlap_post,
    })
}

/// Build one attribute-training example exactly the way a deployed
/// encoder/decoder pair produces it at this rate level: the decoder's
/// reconstruction paired with the encoder's recoloring of the same
/// enhanced geometry.
pub fn attr_training_pair(
    original: &PointCloud,
    rate: RateLevel,
    poge: &Mlp,
    recolor_k: usize,
) -> Result<crate::poae::AttrPair, PipelineError> {
    let enc = encode(original, rate, Mode::Ugae, Some(poge), recolor_k)?;
    let dec = decode(&enc.bitstream, Some(poge), None)?;
    Ok(crate::poae::AttrPair {
        reconstructed: dec.cloud,
        target: enc.recolored,
    })
}

/// Encode, decode, and score in one call, returning all three artifacts.
pub fn run(
    cloud_name: &str,
    original: &PointCloud,
    rate: RateLevel,
    mode: Mode,
    poge: Option<&Mlp>,
    poae: Option<&Mlp>,
) -> Result<(EncodeResult, DecodeResult, MetricsRow), PipelineError> {
    let enc = encode(original, rate, mode, poge, DEFAULT_RECOLOR_K)?;
    let dec = decode(&enc.bitstream, poge, poae)?;
    let row = evaluate(cloud_name, original, &enc, &dec)?;
    Ok((enc, dec, row))
}
