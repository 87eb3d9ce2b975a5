//! `selftest`: print the rate ladder and run quick built-in checks of
//! the codec and recoloring stages on synthetic data.

use ugae::codec::{
    decode_attributes, decode_octree, encode_attributes, encode_octree, quantize_geometry,
    Bitstream, RateLevel,
};
use ugae::pae::recolor;
use ugae::pipeline::{self, Mode};
use ugae::synth::{generate, ShapeKind, ShapeSpec, TextureKind};

use crate::{cli_error, Category, CliResult, WithCategory};

pub fn cmd_selftest() -> CliResult {
    println!("rate ladder:");
    for rate in RateLevel::ALL {
        println!("  {} pqs {} qp {}", rate.name(), rate.pqs(), rate.qp());
    }

    let cloud = generate(&ShapeSpec {
        shape: ShapeKind::Sphere,
        count: 2000,
        depth: 7,
        texture: TextureKind::Gradient,
        period: 8,
        seed: 11,
    });

    // Octree geometry coding is lossless.
    let geo = encode_octree(cloud.coords(), cloud.depth()).category(Category::Bitstream)?;
    let back = decode_octree(&geo, cloud.depth()).category(Category::Bitstream)?;
    if back != cloud.coords() {
        return Err(cli_error(Category::Bitstream, "octree round-trip mismatch"));
    }

    // Attribute coding round-trips deterministically.
    let attrs = cloud.attrs().expect("synthetic clouds carry attributes");
    let enc1 = encode_attributes(cloud.coords(), attrs, 28).category(Category::Bitstream)?;
    let enc2 = encode_attributes(cloud.coords(), attrs, 28).category(Category::Bitstream)?;
    if enc1 != enc2 {
        return Err(cli_error(
            Category::Bitstream,
            "attribute encoding is not deterministic",
        ));
    }
    decode_attributes(&enc1, cloud.coords(), 28).category(Category::Bitstream)?;

    // A full baseline encode/decode repeats byte-identically.
    let run = |seed_cloud: &ugae::PointCloud| -> CliResult<(Vec<u8>, Vec<[u32; 3]>)> {
        let enc = pipeline::encode(seed_cloud, RateLevel::R03, Mode::Baseline, None, 8)
            .map_err(|e| cli_error(Category::Bitstream, format!("baseline encode: {e}")))?;
        let dec = pipeline::decode(&enc.bitstream, None, None)
            .map_err(|e| cli_error(Category::Bitstream, format!("baseline decode: {e}")))?;
        Ok((enc.bitstream.to_bytes(), dec.cloud.coords().to_vec()))
    };
    let (bytes_a, coords_a) = run(&cloud)?;
    let (bytes_b, coords_b) = run(&cloud)?;
    if bytes_a != bytes_b || coords_a != coords_b {
        return Err(cli_error(
            Category::Bitstream,
            "baseline pipeline is not deterministic",
        ));
    }

    // Container format round-trips.
    let bitstream = Bitstream::from_bytes(&bytes_a).category(Category::Bitstream)?;
    if bitstream.to_bytes() != bytes_a {
        return Err(cli_error(Category::Bitstream, "container round-trip mismatch"));
    }

    // Recoloring the original geometry from itself returns its own colors.
    let recolored = recolor(&cloud.without_attrs(), &cloud, 8)
        .map_err(|e| cli_error(Category::Data, format!("recolor: {e}")))?;
    if &recolored.attrs != attrs {
        return Err(cli_error(
            Category::Data,
            "identity recoloring changed attributes",
        ));
    }

    // Quantization at the coarsest level shrinks the grid.
    let lossy = quantize_geometry(&cloud, RateLevel::R01.pqs()).category(Category::Data)?;
    if lossy.len() > cloud.len() {
        return Err(cli_error(Category::Data, "quantization grew the cloud"));
    }

    println!("selftest: ok");
    Ok(())
}
