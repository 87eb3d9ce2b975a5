//! Write a synthetic textured test cloud as a PLY file.
//!
//! ```text
//! cargo run -p ugae --example make_cloud -- out.ply [shape] [texture] [count] [depth] [seed]
//! ```
//!
//! Shapes: sphere | cube | plane. Textures: checker | gradient | noise.
//! Defaults: sphere gradient 50000 8 7.

use std::process::ExitCode;

use ugae::ply::save_ply;
use ugae::synth::{generate, ShapeKind, ShapeSpec, TextureKind};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(path) = args.first() else {
        eprintln!(
            "usage: make_cloud <out.ply> [sphere|cube|plane] [checker|gradient|noise] \
             [count] [depth] [seed]"
        );
        return ExitCode::FAILURE;
    };

    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.into());
    let shape = match arg(1, "sphere").as_str() {
        "sphere" => ShapeKind::Sphere,
        "cube" => ShapeKind::Cube,
        "plane" => ShapeKind::Plane,
        other => {
            eprintln!("unknown shape {other:?} (want sphere, cube, or plane)");
            return ExitCode::FAILURE;
        }
    };
    let texture = match arg(2, "gradient").as_str() {
        "checker" => TextureKind::Checker,
        "gradient" => TextureKind::Gradient,
        "noise" => TextureKind::Noise,
        other => {
            eprintln!("unknown texture {other:?} (want checker, gradient, or noise)");
            return ExitCode::FAILURE;
        }
    };
    let parse = |i: usize, default: &str, what: &str| {
        arg(i, default).parse::<u64>().map_err(|e| {
            eprintln!("bad {what}: {e}");
        })
    };
    let (Ok(count), Ok(depth), Ok(seed)) =
        (parse(3, "50000", "count"), parse(4, "8", "depth"), parse(5, "7", "seed"))
    else {
        return ExitCode::FAILURE;
    };

    let cloud = generate(&ShapeSpec {
        shape,
        count: count as usize,
        depth: depth as u8,
        texture,
        period: 8,
        seed,
    });
    if let Err(e) = save_ply(&cloud, path, true) {
        eprintln!("writing {path}: {e}");
        return ExitCode::FAILURE;
    }
    println!("{path}: {} points, depth {depth}", cloud.len());
    ExitCode::SUCCESS
}
