//! `prepare`: voxelize raw PLY clouds to the configured grid depth and
//! split each into sub-clouds no larger than the configured bound.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use ugae::cloud::voxelize;
use ugae::ply::{load_ply, save_ply};
use ugae::spatial::partition_kdtree;

use crate::config::PipelineConfig;
use crate::manifest::{file_record, RunManifest};
use crate::{cli_error, Category, CliResult, WithCategory};

#[derive(Serialize)]
struct PartEntry {
    file: String,
    points: usize,
}

#[derive(Serialize)]
struct CloudEntry {
    source: String,
    depth: u8,
    points: usize,
    parts: Vec<PartEntry>,
}

/// Sorted list of .ply files directly inside `dir`.
pub fn list_ply_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    let entries = std::fs::read_dir(dir)
        .map_err(|e| cli_error(Category::Io, format!("reading {}: {e}", dir.display())))?;
    for entry in entries {
        let entry = entry.category(Category::Io)?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("ply") && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn cmd_prepare(config: &PipelineConfig, input: &Path, out: &Path) -> CliResult {
    let files = list_ply_files(input)?;
    if files.is_empty() {
        return Err(cli_error(
            Category::Data,
            format!("no .ply files found in {}", input.display()),
        ));
    }
    std::fs::create_dir_all(out).category(Category::Io)?;

    let mut manifest = RunManifest::new("prepare", config.snapshot());
    let mut index = Vec::new();
    let mut failures = Vec::new();
    let started = Instant::now();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();

    for path in &files {
        match prepare_one(config, path, out) {
            Ok((entry, part_paths)) => {
                inputs.push(file_record(path)?);
                for p in &part_paths {
                    outputs.push(file_record(p)?);
                }
                println!(
                    "prepared {}: {} points -> {} part(s)",
                    path.display(),
                    entry.points,
                    entry.parts.len()
                );
                index.push(entry);
            }
            Err(e) => {
                eprintln!("error[{}]: {}: {:#}", e.category.name(), path.display(), e.source);
                failures.push(path.display().to_string());
            }
        }
    }

    let index_path = out.join("index.json");
    let bytes = serde_json::to_vec_pretty(&index).category(Category::Io)?;
    std::fs::write(&index_path, bytes).category(Category::Io)?;
    outputs.push(file_record(&index_path)?);

    manifest.push_stage("prepare", started, inputs, outputs);
    manifest.write(&out.join("manifest.json"))?;

    if !failures.is_empty() {
        return Err(cli_error(
            Category::Data,
            format!(
                "{} of {} input file(s) failed: {}",
                failures.len(),
                files.len(),
                failures.join(", ")
            ),
        ));
    }
    println!("prepare: {} cloud(s) -> {}", index.len(), out.display());
    Ok(())
}

fn prepare_one(
    config: &PipelineConfig,
    path: &Path,
    out: &Path,
) -> CliResult<(CloudEntry, Vec<PathBuf>)> {
    let raw = load_ply(path).category(Category::Data)?;
    let coords: Vec<[f64; 3]> = raw
        .coords()
        .iter()
        .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
        .collect();
    let cloud = voxelize(&coords, raw.attrs(), config.depth).category(Category::Data)?;
    let parts = partition_kdtree(&cloud, config.max_points);

    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| cli_error(Category::Data, format!("bad file name {}", path.display())))?;

    let mut part_entries = Vec::new();
    let mut part_paths = Vec::new();
    for (i, part) in parts.iter().enumerate() {
        let name = format!("{stem}_p{i:02}.ply");
        let part_path = out.join(&name);
        save_ply(part, &part_path, true).category(Category::Io)?;
        part_entries.push(PartEntry {
            file: name,
            points: part.len(),
        });
        part_paths.push(part_path);
    }
    Ok((
        CloudEntry {
            source: path.display().to_string(),
            depth: cloud.depth(),
            points: cloud.len(),
            parts: part_entries,
        },
        part_paths,
    ))
}
