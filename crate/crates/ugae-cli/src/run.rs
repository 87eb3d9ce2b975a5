//! `run`: compress one cloud at one rate level, decode it back, score
//! the result, and append a metrics row. `decode`: rebuild a PLY from a
//! bitstream file alone, so encode and decode can live in separate
//! processes.

use std::path::Path;
use std::time::Instant;

use ugae::codec::{Bitstream, RateLevel};
use ugae::learner::Mlp;
use ugae::metrics::METRICS_CSV_HEADER;
use ugae::pipeline::{self, Mode, PipelineError};
use ugae::ply::{load_ply, save_ply};

use crate::config::PipelineConfig;
use crate::manifest::{file_record, RunManifest};
use crate::{cli_error, Category, CliError, CliResult, WithCategory};

/// Map a pipeline failure onto the CLI's failure taxonomy.
fn pipeline_category(e: PipelineError) -> CliError {
    let category = match &e {
        PipelineError::MissingAttributes => Category::Data,
        PipelineError::MissingPogeModel => Category::Model,
        PipelineError::Cloud(_) => Category::Data,
        PipelineError::Codec(_) => Category::Bitstream,
        PipelineError::Poge(_) => Category::Model,
        PipelineError::Pae(_) => Category::Data,
        PipelineError::Poae(_) => Category::Model,
        PipelineError::Spatial(_) => Category::Data,
        PipelineError::Metrics(_) => Category::Metrics,
    };
    CliError {
        category,
        source: e.into(),
    }
}

fn load_model(path: &Path, role: &str) -> CliResult<Mlp> {
    Mlp::load(path).map_err(|e| {
        cli_error(
            Category::Model,
            format!("loading {role} checkpoint {}: {e}", path.display()),
        )
    })
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_run(
    config: &PipelineConfig,
    cloud_path: &Path,
    rate: &str,
    mode: &str,
    out: &Path,
    poge_path: Option<&Path>,
    poae_path: Option<&Path>,
) -> CliResult {
    let rate: RateLevel = rate
        .parse()
        .map_err(|e| cli_error(Category::Config, format!("rate level {rate:?}: {e}")))?;
    let mode: Mode = mode
        .parse()
        .map_err(|e| cli_error(Category::Config, format!("mode {mode:?}: {e}")))?;

    let (poge, poae) = match mode {
        Mode::Baseline => {
            if poge_path.is_some() || poae_path.is_some() {
                return Err(cli_error(
                    Category::Config,
                    "baseline mode takes no model checkpoints",
                ));
            }
            (None, None)
        }
        Mode::Ugae => {
            let poge = poge_path.ok_or_else(|| {
                cli_error(Category::Model, "ugae mode requires --poge <checkpoint>")
            })?;
            let poae = poae_path.ok_or_else(|| {
                cli_error(Category::Model, "ugae mode requires --poae <checkpoint>")
            })?;
            (Some(load_model(poge, "occupancy")?), Some(load_model(poae, "attribute")?))
        }
    };

    std::fs::create_dir_all(out).category(Category::Io)?;
    let original = load_ply(cloud_path).category(Category::Data)?;
    let stem = cloud_path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| {
            cli_error(Category::Data, format!("bad file name {}", cloud_path.display()))
        })?;

    let started = Instant::now();
    let enc = pipeline::encode(&original, rate, mode, poge.as_ref(), config.recolor_k)
        .map_err(pipeline_category)?;
    let dec = pipeline::decode(&enc.bitstream, poge.as_ref(), poae.as_ref())
        .map_err(pipeline_category)?;
    let row = pipeline::evaluate(stem, &original, &enc, &dec).map_err(pipeline_category)?;

    let bin_path = out.join(format!("{stem}_{}_{}.bin", rate.name(), mode.name()));
    std::fs::write(&bin_path, enc.bitstream.to_bytes()).category(Category::Io)?;
    let ply_path = out.join(format!("{stem}_{}_{}.ply", rate.name(), mode.name()));
    save_ply(&dec.cloud, &ply_path, true).category(Category::Io)?;

    let csv_path = out.join(format!("metrics_{}.csv", mode.name()));
    let mut csv = if csv_path.is_file() {
        std::fs::read_to_string(&csv_path).category(Category::Io)?
    } else {
        format!("{METRICS_CSV_HEADER}\n")
    };
    csv.push_str(&row.to_csv());
    csv.push('\n');
    std::fs::write(&csv_path, csv).category(Category::Io)?;

    let mut manifest = RunManifest::new(
        format!("run {} {} {}", stem, rate.name(), mode.name()),
        config.snapshot(),
    );
    let mut inputs = vec![file_record(cloud_path)?];
    if let Some(p) = poge_path {
        inputs.push(file_record(p)?);
    }
    if let Some(p) = poae_path {
        inputs.push(file_record(p)?);
    }
    let outputs = vec![
        file_record(&bin_path)?,
        file_record(&ply_path)?,
        file_record(&csv_path)?,
    ];
    manifest.push_stage("run", started, inputs, outputs);
    manifest.write(&out.join(format!(
        "manifest_{stem}_{}_{}.json",
        rate.name(),
        mode.name()
    )))?;

    println!("{METRICS_CSV_HEADER}");
    println!("{}", row.to_csv());
    Ok(())
}

pub fn cmd_decode(
    bitstream_path: &Path,
    out: &Path,
    poge_path: Option<&Path>,
    poae_path: Option<&Path>,
) -> CliResult {
    let bytes = std::fs::read(bitstream_path).category(Category::Io)?;
    let bitstream = Bitstream::from_bytes(&bytes).category(Category::Bitstream)?;
    let poge = poge_path.map(|p| load_model(p, "occupancy")).transpose()?;
    let poae = poae_path.map(|p| load_model(p, "attribute")).transpose()?;

    let decoded = pipeline::decode(&bitstream, poge.as_ref(), poae.as_ref())
        .map_err(pipeline_category)?;
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).category(Category::Io)?;
        }
    }
    save_ply(&decoded.cloud, out, true).category(Category::Io)?;
    println!(
        "decoded {} -> {} ({} points)",
        bitstream_path.display(),
        out.display(),
        decoded.cloud.len()
    );
    Ok(())
}
