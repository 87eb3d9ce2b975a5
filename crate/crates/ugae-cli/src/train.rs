//! `train`: fit the occupancy model or the attribute model on every
//! prepared sub-cloud, exercising each configured rate level.

use std::path::Path;
use std::time::Instant;

use ugae::cloud::PointCloud;
use ugae::codec::quantize_geometry;
use ugae::learner::Mlp;
use ugae::pipeline::attr_training_pair;
use ugae::poae::{train_poae, AttrPair};
use ugae::poge::{train_poge, GeometryPair};
use ugae::ply::load_ply;

use crate::config::PipelineConfig;
use crate::manifest::{file_record, RunManifest};
use crate::prepare::list_ply_files;
use crate::{cli_error, Category, CliResult, WithCategory};

pub fn cmd_train(
    config: &PipelineConfig,
    prepared: &Path,
    stage: &str,
    out: &Path,
    poge_path: Option<&Path>,
) -> CliResult {
    let files = list_ply_files(prepared)?;
    if files.is_empty() {
        return Err(cli_error(
            Category::Data,
            format!("no prepared .ply files in {}", prepared.display()),
        ));
    }
    std::fs::create_dir_all(out).category(Category::Io)?;

    let mut clouds = Vec::new();
    for path in &files {
        clouds.push(load_ply(path).category(Category::Data)?);
    }

    let mut manifest = RunManifest::new(format!("train {stage}"), config.snapshot());
    let started = Instant::now();
    let mut inputs = Vec::new();
    for path in &files {
        inputs.push(file_record(path)?);
    }

    let (model, losses, model_name) = match stage {
        "poge" => {
            let (model, losses) = train_geometry(config, &clouds)?;
            (model, losses, "poge.model")
        }
        "poae" => {
            let default_ckpt = out.join("poge.model");
            let ckpt = poge_path.unwrap_or(&default_ckpt);
            if !ckpt.is_file() {
                return Err(cli_error(
                    Category::Model,
                    format!(
                        "train poae requires an occupancy checkpoint; {} not found (train poge first or pass --poge)",
                        ckpt.display()
                    ),
                ));
            }
            let poge_model = Mlp::load(ckpt).category(Category::Model)?;
            inputs.push(file_record(ckpt)?);
            let (model, losses) = train_attributes(config, &clouds, &poge_model)?;
            (model, losses, "poae.model")
        }
        other => {
            return Err(cli_error(
                Category::Config,
                format!("unknown training stage {other:?}"),
            ))
        }
    };

    let model_path = out.join(model_name);
    model.save(&model_path).category(Category::Io)?;
    let loss_path = out.join(format!("{stage}_loss.csv"));
    let mut csv = String::from("epoch,loss\n");
    for (epoch, loss) in losses.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", epoch + 1, loss));
    }
    std::fs::write(&loss_path, csv).category(Category::Io)?;

    let outputs = vec![file_record(&model_path)?, file_record(&loss_path)?];
    manifest.push_stage(format!("train {stage}"), started, inputs, outputs);
    manifest.write(&out.join(format!("manifest_train_{stage}.json")))?;

    println!(
        "trained {stage} on {} cloud(s) x {} rate(s): final loss {:.6} -> {}",
        clouds.len(),
        config.rates.len(),
        losses.last().copied().unwrap_or(f64::NAN),
        model_path.display()
    );
    Ok(())
}

fn train_geometry(config: &PipelineConfig, clouds: &[PointCloud]) -> CliResult<(Mlp, Vec<f64>)> {
    let mut pairs = Vec::new();
    for cloud in clouds {
        for rate in config.rate_levels() {
            let lossy = quantize_geometry(cloud, rate.pqs()).category(Category::Data)?;
            pairs.push(GeometryPair {
                original: cloud.without_attrs(),
                lossy: lossy.without_attrs(),
                pqs: rate.pqs(),
            });
        }
    }
    train_poge(&pairs, &config.poge_config()).category(Category::Model)
}

fn train_attributes(
    config: &PipelineConfig,
    clouds: &[PointCloud],
    poge_model: &Mlp,
) -> CliResult<(Mlp, Vec<f64>)> {
    let mut pairs: Vec<AttrPair> = Vec::new();
    for cloud in clouds {
        for rate in config.rate_levels() {
            let pair = attr_training_pair(cloud, rate, poge_model, config.recolor_k)
                .category(Category::Data)?;
            pairs.push(pair);
        }
    }
    train_poae(&pairs, &config.poae_config()).category(Category::Model)
}
