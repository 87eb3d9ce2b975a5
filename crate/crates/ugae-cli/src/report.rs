//! `report`: build rate-distortion curves from two metrics CSVs
//! (baseline and enhanced runs) and summarize the enhanced pipeline's
//! Bjøntegaard deltas per cloud and per quality metric.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ugae::metrics::{
    bd_br, bd_psnr, MetricsError, MetricsRow, Psnr, RDCurve, RDPoint, METRICS_CSV_HEADER,
};

use crate::manifest::{file_record, RunManifest};
use crate::{cli_error, Category, CliResult, WithCategory};

/// Quality metrics reported, each with the rate axis it is charged
/// against: geometry distortion against geometry bits, color
/// distortion against geometry plus attribute bits.
const METRIC_NAMES: [&str; 4] = ["d1", "d2", "y", "yuv"];

fn metric_point(row: &MetricsRow, metric: &str) -> (f64, Psnr) {
    match metric {
        "d1" => (row.bpip_geom, row.d1),
        "d2" => (row.bpip_geom, row.d2),
        "y" => (row.bpip_geom + row.bpip_attr, row.y_psnr),
        "yuv" => (row.bpip_geom + row.bpip_attr, row.yuv_psnr),
        other => unreachable!("unknown metric {other}"),
    }
}

type CloudRows = BTreeMap<String, BTreeMap<u8, MetricsRow>>;

/// Parse a metrics CSV into rows grouped by cloud and keyed by rate code.
fn read_rows(path: &Path) -> CliResult<CloudRows> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| cli_error(Category::Io, format!("reading {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == METRICS_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(cli_error(
                Category::Data,
                format!(
                    "{}: unexpected header {header:?} (want {METRICS_CSV_HEADER:?})",
                    path.display()
                ),
            ))
        }
        None => {
            return Err(cli_error(
                Category::Data,
                format!("{}: empty metrics file", path.display()),
            ))
        }
    }

    let mut grouped: CloudRows = BTreeMap::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = MetricsRow::from_csv(line).map_err(|e| {
            cli_error(
                Category::Data,
                format!("{} line {}: {e}", path.display(), i + 1),
            )
        })?;
        let code = row.rate.code();
        let per_cloud = grouped.entry(row.cloud.clone()).or_default();
        if per_cloud.insert(code, row).is_some() {
            return Err(cli_error(
                Category::Data,
                format!(
                    "{} line {}: duplicate entry for that cloud and rate level",
                    path.display(),
                    i + 1
                ),
            ));
        }
    }
    if grouped.is_empty() {
        return Err(cli_error(
            Category::Data,
            format!("{}: no metric rows", path.display()),
        ));
    }
    Ok(grouped)
}

/// Both CSVs must cover the same clouds, and each cloud the same rate
/// levels, or the curves are not comparable.
fn check_alignment(baseline: &CloudRows, enhanced: &CloudRows) -> CliResult {
    for (side, ours, theirs) in [
        ("ugae", baseline, enhanced),
        ("baseline", enhanced, baseline),
    ] {
        for (cloud, rates) in ours {
            let other = theirs.get(cloud).ok_or_else(|| {
                cli_error(
                    Category::Metrics,
                    format!("cloud {cloud} has no {side} rows"),
                )
            })?;
            for (code, row) in rates {
                if !other.contains_key(code) {
                    return Err(cli_error(
                        Category::Metrics,
                        format!(
                            "cloud {cloud} is missing rate level {} in the {side} results",
                            row.rate.name()
                        ),
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Build one metric's rate-distortion curve. A lossless row has no finite
/// dB value, so it is left off the curve rather than pinned to an
/// arbitrary cap that would skew the interpolation.
fn curve(rows: &BTreeMap<u8, MetricsRow>, metric: &str, context: &str) -> CliResult<RDCurve> {
    let mut points = Vec::new();
    let mut lossless = 0usize;
    for row in rows.values() {
        let (rate, quality) = metric_point(row, metric);
        match quality.db() {
            Some(db) => points.push(RDPoint { rate, quality: db }),
            None => lossless += 1,
        }
    }
    if lossless > 0 && points.len() < 2 {
        return Err(cli_error(
            Category::Metrics,
            format!(
                "{context}: only {} finite point(s) remain after leaving \
                 {lossless} lossless row(s) off the curve",
                points.len()
            ),
        ));
    }
    points.sort_by(|a, b| a.rate.total_cmp(&b.rate));
    RDCurve::new(points)
        .map_err(|e| cli_error(Category::Metrics, format!("{context}: {e}")))
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_rd_file(
    out: &Path,
    cloud: &str,
    metric: &str,
    mode: &str,
    curve: &RDCurve,
) -> CliResult<PathBuf> {
    let path = out.join(format!("rd_{}_{metric}_{mode}.csv", sanitize(cloud)));
    let mut text = String::from("rate,quality\n");
    for p in curve.points() {
        text.push_str(&format!("{},{}\n", p.rate, p.quality));
    }
    std::fs::write(&path, text).category(Category::Io)?;
    Ok(path)
}

pub fn cmd_report(baseline_path: &Path, ugae_path: &Path, out: &Path) -> CliResult {
    let baseline = read_rows(baseline_path)?;
    let enhanced = read_rows(ugae_path)?;
    check_alignment(&baseline, &enhanced)?;
    std::fs::create_dir_all(out).category(Category::Io)?;

    let started = Instant::now();
    let mut summary = String::from("cloud,metric,bd_psnr_db,bd_br_pct\n");
    let mut outputs = Vec::new();
    let mut skipped_br = 0usize;
    println!("{:<20} {:>6} {:>12} {:>10}", "cloud", "metric", "bd_psnr_db", "bd_br_pct");
    for (cloud, base_rows) in &baseline {
        let enh_rows = &enhanced[cloud];
        for metric in METRIC_NAMES {
            let context = format!("cloud {cloud} metric {metric}");
            let ref_curve = curve(base_rows, metric, &context)?;
            let test_curve = curve(enh_rows, metric, &context)?;
            let dpsnr = bd_psnr(&ref_curve, &test_curve)
                .map_err(|e| cli_error(Category::Metrics, format!("{context}: {e}")))?;
            // The equal-quality rate comparison needs quality to increase
            // strictly with rate on both curves AND the two curves to share
            // a quality range. Where either fails — a plateau, a dip, or
            // one pipeline sitting entirely above the other — that one cell
            // is reported as unavailable rather than discarding the rest of
            // the report.
            let dbr = match bd_br(&ref_curve, &test_curve) {
                Ok(v) => Some(v),
                Err(MetricsError::NonMonotoneQuality)
                | Err(MetricsError::NoOverlap { axis: "quality" }) => {
                    skipped_br += 1;
                    None
                }
                Err(e) => {
                    return Err(cli_error(Category::Metrics, format!("{context}: {e}")))
                }
            };
            let dbr_csv = dbr.map_or_else(|| "n/a".into(), |v: f64| v.to_string());
            let dbr_cell = dbr.map_or_else(|| "n/a".into(), |v| format!("{v:.2}"));
            summary.push_str(&format!("{cloud},{metric},{dpsnr},{dbr_csv}\n"));
            println!("{cloud:<20} {metric:>6} {dpsnr:>12.4} {dbr_cell:>10}");
            outputs.push(write_rd_file(out, cloud, metric, "baseline", &ref_curve)?);
            outputs.push(write_rd_file(out, cloud, metric, "ugae", &test_curve)?);
        }
    }
    if skipped_br > 0 {
        println!(
            "note: {skipped_br} bd_br cell(s) are n/a: the equal-quality rate \
             comparison needs both curves to increase strictly in quality \
             and to share a quality range"
        );
    }

    let summary_path = out.join("bd_summary.csv");
    std::fs::write(&summary_path, summary).category(Category::Io)?;

    let mut manifest = RunManifest::new("report", serde_json::Value::Null);
    let inputs = vec![file_record(baseline_path)?, file_record(ugae_path)?];
    let mut output_records = vec![file_record(&summary_path)?];
    for p in &outputs {
        output_records.push(file_record(p)?);
    }
    manifest.push_stage("report", started, inputs, output_records);
    manifest.write(&out.join("manifest_report.json"))?;

    println!("report: {} cloud(s) -> {}", baseline.len(), summary_path.display());
    Ok(())
}
