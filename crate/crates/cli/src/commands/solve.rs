use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde_json::json;
use xray_pose::codec::{
    compute_loss, encode_targets, CellPrediction, GridLayout, GridPredictions, LossBreakdown,
    VALUES_PER_PREDICTION,
};
use xray_pose::metrics::{aggregate, InstrumentModel, PoseEvaluation};
use xray_pose::pipeline::{estimate_pose, evaluate_estimate, PipelineConfig, PipelineError, PoseEstimate};
use xray_pose::sim::DatasetSample;

use super::{check_distinct, layouts, load_dataset, load_predictions, write_file, write_manifest};
use crate::config::RunConfig;
use crate::error::CliError;

enum Outcome {
    Solved(Box<PoseEstimate>),
    NoDetection,
    Failed(String),
}

struct Inputs {
    samples: Vec<DatasetSample>,
    predictions: BTreeMap<u64, Vec<CellPrediction>>,
    layouts: BTreeMap<[u32; 2], GridLayout>,
    model: InstrumentModel,
}

fn load_inputs(config: &RunConfig, outputs: &[&Path]) -> Result<Inputs, CliError> {
    let dataset_path = config.dataset_path();
    let predictions_path = config.predictions_path();
    for out in outputs {
        check_distinct(out, &[&dataset_path, &predictions_path])?;
    }
    let samples = load_dataset(&dataset_path)?;
    let predictions = load_predictions(&predictions_path, &samples)?;
    let model = config.instrument_model(samples.first().map(|s| s.instrument.as_str()))?;
    if let Some(s) = samples.iter().find(|s| s.instrument != model.name) {
        return Err(CliError::data(
            &dataset_path,
            format!("sample {} is a `{}`, not a `{}`", s.id, s.instrument, model.name),
        ));
    }
    let layouts = layouts(config, &samples)?;
    Ok(Inputs { samples, predictions, layouts, model })
}

fn run_pipeline(config: &RunConfig, inputs: &Inputs) -> Result<Vec<Outcome>, CliError> {
    let pipeline = PipelineConfig { min_confidence: config.min_confidence };
    let path = config.predictions_path();
    inputs
        .samples
        .par_iter()
        .map(|s| {
            let cells = inputs.predictions.get(&s.id).map(Vec::as_slice).unwrap_or(&[]);
            let layout = &inputs.layouts[&s.geometry.image_size_px];
            match estimate_pose(cells, layout, &inputs.model, &s.geometry, &pipeline) {
                Ok(est) => Ok(Outcome::Solved(Box::new(est))),
                Err(PipelineError::NoDetection) => Ok(Outcome::NoDetection),
                Err(PipelineError::Codec(e)) => Err(CliError::data(&path, format!("sample {}: {e}", s.id))),
                Err(e) => Ok(Outcome::Failed(e.to_string())),
            }
        })
        .collect()
}

fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

fn nums(xs: impl IntoIterator<Item = f64>) -> String {
    xs.into_iter().map(f17).collect::<Vec<_>>().join(",")
}

fn status_line(id: u64, outcome: &Outcome) -> Option<String> {
    match outcome {
        Outcome::Solved(_) => None,
        Outcome::NoDetection => Some(format!("{{\"id\":{id},\"status\":\"no_detection\"}}")),
        Outcome::Failed(reason) => Some(format!(
            "{{\"id\":{id},\"status\":\"failed\",\"reason\":{}}}",
            serde_json::to_string(reason).expect("string serializes")
        )),
    }
}

pub fn solve(config: &RunConfig) -> Result<(), CliError> {
    let out_path = config.out.join("poses.jsonl");
    let inputs = load_inputs(config, &[&out_path])?;
    let outcomes = run_pipeline(config, &inputs)?;

    let mut text = String::new();
    let mut solved = 0;
    for (s, o) in inputs.samples.iter().zip(&outcomes) {
        if let Some(line) = status_line(s.id, o) {
            text.push_str(&line);
        } else if let Outcome::Solved(est) = o {
            let (r, c) = est.pose().to_row_major();
            write!(
                text,
                "{{\"id\":{},\"status\":\"ok\",\"confidence\":{},\"reproj_px\":{},\"R\":[{}],\"C\":[{}]}}",
                s.id,
                f17(est.detection.confidence),
                f17(est.solution.mean_reprojection_error_px),
                nums(r),
                nums(c),
            )
            .expect("string write");
            solved += 1;
        }
        text.push('\n');
    }
    write_file(&out_path, text.as_bytes())?;
    write_manifest(
        config,
        "solve",
        json!({ "poses": out_path, "samples": inputs.samples.len(), "solved": solved }),
    )?;
    println!("solved {solved} of {} samples -> {}", inputs.samples.len(), out_path.display());
    Ok(())
}

/// Training-objective value of one sample's records against its labels.
/// Slots without a record count as confident background.
fn sample_loss(
    config: &RunConfig,
    sample: &DatasetSample,
    cells: &[CellPrediction],
    layout: &GridLayout,
) -> Result<LossBreakdown, String> {
    let mut background = [0.0; VALUES_PER_PREDICTION];
    background[VALUES_PER_PREDICTION - 1] = -20.0;
    let mut grid = GridPredictions::filled(layout.clone(), background);
    for c in cells {
        grid.set(&c.index, c.raw).map_err(|e| e.to_string())?;
    }
    let target = encode_targets(&sample.points_2d, layout, &config.codec.assignment());
    compute_loss(&grid, &target, &config.codec.weights(), &config.codec.confidence())
        .map_err(|e| e.to_string())
}

pub fn evaluate(config: &RunConfig) -> Result<(), CliError> {
    let evals_path = config.out.join("evaluations.jsonl");
    let report_path = config.out.join("report.csv");
    let inputs = load_inputs(config, &[&evals_path, &report_path])?;
    let thresholds = config.parsed_thresholds()?;
    let outcomes = run_pipeline(config, &inputs)?;

    let mut evals: Vec<PoseEvaluation> = Vec::new();
    let mut text = String::new();
    for (s, o) in inputs.samples.iter().zip(&outcomes) {
        if let Some(line) = status_line(s.id, o) {
            text.push_str(&line);
        } else if let Outcome::Solved(est) = o {
            let e = evaluate_estimate(s, est, &inputs.model, &thresholds)?;
            let flags: Vec<String> = e
                .flags
                .iter()
                .map(|f| format!("\"{}\":{}", f.threshold, f.pass))
                .collect();
            write!(
                text,
                concat!(
                    "{{\"id\":{},\"status\":\"ok\",\"add_mm\":{},\"add_s_mm\":{},\"metric_mm\":{},",
                    "\"reproj_px\":{},\"translation_mm\":{},\"angle_deg\":{},\"pass\":{{{}}}}}"
                ),
                s.id,
                f17(e.add_mm),
                f17(e.add_s_mm),
                f17(e.metric_mm),
                f17(e.reproj_err_px),
                f17(e.translation_err_mm),
                f17(e.angular_err_deg),
                flags.join(","),
            )
            .expect("string write");
            evals.push(e);
        }
        text.push('\n');
    }
    let missed = inputs.samples.len() - evals.len();
    if evals.is_empty() {
        return Err(CliError::data(
            config.predictions_path(),
            format!("none of the {} samples produced a pose", inputs.samples.len()),
        ));
    }
    let report = aggregate(&evals, &thresholds)?.with_missed(missed);

    let losses: Vec<LossBreakdown> = inputs
        .samples
        .par_iter()
        .map(|s| {
            let cells = inputs.predictions.get(&s.id).map(Vec::as_slice).unwrap_or(&[]);
            sample_loss(config, s, cells, &inputs.layouts[&s.geometry.image_size_px])
                .map_err(|m| CliError::data(config.predictions_path(), format!("sample {}: {m}", s.id)))
        })
        .collect::<Result<_, _>>()?;
    let mut csv = report.to_csv();
    let n = losses.len().max(1) as f64;
    for (name, get) in [
        ("loss_points", (|l: &LossBreakdown| l.points) as fn(&LossBreakdown) -> f64),
        ("loss_conf", |l| l.conf),
        ("loss_total", |l| l.total),
    ] {
        let mean = losses.iter().map(get).sum::<f64>() / n;
        writeln!(csv, "{name},{mean:.6},").expect("string write");
    }

    write_file(&evals_path, text.as_bytes())?;
    write_file(&report_path, csv.as_bytes())?;
    write_manifest(
        config,
        "evaluate",
        json!({
            "instrument": inputs.model.name,
            "diameter_mm": inputs.model.diameter_mm,
            "evaluations": evals_path,
            "report": report_path,
            "samples": inputs.samples.len(),
            "missed": missed,
        }),
    )?;
    println!("{report}");
    Ok(())
}
