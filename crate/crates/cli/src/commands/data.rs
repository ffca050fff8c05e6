use rayon::prelude::*;
use serde_json::json;
use xray_pose::codec::{write_predictions, PredictionRecord};
use xray_pose::sim::{generate_dataset, oracle_predict, write_dataset, CaptureSampler, Rig};

use super::{check_distinct, layouts, load_dataset, write_file, write_manifest};
use crate::config::RunConfig;
use crate::error::CliError;

pub fn generate(config: &RunConfig) -> Result<(), CliError> {
    let model = config.instrument_model(None)?;
    let sampler = CaptureSampler::new(&config.ranges, config.seed, config.mode())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let path = config.dataset_path();
    let data = generate_dataset(&model, &sampler, &Rig::default(), config.samples)
        .map_err(CliError::sim(&path))?;

    let mut buf = Vec::new();
    write_dataset(&mut buf, &data.samples).map_err(CliError::sim(&path))?;
    write_file(&path, &buf)?;
    write_manifest(
        config,
        "generate",
        json!({
            "dataset": path,
            "instrument": {
                "name": model.name,
                "diameter_mm": model.diameter_mm,
                "vertices": model.vertices.len(),
                "symmetry": model.symmetry,
            },
            "constraint_mode": sampler.mode(),
            "effective_ranges": sampler.ranges(),
            "lattice_size": sampler.lattice().len(),
            "samples": data.samples.len(),
            "attempts": data.attempts,
            "rejection_rate": data.rejection_rate(),
        }),
    )?;
    println!(
        "generated {} {} samples -> {} (rejection rate {:.1} %)",
        data.samples.len(),
        model.name,
        path.display(),
        100.0 * data.rejection_rate()
    );
    Ok(())
}

pub fn predict_oracle(config: &RunConfig) -> Result<(), CliError> {
    let dataset_path = config.dataset_path();
    let out_path = config.predictions_path();
    check_distinct(&out_path, &[&dataset_path])?;
    let samples = load_dataset(&dataset_path)?;
    let layouts = layouts(config, &samples)?;
    let oracle = config.oracle_config();
    let per_sample: Vec<Vec<PredictionRecord>> = samples
        .par_iter()
        .map(|s| {
            oracle_predict(s, &layouts[&s.geometry.image_size_px], &oracle)
                .map_err(|e| CliError::Config(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let records: Vec<PredictionRecord> = per_sample.into_iter().flatten().collect();

    let mut buf = Vec::new();
    write_predictions(&mut buf, &records).map_err(CliError::codec(&out_path))?;
    write_file(&out_path, &buf)?;
    write_manifest(
        config,
        "predict-oracle",
        json!({
            "dataset": dataset_path,
            "predictions": out_path,
            "samples": samples.len(),
            "records": records.len(),
        }),
    )?;
    println!(
        "wrote {} prediction records for {} samples -> {}",
        records.len(),
        samples.len(),
        out_path.display()
    );
    Ok(())
}
