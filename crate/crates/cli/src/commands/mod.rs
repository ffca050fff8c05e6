mod bench;
mod calibrate;
mod data;
mod solve;

pub use bench::{bench, run_bench, BenchRow};
pub use calibrate::{calibrate, run_calibration, CalibrationRow};
pub use data::{generate, predict_oracle};
pub use solve::{evaluate, solve};

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use xray_pose::codec::{read_predictions, CellPrediction, GridLayout};
use xray_pose::sim::{read_dataset, DatasetSample};

use crate::config::RunConfig;
use crate::error::CliError;

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    fs::write(path, contents).map_err(CliError::io(path))
}

/// `<out>/<command>.manifest.json`: tool version, the effective config and
/// a command-specific summary.
pub(crate) fn write_manifest(
    config: &RunConfig,
    command: &str,
    summary: impl Serialize,
) -> Result<PathBuf, CliError> {
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
        "summary": summary,
    });
    let path = config.out.join(format!("{command}.manifest.json"));
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_file(&path, text.as_bytes())?;
    Ok(path)
}

pub(crate) fn load_dataset(path: &Path) -> Result<Vec<DatasetSample>, CliError> {
    let file = fs::File::open(path).map_err(CliError::io(path))?;
    let samples = read_dataset(BufReader::new(file)).map_err(CliError::sim(path))?;
    let mut seen = std::collections::BTreeSet::new();
    for s in &samples {
        if !seen.insert(s.id) {
            return Err(CliError::data(path, format!("duplicate sample id {}", s.id)));
        }
    }
    Ok(samples)
}

/// Prediction records grouped by sample id. Every id must exist in
/// `samples`.
pub(crate) fn load_predictions(
    path: &Path,
    samples: &[DatasetSample],
) -> Result<BTreeMap<u64, Vec<CellPrediction>>, CliError> {
    let file = fs::File::open(path).map_err(CliError::io(path))?;
    let records = read_predictions(BufReader::new(file)).map_err(CliError::codec(path))?;
    let known: std::collections::BTreeSet<u64> = samples.iter().map(|s| s.id).collect();
    let mut grouped: BTreeMap<u64, Vec<CellPrediction>> = BTreeMap::new();
    for r in records {
        if !known.contains(&r.sample_id) {
            return Err(CliError::data(
                path,
                format!("sample id {} is not in the dataset", r.sample_id),
            ));
        }
        grouped.entry(r.sample_id).or_default().push(r.prediction);
    }
    Ok(grouped)
}

/// Grid layouts keyed by image size.
pub(crate) fn layouts(
    config: &RunConfig,
    samples: &[DatasetSample],
) -> Result<BTreeMap<[u32; 2], GridLayout>, CliError> {
    let mut out = BTreeMap::new();
    for s in samples {
        let size = s.geometry.image_size_px;
        if let std::collections::btree_map::Entry::Vacant(e) = out.entry(size) {
            e.insert(config.codec.layout(size)?);
        }
    }
    Ok(out)
}

/// Refuses to overwrite one of the command's inputs.
pub(crate) fn check_distinct(output: &Path, inputs: &[&Path]) -> Result<(), CliError> {
    let canon = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    if inputs.iter().any(|i| canon(i) == canon(output)) {
        return Err(CliError::Config(format!(
            "output {} would overwrite an input",
            output.display()
        )));
    }
    Ok(())
}
