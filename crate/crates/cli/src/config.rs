//! Run configuration: built-in defaults, overridden by a TOML file,
//! overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xray_pose::codec::{AnchorSet, AssignmentParams, ConfidenceParams, GridLayout, LossWeights};
use xray_pose::metrics::{default_thresholds, InstrumentModel, InstrumentSpec, Threshold};
use xray_pose::sim::{CaptureRanges, ConstraintMode, OracleConfig};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
    pub out: PathBuf,
    /// `cube`, `screw`, or the path of a JSON instrument file. Commands that
    /// read a dataset default to the instrument named in it.
    pub instrument: Option<String>,
    pub dataset: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub samples: usize,
    pub clinical: bool,
    pub thresholds: Vec<String>,
    pub min_confidence: f64,
    pub ranges: CaptureRanges,
    pub codec: CodecConfig,
    pub oracle: OracleSettings,
    pub bench: BenchConfig,
    pub calibrate: CalibrateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: 0,
            out: PathBuf::from("out"),
            instrument: None,
            dataset: None,
            predictions: None,
            samples: 1000,
            clinical: false,
            thresholds: default_thresholds().iter().map(ToString::to_string).collect(),
            min_confidence: 0.5,
            ranges: CaptureRanges::default(),
            codec: CodecConfig::default(),
            oracle: OracleSettings::default(),
            bench: BenchConfig::default(),
            calibrate: CalibrateConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecConfig {
    pub alpha: f64,
    pub beta: f64,
    pub normalized_confidence: bool,
    pub lambda_points: f64,
    pub lambda_conf: f64,
    /// Per scale (strides 8, 16, 32), anchor `[width, height]` in pixels.
    pub anchors: Vec<Vec<[f64; 2]>>,
    pub ratio_threshold: f64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        let c = ConfidenceParams::default();
        let w = LossWeights::default();
        Self {
            alpha: c.alpha,
            beta: c.beta,
            normalized_confidence: c.normalized,
            lambda_points: w.points,
            lambda_conf: w.conf,
            anchors: AnchorSet::default().0,
            ratio_threshold: AssignmentParams::default().ratio_threshold,
        }
    }
}

impl CodecConfig {
    pub fn confidence(&self) -> ConfidenceParams {
        ConfidenceParams { alpha: self.alpha, beta: self.beta, normalized: self.normalized_confidence }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights { points: self.lambda_points, conf: self.lambda_conf }
    }

    pub fn assignment(&self) -> AssignmentParams {
        AssignmentParams { ratio_threshold: self.ratio_threshold }
    }

    pub fn layout(&self, image_size: [u32; 2]) -> Result<GridLayout, CliError> {
        GridLayout::new(image_size, &AnchorSet(self.anchors.clone()))
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSettings {
    pub jitter_px: f64,
    pub planted_logit: f64,
    pub background_logit: f64,
    pub background_slots: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        let o = OracleConfig::default();
        Self {
            jitter_px: o.jitter_px,
            planted_logit: o.planted_logit,
            background_logit: o.background_logit,
            background_slots: o.background_slots,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub iterations: usize,
    pub warmup: usize,
    /// Correspondence counts for the PnP timing rows.
    pub points: Vec<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { iterations: 1000, warmup: 100, points: vec![9, 18, 36, 72] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    pub points: usize,
    pub noise_mm: Vec<f64>,
    pub trials: usize,
    pub collinear: bool,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self { points: 12, noise_mm: vec![0.0, 0.25, 0.5, 1.0, 2.0], trials: 25, collinear: false }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Canonical serialization; parsing it yields an identical config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Rejects inconsistent settings and normalises threshold spellings.
    pub fn validate(mut self) -> Result<Self, CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.ranges.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let thresholds = self.parsed_thresholds()?;
        if thresholds.is_empty() {
            return bad("at least one threshold is required".into());
        }
        self.thresholds = thresholds.iter().map(ToString::to_string).collect();
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return bad(format!("min_confidence {} outside [0, 1]", self.min_confidence));
        }
        let c = &self.codec;
        if !(c.alpha > 0.0 && c.beta > 0.0 && c.ratio_threshold > 1.0) {
            return bad("codec alpha, beta must be positive and ratio_threshold > 1".into());
        }
        if !(c.lambda_points >= 0.0 && c.lambda_conf >= 0.0) {
            return bad("loss weights must be non-negative".into());
        }
        if c.anchors.len() != 3 || c.anchors.iter().any(|s| s.is_empty()) {
            return bad("anchors need a non-empty list for each of the 3 scales".into());
        }
        if c.anchors.iter().flatten().flatten().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("anchor sizes must be positive".into());
        }
        let o = &self.oracle;
        if !(o.jitter_px >= 0.0 && o.jitter_px.is_finite()) {
            return bad(format!("jitter {} px", o.jitter_px));
        }
        if !(o.planted_logit > o.background_logit + 1.0) {
            return bad("planted_logit must exceed background_logit by more than 1".into());
        }
        if self.bench.iterations == 0 || self.bench.points.iter().any(|&n| n < 6) {
            return bad("bench needs iterations > 0 and at least 6 points per row".into());
        }
        if self.calibrate.trials == 0 || self.calibrate.noise_mm.iter().any(|n| !(*n >= 0.0)) {
            return bad("calibrate needs trials > 0 and non-negative noise levels".into());
        }
        Ok(self)
    }

    pub fn parsed_thresholds(&self) -> Result<Vec<Threshold>, CliError> {
        self.thresholds
            .iter()
            .map(|t| t.parse().map_err(|e: xray_pose::metrics::MetricsError| CliError::Config(e.to_string())))
            .collect()
    }

    pub fn mode(&self) -> ConstraintMode {
        if self.clinical {
            ConstraintMode::Clinical
        } else {
            ConstraintMode::Full
        }
    }

    pub fn oracle_config(&self) -> OracleConfig {
        OracleConfig {
            jitter_px: self.oracle.jitter_px,
            planted_logit: self.oracle.planted_logit,
            background_logit: self.oracle.background_logit,
            background_slots: self.oracle.background_slots,
            plant_signal: true,
            assignment: self.codec.assignment(),
            seed: self.seed,
        }
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset.clone().unwrap_or_else(|| self.out.join("dataset.jsonl"))
    }

    pub fn predictions_path(&self) -> PathBuf {
        self.predictions.clone().unwrap_or_else(|| self.out.join("predictions.jsonl"))
    }

    /// Instrument from the config, falling back to `dataset_default`.
    pub fn instrument_model(&self, dataset_default: Option<&str>) -> Result<InstrumentModel, CliError> {
        let name = self
            .instrument
            .as_deref()
            .or(dataset_default)
            .unwrap_or("cube");
        if let Some(m) = InstrumentModel::builtin(name) {
            return Ok(m);
        }
        let path = Path::new(name);
        if !path.exists() {
            return Err(CliError::Config(format!(
                "unknown instrument `{name}` (expected cube, screw or a JSON file)"
            )));
        }
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let spec: InstrumentSpec =
            serde_json::from_str(&text).map_err(|e| CliError::data(path, e))?;
        InstrumentModel::from_spec(&spec).map_err(|e| CliError::data(path, e))
    }
}
