use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{add, add_s, InstrumentModel, MetricsError, Symmetry};
use crate::geometry::{Pixel, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// Fraction of the object diameter.
    DiameterFraction(f64),
    /// Millimetres.
    Absolute(f64),
}

impl Threshold {
    pub fn limit_mm(&self, diameter_mm: f64) -> f64 {
        match *self {
            Threshold::DiameterFraction(f) => f * diameter_mm,
            Threshold::Absolute(mm) => mm,
        }
    }
}

/// `0.1d`, `0.05d`, `1mm`, `0.02d`.
pub fn default_thresholds() -> Vec<Threshold> {
    vec![
        Threshold::DiameterFraction(0.1),
        Threshold::DiameterFraction(0.05),
        Threshold::Absolute(1.0),
        Threshold::DiameterFraction(0.02),
    ]
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::DiameterFraction(x) => write!(f, "{x}d"),
            Threshold::Absolute(x) => write!(f, "{x}mm"),
        }
    }
}

impl FromStr for Threshold {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let parse = |num: &str| {
            num.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| *x > 0.0 && x.is_finite())
                .ok_or_else(|| MetricsError::InvalidThreshold(s.to_owned()))
        };
        if let Some(num) = s.strip_suffix("mm") {
            Ok(Threshold::Absolute(parse(num)?))
        } else if let Some(num) = s.strip_suffix('d') {
            Ok(Threshold::DiameterFraction(parse(num)?))
        } else {
            Err(MetricsError::InvalidThreshold(s.to_owned()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFlag {
    pub threshold: Threshold,
    pub limit_mm: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseEvaluation {
    pub sample_id: u64,
    pub add_mm: f64,
    pub add_s_mm: f64,
    /// ADD-S for symmetric instruments, ADD otherwise; thresholds apply to it.
    pub metric_mm: f64,
    pub reproj_err_px: f64,
    pub translation_err_mm: f64,
    pub angular_err_deg: f64,
    pub flags: Vec<ThresholdFlag>,
}

/// Mean Euclidean distance between corresponding pixels.
pub fn reprojection_error_2d(a: &[Pixel], b: &[Pixel]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a.iter().zip(b).map(|(p, q)| (p - q).norm()).sum();
    Ok(sum / a.len() as f64)
}

pub fn translation_error(gt: &RigidTransform, pred: &RigidTransform) -> f64 {
    (gt.translation - pred.translation).norm()
}

/// Rotation error in degrees. For axis-symmetric instruments only the
/// direction of the axis is compared.
pub fn angular_error(gt: &RigidTransform, pred: &RigidTransform, symmetry: &Symmetry) -> f64 {
    match symmetry {
        Symmetry::Asymmetric => gt.rotation_angle_to(pred).to_degrees(),
        Symmetry::ContinuousAxis { axis } => {
            let a = nalgebra::Vector3::from(*axis).normalize();
            let (u, v) = (gt.rotation * a, pred.rotation * a);
            u.cross(&v).norm().atan2(u.dot(&v)).to_degrees()
        }
    }
}

pub fn evaluate_pose(
    sample_id: u64,
    model: &InstrumentModel,
    gt: &RigidTransform,
    pred: &RigidTransform,
    gt_px: &[Pixel],
    pred_px: &[Pixel],
    thresholds: &[Threshold],
) -> Result<PoseEvaluation, MetricsError> {
    let add_mm = add(model, gt, pred)?;
    let add_s_mm = add_s(model, gt, pred)?;
    let metric_mm = if model.symmetry.is_symmetric() { add_s_mm } else { add_mm };
    let flags = thresholds
        .iter()
        .map(|&threshold| {
            let limit_mm = threshold.limit_mm(model.diameter_mm);
            ThresholdFlag { threshold, limit_mm, pass: metric_mm < limit_mm }
        })
        .collect();
    Ok(PoseEvaluation {
        sample_id,
        add_mm,
        add_s_mm,
        metric_mm,
        reproj_err_px: reprojection_error_2d(gt_px, pred_px)?,
        translation_err_mm: translation_error(gt, pred),
        angular_err_deg: angular_error(gt, pred, &model.symmetry),
        flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRate {
    pub threshold: Threshold,
    pub passed: usize,
    pub total: usize,
}

impl ThresholdRate {
    pub fn percent(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.passed as f64 / self.total as f64
        }
    }
}

/// Mean and sample (n − 1) standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Samples that produced a pose.
    pub evaluated: usize,
    /// Samples without a usable detection; they fail every threshold.
    pub missed: usize,
    pub rates: Vec<ThresholdRate>,
    pub translation_mm: MeanStd,
    pub angle_deg: MeanStd,
    pub metric_mm: MeanStd,
    pub reproj_px: MeanStd,
}

pub fn aggregate(
    evals: &[PoseEvaluation],
    thresholds: &[Threshold],
) -> Result<AccuracyReport, MetricsError> {
    if evals.is_empty() {
        return Err(MetricsError::EmptyEvaluations);
    }
    let mut rates = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let mut passed = 0;
        for e in evals {
            let flag = e
                .flags
                .iter()
                .find(|f| f.threshold == threshold)
                .ok_or_else(|| MetricsError::MissingThreshold(e.sample_id as usize, threshold.to_string()))?;
            passed += flag.pass as usize;
        }
        rates.push(ThresholdRate { threshold, passed, total: evals.len() });
    }
    let stat = |f: fn(&PoseEvaluation) -> f64| {
        MeanStd::of(&evals.iter().map(f).collect::<Vec<_>>()).expect("non-empty")
    };
    Ok(AccuracyReport {
        evaluated: evals.len(),
        missed: 0,
        rates,
        translation_mm: stat(|e| e.translation_err_mm),
        angle_deg: stat(|e| e.angular_err_deg),
        metric_mm: stat(|e| e.metric_mm),
        reproj_px: stat(|e| e.reproj_err_px),
    })
}

impl AccuracyReport {
    /// Counts `missed` additional samples as failures at every threshold.
    pub fn with_missed(mut self, missed: usize) -> Self {
        self.missed += missed;
        for r in &mut self.rates {
            r.total += missed;
        }
        self
    }

    pub fn rate(&self, threshold: Threshold) -> Option<f64> {
        self.rates.iter().find(|r| r.threshold == threshold).map(|r| r.percent())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value,std\n");
        for r in &self.rates {
            out.push_str(&format!("pass@{},{:.4},\n", r.threshold, r.percent()));
        }
        let mut row = |name: &str, m: &MeanStd| {
            out.push_str(&format!("{name},{:.6},{:.6}\n", m.mean, m.std));
        };
        row("translation_mm", &self.translation_mm);
        row("angle_deg", &self.angle_deg);
        row("add_mm", &self.metric_mm);
        row("reproj_px", &self.reproj_px);
        out.push_str(&format!("evaluated,{},\nmissed,{},\n", self.evaluated, self.missed));
        out
    }
}

impl fmt::Display for AccuracyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let total = self.evaluated + self.missed;
        writeln!(f, "samples: {total} ({} without detection)", self.missed)?;
        for r in &self.rates {
            writeln!(f, "  < {:<6} {:>7.2} %", r.threshold.to_string(), r.percent())?;
        }
        writeln!(
            f,
            "  translation {:.3} ± {:.3} mm",
            self.translation_mm.mean, self.translation_mm.std
        )?;
        write!(f, "  rotation    {:.3} ± {:.3} deg", self.angle_deg.mean, self.angle_deg.std)
    }
}
