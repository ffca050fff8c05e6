use std::fmt::Write as _;

use serde::Serialize;
use serde_json::json;
use xray_pose::pnp::{register_point_sets, PnpError};
use xray_pose::sim::{sample_link, simulate_dome_link, DomeLayout};

use super::{write_file, write_manifest};
use crate::config::RunConfig;
use crate::error::CliError;

/// Largest link rotation and translation component drawn per trial.
const LINK_MAX_ANGLE_DEG: f64 = 30.0;
const LINK_MAX_TRANSLATION_MM: f64 = 300.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub noise_mm: f64,
    pub trials: usize,
    /// Trials the registration rejected as degenerate.
    pub degenerate: usize,
    pub median_rotation_deg: Option<f64>,
    pub median_translation_mm: Option<f64>,
    pub median_rms_mm: Option<f64>,
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 { xs[n / 2] } else { (xs[n / 2 - 1] + xs[n / 2]) / 2.0 })
}

/// Link-recovery error per noise level. Trial `t` uses the same link and
/// the same unit noise draws at every level.
pub fn run_calibration(config: &RunConfig) -> Result<Vec<CalibrationRow>, CliError> {
    let c = &config.calibrate;
    let layout = if c.collinear {
        DomeLayout::Collinear { spacing_mm: 10.0 }
    } else {
        DomeLayout::default()
    };
    let mut rows = Vec::with_capacity(c.noise_mm.len());
    for &noise_mm in &c.noise_mm {
        let (mut rot, mut trans, mut rms) = (Vec::new(), Vec::new(), Vec::new());
        let mut degenerate = 0;
        for trial in 0..c.trials as u64 {
            let link = sample_link(config.seed, trial, LINK_MAX_ANGLE_DEG, LINK_MAX_TRANSLATION_MM);
            let (optical, xray) =
                simulate_dome_link(c.points, layout, &link, noise_mm, config.seed.wrapping_add(trial))
                    .map_err(|e| CliError::Config(e.to_string()))?;
            match register_point_sets(&optical, &xray) {
                Ok(reg) => {
                    rot.push(reg.transform.rotation_angle_to(&link).to_degrees());
                    trans.push((reg.transform.translation - link.translation).norm());
                    rms.push(reg.rms_residual);
                }
                Err(PnpError::Degenerate(_)) => degenerate += 1,
                Err(e) => return Err(e.into()),
            }
        }
        rows.push(CalibrationRow {
            noise_mm,
            trials: c.trials,
            degenerate,
            median_rotation_deg: median(rot),
            median_translation_mm: median(trans),
            median_rms_mm: median(rms),
        });
    }
    Ok(rows)
}

pub fn calibrate(config: &RunConfig) -> Result<(), CliError> {
    let rows = run_calibration(config)?;
    let mut csv = String::from(
        "noise_mm,trials,degenerate,median_rotation_deg,median_translation_mm,median_rms_mm\n",
    );
    let cell = |x: Option<f64>| x.map(|v| format!("{v:.6e}")).unwrap_or_default();
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.noise_mm,
            r.trials,
            r.degenerate,
            cell(r.median_rotation_deg),
            cell(r.median_translation_mm),
            cell(r.median_rms_mm)
        )
        .expect("string write");
    }
    let path = config.out.join("calibrate.csv");
    write_file(&path, csv.as_bytes())?;
    write_manifest(config, "calibrate", json!({ "report": path, "rows": rows.len() }))?;
    print!("{csv}");
    Ok(())
}
