//! Prediction files: one candidate slot per line,
//!
//! ```text
//! {"id":3,"scale":1,"i":12,"j":7,"anchor":0,"values":[v0, …, v18]}
//! ```
//!
//! `id` names the dataset sample, `values` holds the 19 raw head outputs.
//! Numbers are written with 17 significant digits.

use std::io::{BufRead, Write};

use serde::Deserialize;

use super::{CellIndex, CellPrediction, CodecError, RawPrediction, VALUES_PER_PREDICTION};
use crate::fmt::float17;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRecord {
    pub sample_id: u64,
    pub prediction: CellPrediction,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    id: u64,
    scale: usize,
    i: u32,
    j: u32,
    anchor: usize,
    values: Vec<f64>,
}

pub fn write_predictions<W: Write>(mut out: W, records: &[PredictionRecord]) -> Result<(), CodecError> {
    for r in records {
        let CellIndex { scale, i, j, anchor } = r.prediction.index;
        if let Some(v) = r.prediction.raw.iter().find(|v| !v.is_finite()) {
            return Err(CodecError::ShapeMismatch(format!(
                "sample {}: non-finite value {v} cannot be written",
                r.sample_id
            )));
        }
        let values: Vec<String> = r.prediction.raw.iter().map(|v| float17(*v)).collect();
        writeln!(
            out,
            "{{\"id\":{},\"scale\":{scale},\"i\":{i},\"j\":{j},\"anchor\":{anchor},\"values\":[{}]}}",
            r.sample_id,
            values.join(",")
        )?;
    }
    Ok(())
}

pub fn read_predictions<R: BufRead>(input: R) -> Result<Vec<PredictionRecord>, CodecError> {
    let mut records = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_line(&line, n + 1)?);
    }
    Ok(records)
}

pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRecord>, CodecError> {
    read_predictions(text.as_bytes())
}

fn parse_line(line: &str, number: usize) -> Result<PredictionRecord, CodecError> {
    let malformed = |message: String| CodecError::Malformed {
        line: number,
        message,
    };
    let parsed: Line = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    let raw: RawPrediction = parsed.values.as_slice().try_into().map_err(|_| {
        malformed(format!(
            "expected {VALUES_PER_PREDICTION} values, found {}",
            parsed.values.len()
        ))
    })?;
    Ok(PredictionRecord {
        sample_id: parsed.id,
        prediction: CellPrediction {
            index: CellIndex {
                scale: parsed.scale,
                i: parsed.i,
                j: parsed.j,
                anchor: parsed.anchor,
            },
            raw,
        },
    })
}
