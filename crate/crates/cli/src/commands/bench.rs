use std::fmt::Write as _;
use std::hint::black_box;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::json;
use xray_pose::codec::{select_best, CellPrediction, GridPredictions, VALUES_PER_PREDICTION};
use xray_pose::pnp::{solve_epnp, solve_pose, CorrespondenceSet};
use xray_pose::project_points;
use xray_pose::sim::{generate_dataset, oracle_predict, CaptureSampler, DatasetSample, Rig};

use super::{load_dataset, write_file, write_manifest};
use crate::config::RunConfig;
use crate::error::CliError;

/// Samples drawn when no dataset is given.
const BENCH_SAMPLES: usize = 64;
/// Distinct prediction grids cycled through by the selection benchmark.
const BENCH_GRIDS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub stage: &'static str,
    /// Correspondences for PnP rows, prediction slots for selection.
    pub size: usize,
    pub iterations: usize,
    pub median_us: f64,
    pub p95_us: f64,
}

fn time<T>(iterations: usize, warmup: usize, mut f: impl FnMut(usize) -> T) -> (f64, f64) {
    for k in 0..warmup {
        black_box(f(k));
    }
    let mut times: Vec<Duration> = (0..iterations)
        .map(|k| {
            let start = Instant::now();
            black_box(f(k));
            start.elapsed()
        })
        .collect();
    times.sort();
    let at = |q: f64| {
        let idx = ((times.len() - 1) as f64 * q).round() as usize;
        times[idx].as_secs_f64() * 1e6
    };
    (at(0.5), at(0.95))
}

fn bench_samples(config: &RunConfig) -> Result<Vec<DatasetSample>, CliError> {
    if let Some(path) = &config.dataset {
        let samples = load_dataset(path)?;
        if samples.is_empty() {
            return Err(CliError::data(path, "dataset is empty"));
        }
        return Ok(samples);
    }
    let model = config.instrument_model(None)?;
    let sampler = CaptureSampler::new(&config.ranges, config.seed, config.mode())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let data = generate_dataset(&model, &sampler, &Rig::default(), BENCH_SAMPLES)
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(data.samples)
}

/// Median and 95th percentile wall time of slot selection over a full
/// prediction grid and of PnP at each configured correspondence count.
pub fn run_bench(config: &RunConfig) -> Result<Vec<BenchRow>, CliError> {
    let samples = bench_samples(config)?;
    let model = config.instrument_model(Some(samples[0].instrument.as_str()))?;
    let bench = &config.bench;
    let mut rows = Vec::new();

    // selection over every slot of the layout, as a network head emits it
    let layout = config.codec.layout(samples[0].geometry.image_size_px)?;
    let oracle = config.oracle_config();
    let grids: Vec<Vec<CellPrediction>> = samples
        .iter()
        .filter(|s| s.geometry.image_size_px == samples[0].geometry.image_size_px)
        .take(BENCH_GRIDS)
        .map(|s| {
            let mut grid = GridPredictions::filled(layout.clone(), [0.0; VALUES_PER_PREDICTION]);
            for (k, v) in grid.values.iter_mut().enumerate() {
                // deterministic low background logits in [-7, -5)
                v[VALUES_PER_PREDICTION - 1] = -7.0 + ((k as u64 * 2_654_435_761) % 2000) as f64 / 1000.0;
            }
            for r in oracle_predict(s, &layout, &oracle).map_err(|e| CliError::Config(e.to_string()))? {
                grid.set(&r.prediction.index, r.prediction.raw).expect("slot in layout");
            }
            Ok(grid.to_cells())
        })
        .collect::<Result<_, CliError>>()?;
    let (median_us, p95_us) = time(bench.iterations, bench.warmup, |k| {
        select_best(&grids[k % grids.len()], &layout).expect("non-empty grid")
    });
    rows.push(BenchRow {
        stage: "select_best",
        size: layout.total_predictions(),
        iterations: bench.iterations,
        median_us,
        p95_us,
    });

    for &n in &bench.points {
        let sets: Vec<CorrespondenceSet> = samples
            .iter()
            .map(|s| {
                let mut object = model.control_points.to_vec();
                let extra = n.saturating_sub(object.len());
                let stride = (model.vertices.len() / extra.max(1)).max(1);
                object.extend(model.vertices.iter().step_by(stride).take(extra));
                object.truncate(n);
                let image = project_points(&object, &s.pose, &s.geometry)
                    .map_err(|e| CliError::Numerical(e.to_string()))?;
                Ok(CorrespondenceSet::new(object, image, &s.geometry)?)
            })
            .collect::<Result<_, CliError>>()?;
        let (median_us, p95_us) = time(bench.iterations, bench.warmup, |k| {
            solve_epnp(&sets[k % sets.len()]).expect("noiseless correspondences")
        });
        rows.push(BenchRow { stage: "epnp", size: n, iterations: bench.iterations, median_us, p95_us });
        let (median_us, p95_us) = time(bench.iterations, bench.warmup, |k| {
            solve_pose(&sets[k % sets.len()]).expect("noiseless correspondences")
        });
        rows.push(BenchRow {
            stage: "epnp+refine",
            size: n,
            iterations: bench.iterations,
            median_us,
            p95_us,
        });
    }
    Ok(rows)
}

pub fn bench(config: &RunConfig) -> Result<(), CliError> {
    let rows = run_bench(config)?;
    let mut csv = String::from("stage,size,iterations,median_us,p95_us\n");
    for r in &rows {
        writeln!(csv, "{},{},{},{:.3},{:.3}", r.stage, r.size, r.iterations, r.median_us, r.p95_us)
            .expect("string write");
    }
    let path = config.out.join("bench.csv");
    write_file(&path, csv.as_bytes())?;
    write_manifest(config, "bench", json!({ "report": path, "rows": rows }))?;
    print!("{csv}");
    Ok(())
}
