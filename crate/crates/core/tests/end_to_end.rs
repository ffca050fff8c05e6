use xray_pose::codec::{AnchorSet, CellPrediction, GridLayout};
use xray_pose::metrics::{aggregate, default_thresholds, InstrumentModel, PoseEvaluation, Threshold};
use xray_pose::pipeline::{estimate_pose, evaluate_estimate, PipelineConfig};
use xray_pose::sim::{
    generate_dataset, oracle_predict, write_dataset, CaptureRanges, CaptureSampler,
    ConstraintMode, DatasetSample, OracleConfig, Rig,
};

fn dataset(model: &InstrumentModel, mode: ConstraintMode, seed: u64, n: usize) -> Vec<DatasetSample> {
    let sampler = CaptureSampler::new(&CaptureRanges::default(), seed, mode).unwrap();
    generate_dataset(model, &sampler, &Rig::default(), n).unwrap().samples
}

fn evaluate_all(
    model: &InstrumentModel,
    samples: &[DatasetSample],
    oracle: &OracleConfig,
) -> Vec<PoseEvaluation> {
    let layout = GridLayout::new([960, 742], &AnchorSet::default()).unwrap();
    samples
        .iter()
        .map(|s| {
            let cells: Vec<CellPrediction> = oracle_predict(s, &layout, oracle)
                .unwrap()
                .into_iter()
                .map(|r| r.prediction)
                .collect();
            let est = estimate_pose(&cells, &layout, model, &s.geometry, &PipelineConfig::default())
                .unwrap();
            evaluate_estimate(s, &est, model, &default_thresholds()).unwrap()
        })
        .collect()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

#[test]
fn noiseless_screw_round_trip() {
    let screw = InstrumentModel::default_screw();
    let samples = dataset(&screw, ConstraintMode::Clinical, 3, 200);
    let evals = evaluate_all(&screw, &samples, &OracleConfig::default());
    let report = aggregate(&evals, &default_thresholds()).unwrap();
    for r in &report.rates {
        assert_eq!(r.passed, r.total, "{}", r.threshold);
    }
    assert!(evals.iter().all(|e| e.add_s_mm <= e.add_mm));
}

#[test]
fn two_pixel_jitter_bracket() {
    // Monte-Carlo bracket for the default ranges: about half of the cube
    // poses stay under 0.1·d = 3 mm at σ = 2 px.
    let cube = InstrumentModel::default_cube();
    let samples = dataset(&cube, ConstraintMode::Full, 1, 500);
    let oracle = OracleConfig { jitter_px: 2.0, seed: 1, ..Default::default() };
    let report = aggregate(&evaluate_all(&cube, &samples, &oracle), &default_thresholds()).unwrap();
    let rate = report.rate(Threshold::DiameterFraction(0.1)).unwrap();
    assert!((40.0..=65.0).contains(&rate), "{rate}");
    // half a pixel keeps nearly everything inside 3 mm
    let oracle = OracleConfig { jitter_px: 0.5, seed: 1, ..Default::default() };
    let report = aggregate(&evaluate_all(&cube, &samples, &oracle), &default_thresholds()).unwrap();
    assert!(report.rate(Threshold::DiameterFraction(0.1)).unwrap() >= 95.0);
}

#[test]
fn median_add_grows_with_jitter() {
    let cube = InstrumentModel::default_cube();
    let samples = dataset(&cube, ConstraintMode::Full, 2, 100);
    let mut last = -1.0;
    for sigma in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let oracle = OracleConfig { jitter_px: sigma, seed: 2, ..Default::default() };
        let m = median(evaluate_all(&cube, &samples, &oracle).iter().map(|e| e.add_mm).collect());
        assert!(m >= last, "σ = {sigma}: {m} < {last}");
        last = m;
    }
}

#[test]
fn clinical_screw_angles() {
    let screw = InstrumentModel::default_screw();
    for s in dataset(&screw, ConstraintMode::Clinical, 4, 500) {
        let (rx, ry, _) = s.pose.euler_deg();
        assert!(rx.abs() <= 45.0 + 1e-9 && ry.abs() <= 45.0 + 1e-9, "{rx} {ry}");
    }
}

#[test]
fn dataset_bytes_do_not_depend_on_thread_count() {
    let cube = InstrumentModel::default_cube();
    let render = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut buf = Vec::new();
            write_dataset(&mut buf, &dataset(&cube, ConstraintMode::Full, 7, 300)).unwrap();
            buf
        })
    };
    assert_eq!(render(1), render(4));
}
