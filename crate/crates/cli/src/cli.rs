use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "xray-pose", version, about = "Simulate, solve and score X-ray instrument poses")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file with run settings; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample acquisitions and write a labelled dataset.
    Generate {
        /// `cube`, `screw` or a JSON instrument file.
        #[arg(long)]
        instrument: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        /// Restrict viewing angles to |r_x|, |r_y| ≤ 45°.
        #[arg(long)]
        clinical: bool,
    },
    /// Write stand-in network predictions for a dataset.
    PredictOracle {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Keypoint jitter standard deviation, px.
        #[arg(long)]
        jitter: Option<f64>,
    },
    /// Solve one pose per sample from prediction records.
    Solve {
        #[command(flatten)]
        inputs: InputArgs,
    },
    /// Solve and score against the dataset's ground truth.
    Evaluate {
        #[command(flatten)]
        inputs: InputArgs,
        /// Comma-separated, e.g. `0.1d,0.05d,1mm`.
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<String>>,
    },
    /// Time prediction selection and PnP.
    Bench {
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Sweep the optical/X-ray link registration over noise levels.
    Calibrate {
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        noise: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        /// Put the dome markers on a line.
        #[arg(long)]
        collinear: bool,
    },
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub instrument: Option<String>,
    #[arg(long)]
    pub min_confidence: Option<f64>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate { .. } => "generate",
            Command::PredictOracle { .. } => "predict-oracle",
            Command::Solve { .. } => "solve",
            Command::Evaluate { .. } => "evaluate",
            Command::Bench { .. } => "bench",
            Command::Calibrate { .. } => "calibrate",
        }
    }
}

impl Cli {
    /// Defaults, then the config file, then flags.
    pub fn effective_config(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.global.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let g = &self.global;
        set(&mut c.seed, g.seed);
        set(&mut c.out, g.out.clone());
        set(&mut c.threads, g.threads);
        match &self.command {
            Command::Generate { instrument, n, clinical } => {
                set_opt(&mut c.instrument, instrument.clone());
                set(&mut c.samples, *n);
                c.clinical |= *clinical;
            }
            Command::PredictOracle { dataset, jitter } => {
                set_opt(&mut c.dataset, dataset.clone());
                set(&mut c.oracle.jitter_px, *jitter);
            }
            Command::Solve { inputs } => inputs.apply(&mut c),
            Command::Evaluate { inputs, thresholds } => {
                inputs.apply(&mut c);
                set(&mut c.thresholds, thresholds.clone());
            }
            Command::Bench { iterations } => set(&mut c.bench.iterations, *iterations),
            Command::Calibrate { points, noise, trials, collinear } => {
                set(&mut c.calibrate.points, *points);
                set(&mut c.calibrate.noise_mm, noise.clone());
                set(&mut c.calibrate.trials, *trials);
                c.calibrate.collinear |= *collinear;
            }
        }
        c.validate()
    }
}

impl InputArgs {
    fn apply(&self, c: &mut RunConfig) {
        set_opt(&mut c.dataset, self.dataset.clone());
        set_opt(&mut c.predictions, self.predictions.clone());
        set_opt(&mut c.instrument, self.instrument.clone());
        set(&mut c.min_confidence, self.min_confidence);
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}
