//! Command-line front end wiring the pipeline stages together with a
//! declarative run configuration and deterministic, plot-ready outputs.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use neurocross_core::pipeline::Scope;
use neurocross_core::windowing::WindowConfig;
use neurocross_core::{Error, Result};

use config::{parse_configs, RunConfig, SplitMode};

/// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::Data(_) | Error::Io { .. } | Error::Parse { .. } => 3,
        Error::Numeric(_) => 4,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "neurocross",
    version,
    about = "EEG band-power intent-prediction pipeline"
)]
pub struct Cli {
    /// Config file with dotted keys (key = value per line).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (overrides paths.out_dir).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Run seed; all randomness derives from it through named substreams.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker-thread cap for the data-parallel stages.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct WindowArgs {
    /// Window length in frames.
    #[arg(long, default_value_t = 9)]
    pub length: usize,
    /// Window stride in frames.
    #[arg(long, default_value_t = 3)]
    pub stride: usize,
}

impl WindowArgs {
    fn window(&self) -> Result<WindowConfig> {
        WindowConfig::new(self.length, self.stride)
    }
}

#[derive(Debug, Args, Clone)]
pub struct CommonDataArgs {
    /// Trial manifest (JSON-lines); overrides paths.manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// Feature column for windowing, e.g. F4.high_beta.
    #[arg(long)]
    pub feature: Option<String>,

    /// Use all 70 features per window instead of one column.
    #[arg(long)]
    pub multivariate: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with known ground truth.
    Synth {
        #[arg(long, default_value_t = 12)]
        subjects: usize,
        #[arg(long, default_value_t = 5)]
        trials_per_subject: usize,
        #[arg(long, default_value_t = 4.0)]
        mean_duration: f64,
        #[arg(long, default_value_t = 1.0)]
        jitter: f64,
        #[arg(long, default_value_t = 0.25)]
        noise_sigma: f64,
        /// Final frames forced into the execution state (0 disables).
        #[arg(long, default_value_t = 8)]
        tail_frames: usize,
        /// Amplitude of the pre-decision ramp in the designated feature.
        #[arg(long, default_value_t = 50.0)]
        ramp_amplitude: f64,
        #[arg(long, default_value_t = 12)]
        ramp_frames: usize,
    },
    /// Fit standardizer + PCA + HMM and write the model files.
    FitHmm {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Fit granularity for both PCA and HMM: per-trial or pooled.
        #[arg(long)]
        scope: Option<String>,
        #[arg(long)]
        n_states: Option<usize>,
        #[arg(long)]
        pca_components: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Decode stage paths with previously fitted models.
    Decode {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Preprocessing file (default <out>/preprocessing.json).
        #[arg(long)]
        preprocessing: Option<PathBuf>,
        /// HMM file (default <out>/hmm.json).
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Stage-wise statistics battery over decoded cognitive stages.
    StageStats {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Fit scope for the internal decomposition (default pooled).
        #[arg(long, default_value = "pooled")]
        scope: String,
        /// Run the battery separately per traffic scenario.
        #[arg(long)]
        per_scenario: bool,
    },
    /// Dump labeled sliding-window segments for one configuration.
    Segment {
        #[command(flatten)]
        data: CommonDataArgs,
        #[command(flatten)]
        window: WindowArgs,
    },
    /// Cross-validate one window configuration.
    Cv {
        #[command(flatten)]
        data: CommonDataArgs,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        folds: Option<usize>,
        /// Split mode: segment or trial.
        #[arg(long)]
        split: Option<String>,
    },
    /// Evaluate many window configurations and write the comparison report.
    Sweep {
        #[command(flatten)]
        data: CommonDataArgs,
        /// Comma-separated LENGTHxSTRIDE list (default: comparison set + grid).
        #[arg(long)]
        configs: Option<String>,
    },
    /// Label-shuffle control for one configuration.
    ShuffleTest {
        #[command(flatten)]
        data: CommonDataArgs,
        #[command(flatten)]
        window: WindowArgs,
    },
    /// Response-time summary per scenario (mean and 95% HDI).
    RtSummary {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = Some(jobs);
    }
    Ok(cfg)
}

fn apply_data_args(cfg: &mut RunConfig, data: &CommonDataArgs) -> Result<()> {
    if let Some(feature) = &data.feature {
        cfg.apply("windowing.feature", feature)?;
    }
    if data.multivariate {
        cfg.multivariate = true;
    }
    Ok(())
}

fn init_thread_pool(cfg: &RunConfig) {
    if let Some(jobs) = cfg.jobs {
        // ignore the error when a pool already exists (repeated in-process runs)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    let mut cfg = effective_config(cli)?;
    init_thread_pool(&cfg);
    match &cli.command {
        Command::Synth {
            subjects,
            trials_per_subject,
            mean_duration,
            jitter,
            noise_sigma,
            tail_frames,
            ramp_amplitude,
            ramp_frames,
        } => {
            let args = commands::SynthArgs {
                subjects: *subjects,
                trials_per_subject: *trials_per_subject,
                mean_duration_s: *mean_duration,
                duration_jitter_s: *jitter,
                noise_sigma: *noise_sigma,
                tail_frames: *tail_frames,
                ramp_amplitude: *ramp_amplitude,
                ramp_frames: *ramp_frames,
            };
            commands::cmd_synth(&cfg, &args)
        }
        Command::FitHmm {
            manifest,
            scope,
            n_states,
            pca_components,
            tol,
            max_iter,
        } => {
            if let Some(scope) = scope {
                let parsed = Scope::parse(scope)?;
                cfg.pca_scope = parsed;
                cfg.hmm_scope = parsed;
            }
            if let Some(n) = n_states {
                cfg.hmm_states = *n;
            }
            if let Some(n) = pca_components {
                cfg.pca_components = *n;
            }
            if let Some(t) = tol {
                cfg.hmm_tol = *t;
            }
            if let Some(m) = max_iter {
                cfg.hmm_max_iter = *m;
            }
            commands::cmd_fit_hmm(&cfg, manifest)
        }
        Command::Decode {
            manifest,
            preprocessing,
            models,
        } => commands::cmd_decode(&cfg, manifest, preprocessing, models),
        Command::StageStats {
            manifest,
            scope,
            per_scenario,
        } => {
            let scope = Scope::parse(scope)?;
            commands::cmd_stage_stats(&cfg, manifest, scope, *per_scenario)
        }
        Command::Segment { data, window } => {
            apply_data_args(&mut cfg, data)?;
            commands::cmd_segment(&cfg, &data.manifest, window.window()?)
        }
        Command::Cv {
            data,
            window,
            k,
            folds,
            split,
        } => {
            apply_data_args(&mut cfg, data)?;
            if let Some(k) = k {
                cfg.knn_k = *k;
            }
            if let Some(folds) = folds {
                cfg.n_folds = *folds;
            }
            if let Some(split) = split {
                cfg.split_mode = SplitMode::parse(split)?;
            }
            commands::cmd_cv(&cfg, &data.manifest, window.window()?)
        }
        Command::Sweep { data, configs } => {
            apply_data_args(&mut cfg, data)?;
            if let Some(configs) = configs {
                cfg.configs = Some(parse_configs(configs)?);
            }
            commands::cmd_sweep(&cfg, &data.manifest)
        }
        Command::ShuffleTest { data, window } => {
            apply_data_args(&mut cfg, data)?;
            commands::cmd_shuffle_test(&cfg, &data.manifest, window.window()?)
        }
        Command::RtSummary { manifest } => commands::cmd_rt_summary(&cfg, manifest),
    }
}

/// Runs a parsed command line, printing a machine-readable error record on
/// failure and returning the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            let code = exit_code(&err);
            let kind = match err {
                Error::Config(_) => "config",
                Error::Data(_) | Error::Io { .. } | Error::Parse { .. } => "data",
                Error::Numeric(_) => "numeric",
            };
            eprintln!(
                "{}",
                serde_json::json!({
                    "error": err.to_string(),
                    "kind": kind,
                    "exit_code": code,
                })
            );
            code
        }
    }
}
