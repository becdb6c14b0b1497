//! The pipeline subcommands. Every command writes its artifacts plus a run
//! manifest with content fingerprints, and is byte-identical on rerun.

use std::path::{Path, PathBuf};

use neurocross_core::eval::{label_shuffle_test, run_cv, sweep, CvOptions, EvalReport};
use neurocross_core::hmm::FitOptions;
use neurocross_core::ingest::{load_trials, write_frames_csv, write_manifest, TrialManifestEntry};
use neurocross_core::model::{feature_key, BandPowerTrial, Scenario, FEATURE_RATE_HZ};
use neurocross_core::pipeline::{
    decode_trials, fit_hmm_models, fit_preprocessing, FittedHmm, FittedPreprocessing, Scope,
};
use neurocross_core::seed::substream;
use neurocross_core::stats::{
    highlighted_features, rt_summary, stage_battery, stage_feature_table,
};
use neurocross_core::synth::{synth_generate, SynthConfig};
use neurocross_core::windowing::{
    segment_trials, comparison_configs, window_grid, FeatureSelector, WindowConfig,
};
use neurocross_core::{Error, Result, StagePath};

use crate::config::{RunConfig, SplitMode};
use crate::report::{ensure_dir, fmt_f64, read_json, write_csv, write_json, RunRecorder};

type CsvRows = Vec<Vec<String>>;

/// Default stride paired with grid window lengths in the sweep.
pub const GRID_STRIDE: usize = 3;

fn manifest_path(cfg: &RunConfig, flag: &Option<PathBuf>) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| cfg.manifest.clone())
        .ok_or_else(|| {
            Error::Config("no manifest given (flag --manifest or paths.manifest)".into())
        })
}

fn feature_selector(cfg: &RunConfig) -> Result<FeatureSelector> {
    if cfg.multivariate {
        Ok(FeatureSelector::All)
    } else {
        Ok(FeatureSelector::Single(cfg.feature_index()?))
    }
}

fn cv_options(cfg: &RunConfig) -> CvOptions {
    CvOptions {
        n_folds: cfg.n_folds,
        knn_k: cfg.knn_k,
        adasyn_k: cfg.adasyn_k,
        adasyn_beta: cfg.adasyn_beta,
        seed: cfg.seed,
        group_by_trial: cfg.split_mode == SplitMode::Trial,
    }
}

/// The full default sweep set: the four comparison-table configurations plus
/// the whole window grid at the default stride.
pub fn default_sweep_configs() -> Vec<WindowConfig> {
    let mut configs = comparison_configs();
    for length in window_grid(FEATURE_RATE_HZ) {
        let cfg = WindowConfig {
            length_frames: length,
            stride_frames: GRID_STRIDE,
        };
        if !configs.contains(&cfg) {
            configs.push(cfg);
        }
    }
    configs
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

// ---------------------------------------------------------------------------
// synth

#[derive(Debug, Clone)]
pub struct SynthArgs {
    pub subjects: usize,
    pub trials_per_subject: usize,
    pub mean_duration_s: f64,
    pub duration_jitter_s: f64,
    pub noise_sigma: f64,
    pub tail_frames: usize,
    pub ramp_amplitude: f64,
    pub ramp_frames: usize,
}

impl Default for SynthArgs {
    fn default() -> Self {
        let d = SynthConfig::default();
        SynthArgs {
            subjects: d.n_subjects,
            trials_per_subject: d.trials_per_subject,
            mean_duration_s: d.mean_duration_s,
            duration_jitter_s: d.duration_jitter_s,
            noise_sigma: d.noise_sigma,
            tail_frames: d.exec_tail_frames,
            ramp_amplitude: d.ramp_amplitude,
            ramp_frames: d.ramp_frames,
        }
    }
}

pub fn cmd_synth(cfg: &RunConfig, args: &SynthArgs) -> Result<()> {
    let synth_config = SynthConfig {
        n_subjects: args.subjects,
        trials_per_subject: args.trials_per_subject,
        mean_duration_s: args.mean_duration_s,
        duration_jitter_s: args.duration_jitter_s,
        noise_sigma: args.noise_sigma,
        exec_tail_frames: args.tail_frames,
        ramp_amplitude: args.ramp_amplitude,
        ramp_frames: args.ramp_frames,
        seed: substream(cfg.seed, "synth"),
        ..Default::default()
    };
    let (trials, truths) = synth_generate(&synth_config)?;

    ensure_dir(&cfg.out_dir)?;
    let frames_dir = cfg.out_dir.join("frames");
    ensure_dir(&frames_dir)?;
    let mut recorder = RunRecorder::new("synth", cfg.seed, cfg.dump());

    let mut entries = Vec::with_capacity(trials.len());
    for trial in &trials {
        let rel = format!("frames/{}.csv", trial.trial_id);
        let path = cfg.out_dir.join(&rel);
        write_frames_csv(&path, &trial.frames, trial.feature_rate_hz)?;
        recorder.output(&path);
        entries.push(TrialManifestEntry {
            trial_id: trial.trial_id.clone(),
            subject_id: trial.subject_id.clone(),
            scenario: trial.scenario,
            response_time_s: trial.response_time_s,
            data_path: rel,
        });
    }
    let manifest = cfg.out_dir.join("manifest.jsonl");
    write_manifest(&manifest, &entries)?;
    recorder.output(&manifest);
    announce(&manifest);

    let truth_path = cfg.out_dir.join("ground_truth.json");
    write_json(&truth_path, &truths)?;
    recorder.output(&truth_path);
    announce(&truth_path);

    let rm = recorder.finish(&cfg.out_dir)?;
    announce(&rm);
    Ok(())
}

// ---------------------------------------------------------------------------
// fit-hmm / decode

pub fn cmd_fit_hmm(cfg: &RunConfig, manifest: &Option<PathBuf>) -> Result<()> {
    let manifest = manifest_path(cfg, manifest)?;
    let trials = load_trials(&manifest)?;
    ensure_dir(&cfg.out_dir)?;
    let mut recorder = RunRecorder::new("fit-hmm", cfg.seed, cfg.dump());
    recorder.input(&manifest);

    let preproc = fit_preprocessing(&trials, cfg.pca_scope, cfg.pca_components)?;
    for entry in &preproc.entries {
        let cumulative: f64 = entry.pca.explained_variance_ratio.iter().sum();
        println!(
            "pca[{}] cumulative explained variance over {} components: {:.4}",
            entry.trial_id.as_deref().unwrap_or("pooled"),
            cfg.pca_components,
            cumulative
        );
    }
    let scores = preproc.transform(&trials)?;
    let fitted = fit_hmm_models(
        &trials,
        &scores,
        cfg.hmm_scope,
        &FitOptions {
            n_states: cfg.hmm_states,
            seed: substream(cfg.seed, "hmm-init"),
            tol: cfg.hmm_tol,
            max_iter: cfg.hmm_max_iter,
        },
    )?;

    let preproc_path = cfg.out_dir.join("preprocessing.json");
    write_json(&preproc_path, &preproc)?;
    recorder.output(&preproc_path);
    announce(&preproc_path);

    let hmm_path = cfg.out_dir.join("hmm.json");
    write_json(&hmm_path, &fitted)?;
    recorder.output(&hmm_path);
    announce(&hmm_path);

    let rm = recorder.finish(&cfg.out_dir)?;
    announce(&rm);
    Ok(())
}

pub fn cmd_decode(
    cfg: &RunConfig,
    manifest: &Option<PathBuf>,
    preproc_file: &Option<PathBuf>,
    models_file: &Option<PathBuf>,
) -> Result<()> {
    let manifest = manifest_path(cfg, manifest)?;
    let preproc_path = preproc_file
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("preprocessing.json"));
    let models_path = models_file
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("hmm.json"));

    let trials = load_trials(&manifest)?;
    let preproc: FittedPreprocessing = read_json(&preproc_path)?;
    let fitted: FittedHmm = read_json(&models_path)?;
    for entry in &fitted.entries {
        entry.model.validate()?;
    }

    ensure_dir(&cfg.out_dir)?;
    let mut recorder = RunRecorder::new("decode", cfg.seed, cfg.dump());
    recorder.input(&manifest);
    recorder.input(&preproc_path);
    recorder.input(&models_path);

    let scores = preproc.transform(&trials)?;
    let paths = decode_trials(&fitted, &trials, &scores)?;

    let mut stage_rows = Vec::new();
    let mut run_rows = Vec::new();
    for (trial, path) in trials.iter().zip(&paths) {
        for (frame, &stage) in path.states.iter().enumerate() {
            stage_rows.push(vec![
                trial.trial_id.clone(),
                frame.to_string(),
                stage.to_string(),
            ]);
        }
        for run in neurocross_core::hmm::stage_runs(path) {
            run_rows.push(vec![
                trial.trial_id.clone(),
                run.state.to_string(),
                run.start_frame.to_string(),
                run.end_frame.to_string(),
            ]);
        }
    }
    let stages_path = cfg.out_dir.join("stages.csv");
    write_csv(&stages_path, &["trial_id", "frame", "stage"], &stage_rows)?;
    recorder.output(&stages_path);
    announce(&stages_path);

    let runs_path = cfg.out_dir.join("stage_runs.csv");
    write_csv(
        &runs_path,
        &["trial_id", "stage", "start_frame", "end_frame"],
        &run_rows,
    )?;
    recorder.output(&runs_path);
    announce(&runs_path);

    let rm = recorder.finish(&cfg.out_dir)?;
    announce(&rm);
    Ok(())
}

// ---------------------------------------------------------------------------
// stage-stats

fn battery_rows(trials: &[BandPowerTrial], paths: &[StagePath]) -> Result<(CsvRows, CsvRows)> {
    let tables = stage_feature_table(trials, paths)?;
    let mut table2_rows = Vec::new();
    let mut battery_rows = Vec::new();
    for &feature in &highlighted_features() {
        let key = feature_key(feature)?;
        let label = format!("{}-{}", key.channel.name(), key.band.name());
        let battery = stage_battery(&tables[feature])?;
        battery_rows.push(vec![
            label.clone(),
            battery.n_complete_rows.to_string(),
            battery.normality_rejected.to_string(),
            fmt_f64(battery.friedman.chi2),
            battery.friedman.df.to_string(),
            fmt_f64(battery.friedman.p_value),
            battery.posthoc.is_some().to_string(),
        ]);
        if let Some(posthoc) = battery.posthoc {
            for r in posthoc {
                table2_rows.push(vec![
                    format!(
                        "Stage {} vs. Stage {} from {}",
                        r.stage_a + 1,
                        r.stage_b + 1,
                        label
                    ),
                    fmt_f64(r.statistic),
                    fmt_f64(r.p_value),
                    fmt_f64(r.effect_size_d),
                ]);
            }
        }
    }
    Ok((table2_rows, battery_rows))
}

pub fn cmd_stage_stats(
    cfg: &RunConfig,
    manifest: &Option<PathBuf>,
    scope: Scope,
    per_scenario: bool,
) -> Result<()> {
    let manifest = manifest_path(cfg, manifest)?;
    let trials = load_trials(&manifest)?;
    ensure_dir(&cfg.out_dir)?;
    let mut recorder = RunRecorder::new("stage-stats", cfg.seed, cfg.dump());
    recorder.input(&manifest);

    let groups: Vec<(String, Vec<BandPowerTrial>)> = if per_scenario {
        Scenario::ALL
            .iter()
            .map(|&sc| {
                let group: Vec<BandPowerTrial> = trials
                    .iter()
                    .filter(|t| t.scenario == sc)
                    .cloned()
                    .collect();
                (sc.name().to_string(), group)
            })
            .filter(|(_, ts)| !ts.is_empty())
            .collect()
    } else {
        vec![("all".to_string(), trials)]
    };

    for (group_name, group_trials) in groups {
        let preproc = fit_preprocessing(&group_trials, scope, cfg.pca_components)?;
        let scores = preproc.transform(&group_trials)?;
        let fitted = fit_hmm_models(
            &group_trials,
            &scores,
            scope,
            &FitOptions {
                n_states: cfg.hmm_states,
                seed: substream(cfg.seed, &format!("hmm-init/{group_name}")),
                tol: cfg.hmm_tol,
                max_iter: cfg.hmm_max_iter,
            },
        )?;
        let paths = decode_trials(&fitted, &group_trials, &scores)?;
        let (table2, battery) = battery_rows(&group_trials, &paths)?;

        let suffix = if group_name == "all" {
            String::new()
        } else {
            format!("_{group_name}")
        };
        let table2_path = cfg.out_dir.join(format!("stage_stats{suffix}.csv"));
        write_csv(
            &table2_path,
            &["comparison", "test_statistic", "p_value", "effect_size"],
            &table2,
        )?;
        recorder.output(&table2_path);
        announce(&table2_path);

        let battery_path = cfg.out_dir.join(format!("stage_stats_battery{suffix}.csv"));
        write_csv(
            &battery_path,
            &[
                "feature",
                "n_subjects",
                "normality_rejected",
                "friedman_chi2",
                "friedman_df",
                "friedman_p",
                "posthoc_run",
            ],
            &battery,
        )?;
        recorder.output(&battery_path);
        announce(&battery_path);
    }

    let rm = recorder.finish(&cfg.out_dir)?;
    announce(&rm);
    Ok(())
}

// ---------------------------------------------------------------------------
// segment

pub fn cmd_segment(
    cfg: &RunConfig,
    manifest: &Option<PathBuf>,
    window: WindowConfig,
) -> Result<()> {
    let manifest = manifest_path(cfg, manifest)?;
    let trials = load_trials(&manifest)?;
    ensure_dir(&cfg.out_dir)?;
    let mut recorder = RunRecorder::new("segment", cfg.seed, cfg.dump());
    recorder.input(&manifest);

    let segments = segment_trials(&trials, feature_selector(cfg)?, window)?;
    let n_values = segments.first().map(|s| s.values.len()).unwrap_or(0);
    let mut header: Vec<String> = ["trial_id", "start_frame", "label", "synthetic"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for i in 0..n_values {
        header.push(format!("v{i}"));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = segments
        .iter()
        .map(|s| {
            let mut row = vec![
                s.trial_id.clone(),
                s.start_frame.map(|v| v.to_string()).unwrap_or_default(),
                (s.label as u8).to_string(),
                (s.synthetic as u8).to_string(),
            ];
            row.extend(s.values.iter().map(|&v| fmt_f64(v)));
            row
        })
        .collect();

    let path = cfg.out_dir.join(format!(
        "segments_L{}_S{}.csv",
        window.length_frames, window.stride_frames
    ));
    write_csv(&path, &header_refs, &rows)?;
    recorder.output(&path);
    announce(&path);

    let rm = recorder.finish(&cfg.out_dir)?;
    announce(&rm);
    Ok(())
}

// ---------------------------------------------------------------------------
// cv / sweep / shuffle-test

fn report_row(report: &EvalReport) -> Vec<String> {
    vec![
        report.config.length_frames.to_string(),
        report.config.stride_frames.to_string(),
        report.n_segments.to_string(),
        fmt_f64(report.mean.accuracy),
        fmt_f64(report.mean.precision),
        fmt_f64(report.mean.recall),
        fmt_f64(report.mean.f1),
        fmt_f64(report.auc),
        fmt_f64(report.config.lookahead_s(FEATURE_RATE_HZ)),
    ]
}

const REPORT_HEADER: [&str; 9] = [
    "window_length",
    "stride",
    "n_segments",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "auc",
    "lookahead_s",
];

fn write_roc(out_dir: &Path, report: &EvalReport, recorder: &mut RunRecorder) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .roc_points
        .iter()
        .map(|&(fpr, tpr)| vec![fmt_f64(fpr), fmt_f64(tpr)])
        .collect();
    let path = out_dir.join(format!(
        "roc_L{}_S{}.csv",
        report.config.length_frames, report.config.stride_frames
    ));
    write_csv(&path, &["fpr", "tpr"], &rows)?;
    recorder.output(&path);
    announce(&path);
    Ok(())
}

pub fn cmd_cv(cfg: &RunConfig, manifest: &Option<PathBuf>, window: WindowConfig) -> Result<()> {
    let manifest = manifest_path(cfg, manifest)?;
    let trials = load_trials(&manifest)?;
    ensure_dir(&cfg.out_dir)?;
    let mut recorder = RunRecorder::new("cv", cfg.seed, cfg.dump());
    recorder.input(&manifest);

    let segments = segment_trials(&trials, feature_selector(cfg)?, window)?;
    let report = run_cv(&segments, window, &cv_options(cfg))?;

    let report_path = cfg.out_dir.join("cv_report.csv");
    write_csv(&report_path, &REPORT_HEADER, &[report_row(&report)])?;
    recorder.output(&report_path);
    announce(&report_path);

    let fold_rows: Vec<Vec<String>> = report
        .per_fold
        .iter()
        .enumerate()
        .map(|(i, m)| {
            vec![
                i.to_string(),
                fmt_f64(m.accuracy),
                fmt_f64(m.precision),
                fmt_f64(m.recall),
                fmt_f64(m.f1),
                (m.zero_division as u8).to_string(),
            ]
        })
        .collect();
    let folds_path = cfg.out_dir.join("cv_folds.csv");
    write_csv(
        &folds_path,
        &[
            "fold",
            "accuracy",
            "precision",
            "recall",
            "f1",
            "zero_division",
        ],
        &fold_rows,
    )?;
    recorder.output(&folds_path);
    announce(&folds_path);

    write_roc(&cfg.out_dir, &report, &mut recorder)?;

    let rm = recorder.finish(&cfg.out_dir)?;
    announce(&rm);
    Ok(())
}

pub fn cmd_sweep(cfg: &RunConfig, manifest: &Option<PathBuf>) -> Result<()> {
    let manifest = manifest_path(cfg, manifest)?;
    let trials = load_trials(&manifest)?;
    ensure_dir(&cfg.out_dir)?;
    let mut recorder = RunRecorder::new("sweep", cfg.seed, cfg.dump());
    recorder.input(&manifest);

    let configs = cfg.configs.clone().unwrap_or_else(default_sweep_configs);
    let outcome = sweep(&trials, feature_selector(cfg)?, &configs, &cv_options(cfg))?;

    let rows: Vec<Vec<String>> = outcome.reports.iter().map(report_row).collect();
    let report_path = cfg.out_dir.join("sweep_report.csv");
    write_csv(&report_path, &REPORT_HEADER, &rows)?;
    recorder.output(&report_path);
    announce(&report_path);

    for report in &outcome.reports {
        write_roc(&cfg.out_dir, report, &mut recorder)?;
    }

    let failure_rows: Vec<Vec<String>> = outcome
        .failures
        .iter()
        .map(|f| {
            vec![
                f.config.length_frames.to_string(),
                f.config.stride_frames.to_string(),
                f.error.replace(',', ";"),
            ]
        })
        .collect();
    let failures_path = cfg.out_dir.join("sweep_failures.csv");
    write_csv(
        &failures_path,
        &["window_length", "stride", "error"],
        &failure_rows,
    )?;
    recorder.output(&failures_path);
    announce(&failures_path);

    let rm = recorder.finish(&cfg.out_dir)?;
    announce(&rm);
    Ok(())
}

pub fn cmd_shuffle_test(
    cfg: &RunConfig,
    manifest: &Option<PathBuf>,
    window: WindowConfig,
) -> Result<()> {
    let manifest = manifest_path(cfg, manifest)?;
    let trials = load_trials(&manifest)?;
    ensure_dir(&cfg.out_dir)?;
    let mut recorder = RunRecorder::new("shuffle-test", cfg.seed, cfg.dump());
    recorder.input(&manifest);

    let segments = segment_trials(&trials, feature_selector(cfg)?, window)?;
    let result = label_shuffle_test(&segments, window, &cv_options(cfg))?;

    let path = cfg.out_dir.join("shuffle_report.csv");
    write_csv(
        &path,
        &[
            "window_length",
            "stride",
            "original_auc",
            "shuffled_auc",
            "seed",
        ],
        &[vec![
            window.length_frames.to_string(),
            window.stride_frames.to_string(),
            fmt_f64(result.original_auc),
            fmt_f64(result.shuffled_auc),
            result.seed.to_string(),
        ]],
    )?;
    recorder.output(&path);
    announce(&path);

    let rm = recorder.finish(&cfg.out_dir)?;
    announce(&rm);
    Ok(())
}

// ---------------------------------------------------------------------------
// rt-summary

pub fn cmd_rt_summary(cfg: &RunConfig, manifest: &Option<PathBuf>) -> Result<()> {
    let manifest = manifest_path(cfg, manifest)?;
    let trials = load_trials(&manifest)?;
    ensure_dir(&cfg.out_dir)?;
    let mut recorder = RunRecorder::new("rt-summary", cfg.seed, cfg.dump());
    recorder.input(&manifest);

    let mut rows = Vec::new();
    for scenario in Scenario::ALL {
        let times: Vec<f64> = trials
            .iter()
            .filter(|t| t.scenario == scenario)
            .map(|t| t.response_time_s)
            .collect();
        if times.len() < 3 {
            continue;
        }
        let summary = rt_summary(&times, 0.95)?;
        rows.push(vec![
            scenario.name().to_string(),
            fmt_f64(summary.mean_s),
            fmt_f64(summary.hdi_low_s),
            fmt_f64(summary.hdi_high_s),
        ]);
    }
    if rows.is_empty() {
        return Err(Error::Data(
            "no scenario has the 3 trials a summary needs".into(),
        ));
    }
    let path = cfg.out_dir.join("rt_summary.csv");
    write_csv(
        &path,
        &["scenario", "mean_s", "hdi_low_s", "hdi_high_s"],
        &rows,
    )?;
    recorder.output(&path);
    announce(&path);

    let rm = recorder.finish(&cfg.out_dir)?;
    announce(&rm);
    Ok(())
}
