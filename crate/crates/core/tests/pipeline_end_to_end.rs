//! End-to-end pipeline over synthetic trials: stage decomposition, the
//! statistics battery, windowed classification, and the shuffle control.

use neurocross_core::eval::{label_shuffle_test, run_cv, sweep, CvOptions};
use neurocross_core::hmm::FitOptions;
use neurocross_core::pipeline::{decode_trials, fit_hmm_models, fit_preprocessing, Scope};
use neurocross_core::stats::{rt_summary, stage_battery, stage_feature_table};
use neurocross_core::synth::{synth_generate, truth_paths, SynthConfig};
use neurocross_core::windowing::{segment_trials, comparison_configs, FeatureSelector, WindowConfig};
use neurocross_core::Scenario;

#[test]
fn stage_statistics_from_ground_truth_paths() {
    let config = SynthConfig {
        seed: 21,
        ..Default::default()
    };
    let (trials, truths) = synth_generate(&config).unwrap();
    let paths = truth_paths(&truths);
    let tables = stage_feature_table(&trials, &paths).unwrap();
    assert_eq!(tables.len(), 70);

    // the designated feature carries the decision ramp, so its stage means
    // must separate and the battery must reach post-hoc comparisons
    let battery = stage_battery(&tables[config.ramp_feature]).unwrap();
    assert!(battery.n_complete_rows >= 10);
    assert!(
        battery.friedman.p_value < 0.05,
        "friedman p = {}",
        battery.friedman.p_value
    );
    let posthoc = battery.posthoc.expect("post-hoc gated on significance");
    assert_eq!(posthoc.len(), 6);
    // stage 3 (execution) should dominate the early stages in that feature
    let p03 = posthoc
        .iter()
        .find(|r| (r.stage_a, r.stage_b) == (0, 3))
        .unwrap();
    assert!(p03.effect_size_d < 0.0, "d = {}", p03.effect_size_d);
}

#[test]
fn decoded_stages_recover_truth_on_latent_scores() {
    let config = SynthConfig {
        seed: 33,
        ..Default::default()
    };
    let (trials, truths) = synth_generate(&config).unwrap();
    let scores: Vec<Vec<Vec<f64>>> = truths.iter().map(|t| t.scores.clone()).collect();
    let fitted = fit_hmm_models(
        &trials,
        &scores,
        Scope::Pooled,
        &FitOptions {
            seed: 2,
            ..Default::default()
        },
    )
    .unwrap();
    let decoded = decode_trials(&fitted, &trials, &scores).unwrap();

    // generator states are already temporally ordered, so after the
    // first-occurrence relabel the decoded stages should agree frame-wise
    let mut agree = 0usize;
    let mut total = 0usize;
    for (truth, path) in truths.iter().zip(&decoded) {
        for (&a, &b) in truth.states.iter().zip(&path.states) {
            total += 1;
            if a == b {
                agree += 1;
            }
        }
    }
    let rate = agree as f64 / total as f64;
    assert!(rate >= 0.9, "frame agreement {rate}");
}

#[test]
fn full_preprocessing_path_runs_pooled() {
    let config = SynthConfig {
        n_subjects: 6,
        trials_per_subject: 3,
        seed: 9,
        ..Default::default()
    };
    let (trials, _) = synth_generate(&config).unwrap();
    let preproc = fit_preprocessing(&trials, Scope::Pooled, 5).unwrap();
    let scores = preproc.transform(&trials).unwrap();
    let fitted = fit_hmm_models(
        &trials,
        &scores,
        Scope::Pooled,
        &FitOptions {
            seed: 2,
            max_iter: 60,
            ..Default::default()
        },
    )
    .unwrap();
    let paths = decode_trials(&fitted, &trials, &scores).unwrap();
    let tables = stage_feature_table(&trials, &paths).unwrap();
    assert_eq!(tables.len(), 70);
}

#[test]
fn windowed_classification_beats_shuffle() {
    let config = SynthConfig {
        seed: 55,
        ..Default::default()
    };
    let (trials, _) = synth_generate(&config).unwrap();
    let cfg = WindowConfig {
        length_frames: 9,
        stride_frames: 3,
    };
    let segments = segment_trials(&trials, FeatureSelector::Single(58), cfg).unwrap();
    assert_eq!(
        segments.iter().filter(|s| s.label).count(),
        trials.len(),
        "exactly one positive per trial"
    );
    let opts = CvOptions {
        seed: 14,
        ..Default::default()
    };
    let report = run_cv(&segments, cfg, &opts).unwrap();
    assert!(report.auc >= 0.95, "auc = {}", report.auc);

    let shuffle = label_shuffle_test(&segments, cfg, &opts).unwrap();
    assert!(shuffle.original_auc >= 0.95);
    assert!(
        shuffle.shuffled_auc > 0.40 && shuffle.shuffled_auc < 0.60,
        "shuffled auc = {}",
        shuffle.shuffled_auc
    );
}

#[test]
fn sweep_isolates_failing_configs() {
    let config = SynthConfig {
        n_subjects: 4,
        trials_per_subject: 3,
        mean_duration_s: 2.0,
        duration_jitter_s: 0.25,
        seed: 66,
        ..Default::default()
    };
    let (trials, _) = synth_generate(&config).unwrap();
    let shortest = trials.iter().map(|t| t.n_frames()).min().unwrap();
    let mut configs = comparison_configs();
    configs.push(WindowConfig {
        length_frames: shortest + 5,
        stride_frames: 3,
    });
    let outcome = sweep(
        &trials,
        FeatureSelector::Single(58),
        &configs,
        &CvOptions {
            seed: 4,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(
        outcome
            .failures
            .iter()
            .any(|f| f.config.length_frames == shortest + 5),
        "oversized config should fail"
    );
    assert!(!outcome.reports.is_empty());
    // reports sorted by AUC descending
    for w in outcome.reports.windows(2) {
        assert!(w[0].auc >= w[1].auc);
    }
}

#[test]
fn rt_summary_tracks_generator_parameters() {
    let config = SynthConfig {
        n_subjects: 12,
        trials_per_subject: 5,
        mean_duration_s: 4.0,
        duration_jitter_s: 1.0,
        seed: 99,
        ..Default::default()
    };
    let (trials, _) = synth_generate(&config).unwrap();
    for scenario in Scenario::ALL {
        let times: Vec<f64> = trials
            .iter()
            .filter(|t| t.scenario == scenario)
            .map(|t| t.response_time_s)
            .collect();
        assert!(times.len() >= 3);
        let summary = rt_summary(&times, 0.95).unwrap();
        // durations are uniform in mean +- jitter
        assert!(
            (summary.mean_s - config.mean_duration_s).abs() <= config.duration_jitter_s,
            "scenario {scenario:?}: mean {}",
            summary.mean_s
        );
        assert!(summary.hdi_low_s < summary.hdi_high_s);
        assert!(summary.hdi_low_s >= config.mean_duration_s - config.duration_jitter_s - 0.2);
        assert!(summary.hdi_high_s <= config.mean_duration_s + config.duration_jitter_s + 0.2);
    }
}
