//! In-process workflow test: every subcommand runs against one synthetic
//! dataset and leaves the documented artifacts behind.

use std::path::{Path, PathBuf};

use clap::Parser;
use neurocross_cli::{dispatch, Cli};

fn run(args: &[&str]) {
    let cli = Cli::parse_from(args);
    dispatch(&cli).unwrap_or_else(|e| panic!("{args:?} failed: {e}"));
}

fn out_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nx-workflow-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn assert_rows(path: &Path, at_least: usize) -> Vec<String> {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("missing artifact {}: {e}", path.display()));
    let lines: Vec<String> = text.lines().map(|l| l.to_string()).collect();
    assert!(
        lines.len() > at_least,
        "{} has {} data rows, expected >= {at_least}",
        path.display(),
        lines.len().saturating_sub(1)
    );
    lines
}

#[test]
fn full_command_chain() {
    let out = out_dir("chain");
    let out_s = out.display().to_string();
    let seed = "314";

    run(&[
        "neurocross",
        "--out",
        &out_s,
        "--seed",
        seed,
        "synth",
        "--subjects",
        "8",
        "--trials-per-subject",
        "5",
    ]);
    let manifest = out.join("manifest.jsonl");
    let manifest_s = manifest.display().to_string();
    assert_rows(&manifest, 39); // 40 entries, no header

    run(&[
        "neurocross",
        "--out",
        &out_s,
        "--seed",
        seed,
        "fit-hmm",
        "--manifest",
        &manifest_s,
        "--scope",
        "pooled",
    ]);
    assert!(out.join("preprocessing.json").exists());
    assert!(out.join("hmm.json").exists());

    run(&[
        "neurocross",
        "--out",
        &out_s,
        "--seed",
        seed,
        "decode",
        "--manifest",
        &manifest_s,
    ]);
    assert_rows(&out.join("stages.csv"), 32 * 2);
    assert_rows(&out.join("stage_runs.csv"), 32);

    run(&[
        "neurocross",
        "--out",
        &out_s,
        "--seed",
        seed,
        "stage-stats",
        "--manifest",
        &manifest_s,
    ]);
    let battery = assert_rows(&out.join("stage_stats_battery.csv"), 5);
    assert_eq!(
        battery[0],
        "feature,n_subjects,normality_rejected,friedman_chi2,friedman_df,friedman_p,posthoc_run"
    );
    let table2 = assert_rows(&out.join("stage_stats.csv"), 0);
    assert_eq!(table2[0], "comparison,test_statistic,p_value,effect_size");

    run(&[
        "neurocross",
        "--out",
        &out_s,
        "--seed",
        seed,
        "segment",
        "--manifest",
        &manifest_s,
        "--length",
        "5",
        "--stride",
        "9",
    ]);
    assert_rows(&out.join("segments_L5_S9.csv"), 32);

    run(&[
        "neurocross",
        "--out",
        &out_s,
        "--seed",
        seed,
        "cv",
        "--manifest",
        &manifest_s,
        "--length",
        "9",
        "--stride",
        "3",
    ]);
    let report = assert_rows(&out.join("cv_report.csv"), 1);
    assert_eq!(
        report[0],
        "window_length,stride,n_segments,accuracy,precision,recall,f1,auc,lookahead_s"
    );
    assert_rows(&out.join("cv_folds.csv"), 5);
    assert_rows(&out.join("roc_L9_S3.csv"), 2);

    run(&[
        "neurocross",
        "--out",
        &out_s,
        "--seed",
        seed,
        "shuffle-test",
        "--manifest",
        &manifest_s,
        "--length",
        "9",
        "--stride",
        "3",
    ]);
    assert_rows(&out.join("shuffle_report.csv"), 1);

    run(&[
        "neurocross",
        "--out",
        &out_s,
        "--seed",
        seed,
        "rt-summary",
        "--manifest",
        &manifest_s,
    ]);
    let rt = assert_rows(&out.join("rt_summary.csv"), 5);
    assert_eq!(rt[0], "scenario,mean_s,hdi_low_s,hdi_high_s");

    assert!(out.join("run_manifest.json").exists());
    std::fs::remove_dir_all(&out).ok();
}

#[test]
fn default_sweep_covers_comparison_set_and_grid() {
    let out = out_dir("sweep");
    let out_s = out.display().to_string();

    run(&[
        "neurocross",
        "--out",
        &out_s,
        "--seed",
        "271",
        "synth",
        "--subjects",
        "6",
        "--trials-per-subject",
        "3",
    ]);
    let manifest_s = out.join("manifest.jsonl").display().to_string();

    run(&[
        "neurocross",
        "--out",
        &out_s,
        "--seed",
        "271",
        "sweep",
        "--manifest",
        &manifest_s,
    ]);
    let lines = assert_rows(&out.join("sweep_report.csv"), 4);

    // the four comparison configurations plus the full grid at stride 3,
    // minus any configuration that failed (none expected at these durations)
    let rows: Vec<Vec<&str>> = lines[1..].iter().map(|l| l.split(',').collect()).collect();
    for expect in [("5", "9"), ("8", "9"), ("9", "3"), ("11", "7")] {
        assert!(
            rows.iter().any(|r| r[0] == expect.0 && r[1] == expect.1),
            "missing comparison config {expect:?}"
        );
    }
    assert!(rows.len() >= 15, "grid rows missing: {}", rows.len());
    // sorted by auc descending
    let aucs: Vec<f64> = rows.iter().map(|r| r[7].parse().unwrap()).collect();
    for w in aucs.windows(2) {
        assert!(w[0] >= w[1]);
    }
    // every successful configuration leaves its ROC points behind
    for r in &rows {
        let roc = out.join(format!("roc_L{}_S{}.csv", r[0], r[1]));
        assert!(roc.exists(), "missing {}", roc.display());
    }
    std::fs::remove_dir_all(&out).ok();
}

#[test]
fn config_file_drives_the_run() {
    let out = out_dir("config");
    let out_s = out.display().to_string();

    run(&[
        "neurocross",
        "--out",
        &out_s,
        "--seed",
        "99",
        "synth",
        "--subjects",
        "6",
        "--trials-per-subject",
        "3",
    ]);
    let manifest = out.join("manifest.jsonl");

    let config_path = out.join("run.conf");
    std::fs::write(
        &config_path,
        format!(
            "paths.manifest = {}\npaths.out_dir = {}\nseed = 99\nwindowing.configs = 5x9,9x3\n",
            manifest.display(),
            out.display()
        ),
    )
    .unwrap();
    let config_s = config_path.display().to_string();

    run(&["neurocross", "--config", &config_s, "sweep"]);
    let lines = assert_rows(&out.join("sweep_report.csv"), 2);
    assert_eq!(lines.len(), 3); // header + exactly the two configured rows
    std::fs::remove_dir_all(&out).ok();
}
