//! Stratified k-fold cross-validation with oversampling restricted to the
//! training folds, classification metrics, ROC/AUC, the label-shuffle
//! control, and the window-configuration sweep.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::{knn_score_batch, KnnModel};
use crate::model::{BandPowerTrial, FEATURE_RATE_HZ};
use crate::seed::substream;
use crate::windowing::{adasyn, segment_trials, FeatureSelector, LabeledSegment, WindowConfig};

/// Fold index per segment; synthetic segments are never assigned because
/// oversampling happens after splitting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub n_folds: usize,
    pub seed: u64,
}

/// Class-wise round-robin assignment after a seeded shuffle, so per-fold
/// class counts differ by at most one.
pub fn stratified_kfold(labels: &[bool], n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    if n_folds < 2 {
        return Err(Error::Config("need at least 2 folds".into()));
    }
    for class in [false, true] {
        let count = labels.iter().filter(|&&l| l == class).count();
        if count < n_folds {
            return Err(Error::Data(format!(
                "class {} has {count} segments, fewer than {n_folds} folds",
                class as u8
            )));
        }
    }
    let mut fold_of = vec![0usize; labels.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            fold_of[i] = pos % n_folds;
        }
    }
    Ok(FoldAssignment {
        fold_of,
        n_folds,
        seed,
    })
}

/// Accuracy, precision, recall, and F1 over binary predictions. A zero
/// denominator reports the metric as 0 and sets the warning flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub zero_division: bool,
}

pub fn confusion_metrics(predicted: &[bool], actual: &[bool]) -> Result<Metrics> {
    if predicted.len() != actual.len() {
        return Err(Error::Data(format!(
            "{} predictions vs {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Data("no predictions to score".into()));
    }
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut tn = 0.0;
    let mut fal_n = 0.0;
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p, a) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, false) => tn += 1.0,
            (false, true) => fal_n += 1.0,
        }
    }
    let total = tp + fp + tn + fal_n;
    let mut zero_division = false;
    let precision = if tp + fp > 0.0 {
        tp / (tp + fp)
    } else {
        zero_division = true;
        0.0
    };
    let recall = if tp + fal_n > 0.0 {
        tp / (tp + fal_n)
    } else {
        zero_division = true;
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        accuracy: (tp + tn) / total,
        precision,
        recall,
        f1,
        zero_division,
    })
}

/// ROC curve by descending-threshold sweep with tied scores grouped, plus
/// the trapezoidal AUC. The integer-count accumulation makes the trapezoid
/// exactly equal to the Mann-Whitney probability with ties counted 1/2.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<(Vec<(f64, f64)>, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::Data("scores/labels length mismatch".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Data("roc requires both classes".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Data("roc requires finite scores".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut points = vec![(0.0, 0.0)];
    let mut area2 = 0.0; // twice the area, in count units
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        // group tied scores
        let mut j = i;
        let (mut dtp, mut dfp) = (0usize, 0usize);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                dtp += 1;
            } else {
                dfp += 1;
            }
            j += 1;
        }
        area2 += dfp as f64 * ((tp + tp + dtp) as f64);
        tp += dtp;
        fp += dfp;
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        i = j;
    }
    let auc = area2 / (2.0 * pos as f64 * neg as f64);
    Ok((points, auc))
}

/// Mann-Whitney AUC: fraction of positive-negative pairs ordered correctly,
/// ties counted 1/2. Quadratic; used as the identity oracle in tests.
pub fn mann_whitney_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|&(_, &l)| l)
        .map(|(&s, _)| s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|&(_, &l)| !l)
        .map(|(&s, _)| s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Data("mann-whitney requires both classes".into()));
    }
    let mut num = 0.0;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                num += 2.0;
            } else if p == n {
                num += 1.0;
            }
        }
    }
    Ok(num / (2.0 * pos.len() as f64 * neg.len() as f64))
}

/// One out-of-fold score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OofScore {
    pub segment: usize,
    pub fold: usize,
    pub score: f64,
    pub label: bool,
}

/// Per-fold and aggregate evaluation of one window configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: WindowConfig,
    /// Real (non-synthetic) segments evaluated.
    pub n_segments: usize,
    pub per_fold: Vec<Metrics>,
    pub mean: Metrics,
    /// Pooled out-of-fold ROC, from (0,0) to (1,1), monotone in fpr.
    pub roc_points: Vec<(f64, f64)>,
    pub auc: f64,
    /// Every real segment scored exactly once, by its test fold.
    pub oof: Vec<OofScore>,
}

#[derive(Debug, Clone)]
pub struct CvOptions {
    pub n_folds: usize,
    pub knn_k: usize,
    pub adasyn_k: usize,
    pub adasyn_beta: f64,
    pub seed: u64,
    /// Split segments independently (the default) or keep each trial's
    /// segments within one fold.
    pub group_by_trial: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            n_folds: 5,
            knn_k: 5,
            adasyn_k: 5,
            adasyn_beta: 1.0,
            seed: 0,
            group_by_trial: false,
        }
    }
}

/// Grouped split: whole trials are assigned to folds round-robin after a
/// seeded shuffle, so same-trial windows never straddle train and test.
fn trial_grouped_folds(
    segments: &[LabeledSegment],
    n_folds: usize,
    seed: u64,
) -> Result<FoldAssignment> {
    let mut trials: Vec<&str> = Vec::new();
    for s in segments {
        if !trials.contains(&s.trial_id.as_str()) {
            trials.push(&s.trial_id);
        }
    }
    if trials.len() < n_folds {
        return Err(Error::Data(format!(
            "{} trials cannot fill {n_folds} folds",
            trials.len()
        )));
    }
    let mut order: Vec<usize> = (0..trials.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let fold_of_trial: Vec<usize> = {
        let mut v = vec![0usize; trials.len()];
        for (pos, &t) in order.iter().enumerate() {
            v[t] = pos % n_folds;
        }
        v
    };
    let fold_of = segments
        .iter()
        .map(|s| fold_of_trial[trials.iter().position(|&t| t == s.trial_id).unwrap()])
        .collect();
    Ok(FoldAssignment {
        fold_of,
        n_folds,
        seed,
    })
}

/// Cross-validates a DTW-KNN classifier: per fold, ADASYN runs on the
/// training folds only, the held-out fold is scored, and the pooled
/// out-of-fold scores drive a single ROC curve.
pub fn run_cv(
    segments: &[LabeledSegment],
    cfg: WindowConfig,
    opts: &CvOptions,
) -> Result<EvalReport> {
    if segments.iter().any(|s| s.synthetic) {
        return Err(Error::Data(
            "run_cv takes real segments only; oversampling happens inside each fold".into(),
        ));
    }
    let labels: Vec<bool> = segments.iter().map(|s| s.label).collect();
    let folds = if opts.group_by_trial {
        trial_grouped_folds(segments, opts.n_folds, substream(opts.seed, "split"))?
    } else {
        stratified_kfold(&labels, opts.n_folds, substream(opts.seed, "split"))?
    };

    let mut per_fold = Vec::with_capacity(opts.n_folds);
    let mut oof: Vec<OofScore> = Vec::with_capacity(segments.len());
    for fold in 0..opts.n_folds {
        let test_idx: Vec<usize> = (0..segments.len())
            .filter(|&i| folds.fold_of[i] == fold)
            .collect();
        let train: Vec<LabeledSegment> = (0..segments.len())
            .filter(|&i| folds.fold_of[i] != fold)
            .map(|i| segments[i].clone())
            .collect();
        let test_labels: Vec<bool> = test_idx.iter().map(|&i| segments[i].label).collect();
        if !test_labels.iter().any(|&l| l) || test_labels.iter().all(|&l| l) {
            return Err(Error::Data(format!(
                "fold {fold} is missing a class; try another seed or more data"
            )));
        }

        let augmented = adasyn(
            &train,
            opts.adasyn_k,
            opts.adasyn_beta,
            substream(opts.seed, &format!("adasyn/fold{fold}")),
        )?;
        let model = KnnModel::from_segments(&augmented, opts.knn_k)?;
        let queries: Vec<LabeledSegment> = test_idx.iter().map(|&i| segments[i].clone()).collect();
        let scores = knn_score_batch(&model, &queries)?;

        let predicted: Vec<bool> = scores.iter().map(|&s| s > 0.5).collect();
        per_fold.push(confusion_metrics(&predicted, &test_labels)?);
        for ((&i, &score), &label) in test_idx.iter().zip(&scores).zip(&test_labels) {
            oof.push(OofScore {
                segment: i,
                fold,
                score,
                label,
            });
        }
    }

    oof.sort_by_key(|o| o.segment);
    let oof_scores: Vec<f64> = oof.iter().map(|o| o.score).collect();
    let oof_labels: Vec<bool> = oof.iter().map(|o| o.label).collect();
    let (roc_points, auc) = roc_auc(&oof_scores, &oof_labels)?;

    let n = per_fold.len() as f64;
    let mean = Metrics {
        accuracy: per_fold.iter().map(|m| m.accuracy).sum::<f64>() / n,
        precision: per_fold.iter().map(|m| m.precision).sum::<f64>() / n,
        recall: per_fold.iter().map(|m| m.recall).sum::<f64>() / n,
        f1: per_fold.iter().map(|m| m.f1).sum::<f64>() / n,
        zero_division: per_fold.iter().any(|m| m.zero_division),
    };

    Ok(EvalReport {
        config: cfg,
        n_segments: segments.len(),
        per_fold,
        mean,
        roc_points,
        auc,
        oof,
    })
}

/// AUC on true labels vs. AUC after a seeded uniform label shuffle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShuffleResult {
    pub original_auc: f64,
    pub shuffled_auc: f64,
    pub seed: u64,
}

pub fn label_shuffle_test(
    segments: &[LabeledSegment],
    cfg: WindowConfig,
    opts: &CvOptions,
) -> Result<ShuffleResult> {
    let original = run_cv(segments, cfg, opts)?;

    let mut labels: Vec<bool> = segments.iter().map(|s| s.label).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(substream(opts.seed, "shuffle"));
    labels.shuffle(&mut rng);
    let shuffled_segments: Vec<LabeledSegment> = segments
        .iter()
        .zip(&labels)
        .map(|(s, &label)| {
            let mut s = s.clone();
            s.label = label;
            s
        })
        .collect();
    let shuffled = run_cv(&shuffled_segments, cfg, opts)?;

    Ok(ShuffleResult {
        original_auc: original.auc,
        shuffled_auc: shuffled.auc,
        seed: opts.seed,
    })
}

/// A sweep failure: the configuration that failed and why.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepFailure {
    pub config: WindowConfig,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutcome {
    /// Successful reports, sorted by AUC descending.
    pub reports: Vec<EvalReport>,
    pub failures: Vec<SweepFailure>,
}

/// Evaluates every configuration; per-config failures are recorded and the
/// sweep continues. Configurations are deduplicated preserving order.
pub fn sweep(
    trials: &[BandPowerTrial],
    feature: FeatureSelector,
    configs: &[WindowConfig],
    opts: &CvOptions,
) -> Result<SweepOutcome> {
    if trials.len() < 2 {
        return Err(Error::Data("sweep needs at least 2 trials".into()));
    }
    let mut unique: Vec<WindowConfig> = Vec::new();
    for &cfg in configs {
        if !unique.contains(&cfg) {
            unique.push(cfg);
        }
    }

    let results: Vec<std::result::Result<EvalReport, SweepFailure>> = unique
        .par_iter()
        .map(|&cfg| {
            segment_trials(trials, feature, cfg)
                .and_then(|segments| run_cv(&segments, cfg, opts))
                .map_err(|e| SweepFailure {
                    config: cfg,
                    error: e.to_string(),
                })
        })
        .collect();

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(report) => reports.push(report),
            Err(failure) => failures.push(failure),
        }
    }
    reports.sort_by(|a, b| {
        b.auc
            .partial_cmp(&a.auc)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.config.length_frames.cmp(&b.config.length_frames))
            .then(a.config.stride_frames.cmp(&b.config.stride_frames))
    });
    Ok(SweepOutcome { reports, failures })
}

/// Lookahead provided by a window: its duration at the feature rate.
pub fn lookahead_s(cfg: WindowConfig) -> f64 {
    cfg.lookahead_s(FEATURE_RATE_HZ)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn seg(trial: &str, values: Vec<f64>, label: bool) -> LabeledSegment {
        LabeledSegment {
            trial_id: trial.into(),
            start_frame: Some(0),
            values,
            width: 1,
            label,
            synthetic: false,
        }
    }

    #[test]
    fn stratified_counts_per_fold() {
        // 5 positives + 20 negatives -> every fold gets 1 positive, 4 negatives
        let labels: Vec<bool> = (0..25).map(|i| i < 5).collect();
        let folds = stratified_kfold(&labels, 5, 42).unwrap();
        for fold in 0..5 {
            let pos = (0..25)
                .filter(|&i| folds.fold_of[i] == fold && labels[i])
                .count();
            let neg = (0..25)
                .filter(|&i| folds.fold_of[i] == fold && !labels[i])
                .count();
            assert_eq!(pos, 1);
            assert_eq!(neg, 4);
        }
    }

    #[test]
    fn stratified_deterministic() {
        let labels: Vec<bool> = (0..40).map(|i| i % 4 == 0).collect();
        let a = stratified_kfold(&labels, 5, 7).unwrap();
        let b = stratified_kfold(&labels, 5, 7).unwrap();
        assert_eq!(a.fold_of, b.fold_of);
    }

    #[test]
    fn stratified_too_few_positives_errors() {
        let labels: Vec<bool> = (0..20).map(|i| i < 4).collect();
        assert!(stratified_kfold(&labels, 5, 0).is_err());
    }

    #[test]
    fn metrics_hand_example() {
        // TP=7, FP=3, FN=3, TN=7
        let mut predicted = Vec::new();
        let mut actual = Vec::new();
        for _ in 0..7 {
            predicted.push(true);
            actual.push(true);
        }
        for _ in 0..3 {
            predicted.push(true);
            actual.push(false);
        }
        for _ in 0..3 {
            predicted.push(false);
            actual.push(true);
        }
        for _ in 0..7 {
            predicted.push(false);
            actual.push(false);
        }
        let m = confusion_metrics(&predicted, &actual).unwrap();
        assert!((m.accuracy - 0.7).abs() < 1e-12);
        assert!((m.precision - 0.7).abs() < 1e-12);
        assert!((m.recall - 0.7).abs() < 1e-12);
        assert!((m.f1 - 0.7).abs() < 1e-12);
        assert!(!m.zero_division);
    }

    #[test]
    fn metrics_perfect() {
        let labels = [true, false, true, false];
        let m = confusion_metrics(&labels, &labels).unwrap();
        assert_eq!(
            (m.accuracy, m.precision, m.recall, m.f1),
            (1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn metrics_zero_denominator_flagged() {
        let predicted = [false, false, false];
        let actual = [true, true, false];
        let m = confusion_metrics(&predicted, &actual).unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.recall, 0.0);
        assert!(m.zero_division);
    }

    #[test]
    fn metrics_length_mismatch_errors() {
        assert!(confusion_metrics(&[true], &[true, false]).is_err());
    }

    #[test]
    fn roc_hand_example() {
        let scores = [0.9, 0.8, 0.7, 0.6];
        let labels = [true, false, true, false];
        let (points, auc) = roc_auc(&scores, &labels).unwrap();
        assert!((auc - 0.75).abs() < 1e-15);
        assert_eq!(points[0], (0.0, 0.0));
        assert_eq!(*points.last().unwrap(), (1.0, 1.0));
    }

    #[test]
    fn roc_perfect_separation() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        let (_, auc) = roc_auc(&scores, &labels).unwrap();
        assert_eq!(auc, 1.0);
    }

    #[test]
    fn roc_all_tied_scores() {
        let scores = [0.5; 6];
        let labels = [true, false, true, false, true, false];
        let (points, auc) = roc_auc(&scores, &labels).unwrap();
        assert_eq!(auc, 0.5);
        assert_eq!(points, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn roc_single_class_errors() {
        assert!(roc_auc(&[0.5, 0.6], &[true, true]).is_err());
    }

    #[test]
    fn roc_monotone_and_matches_mann_whitney() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let n = rng.random_range(5..60);
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..8) as f64) / 8.0)
                .collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
            labels[0] = true;
            labels[1] = false;
            let (points, auc) = roc_auc(&scores, &labels).unwrap();
            for w in points.windows(2) {
                assert!(w[1].0 >= w[0].0);
                assert!(w[1].1 >= w[0].1);
            }
            let mw = mann_whitney_auc(&scores, &labels).unwrap();
            assert!((auc - mw).abs() < 1e-12, "{auc} vs {mw}");
            // the published points integrate to the same area
            let trapezoid: f64 = points
                .windows(2)
                .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
                .sum();
            assert!((auc - trapezoid).abs() < 1e-12);
        }
    }

    /// Separable synthetic segments: positives carry a steep ramp.
    fn separable_segments(n_trials: usize, per_trial: usize) -> Vec<LabeledSegment> {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let mut out = Vec::new();
        for t in 0..n_trials {
            let trial = format!("t{t}");
            for w in 0..per_trial {
                let positive = w == per_trial - 1;
                let values: Vec<f64> = (0..6)
                    .map(|i| {
                        let noise: f64 = rng.random::<f64>() * 0.2;
                        if positive {
                            20.0 * (i as f64 + 1.0) / 6.0 + noise
                        } else {
                            noise + (w as f64 * 0.05)
                        }
                    })
                    .collect();
                out.push(seg(&trial, values, positive));
            }
        }
        out
    }

    #[test]
    fn cv_separable_data_high_auc() {
        let segments = separable_segments(12, 6);
        let report = run_cv(
            &segments,
            WindowConfig {
                length_frames: 6,
                stride_frames: 3,
            },
            &CvOptions::default(),
        )
        .unwrap();
        assert!(report.auc >= 0.95, "auc = {}", report.auc);
        assert_eq!(report.n_segments, segments.len());
        assert_eq!(report.per_fold.len(), 5);
    }

    #[test]
    fn cv_random_labels_near_chance() {
        // the permutation-null band needs a few hundred segments to be
        // meaningfully tight
        let mut rng = ChaCha8Rng::seed_from_u64(5150);
        let mut segments = Vec::new();
        for t in 0..50 {
            for _w in 0..10 {
                let values: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
                segments.push(seg(&format!("t{t}"), values, rng.random::<f64>() < 0.2));
            }
        }
        // ensure both classes satisfy fold requirements
        for i in 0..5 {
            segments[i].label = true;
            segments[i + 5].label = false;
        }
        let report = run_cv(
            &segments,
            WindowConfig {
                length_frames: 6,
                stride_frames: 3,
            },
            &CvOptions::default(),
        )
        .unwrap();
        assert!(
            report.auc > 0.40 && report.auc < 0.60,
            "auc = {}",
            report.auc
        );
    }

    #[test]
    fn cv_rejects_synthetic_input() {
        let mut segments = separable_segments(8, 4);
        segments[0].synthetic = true;
        assert!(run_cv(
            &segments,
            WindowConfig {
                length_frames: 6,
                stride_frames: 3
            },
            &CvOptions::default()
        )
        .is_err());
    }

    #[test]
    fn cv_oof_covers_every_segment_once() {
        let segments = separable_segments(10, 5);
        let report = run_cv(
            &segments,
            WindowConfig {
                length_frames: 6,
                stride_frames: 3,
            },
            &CvOptions::default(),
        )
        .unwrap();
        let mut seen: Vec<usize> = report.oof.iter().map(|o| o.segment).collect();
        seen.sort_unstable();
        let expect: Vec<usize> = (0..segments.len()).collect();
        assert_eq!(seen, expect);
    }

    #[test]
    fn cv_deterministic() {
        let segments = separable_segments(8, 5);
        let cfg = WindowConfig {
            length_frames: 6,
            stride_frames: 3,
        };
        let a = run_cv(&segments, cfg, &CvOptions::default()).unwrap();
        let b = run_cv(&segments, cfg, &CvOptions::default()).unwrap();
        assert_eq!(a.auc, b.auc);
        assert_eq!(a.oof, b.oof);
    }

    #[test]
    fn cv_k1_exact_duplicates_perfect_accuracy() {
        // every query has an exact duplicate in training (two copies of each
        // point in different folds is not guaranteed, so duplicate within
        // the same trial set and use k=1 with enough copies spread out)
        let mut segments = Vec::new();
        for copy in 0..5 {
            for v in 0..8 {
                let positive = v >= 6;
                let values: Vec<f64> = (0..4).map(|i| v as f64 * 10.0 + i as f64).collect();
                segments.push(seg(&format!("t{copy}_{v}"), values, positive));
            }
        }
        let report = run_cv(
            &segments,
            WindowConfig {
                length_frames: 4,
                stride_frames: 1,
            },
            &CvOptions {
                knn_k: 1,
                ..Default::default()
            },
        )
        .unwrap();
        for fold in &report.per_fold {
            assert_eq!(fold.accuracy, 1.0);
        }
        assert_eq!(report.auc, 1.0);
    }

    #[test]
    fn shuffle_test_separable_vs_chance() {
        let segments = separable_segments(60, 8);
        let result = label_shuffle_test(
            &segments,
            WindowConfig {
                length_frames: 6,
                stride_frames: 3,
            },
            &CvOptions::default(),
        )
        .unwrap();
        assert!(result.original_auc >= 0.95, "{}", result.original_auc);
        assert!(
            result.shuffled_auc > 0.40 && result.shuffled_auc < 0.60,
            "{}",
            result.shuffled_auc
        );
    }

    #[test]
    fn shuffle_test_on_already_random_labels() {
        // null data: both AUCs sit near chance
        let mut rng = ChaCha8Rng::seed_from_u64(808);
        let mut segments = Vec::new();
        for t in 0..55 {
            for _w in 0..10 {
                let values: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
                segments.push(seg(&format!("t{t}"), values, rng.random::<f64>() < 0.2));
            }
        }
        for i in 0..5 {
            segments[i].label = true;
            segments[i + 5].label = false;
        }
        let result = label_shuffle_test(
            &segments,
            WindowConfig {
                length_frames: 6,
                stride_frames: 3,
            },
            &CvOptions::default(),
        )
        .unwrap();
        assert!(
            result.original_auc > 0.40 && result.original_auc < 0.60,
            "original {}",
            result.original_auc
        );
        assert!(
            result.shuffled_auc > 0.40 && result.shuffled_auc < 0.60,
            "shuffled {}",
            result.shuffled_auc
        );
    }

    #[test]
    fn shuffle_test_deterministic() {
        let segments = separable_segments(8, 5);
        let cfg = WindowConfig {
            length_frames: 6,
            stride_frames: 3,
        };
        let a = label_shuffle_test(&segments, cfg, &CvOptions::default()).unwrap();
        let b = label_shuffle_test(&segments, cfg, &CvOptions::default()).unwrap();
        assert_eq!(a.original_auc, b.original_auc);
        assert_eq!(a.shuffled_auc, b.shuffled_auc);
    }

    #[test]
    fn grouped_split_keeps_trials_whole() {
        let segments = separable_segments(15, 4);
        let report = run_cv(
            &segments,
            WindowConfig {
                length_frames: 6,
                stride_frames: 3,
            },
            &CvOptions {
                group_by_trial: true,
                ..Default::default()
            },
        )
        .unwrap();
        // rebuild the fold of each trial from oof and check consistency
        let folds = &report.oof;
        for t in 0..15 {
            let trial = format!("t{t}");
            let trial_folds: Vec<usize> = folds
                .iter()
                .filter(|o| segments[o.segment].trial_id == trial)
                .map(|o| o.fold)
                .collect();
            assert!(trial_folds.windows(2).all(|w| w[0] == w[1]));
        }
    }
}
