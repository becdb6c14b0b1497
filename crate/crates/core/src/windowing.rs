//! Sliding-window segmentation with end-anchored positive labeling, the
//! window-length grid, and ADASYN oversampling of the minority class.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BandPowerTrial;

/// Window length and stride, both in frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowConfig {
    pub length_frames: usize,
    pub stride_frames: usize,
}

impl WindowConfig {
    pub fn new(length_frames: usize, stride_frames: usize) -> Result<Self> {
        if length_frames < 2 {
            return Err(Error::Config(format!(
                "window length {length_frames} must be >= 2 frames"
            )));
        }
        if stride_frames < 1 {
            return Err(Error::Config("stride must be >= 1 frame".into()));
        }
        Ok(WindowConfig {
            length_frames,
            stride_frames,
        })
    }

    /// Advance notice the window provides: its duration in seconds.
    pub fn lookahead_s(&self, rate_hz: f64) -> f64 {
        self.length_frames as f64 / rate_hz
    }
}

/// One fixed-length window of a feature sequence. Label 1 marks the window
/// ending at the trial's final frame (the decision-resolution window);
/// synthetic minority samples carry no source frame range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSegment {
    pub trial_id: String,
    pub start_frame: Option<usize>,
    /// Window values; for multivariate windows, frames stored row-major.
    pub values: Vec<f64>,
    /// Coordinates per frame (1 = univariate).
    pub width: usize,
    pub label: bool,
    pub synthetic: bool,
}

impl LabeledSegment {
    pub fn n_frames(&self) -> usize {
        self.values.len() / self.width
    }
}

/// Segments a univariate sequence: regular windows start at 0, S, 2S, ...;
/// if no regular window ends at the final frame, an end-anchored window is
/// appended. Exactly the window ending at the final frame is labeled 1.
pub fn slide(sequence: &[f64], trial_id: &str, cfg: WindowConfig) -> Result<Vec<LabeledSegment>> {
    let rows: Vec<Vec<f64>> = sequence.iter().map(|&v| vec![v]).collect();
    slide_multi(&rows, trial_id, cfg)
}

/// Multivariate variant of [`slide`]; each frame is one row of `frames`.
pub fn slide_multi(
    frames: &[Vec<f64>],
    trial_id: &str,
    cfg: WindowConfig,
) -> Result<Vec<LabeledSegment>> {
    let n = frames.len();
    let length = cfg.length_frames;
    let stride = cfg.stride_frames;
    if n < length {
        return Err(Error::Data(format!(
            "trial `{trial_id}` shorter than window: {n} frames < length {length}"
        )));
    }
    let width = frames[0].len();
    if width == 0 || frames.iter().any(|r| r.len() != width) {
        return Err(Error::Data(format!("trial `{trial_id}` has ragged frames")));
    }

    let mut starts: Vec<usize> = (0..=(n - length)).step_by(stride).collect();
    if (n - length) % stride != 0 {
        // guarantee the end-anchored window that carries the positive label
        starts.push(n - length);
    }

    let segments = starts
        .iter()
        .map(|&start| {
            let mut values = Vec::with_capacity(length * width);
            for row in &frames[start..start + length] {
                values.extend_from_slice(row);
            }
            LabeledSegment {
                trial_id: trial_id.to_string(),
                start_frame: Some(start),
                values,
                width,
                label: start + length == n,
                synthetic: false,
            }
        })
        .collect();
    Ok(segments)
}

/// Which feature stream windows are cut from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSelector {
    /// One flat feature column (univariate windows).
    Single(usize),
    /// All 70 columns (multivariate windows).
    All,
}

/// Segments every trial with the same configuration.
pub fn segment_trials(
    trials: &[BandPowerTrial],
    feature: FeatureSelector,
    cfg: WindowConfig,
) -> Result<Vec<LabeledSegment>> {
    let mut out = Vec::new();
    for trial in trials {
        let segments = match feature {
            FeatureSelector::Single(idx) => {
                slide(&trial.feature_series(idx), &trial.trial_id, cfg)?
            }
            FeatureSelector::All => slide_multi(&trial.frames, &trial.trial_id, cfg)?,
        };
        out.extend(segments);
    }
    Ok(out)
}

/// Window lengths of the configuration grid: durations from 0.25 s to 2.0 s
/// in 0.125 s steps, converted to frames at the given rate.
pub fn window_grid(rate_hz: f64) -> Vec<usize> {
    let mut lengths = Vec::new();
    for step in 2..=16 {
        let duration = step as f64 * 0.125;
        let frames = (duration * rate_hz).round() as usize;
        if frames >= 2 && lengths.last() != Some(&frames) {
            lengths.push(frames);
        }
    }
    lengths
}

/// The four window configurations reported in the comparison table.
pub fn comparison_configs() -> Vec<WindowConfig> {
    [(5, 9), (8, 9), (9, 3), (11, 7)]
        .iter()
        .map(|&(l, s)| WindowConfig {
            length_frames: l,
            stride_frames: s,
        })
        .collect()
}

/// ADASYN oversampling: the minority class gains `floor(beta * (N_maj -
/// N_min))` synthetic samples apportioned per minority point in proportion to
/// the fraction of majority samples among its k nearest neighbors, so points
/// near the class border receive more synthesis. Each synthetic sample is a
/// convex combination `x_i + lambda * (x_z - x_i)` of two real minority
/// samples. Returns the input segments with synthetics appended.
pub fn adasyn(
    segments: &[LabeledSegment],
    k_neighbors: usize,
    beta: f64,
    seed: u64,
) -> Result<Vec<LabeledSegment>> {
    if k_neighbors == 0 {
        return Err(Error::Config("adasyn requires k_neighbors >= 1".into()));
    }
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::Config(format!("adasyn beta {beta} must be >= 0")));
    }
    let n = segments.len();
    let positives = segments.iter().filter(|s| s.label).count();
    let negatives = n - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Data(
            "adasyn requires both classes to be present".into(),
        ));
    }
    let dim = segments[0].values.len();
    if segments.iter().any(|s| s.values.len() != dim) {
        return Err(Error::Data("adasyn requires equal-length segments".into()));
    }

    let minority_label = positives < negatives;
    let (n_min, n_maj) = if minority_label {
        (positives, negatives)
    } else {
        (negatives, positives)
    };
    if n_min < 2 {
        return Err(Error::Data(format!(
            "adasyn requires at least 2 minority samples, found {n_min}"
        )));
    }

    let total = (beta * (n_maj - n_min) as f64).floor() as usize;
    let mut out = segments.to_vec();
    if total == 0 {
        return Ok(out);
    }

    let minority_idx: Vec<usize> = (0..n)
        .filter(|&i| segments[i].label == minority_label)
        .collect();

    // border density r_i: majority fraction among the k nearest neighbors
    // (all classes, self excluded)
    let k_all = k_neighbors.min(n - 1);
    let mut density: Vec<f64> = Vec::with_capacity(minority_idx.len());
    for &i in &minority_idx {
        let neighbors = nearest(segments, i, |_| true, k_all);
        let majority_count = neighbors
            .iter()
            .filter(|&&j| segments[j].label != minority_label)
            .count();
        density.push(majority_count as f64 / k_all as f64);
    }
    let density_sum: f64 = density.iter().sum();
    let weights: Vec<f64> = if density_sum > 0.0 {
        density.iter().map(|r| r / density_sum).collect()
    } else {
        // minority far from all majority points: fall back to uniform apportionment
        vec![1.0 / minority_idx.len() as f64; minority_idx.len()]
    };

    let quotas = largest_remainder_apportion(&weights, total);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (slot, &i) in minority_idx.iter().enumerate() {
        if quotas[slot] == 0 {
            continue;
        }
        // donor pool: k nearest minority neighbors of x_i
        let k_min = k_neighbors.min(minority_idx.len() - 1);
        let donors = nearest(segments, i, |j| segments[j].label == minority_label, k_min);
        for _ in 0..quotas[slot] {
            let z = donors[rng.random_range(0..donors.len())];
            let lambda: f64 = rng.random();
            let values: Vec<f64> = segments[i]
                .values
                .iter()
                .zip(&segments[z].values)
                .map(|(&a, &b)| a + lambda * (b - a))
                .collect();
            out.push(LabeledSegment {
                trial_id: "synthetic".to_string(),
                start_frame: None,
                values,
                width: segments[i].width,
                label: minority_label,
                synthetic: true,
            });
        }
    }
    Ok(out)
}

/// Indices of the k nearest (Euclidean) segments to `segments[query]` among
/// those passing `filter`, self excluded. Distance ties break by lower index.
fn nearest(
    segments: &[LabeledSegment],
    query: usize,
    filter: impl Fn(usize) -> bool,
    k: usize,
) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = segments
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != query && filter(j))
        .map(|(j, s)| {
            let d: f64 = s
                .values
                .iter()
                .zip(&segments[query].values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d, j)
        })
        .collect();
    scored.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    scored.truncate(k);
    scored.into_iter().map(|(_, j)| j).collect()
}

/// Integer apportionment of `total` by weight with exact sum: floor the
/// shares, then hand remaining units to the largest fractional parts
/// (ties by index).
fn largest_remainder_apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let shares: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut quotas: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.partial_cmp(&fa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for idx in 0..total.saturating_sub(assigned) {
        quotas[order[idx % order.len()]] += 1;
    }
    quotas
}
