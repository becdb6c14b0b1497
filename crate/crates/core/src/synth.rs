//! Synthetic trial generation from a known ground-truth HMM: the recovery
//! oracle for fitting/decoding and the test bed for the classification
//! pipeline.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::HmmModel;
use crate::model::{BandPowerTrial, Scenario, StagePath, FEATURE_RATE_HZ, N_FEATURES};
use crate::seed::substream;

/// Configuration for the generator. Each trial samples a state path from the
/// truth model, emits Gaussian component scores per frame, maps them through
/// the loading matrix, adds isotropic noise, and offsets the result so all
/// powers are nonnegative.
///
/// The final `exec_tail_frames` frames are forced into the last state so the
/// end-anchored label rule has signal; set it to 0 for a pure Markov sample
/// (the transition-frequency oracle needs that). `ramp_amplitude` > 0
/// additionally injects a linear pre-decision ramp into `ramp_feature` over
/// the final `ramp_frames` frames.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub truth_model: HmmModel,
    pub n_subjects: usize,
    pub trials_per_subject: usize,
    pub mean_duration_s: f64,
    pub duration_jitter_s: f64,
    pub seed: u64,
    /// Mixing map from component space to feature space, n_dims x 70.
    pub loading_matrix: Vec<Vec<f64>>,
    pub noise_sigma: f64,
    pub exec_tail_frames: usize,
    pub ramp_amplitude: f64,
    pub ramp_frames: usize,
    pub ramp_feature: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            truth_model: default_truth_model(),
            n_subjects: 12,
            trials_per_subject: 5,
            mean_duration_s: 4.0,
            duration_jitter_s: 1.0,
            seed: 0,
            loading_matrix: default_loading_matrix(),
            noise_sigma: 0.25,
            exec_tail_frames: 8,
            ramp_amplitude: 50.0,
            ramp_frames: 12,
            // F4.high_beta, the designated discriminative feature
            ramp_feature: 58,
        }
    }
}

/// A 4-state, 5-component truth model with separated means and a sticky
/// forward-leaning transition structure.
pub fn default_truth_model() -> HmmModel {
    HmmModel {
        n_states: 4,
        n_dims: 5,
        initial: vec![0.85, 0.05, 0.05, 0.05],
        transition: vec![
            vec![0.80, 0.15, 0.03, 0.02],
            vec![0.05, 0.80, 0.12, 0.03],
            vec![0.02, 0.05, 0.80, 0.13],
            vec![0.02, 0.03, 0.05, 0.90],
        ],
        means: vec![
            vec![4.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 4.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 4.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 4.0, 0.0],
        ],
        variances: vec![vec![1.0; 5]; 4],
    }
}

/// Deterministic block mixing: component d drives band d across all
/// channels, with a weaker channel-group term.
pub fn default_loading_matrix() -> Vec<Vec<f64>> {
    let mut loading = vec![vec![0.0; N_FEATURES]; 5];
    for (d, row) in loading.iter_mut().enumerate() {
        for (j, w) in row.iter_mut().enumerate() {
            let band = j % 5;
            let channel_group = (j / 5) % 5;
            if band == d {
                *w += 1.0;
            }
            if channel_group == d {
                *w += 0.2;
            }
        }
    }
    loading
}

/// Ground truth for one generated trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialTruth {
    pub trial_id: String,
    pub states: Vec<usize>,
    /// Latent component scores per frame, before mixing and noise.
    pub scores: Vec<Vec<f64>>,
}

/// Generates trials with known ground truth. Deterministic given the seed:
/// each trial draws from its own substream, so outputs do not depend on
/// iteration order.
pub fn synth_generate(config: &SynthConfig) -> Result<(Vec<BandPowerTrial>, Vec<TrialTruth>)> {
    config.truth_model.validate()?;
    if config.n_subjects < 1 || config.trials_per_subject < 1 {
        return Err(Error::Config("need at least one subject and trial".into()));
    }
    if config.mean_duration_s.is_nan()
        || config.mean_duration_s <= 0.0
        || config.duration_jitter_s < 0.0
    {
        return Err(Error::Config("durations must be positive".into()));
    }
    if config.duration_jitter_s >= config.mean_duration_s {
        return Err(Error::Config(
            "duration jitter must be smaller than the mean duration".into(),
        ));
    }
    if config.noise_sigma.is_nan() || config.noise_sigma < 0.0 {
        return Err(Error::Config("noise_sigma must be nonnegative".into()));
    }
    let n_dims = config.truth_model.n_dims;
    if config.loading_matrix.len() != n_dims
        || config.loading_matrix.iter().any(|r| r.len() != N_FEATURES)
    {
        return Err(Error::Config(format!(
            "loading matrix must be {n_dims} x {N_FEATURES}"
        )));
    }
    if config.ramp_feature >= N_FEATURES {
        return Err(Error::Config(format!(
            "ramp feature {} out of range",
            config.ramp_feature
        )));
    }

    let model = &config.truth_model;
    let mut trials = Vec::new();
    let mut truths = Vec::new();
    for subject in 0..config.n_subjects {
        let subject_id = format!("s{:02}", subject + 1);
        for index in 0..config.trials_per_subject {
            let trial_id = format!("{subject_id}_t{}", index + 1);
            let mut rng =
                ChaCha8Rng::seed_from_u64(substream(config.seed, &format!("synth/{trial_id}")));

            let duration = config.mean_duration_s
                + (rng.random::<f64>() * 2.0 - 1.0) * config.duration_jitter_s;
            let n_frames = ((duration * FEATURE_RATE_HZ).round() as usize).max(2);
            let response_time_s = n_frames as f64 / FEATURE_RATE_HZ;

            // state path
            let mut states = Vec::with_capacity(n_frames);
            let mut state = sample_categorical(&model.initial, &mut rng);
            states.push(state);
            for _ in 1..n_frames {
                state = sample_categorical(&model.transition[state], &mut rng);
                states.push(state);
            }
            let tail = config.exec_tail_frames.min(n_frames);
            for s in states.iter_mut().skip(n_frames - tail) {
                *s = model.n_states - 1;
            }

            // component scores and mixed features
            let mut scores = Vec::with_capacity(n_frames);
            let mut frames = Vec::with_capacity(n_frames);
            for &s in &states {
                let score: Vec<f64> = (0..n_dims)
                    .map(|d| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        model.means[s][d] + z * model.variances[s][d].sqrt()
                    })
                    .collect();
                let mut row = vec![0.0; N_FEATURES];
                for (d, &weight) in score.iter().enumerate() {
                    for (r, &l) in row.iter_mut().zip(&config.loading_matrix[d]) {
                        *r += weight * l;
                    }
                }
                if config.noise_sigma > 0.0 {
                    for r in row.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *r += z * config.noise_sigma;
                    }
                }
                scores.push(score);
                frames.push(row);
            }

            if config.ramp_amplitude > 0.0 && config.ramp_frames > 0 {
                let ramp = config.ramp_frames.min(n_frames);
                for (i, t) in (n_frames - ramp..n_frames).enumerate() {
                    frames[t][config.ramp_feature] +=
                        config.ramp_amplitude * (i + 1) as f64 / ramp as f64;
                }
            }

            // offset so every power is nonnegative
            let min = frames
                .iter()
                .flat_map(|r| r.iter())
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if min < 0.0 {
                for row in frames.iter_mut() {
                    for v in row.iter_mut() {
                        *v -= min;
                    }
                }
            }

            trials.push(BandPowerTrial {
                trial_id: trial_id.clone(),
                subject_id: subject_id.clone(),
                scenario: Scenario::ALL[index % Scenario::ALL.len()],
                feature_rate_hz: FEATURE_RATE_HZ,
                frames,
                response_time_s,
            });
            truths.push(TrialTruth {
                trial_id,
                states,
                scores,
            });
        }
    }
    Ok((trials, truths))
}

fn sample_categorical(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let mut target = rng.random::<f64>();
    for (i, &p) in probs.iter().enumerate() {
        target -= p;
        if target <= 0.0 {
            return i;
        }
    }
    probs.len() - 1
}

/// Ground-truth stage paths as [`StagePath`] values.
pub fn truth_paths(truths: &[TrialTruth]) -> Vec<StagePath> {
    truths
        .iter()
        .map(|t| StagePath::new(t.states.clone()))
        .collect()
}
