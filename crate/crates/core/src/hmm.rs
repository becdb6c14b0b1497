//! 4-state Gaussian hidden Markov model over principal-component scores:
//! Baum-Welch fitting, Viterbi stage decoding, and stage-run extraction.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::StagePath;

/// Smallest admissible emission variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;

const LN_2PI: f64 = 1.837877066409345483560659472811;

/// Gaussian HMM with diagonal covariance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HmmModel {
    pub n_states: usize,
    pub n_dims: usize,
    /// Initial state distribution, sums to 1.
    pub initial: Vec<f64>,
    /// Row-stochastic transition matrix, n_states x n_states.
    pub transition: Vec<Vec<f64>>,
    /// Per-state emission means, n_states x n_dims.
    pub means: Vec<Vec<f64>>,
    /// Per-state diagonal variances, n_states x n_dims, every entry >= floor.
    pub variances: Vec<Vec<f64>>,
}

impl HmmModel {
    /// Checks the stochasticity and variance-floor invariants.
    pub fn validate(&self) -> Result<()> {
        let k = self.n_states;
        if k == 0 {
            return Err(Error::Config("model must have at least one state".into()));
        }
        if self.initial.len() != k
            || self.transition.len() != k
            || self.means.len() != k
            || self.variances.len() != k
        {
            return Err(Error::Config(
                "model field shapes disagree with n_states".into(),
            ));
        }
        let sum: f64 = self.initial.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.initial.iter().any(|&p| p < 0.0) {
            return Err(Error::Config(format!(
                "initial distribution sums to {sum}, expected 1"
            )));
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Config(format!("transition row {i} has wrong width")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::Config(format!(
                    "transition row {i} sums to {s}, expected 1"
                )));
            }
        }
        for (i, row) in self.variances.iter().enumerate() {
            if row.len() != self.n_dims || self.means[i].len() != self.n_dims {
                return Err(Error::Config(format!("emission row {i} has wrong width")));
            }
            if row.iter().any(|&v| v < VARIANCE_FLOOR * (1.0 - 1e-12)) {
                return Err(Error::Config(format!(
                    "variance below floor {VARIANCE_FLOOR} in state {i}"
                )));
            }
        }
        Ok(())
    }

    /// Log density of `obs` under state `state`'s diagonal Gaussian.
    pub fn log_emission(&self, state: usize, obs: &[f64]) -> f64 {
        let mean = &self.means[state];
        let var = &self.variances[state];
        let mut ll = 0.0;
        for d in 0..self.n_dims {
            let diff = obs[d] - mean[d];
            ll += -0.5 * (LN_2PI + var[d].ln()) - diff * diff / (2.0 * var[d]);
        }
        ll
    }

    fn check_sequence(&self, sequence: &[Vec<f64>]) -> Result<()> {
        if sequence.is_empty() {
            return Err(Error::Data("empty observation sequence".into()));
        }
        if let Some(row) = sequence.iter().find(|r| r.len() != self.n_dims) {
            return Err(Error::Data(format!(
                "observation width {} does not match model dimension {}",
                row.len(),
                self.n_dims
            )));
        }
        Ok(())
    }
}

/// Diagnostics from one EM fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    /// Log-likelihood after each E-step; non-decreasing within 1e-8.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when any variance was clamped to the floor.
    pub variance_floored: bool,
    /// Set when the data has fewer than 10 frames per free parameter.
    pub underdetermined: bool,
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub n_states: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            n_states: 4,
            seed: 0,
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

/// Fits a Gaussian HMM to one or more score sequences with Baum-Welch EM.
///
/// Initialization is seeded k-means on the pooled frames, so the fit is
/// deterministic given `opts.seed`.
pub fn hmm_fit(sequences: &[Vec<Vec<f64>>], opts: &FitOptions) -> Result<(HmmModel, FitReport)> {
    if opts.n_states == 0 {
        return Err(Error::Config("n_states must be >= 1".into()));
    }
    if sequences.is_empty() || sequences.iter().all(|s| s.is_empty()) {
        return Err(Error::Data("no observation sequences to fit".into()));
    }
    let n_dims = sequences
        .iter()
        .flat_map(|s| s.iter())
        .next()
        .map(|r| r.len())
        .unwrap();
    if n_dims == 0 {
        return Err(Error::Data("observations have zero dimensions".into()));
    }
    for seq in sequences {
        for row in seq {
            if row.len() != n_dims {
                return Err(Error::Data("ragged observation dimensions".into()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data("non-finite observation".into()));
            }
        }
    }

    let total_frames: usize = sequences.iter().map(|s| s.len()).sum();
    let k = opts.n_states;
    let param_count = (k - 1) + k * (k - 1) + 2 * k * n_dims;
    let underdetermined = total_frames <= 10 * param_count;

    let mut model = init_with_kmeans(sequences, k, n_dims, opts.seed);
    let mut floored = false;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        // E-step over all sequences
        let mut ll_total = 0.0;
        let mut init_acc = vec![0.0; k];
        let mut trans_num = vec![vec![0.0; k]; k];
        let mut trans_den = vec![0.0; k];
        let mut gamma_sum = vec![0.0; k];
        let mut mean_acc = vec![vec![0.0; n_dims]; k];
        let mut sq_acc = vec![vec![0.0; n_dims]; k];

        for seq in sequences.iter().filter(|s| !s.is_empty()) {
            let fb = forward_backward(&model, seq);
            ll_total += fb.log_likelihood;
            for j in 0..k {
                init_acc[j] += fb.gamma[0][j];
            }
            for t in 0..seq.len() {
                for j in 0..k {
                    let g = fb.gamma[t][j];
                    gamma_sum[j] += g;
                    for d in 0..n_dims {
                        mean_acc[j][d] += g * seq[t][d];
                        sq_acc[j][d] += g * seq[t][d] * seq[t][d];
                    }
                }
            }
            for xi_t in &fb.xi {
                for i in 0..k {
                    for j in 0..k {
                        trans_num[i][j] += xi_t[i][j];
                        trans_den[i] += xi_t[i][j];
                    }
                }
            }
        }

        trace.push(ll_total);
        let len = trace.len();
        if len >= 2 && (trace[len - 1] - trace[len - 2]).abs() < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;

        // M-step
        let n_seq = sequences.iter().filter(|s| !s.is_empty()).count() as f64;
        for j in 0..k {
            model.initial[j] = init_acc[j] / n_seq;
        }
        normalize_in_place(&mut model.initial);
        for i in 0..k {
            if trans_den[i] > 0.0 {
                for j in 0..k {
                    model.transition[i][j] = trans_num[i][j] / trans_den[i];
                }
                normalize_in_place(&mut model.transition[i]);
            }
        }
        for j in 0..k {
            if gamma_sum[j] > 1e-12 {
                for d in 0..n_dims {
                    let mean = mean_acc[j][d] / gamma_sum[j];
                    let var = sq_acc[j][d] / gamma_sum[j] - mean * mean;
                    model.means[j][d] = mean;
                    if var < VARIANCE_FLOOR {
                        model.variances[j][d] = VARIANCE_FLOOR;
                        floored = true;
                    } else {
                        model.variances[j][d] = var;
                    }
                }
            }
        }
        // stochasticity and the variance floor hold after every update
        debug_assert!(model.validate().is_ok());
    }

    let report = FitReport {
        log_likelihood_trace: trace,
        iterations,
        converged,
        variance_floored: floored,
        underdetermined,
    };
    Ok((model, report))
}

fn normalize_in_place(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    } else {
        let u = 1.0 / v.len() as f64;
        for x in v.iter_mut() {
            *x = u;
        }
    }
}

struct ForwardBackward {
    log_likelihood: f64,
    /// gamma[t][j] = P(state_t = j | sequence)
    gamma: Vec<Vec<f64>>,
    /// xi[t][i][j] = P(state_t = i, state_{t+1} = j | sequence), t in 0..T-1
    xi: Vec<Vec<Vec<f64>>>,
}

/// Scaled forward-backward. Emission densities are max-shifted per frame
/// before exponentiation so extreme frames cannot underflow the recursion.
fn forward_backward(model: &HmmModel, seq: &[Vec<f64>]) -> ForwardBackward {
    let t_len = seq.len();
    let k = model.n_states;

    let mut log_b = vec![vec![0.0; k]; t_len];
    let mut max_shift = vec![0.0; t_len];
    for t in 0..t_len {
        for j in 0..k {
            log_b[t][j] = model.log_emission(j, &seq[t]);
        }
        let m = log_b[t].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max_shift[t] = m;
        for j in 0..k {
            log_b[t][j] = (log_b[t][j] - m).exp();
        }
    }
    let b = log_b; // now shifted linear-domain emissions in (0, 1]

    let mut alpha = vec![vec![0.0; k]; t_len];
    let mut scale = vec![0.0; t_len];
    for j in 0..k {
        alpha[0][j] = model.initial[j] * b[0][j];
    }
    scale[0] = alpha[0].iter().sum::<f64>().max(1e-300);
    for j in 0..k {
        alpha[0][j] /= scale[0];
    }
    for t in 1..t_len {
        for j in 0..k {
            let mut s = 0.0;
            for i in 0..k {
                s += alpha[t - 1][i] * model.transition[i][j];
            }
            alpha[t][j] = s * b[t][j];
        }
        scale[t] = alpha[t].iter().sum::<f64>().max(1e-300);
        for j in 0..k {
            alpha[t][j] /= scale[t];
        }
    }

    let mut beta = vec![vec![1.0; k]; t_len];
    for t in (0..t_len - 1).rev() {
        for i in 0..k {
            let mut s = 0.0;
            for j in 0..k {
                s += model.transition[i][j] * b[t + 1][j] * beta[t + 1][j];
            }
            beta[t][i] = s / scale[t + 1];
        }
    }

    let mut gamma = vec![vec![0.0; k]; t_len];
    for t in 0..t_len {
        let mut s = 0.0;
        for j in 0..k {
            gamma[t][j] = alpha[t][j] * beta[t][j];
            s += gamma[t][j];
        }
        if s > 0.0 {
            for j in 0..k {
                gamma[t][j] /= s;
            }
        }
    }

    let mut xi = vec![vec![vec![0.0; k]; k]; t_len.saturating_sub(1)];
    for t in 0..t_len.saturating_sub(1) {
        let mut s = 0.0;
        for i in 0..k {
            for j in 0..k {
                let v = alpha[t][i] * model.transition[i][j] * b[t + 1][j] * beta[t + 1][j]
                    / scale[t + 1];
                xi[t][i][j] = v;
                s += v;
            }
        }
        if s > 0.0 {
            for i in 0..k {
                for j in 0..k {
                    xi[t][i][j] /= s;
                }
            }
        }
    }

    let log_likelihood = scale.iter().map(|c| c.ln()).sum::<f64>() + max_shift.iter().sum::<f64>();
    ForwardBackward {
        log_likelihood,
        gamma,
        xi,
    }
}

/// Scaled-forward log-likelihood of a sequence under the model.
pub fn hmm_loglik(model: &HmmModel, sequence: &[Vec<f64>]) -> Result<f64> {
    model.validate()?;
    model.check_sequence(sequence)?;
    Ok(forward_backward(model, sequence).log_likelihood)
}

/// Viterbi maximum a posteriori state path in log space.
///
/// Ties are broken toward the lower state index.
pub fn hmm_decode(model: &HmmModel, sequence: &[Vec<f64>]) -> Result<StagePath> {
    model.validate()?;
    model.check_sequence(sequence)?;
    let t_len = sequence.len();
    let k = model.n_states;

    let ln = |p: f64| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };

    let mut delta = vec![vec![f64::NEG_INFINITY; k]; t_len];
    let mut back = vec![vec![0usize; k]; t_len];
    for j in 0..k {
        delta[0][j] = ln(model.initial[j]) + model.log_emission(j, &sequence[0]);
    }
    for t in 1..t_len {
        for j in 0..k {
            let mut best = f64::NEG_INFINITY;
            let mut best_i = 0;
            for i in 0..k {
                let cand = delta[t - 1][i] + ln(model.transition[i][j]);
                if cand > best {
                    best = cand;
                    best_i = i;
                }
            }
            delta[t][j] = best + model.log_emission(j, &sequence[t]);
            back[t][j] = best_i;
        }
    }

    let mut best = f64::NEG_INFINITY;
    let mut state = 0;
    for j in 0..k {
        if delta[t_len - 1][j] > best {
            best = delta[t_len - 1][j];
            state = j;
        }
    }
    let mut states = vec![0usize; t_len];
    states[t_len - 1] = state;
    for t in (0..t_len - 1).rev() {
        state = back[t + 1][state];
        states[t] = state;
    }
    Ok(StagePath::new(states))
}

/// Maximal constant run in a stage path: `(state, start_frame, end_frame)`,
/// end inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRun {
    pub state: usize,
    pub start_frame: usize,
    pub end_frame: usize,
}

/// Run-length encodes a stage path into contiguous runs covering it.
pub fn stage_runs(path: &StagePath) -> Vec<StageRun> {
    let mut runs = Vec::new();
    let states = &path.states;
    if states.is_empty() {
        return runs;
    }
    let mut start = 0;
    for t in 1..=states.len() {
        if t == states.len() || states[t] != states[start] {
            runs.push(StageRun {
                state: states[start],
                start_frame: start,
                end_frame: t - 1,
            });
            start = t;
        }
    }
    runs
}

/// Relabeling map (`old state -> new stage`) ordering states by their mean
/// first-occurrence frame across the given paths. States that never occur
/// sort last; remaining ties resolve by state index.
pub fn first_occurrence_order(paths: &[StagePath], n_states: usize) -> Vec<usize> {
    let mut sums = vec![0.0; n_states];
    let mut counts = vec![0usize; n_states];
    for path in paths {
        for state in 0..n_states {
            if let Some(pos) = path.states.iter().position(|&s| s == state) {
                sums[state] += pos as f64;
                counts[state] += 1;
            }
        }
    }
    let mut order: Vec<usize> = (0..n_states).collect();
    order.sort_by(|&a, &b| {
        let ka = if counts[a] > 0 {
            sums[a] / counts[a] as f64
        } else {
            f64::INFINITY
        };
        let kb = if counts[b] > 0 {
            sums[b] / counts[b] as f64
        } else {
            f64::INFINITY
        };
        ka.partial_cmp(&kb)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    // order[rank] = old state; invert to map old -> rank
    let mut map = vec![0usize; n_states];
    for (rank, &old) in order.iter().enumerate() {
        map[old] = rank;
    }
    map
}

/// Applies a state relabeling map to a path.
pub fn relabel(path: &StagePath, map: &[usize]) -> StagePath {
    StagePath::new(path.states.iter().map(|&s| map[s]).collect())
}

// ---------------------------------------------------------------------------
// seeded k-means initialization

fn init_with_kmeans(sequences: &[Vec<Vec<f64>>], k: usize, n_dims: usize, seed: u64) -> HmmModel {
    let frames: Vec<&[f64]> = sequences
        .iter()
        .flat_map(|s| s.iter().map(|r| r.as_slice()))
        .collect();
    let assignments = kmeans(&frames, k, seed);

    let mut means = vec![vec![0.0; n_dims]; k];
    let mut counts = vec![0usize; k];
    for (frame, &a) in frames.iter().zip(&assignments) {
        counts[a] += 1;
        for d in 0..n_dims {
            means[a][d] += frame[d];
        }
    }
    // pooled fallbacks for empty clusters
    let mut pooled_mean = vec![0.0; n_dims];
    for frame in &frames {
        for d in 0..n_dims {
            pooled_mean[d] += frame[d];
        }
    }
    for d in 0..n_dims {
        pooled_mean[d] /= frames.len() as f64;
    }

    for j in 0..k {
        if counts[j] > 0 {
            for d in 0..n_dims {
                means[j][d] /= counts[j] as f64;
            }
        } else {
            means[j] = pooled_mean.clone();
        }
    }

    let mut variances = vec![vec![0.0; n_dims]; k];
    for (frame, &a) in frames.iter().zip(&assignments) {
        for d in 0..n_dims {
            let diff = frame[d] - means[a][d];
            variances[a][d] += diff * diff;
        }
    }
    let mut pooled_var = vec![0.0; n_dims];
    for frame in &frames {
        for d in 0..n_dims {
            let diff = frame[d] - pooled_mean[d];
            pooled_var[d] += diff * diff;
        }
    }
    for d in 0..n_dims {
        pooled_var[d] = (pooled_var[d] / frames.len() as f64).max(VARIANCE_FLOOR);
    }
    for j in 0..k {
        if counts[j] > 1 {
            for d in 0..n_dims {
                variances[j][d] = (variances[j][d] / counts[j] as f64).max(VARIANCE_FLOOR);
            }
        } else {
            variances[j] = pooled_var.clone();
        }
    }

    // transitions from cluster labels along each sequence, add-one smoothed
    let mut trans = vec![vec![1.0; k]; k];
    let mut offset = 0;
    for seq in sequences {
        for t in 1..seq.len() {
            trans[assignments[offset + t - 1]][assignments[offset + t]] += 1.0;
        }
        offset += seq.len();
    }
    for row in trans.iter_mut() {
        normalize_in_place(row);
    }

    HmmModel {
        n_states: k,
        n_dims,
        initial: vec![1.0 / k as f64; k],
        transition: trans,
        means,
        variances,
    }
}

fn kmeans(frames: &[&[f64]], k: usize, seed: u64) -> Vec<usize> {
    let n = frames.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);

    // k-means++ seeding
    centroids.push(frames[rng.random_range(0..n)].to_vec());
    let mut dist2: Vec<f64> = frames.iter().map(|f| sq_dist(f, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dist2.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.push(frames[idx].to_vec());
        for (i, f) in frames.iter().enumerate() {
            let d = sq_dist(f, centroids.last().unwrap());
            if d < dist2[i] {
                dist2[i] = d;
            }
        }
    }

    let mut assignments = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, f) in frames.iter().enumerate() {
            let mut best = f64::INFINITY;
            let mut best_j = 0;
            for (j, c) in centroids.iter().enumerate() {
                let d = sq_dist(f, c);
                if d < best {
                    best = d;
                    best_j = j;
                }
            }
            if assignments[i] != best_j {
                assignments[i] = best_j;
                changed = true;
            }
        }

        let dims = centroids[0].len();
        let mut sums = vec![vec![0.0; dims]; k];
        let mut counts = vec![0usize; k];
        for (f, &a) in frames.iter().zip(&assignments) {
            counts[a] += 1;
            for d in 0..dims {
                sums[a][d] += f[d];
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                for d in 0..dims {
                    centroids[j][d] = sums[j][d] / counts[j] as f64;
                }
            } else {
                // claim the point farthest from its centroid
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(frames[a], &centroids[assignments[a]]);
                        let db = sq_dist(frames[b], &centroids[assignments[b]]);
                        da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .unwrap();
                centroids[j] = frames[far].to_vec();
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    assignments
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
