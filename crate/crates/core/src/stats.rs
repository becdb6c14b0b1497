//! Nonparametric statistics over stage-segmented power: Shapiro-Wilk
//! normality, Friedman ANOVA with Conover post-hoc comparisons, Cohen's d,
//! the per-subject stage/feature tables, and the response-time summary.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{BandPowerTrial, StagePath, N_FEATURES, N_STAGES};
use crate::preprocess::iqr_filter;
use crate::special::{chi_square_sf, normal_quantile, normal_sf, student_t_sf};

/// Shapiro-Wilk normality test, Royston's AS R94 approximation.
///
/// Valid for 3 <= n <= 5000; rejects zero-variance samples.
pub fn shapiro_wilk(sample: &[f64]) -> Result<(f64, f64)> {
    let n = sample.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::Data(format!(
            "shapiro-wilk requires 3 <= n <= 5000, got {n}"
        )));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("shapiro-wilk requires finite values".into()));
    }
    let mut x = sample.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = x.iter().sum::<f64>() / n as f64;
    let ssq: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ssq <= 0.0 {
        return Err(Error::Data(
            "shapiro-wilk is undefined for zero-variance samples".into(),
        ));
    }

    // expected normal order statistics (Blom approximation)
    let mut m = vec![0.0; n];
    for (i, mi) in m.iter_mut().enumerate() {
        *mi = normal_quantile((i as f64 + 1.0 - 0.375) / (n as f64 + 0.25))?;
    }
    let ssumm2: f64 = m.iter().map(|v| v * v).sum();
    let rsn = 1.0 / (n as f64).sqrt();

    let mut a = vec![0.0; n];
    if n == 3 {
        let c = 0.5f64.sqrt();
        a[0] = -c;
        a[2] = c;
    } else {
        // Royston's polynomial corrections for the outermost coefficients
        let c = |i: usize| m[i] / ssumm2.sqrt();
        let an = c(n - 1) + 0.221157 * rsn - 0.147981 * rsn.powi(2) - 2.071190 * rsn.powi(3)
            + 4.434685 * rsn.powi(4)
            - 2.706056 * rsn.powi(5);
        if n > 5 {
            let an1 = c(n - 2) + 0.042981 * rsn - 0.293762 * rsn.powi(2) - 1.752461 * rsn.powi(3)
                + 5.682633 * rsn.powi(4)
                - 3.582633 * rsn.powi(5);
            let phi = (ssumm2 - 2.0 * m[n - 1] * m[n - 1] - 2.0 * m[n - 2] * m[n - 2])
                / (1.0 - 2.0 * an * an - 2.0 * an1 * an1);
            let phi_sqrt = phi.sqrt();
            for i in 2..n - 2 {
                a[i] = m[i] / phi_sqrt;
            }
            a[n - 1] = an;
            a[0] = -an;
            a[n - 2] = an1;
            a[1] = -an1;
        } else {
            let phi = (ssumm2 - 2.0 * m[n - 1] * m[n - 1]) / (1.0 - 2.0 * an * an);
            let phi_sqrt = phi.sqrt();
            for i in 1..n - 1 {
                a[i] = m[i] / phi_sqrt;
            }
            a[n - 1] = an;
            a[0] = -an;
        }
    }

    let num: f64 = a.iter().zip(&x).map(|(&ai, &xi)| ai * xi).sum();
    let w = (num * num / ssq).min(1.0);

    let p = if n == 3 {
        let pi6 = 1.909_859_317_102_74;
        let stqr = 0.75f64.sqrt().asin();
        (pi6 * (w.sqrt().min(1.0).asin() - stqr)).clamp(0.0, 1.0)
    } else {
        let y = (1.0 - w).ln();
        let nf = n as f64;
        let z = if n <= 11 {
            let gamma = -2.273 + 0.459 * nf;
            let mu = 0.5440 - 0.39978 * nf + 0.025054 * nf * nf - 0.0006714 * nf.powi(3);
            let sigma = (1.3822 - 0.77857 * nf + 0.062767 * nf * nf - 0.0020322 * nf.powi(3)).exp();
            (-(gamma - y).ln() - mu) / sigma
        } else {
            let ln_n = nf.ln();
            let mu = -1.5861 - 0.31082 * ln_n - 0.083751 * ln_n * ln_n + 0.0038915 * ln_n.powi(3);
            let sigma = (-0.4803 - 0.082676 * ln_n + 0.0030302 * ln_n * ln_n).exp();
            (y - mu) / sigma
        };
        normal_sf(z).clamp(0.0, 1.0)
    };
    Ok((w, p))
}

/// Friedman rank ANOVA over an `n_blocks x k_treatments` table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub chi2: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Within-row midranks; ties get the average of the ranks they span.
fn row_ranks(row: &[f64]) -> Vec<f64> {
    let k = row.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap());
    let mut ranks = vec![0.0; k];
    let mut i = 0;
    while i < k {
        let mut j = i;
        while j + 1 < k && row[order[j + 1]] == row[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &col in &order[i..=j] {
            ranks[col] = avg;
        }
        i = j + 1;
    }
    ranks
}

struct FriedmanInternals {
    chi2: f64,
    rank_sums: Vec<f64>,
    /// Sum of squared ranks over all cells (A1).
    sum_sq_ranks: f64,
    n: usize,
    k: usize,
}

fn friedman_internals(table: &[Vec<f64>]) -> Result<FriedmanInternals> {
    let n = table.len();
    if n < 2 {
        return Err(Error::Data(format!(
            "friedman needs at least 2 complete blocks, got {n}"
        )));
    }
    let k = table[0].len();
    if k < 2 {
        return Err(Error::Data("friedman needs at least 2 treatments".into()));
    }
    if table.iter().any(|r| r.len() != k) {
        return Err(Error::Data("friedman table is ragged".into()));
    }
    if table.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Data("friedman table has non-finite cells".into()));
    }

    let mut rank_sums = vec![0.0; k];
    let mut sum_sq_ranks = 0.0;
    for row in table {
        for (j, r) in row_ranks(row).into_iter().enumerate() {
            rank_sums[j] += r;
            sum_sq_ranks += r * r;
        }
    }

    // tie-corrected statistic: (k-1) * sum_j (R_j - n(k+1)/2)^2 / (A1 - C1);
    // equals 12/(nk(k+1)) * sum R_j^2 - 3n(k+1) when there are no ties
    let nf = n as f64;
    let kf = k as f64;
    let c1 = nf * kf * (kf + 1.0) * (kf + 1.0) / 4.0;
    let centered: f64 = rank_sums
        .iter()
        .map(|&r| {
            let d = r - nf * (kf + 1.0) / 2.0;
            d * d
        })
        .sum();
    let denom = sum_sq_ranks - c1;
    let chi2 = if denom > 0.0 {
        (kf - 1.0) * centered / denom
    } else {
        0.0 // every block is a complete tie
    };
    Ok(FriedmanInternals {
        chi2,
        rank_sums,
        sum_sq_ranks,
        n,
        k,
    })
}

/// Friedman test with midrank ties and the standard tie correction;
/// p from the chi-square upper tail with k-1 degrees of freedom.
pub fn friedman(table: &[Vec<f64>]) -> Result<FriedmanResult> {
    let internals = friedman_internals(table)?;
    let df = internals.k - 1;
    Ok(FriedmanResult {
        chi2: internals.chi2,
        df,
        p_value: chi_square_sf(internals.chi2, df as f64),
    })
}

/// One pairwise post-hoc comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosthocResult {
    pub stage_a: usize,
    pub stage_b: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub effect_size_d: f64,
}

/// Conover's post-hoc comparisons on the Friedman rank sums: t statistics
/// with (n-1)(k-1) degrees of freedom and two-sided p-values; effect sizes
/// are Cohen's d on the raw cell values of each pair.
pub fn conover_posthoc(table: &[Vec<f64>]) -> Result<Vec<PosthocResult>> {
    let internals = friedman_internals(table)?;
    let FriedmanInternals {
        chi2,
        rank_sums,
        sum_sq_ranks,
        n,
        k,
    } = internals;
    let nf = n as f64;
    let kf = k as f64;
    let df = (nf - 1.0) * (kf - 1.0);
    let c1 = nf * kf * (kf + 1.0) * (kf + 1.0) / 4.0;
    // pooled rank variance; zero when the rank ordering is identical in every
    // block (chi2 at its maximum) or the table is all ties
    let spread = sum_sq_ranks - c1;
    let denom_sq = if spread > 0.0 {
        2.0 * nf * spread * (1.0 - chi2 / (nf * (kf - 1.0))) / df
    } else {
        0.0
    };
    let denom = if denom_sq > 0.0 { denom_sq.sqrt() } else { 0.0 };

    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in (a + 1)..k {
            let diff = rank_sums[a] - rank_sums[b];
            let (statistic, p_value) = if denom > 0.0 {
                let t = diff / denom;
                (t, (2.0 * student_t_sf(t.abs(), df)).min(1.0))
            } else if diff == 0.0 {
                (0.0, 1.0)
            } else {
                (diff.signum() * f64::INFINITY, 0.0)
            };
            let col_a: Vec<f64> = table.iter().map(|r| r[a]).collect();
            let col_b: Vec<f64> = table.iter().map(|r| r[b]).collect();
            let effect_size_d = match cohens_d(&col_a, &col_b) {
                Ok(d) => d,
                // identical constant columns: no effect; constant columns at
                // different levels: unbounded standardized difference
                Err(_) => {
                    let ma = col_a.iter().sum::<f64>() / nf;
                    let mb = col_b.iter().sum::<f64>() / nf;
                    if ma == mb {
                        0.0
                    } else {
                        (ma - mb).signum() * f64::INFINITY
                    }
                }
            };
            out.push(PosthocResult {
                stage_a: a,
                stage_b: b,
                statistic,
                p_value,
                effect_size_d,
            });
        }
    }
    Ok(out)
}

/// Cohen's d with the pooled standard deviation (N-1 variances).
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Data(
            "cohens_d needs at least 2 values per sample".into(),
        ));
    }
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let ma = a.iter().sum::<f64>() / na;
    let mb = b.iter().sum::<f64>() / nb;
    let va = a.iter().map(|v| (v - ma) * (v - ma)).sum::<f64>() / (na - 1.0);
    let vb = b.iter().map(|v| (v - mb) * (v - mb)).sum::<f64>() / (nb - 1.0);
    let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
    if pooled <= 0.0 {
        return Err(Error::Numeric("cohens_d: zero pooled variance".into()));
    }
    Ok((ma - mb) / pooled.sqrt())
}

/// Per-feature table of subject x stage mean power, after IQR filtering.
/// Cells are `None` when the subject's frames never visit the stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageFeatureTable {
    pub feature: usize,
    pub subjects: Vec<String>,
    /// `cells[subject][stage]`
    pub cells: Vec<Vec<Option<f64>>>,
}

impl StageFeatureTable {
    /// Rows with every stage present, plus the subjects that were dropped.
    pub fn complete_rows(&self) -> (Vec<Vec<f64>>, Vec<String>) {
        let mut rows = Vec::new();
        let mut dropped = Vec::new();
        for (subject, cells) in self.subjects.iter().zip(&self.cells) {
            if cells.iter().all(|c| c.is_some()) {
                rows.push(cells.iter().map(|c| c.unwrap()).collect());
            } else {
                dropped.push(subject.clone());
            }
        }
        (rows, dropped)
    }
}

/// Builds the 70 per-feature tables: for each subject and stage, frames
/// decoded into that stage are pooled across the subject's trials, IQR
/// filtered, and averaged. Cells with fewer than 4 frames skip the filter
/// (the quartile rule needs 4 points) and average directly.
pub fn stage_feature_table(
    trials: &[BandPowerTrial],
    paths: &[StagePath],
) -> Result<Vec<StageFeatureTable>> {
    if trials.len() != paths.len() {
        return Err(Error::Data(format!(
            "{} trials but {} stage paths",
            trials.len(),
            paths.len()
        )));
    }
    for (trial, path) in trials.iter().zip(paths) {
        if trial.n_frames() != path.len() {
            return Err(Error::Data(format!(
                "trial `{}` has {} frames but its path has {}",
                trial.trial_id,
                trial.n_frames(),
                path.len()
            )));
        }
        if path.states.iter().any(|&s| s >= N_STAGES) {
            return Err(Error::Data(format!(
                "trial `{}` path contains a state >= {N_STAGES}",
                trial.trial_id
            )));
        }
    }

    // subject -> stage -> frame row indices, pooled across the subject's trials
    let mut subjects: BTreeMap<String, Vec<Vec<(usize, usize)>>> = BTreeMap::new();
    for (ti, (trial, path)) in trials.iter().zip(paths).enumerate() {
        let entry = subjects
            .entry(trial.subject_id.clone())
            .or_insert_with(|| vec![Vec::new(); N_STAGES]);
        for (t, &state) in path.states.iter().enumerate() {
            entry[state].push((ti, t));
        }
    }

    let subject_names: Vec<String> = subjects.keys().cloned().collect();
    let mut tables = Vec::with_capacity(N_FEATURES);
    for feature in 0..N_FEATURES {
        let mut cells = Vec::with_capacity(subject_names.len());
        for name in &subject_names {
            let stages = &subjects[name];
            let mut row = Vec::with_capacity(N_STAGES);
            for frame_refs in stages {
                if frame_refs.is_empty() {
                    row.push(None);
                    continue;
                }
                let values: Vec<f64> = frame_refs
                    .iter()
                    .map(|&(ti, t)| trials[ti].frames[t][feature])
                    .collect();
                let kept = if values.len() >= 4 {
                    iqr_filter(&values)?.0
                } else {
                    values
                };
                row.push(Some(kept.iter().sum::<f64>() / kept.len() as f64));
            }
            cells.push(row);
        }
        tables.push(StageFeatureTable {
            feature,
            subjects: subject_names.clone(),
            cells,
        });
    }
    Ok(tables)
}

/// Full battery for one feature table, mirroring the analysis flow: per-stage
/// Shapiro-Wilk, Friedman as the primary test, and Conover post-hoc only
/// after a significant Friedman result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatteryResult {
    pub feature: usize,
    pub n_complete_rows: usize,
    pub dropped_subjects: Vec<String>,
    /// Per-stage (W, p); `None` where the test is undefined (e.g. constant).
    pub shapiro: Vec<Option<(f64, f64)>>,
    /// Any stage rejected normality at alpha = 0.05.
    pub normality_rejected: bool,
    pub friedman: FriedmanResult,
    /// Present only when the Friedman p-value is below 0.05.
    pub posthoc: Option<Vec<PosthocResult>>,
}

pub fn stage_battery(table: &StageFeatureTable) -> Result<BatteryResult> {
    let (rows, dropped) = table.complete_rows();
    if rows.len() < 2 {
        return Err(Error::Data(format!(
            "feature {}: fewer than 2 subjects visit every stage",
            table.feature
        )));
    }
    let k = rows[0].len();
    let mut shapiro = Vec::with_capacity(k);
    let mut normality_rejected = false;
    for stage in 0..k {
        let column: Vec<f64> = rows.iter().map(|r| r[stage]).collect();
        match shapiro_wilk(&column) {
            Ok((w, p)) => {
                if p < 0.05 {
                    normality_rejected = true;
                }
                shapiro.push(Some((w, p)));
            }
            Err(_) => shapiro.push(None),
        }
    }
    let fr = friedman(&rows)?;
    let posthoc = if fr.p_value < 0.05 {
        Some(conover_posthoc(&rows)?)
    } else {
        None
    };
    Ok(BatteryResult {
        feature: table.feature,
        n_complete_rows: rows.len(),
        dropped_subjects: dropped,
        shapiro,
        normality_rejected,
        friedman: fr,
        posthoc,
    })
}

/// The frontal features the stage-comparison report highlights:
/// F7-theta, F4-low_beta, F4-high_beta, F4-gamma, F8-alpha.
pub fn highlighted_features() -> Vec<usize> {
    use crate::model::{feature_index, Band, Channel, ChannelBandKey};
    vec![
        feature_index(ChannelBandKey::new(Channel::F7, Band::Theta)),
        feature_index(ChannelBandKey::new(Channel::F4, Band::LowBeta)),
        feature_index(ChannelBandKey::new(Channel::F4, Band::HighBeta)),
        feature_index(ChannelBandKey::new(Channel::F4, Band::Gamma)),
        feature_index(ChannelBandKey::new(Channel::F8, Band::Alpha)),
    ]
}

/// Response-time summary: mean and the highest-density interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RtSummary {
    pub mean_s: f64,
    pub hdi_low_s: f64,
    pub hdi_high_s: f64,
    pub n: usize,
}

/// Mean plus the shortest contiguous interval over the sorted sample
/// containing `ceil(mass * n)` points; ties go to the lowest start index.
pub fn rt_summary(times: &[f64], mass: f64) -> Result<RtSummary> {
    let n = times.len();
    if n < 3 {
        return Err(Error::Data(format!(
            "rt summary needs at least 3 response times, got {n}"
        )));
    }
    if !(0.0 < mass && mass <= 1.0) {
        return Err(Error::Config(format!("hdi mass {mass} must be in (0,1]")));
    }
    if times.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("rt summary requires finite times".into()));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // guard the ceiling against float dust like 0.95 * 20 = 19.000000000000004
    let m = ((mass * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let m = m.min(n);

    let mut best_start = 0;
    let mut best_width = f64::INFINITY;
    for start in 0..=(n - m) {
        let width = sorted[start + m - 1] - sorted[start];
        if width < best_width {
            best_width = width;
            best_start = start;
        }
    }
    Ok(RtSummary {
        mean_s: times.iter().sum::<f64>() / n as f64,
        hdi_low_s: sorted[best_start],
        hdi_high_s: sorted[best_start + m - 1],
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Scenario, FEATURE_RATE_HZ};

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a}");
    }

    // -- Shapiro-Wilk against a frozen reference oracle --

    #[test]
    fn shapiro_classic_eleven_point_sample() {
        let sample = [
            148.0, 154.0, 158.0, 160.0, 161.0, 162.0, 166.0, 170.0, 182.0, 195.0, 236.0,
        ];
        let (w, p) = shapiro_wilk(&sample).unwrap();
        // reference: W = 0.7888146948631716, p = 0.006703814061898823
        close(w, 0.7888146948631716, 5e-9);
        close(p, 0.006703814061898823, 5e-9);
        assert!(p < 0.01);
    }

    #[test]
    fn shapiro_normal_quantiles_accept() {
        let n = 50;
        let sample: Vec<f64> = (1..=n)
            .map(|i| normal_quantile((i as f64 - 0.5) / n as f64).unwrap())
            .collect();
        let (w, p) = shapiro_wilk(&sample).unwrap();
        assert!(w >= 0.99, "W = {w}");
        assert!(p >= 0.5, "p = {p}");
        // reference: W = 0.9992035683859155
        close(w, 0.9992035683859155, 1e-8);
    }

    #[test]
    fn shapiro_bimodal_rejects() {
        let mut sample = Vec::new();
        for i in 0..25 {
            sample.push(-10.0 + (i as f64 - 12.0) * 0.0008163265306122449);
        }
        for i in 0..25 {
            sample.push(10.0 + (i as f64 - 12.0) * 0.0008163265306122449);
        }
        let (_, p) = shapiro_wilk(&sample).unwrap();
        assert!(p < 0.001, "p = {p}");
    }

    #[test]
    fn shapiro_small_n_reference() {
        let (w, p) = shapiro_wilk(&[1.0, 2.0, 3.5, 7.0]).unwrap();
        close(w, 0.9244190472280267, 1e-8);
        close(p, 0.5619989745066833, 1e-7);
        let (w, p) = shapiro_wilk(&[2.0, 2.5, 2.7, 3.1, 9.0]).unwrap();
        close(w, 0.6838820663976797, 1e-8);
        close(p, 0.006446261670441756, 1e-7);
        let (w, p) = shapiro_wilk(&[3.1, 4.2, 1.0, 0.5, 8.8, 9.9]).unwrap();
        close(w, 0.8907687358582539, 1e-8);
        close(p, 0.32223526755567966, 1e-7);
    }

    #[test]
    fn shapiro_domain_errors() {
        assert!(shapiro_wilk(&[1.0, 2.0]).is_err());
        assert!(shapiro_wilk(&[4.0; 10]).is_err());
        assert!(shapiro_wilk(&vec![0.0; 5001]).is_err());
    }

    // -- Friedman / Conover against hand computation and the frozen oracle --

    #[test]
    fn friedman_identical_ordering_hand_example() {
        // 4 blocks, identical treatment ordering: rank sums (4, 8, 12)
        let table = vec![vec![1.0, 2.0, 3.0]; 4];
        let r = friedman(&table).unwrap();
        close(r.chi2, 8.0, 1e-12);
        assert_eq!(r.df, 2);
        close(r.p_value, 0.018315638888734182, 5e-4);
    }

    #[test]
    fn friedman_all_equal_cells() {
        let table = vec![vec![5.0; 3]; 4];
        let r = friedman(&table).unwrap();
        assert_eq!(r.chi2, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn friedman_column_permutation_invariant() {
        let table = vec![
            vec![1.0, 5.0, 2.0, 4.4],
            vec![2.2, 1.0, 0.5, 4.0],
            vec![3.0, 3.1, 3.2, 0.1],
        ];
        let permuted: Vec<Vec<f64>> = table.iter().map(|r| vec![r[2], r[0], r[3], r[1]]).collect();
        let a = friedman(&table).unwrap();
        let b = friedman(&permuted).unwrap();
        close(a.chi2, b.chi2, 1e-12);
    }

    #[test]
    fn friedman_monotone_transform_invariant() {
        let table = vec![
            vec![0.3, 1.9, 0.7],
            vec![2.0, 2.5, 0.1],
            vec![0.9, 1.4, 1.1],
            vec![1.0, 3.0, 2.0],
        ];
        let transformed: Vec<Vec<f64>> = table
            .iter()
            .map(|r| r.iter().map(|&v: &f64| (3.0 * v + 1.0).exp()).collect())
            .collect();
        let a = friedman(&table).unwrap();
        let b = friedman(&transformed).unwrap();
        close(a.chi2, b.chi2, 1e-12);
        close(a.p_value, b.p_value, 1e-12);
    }

    #[test]
    fn friedman_tied_table_reference() {
        // reference: chi2 = 0.6666666666666666, p = 0.7165313105737892
        let table = vec![
            vec![1.0, 1.0, 2.0],
            vec![2.0, 2.0, 1.0],
            vec![3.0, 3.0, 3.0],
            vec![1.0, 2.0, 2.0],
        ];
        let r = friedman(&table).unwrap();
        close(r.chi2, 0.6666666666666666, 1e-12);
        close(r.p_value, 0.7165313105737892, 1e-12);
    }

    /// 6 blocks x 4 treatments with a frozen reference result.
    fn noisy_table() -> Vec<Vec<f64>> {
        vec![
            vec![
                0.0012301533574825742,
                0.7987455375084699,
                0.7258621446377824,
                1.1094081612427258,
            ],
            vec![
                -0.45467078517172255,
                -0.49164655499646237,
                1.0601436025974385,
                3.3402152455545338,
            ],
            vec![
                -0.49220651855132963,
                -0.12047489981994042,
                1.489842050185198,
                2.3568870081600606,
            ],
            vec![
                0.10541424899789856,
                -0.43046804470820466,
                0.9707481775367265,
                2.6953031944582877,
            ],
            vec![
                -1.344214547285082,
                0.04238423895978183,
                -0.9012227398008441,
                0.7104622602150239,
            ],
            vec![
                -1.8417350377917323,
                0.26490886892531873,
                -0.2674464814437032,
                2.2712643588217016,
            ],
        ]
    }

    #[test]
    fn friedman_noisy_reference() {
        let r = friedman(&noisy_table()).unwrap();
        close(r.chi2, 13.4, 1e-9);
        close(r.p_value, 0.0038467943048894966, 1e-9);
    }

    #[test]
    fn conover_noisy_reference() {
        // reference t statistics and p-values for all 6 pairs
        let out = conover_posthoc(&noisy_table()).unwrap();
        let expect = [
            ((0, 1), -2.0189321327181204, 0.06173857824904363),
            ((0, 2), -2.826504985805369, 0.012758360324996188),
            ((0, 3), -6.460582824697986, 1.0742541922511958e-05),
            ((1, 2), -0.8075728530872482, 0.431957080956069),
            ((1, 3), -4.4416506919798655, 0.0004755799593218081),
            ((2, 3), -3.634077838892617, 0.002448465260238613),
        ];
        assert_eq!(out.len(), 6);
        for (res, &((a, b), t, p)) in out.iter().zip(&expect) {
            assert_eq!((res.stage_a, res.stage_b), (a, b));
            close(res.statistic, t, 1e-9);
            close(res.p_value, p, 1e-9);
        }
    }

    #[test]
    fn conover_identical_ordering_extremes() {
        let table = vec![vec![1.0, 2.0, 3.0]; 4];
        let out = conover_posthoc(&table).unwrap();
        // pair (0,2) has the maximal |statistic| and p < 0.05
        let p02 = out
            .iter()
            .find(|r| (r.stage_a, r.stage_b) == (0, 2))
            .unwrap();
        assert!(out.iter().all(|r| r.statistic.abs() <= p02.statistic.abs()));
        assert!(p02.p_value < 0.05);
    }

    #[test]
    fn conover_identical_columns_null_pair() {
        let table = vec![
            vec![1.0, 1.0, 5.0],
            vec![2.0, 2.0, 7.0],
            vec![3.0, 3.0, 4.0],
            vec![0.5, 0.5, 2.0],
        ];
        let out = conover_posthoc(&table).unwrap();
        let p01 = out
            .iter()
            .find(|r| (r.stage_a, r.stage_b) == (0, 1))
            .unwrap();
        assert_eq!(p01.statistic, 0.0);
        assert_eq!(p01.p_value, 1.0);
    }

    #[test]
    fn conover_antisymmetry_via_column_swap() {
        let table = noisy_table();
        let swapped: Vec<Vec<f64>> = table.iter().map(|r| vec![r[1], r[0], r[2], r[3]]).collect();
        let a = conover_posthoc(&table).unwrap();
        let b = conover_posthoc(&swapped).unwrap();
        let orig = a.iter().find(|r| (r.stage_a, r.stage_b) == (0, 1)).unwrap();
        let swap = b.iter().find(|r| (r.stage_a, r.stage_b) == (0, 1)).unwrap();
        close(swap.statistic, -orig.statistic, 1e-12);
        close(swap.effect_size_d, -orig.effect_size_d, 1e-12);
        close(swap.p_value, orig.p_value, 1e-12);
    }

    // -- Cohen's d --

    #[test]
    fn cohens_d_hand_example() {
        let d = cohens_d(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        close(d, -2.0 / 2.5f64.sqrt(), 1e-12);
    }

    #[test]
    fn cohens_d_identical_samples_error() {
        assert!(cohens_d(&[3.0, 3.0], &[3.0, 3.0]).is_err());
    }

    #[test]
    fn cohens_d_sign_flips_on_swap() {
        let a = [1.0, 2.0, 3.0];
        let b = [5.0, 6.0, 9.0];
        let d1 = cohens_d(&a, &b).unwrap();
        let d2 = cohens_d(&b, &a).unwrap();
        close(d1, -d2, 1e-12);
    }

    // -- stage/feature tables --

    fn make_trial(subject: &str, frames: Vec<Vec<f64>>) -> BandPowerTrial {
        let n = frames.len();
        BandPowerTrial {
            trial_id: format!("{subject}-t"),
            subject_id: subject.to_string(),
            scenario: Scenario::None,
            feature_rate_hz: FEATURE_RATE_HZ,
            frames,
            response_time_s: n as f64 / FEATURE_RATE_HZ,
        }
    }

    #[test]
    fn table_single_stage_fills_one_column() {
        let trial = make_trial("s1", vec![vec![5.0; N_FEATURES]; 8]);
        let path = StagePath::new(vec![0; 8]);
        let tables = stage_feature_table(&[trial], &[path]).unwrap();
        assert_eq!(tables.len(), N_FEATURES);
        let t0 = &tables[0];
        assert_eq!(t0.cells[0][0], Some(5.0));
        assert_eq!(t0.cells[0][1], None);
        assert_eq!(t0.cells[0][3], None);
    }

    #[test]
    fn table_outlier_removed_by_iqr() {
        let mut frames = vec![vec![1.0; N_FEATURES]; 12];
        for (i, f) in frames.iter_mut().enumerate() {
            f[7] = 1.0 + i as f64 * 0.01;
        }
        let clean_cell = {
            let trial = make_trial("s1", frames.clone());
            let path = StagePath::new(vec![2; 12]);
            stage_feature_table(&[trial], &[path]).unwrap()[7].cells[0][2].unwrap()
        };
        frames[5][7] = 1e6;
        let trial = make_trial("s1", frames);
        let path = StagePath::new(vec![2; 12]);
        let dirty_cell = stage_feature_table(&[trial], &[path]).unwrap()[7].cells[0][2].unwrap();
        // the extreme frame is filtered out, so the cell barely moves
        assert!((clean_cell - dirty_cell).abs() < 1e-6 * clean_cell.max(1.0) + 1e-3);
        assert!(dirty_cell < 2.0);
    }

    #[test]
    fn table_length_mismatch_errors() {
        let trial = make_trial("s1", vec![vec![0.0; N_FEATURES]; 4]);
        let path = StagePath::new(vec![0; 5]);
        assert!(stage_feature_table(&[trial], &[path]).is_err());
    }

    #[test]
    fn battery_gates_posthoc_on_friedman() {
        // 6 subjects, monotone stage effect: Friedman significant, post-hoc runs
        let mut trials = Vec::new();
        let mut paths = Vec::new();
        for s in 0..6 {
            let mut frames = Vec::new();
            let mut states = Vec::new();
            for stage in 0..N_STAGES {
                for i in 0..6 {
                    let mut row = vec![0.0; N_FEATURES];
                    row[0] = stage as f64 * 2.0 + (s as f64) * 0.05 + (i as f64) * 0.01;
                    frames.push(row);
                    states.push(stage);
                }
            }
            trials.push(make_trial(&format!("s{s}"), frames));
            paths.push(StagePath::new(states));
        }
        let tables = stage_feature_table(&trials, &paths).unwrap();
        let battery = stage_battery(&tables[0]).unwrap();
        assert_eq!(battery.n_complete_rows, 6);
        assert!(battery.friedman.p_value < 0.05);
        assert!(battery.posthoc.is_some());
        assert_eq!(battery.posthoc.unwrap().len(), 6);
    }

    // -- response-time summary --

    #[test]
    fn rt_skewed_hand_example() {
        let times = [1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 3.0, 50.0];
        let s = rt_summary(&times, 0.75).unwrap();
        assert_eq!(s.hdi_low_s, 1.0);
        assert_eq!(s.hdi_high_s, 2.0);
    }

    #[test]
    fn rt_tiny_sample_spans_everything() {
        let s = rt_summary(&[3.0, 1.0, 2.0], 0.95).unwrap();
        assert_eq!(s.hdi_low_s, 1.0);
        assert_eq!(s.hdi_high_s, 3.0);
        close(s.mean_s, 2.0, 1e-12);
    }

    #[test]
    fn rt_symmetric_sample_central_interval() {
        let n = 200;
        let times: Vec<f64> = (1..=n)
            .map(|i| 5.0 + normal_quantile((i as f64 - 0.5) / n as f64).unwrap())
            .collect();
        let s = rt_summary(&times, 0.95).unwrap();
        // central 95% of a standard normal is about +-1.96 around the mean;
        // allow one order-statistic spacing
        assert!(
            (s.hdi_low_s - (5.0 - 1.96)).abs() < 0.25,
            "lo {}",
            s.hdi_low_s
        );
        assert!(
            (s.hdi_high_s - (5.0 + 1.96)).abs() < 0.25,
            "hi {}",
            s.hdi_high_s
        );
    }

    #[test]
    fn rt_too_short_errors() {
        assert!(rt_summary(&[1.0, 2.0], 0.95).is_err());
    }
}
