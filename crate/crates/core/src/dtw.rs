//! Exact dynamic-time-warping distance with squared-difference local cost,
//! plus the backtraced warping path.
//!
//! The local cost is the squared difference `(x_i - y_j)^2` and the
//! accumulated cost uses the unconstrained three-way recurrence with
//! cumulative first-row/first-column boundaries. No square root is applied
//! anywhere; the returned cost is the terminal accumulated value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of aligning two sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtwAlignment {
    /// Terminal accumulated cost.
    pub cost: f64,
    /// Warping path from (0,0) to (n-1,m-1); each step increments i, j, or both.
    pub path: Option<Vec<(usize, usize)>>,
}

fn check_nonempty(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Data("dtw requires nonempty sequences".into()));
    }
    Ok(())
}

#[inline]
fn local_cost(x: &[f64], y: &[f64], width: usize, i: usize, j: usize) -> f64 {
    let mut c = 0.0;
    for d in 0..width {
        let diff = x[i * width + d] - y[j * width + d];
        c += diff * diff;
    }
    c
}

/// DTW distance between two univariate sequences.
pub fn dtw_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    dtw_distance_width(x, y, 1)
}

/// DTW distance between two sequences of `width`-dimensional frames stored
/// row-major; the local cost sums squared differences over coordinates.
///
/// Uses a two-row rolling buffer, O(min(n,m)) memory.
pub fn dtw_distance_width(x: &[f64], y: &[f64], width: usize) -> Result<f64> {
    if width == 0 || x.len() % width != 0 || y.len() % width != 0 {
        return Err(Error::Data(format!(
            "sequence lengths {}/{} are not multiples of width {width}",
            x.len(),
            y.len()
        )));
    }
    check_nonempty(x, y)?;
    let (n, m) = (x.len() / width, y.len() / width);
    // roll over the shorter sequence; the recurrence is transpose-symmetric
    let (x, y, n, m) = if m <= n { (x, y, n, m) } else { (y, x, m, n) };

    let mut prev = vec![0.0; m];
    let mut curr = vec![0.0; m];
    prev[0] = local_cost(x, y, width, 0, 0);
    for j in 1..m {
        prev[j] = local_cost(x, y, width, 0, j) + prev[j - 1];
    }
    for i in 1..n {
        curr[0] = local_cost(x, y, width, i, 0) + prev[0];
        for j in 1..m {
            let best = prev[j - 1].min(prev[j]).min(curr[j - 1]);
            curr[j] = local_cost(x, y, width, i, j) + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m - 1])
}

/// DTW with the full matrix kept and the optimal warping path backtraced.
///
/// Backtrace tie-break order: diagonal, then up, then left.
pub fn dtw_path(x: &[f64], y: &[f64]) -> Result<DtwAlignment> {
    dtw_path_width(x, y, 1)
}

pub fn dtw_path_width(x: &[f64], y: &[f64], width: usize) -> Result<DtwAlignment> {
    if width == 0 || x.len() % width != 0 || y.len() % width != 0 {
        return Err(Error::Data(format!(
            "sequence lengths {}/{} are not multiples of width {width}",
            x.len(),
            y.len()
        )));
    }
    check_nonempty(x, y)?;
    let (n, m) = (x.len() / width, y.len() / width);

    let mut acc = vec![vec![0.0; m]; n];
    acc[0][0] = local_cost(x, y, width, 0, 0);
    for j in 1..m {
        acc[0][j] = local_cost(x, y, width, 0, j) + acc[0][j - 1];
    }
    for i in 1..n {
        acc[i][0] = local_cost(x, y, width, i, 0) + acc[i - 1][0];
        for j in 1..m {
            let best = acc[i - 1][j - 1].min(acc[i - 1][j]).min(acc[i][j - 1]);
            acc[i][j] = local_cost(x, y, width, i, j) + best;
        }
    }

    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        if i == 0 {
            j -= 1;
        } else if j == 0 {
            i -= 1;
        } else {
            let diag = acc[i - 1][j - 1];
            let up = acc[i - 1][j];
            let left = acc[i][j - 1];
            if diag <= up && diag <= left {
                i -= 1;
                j -= 1;
            } else if up <= left {
                i -= 1;
            } else {
                j -= 1;
            }
        }
        path.push((i, j));
    }
    path.reverse();
    Ok(DtwAlignment {
        cost: acc[n - 1][m - 1],
        path: Some(path),
    })
}

/// DTW constrained to a Sakoe-Chiba band of half-width `band` (widened to
/// keep the corner reachable when lengths differ). A constrained optimum can
/// exceed the unconstrained one, so this variant is a performance option and
/// is not used by the evaluation pipeline unless explicitly requested.
pub fn dtw_distance_banded(x: &[f64], y: &[f64], band: usize) -> Result<f64> {
    check_nonempty(x, y)?;
    let (n, m) = (x.len(), y.len());
    let w = band.max(n.abs_diff(m));
    let mut acc = vec![vec![f64::INFINITY; m]; n];
    for i in 0..n {
        let lo = i.saturating_sub(w);
        let hi = (i + w).min(m - 1);
        for j in lo..=hi {
            let diff = x[i] - y[j];
            let d = diff * diff;
            acc[i][j] = if i == 0 && j == 0 {
                d
            } else {
                let mut best = f64::INFINITY;
                if i > 0 && j > 0 {
                    best = best.min(acc[i - 1][j - 1]);
                }
                if i > 0 {
                    best = best.min(acc[i - 1][j]);
                }
                if j > 0 {
                    best = best.min(acc[i][j - 1]);
                }
                d + best
            };
        }
    }
    Ok(acc[n - 1][m - 1])
}
