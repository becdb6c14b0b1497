//! K-nearest-neighbors classification over DTW distance, with the graded
//! neighbor-fraction score used for ROC analysis.

use rayon::prelude::*;

use crate::dtw::dtw_distance_width;
use crate::error::{Error, Result};
use crate::windowing::LabeledSegment;

/// Training segments plus the neighborhood size.
#[derive(Debug, Clone)]
pub struct KnnModel {
    values: Vec<Vec<f64>>,
    labels: Vec<bool>,
    width: usize,
    pub k: usize,
}

impl KnnModel {
    pub fn from_segments(segments: &[LabeledSegment], k: usize) -> Result<KnnModel> {
        if segments.is_empty() {
            return Err(Error::Data("knn requires a nonempty training set".into()));
        }
        if k == 0 || k > segments.len() {
            return Err(Error::Config(format!(
                "k = {k} must be in 1..={}",
                segments.len()
            )));
        }
        let width = segments[0].width;
        if segments.iter().any(|s| s.width != width) {
            return Err(Error::Data("training segments have mixed widths".into()));
        }
        Ok(KnnModel {
            values: segments.iter().map(|s| s.values.clone()).collect(),
            labels: segments.iter().map(|s| s.label).collect(),
            width,
            k,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The k nearest training indices by DTW distance, ties broken by lower
    /// training index.
    fn neighbors(&self, query: &LabeledSegment) -> Result<Vec<usize>> {
        if query.width != self.width {
            return Err(Error::Data(format!(
                "query width {} does not match training width {}",
                query.width, self.width
            )));
        }
        let mut scored: Vec<(f64, usize)> = Vec::with_capacity(self.values.len());
        for (idx, train) in self.values.iter().enumerate() {
            let d = dtw_distance_width(&query.values, train, self.width)?;
            scored.push((d, idx));
        }
        scored.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
        });
        scored.truncate(self.k);
        Ok(scored.into_iter().map(|(_, idx)| idx).collect())
    }
}

/// Fraction of the k nearest neighbors labeled positive.
pub fn knn_score(model: &KnnModel, query: &LabeledSegment) -> Result<f64> {
    let neighbors = model.neighbors(query)?;
    let positive = neighbors.iter().filter(|&&i| model.labels[i]).count();
    Ok(positive as f64 / model.k as f64)
}

/// Majority label among the k nearest neighbors; a tied vote (possible only
/// for even k) falls back to label 0.
pub fn knn_predict(model: &KnnModel, query: &LabeledSegment) -> Result<bool> {
    Ok(knn_score(model, query)? > 0.5)
}

/// Scores a batch of queries in parallel; output order matches input order.
pub fn knn_score_batch(model: &KnnModel, queries: &[LabeledSegment]) -> Result<Vec<f64>> {
    queries
        .par_iter()
        .map(|q| knn_score(model, q))
        .collect::<Result<Vec<f64>>>()
}
