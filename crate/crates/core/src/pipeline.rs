//! Wiring of the stage-decomposition pipeline: per-trial or pooled
//! standardize -> PCA -> HMM fit -> Viterbi decode, with decoded states
//! relabeled into temporally ordered stages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::{
    first_occurrence_order, hmm_decode, hmm_fit, relabel, FitOptions, FitReport, HmmModel,
};
use crate::model::{BandPowerTrial, StagePath};
use crate::preprocess::{
    pca_fit, pca_transform, standardize_apply, standardize_fit, PcaModel, Standardizer,
};

/// Fit granularity: one model per trial, or one pooled model over all trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    PerTrial,
    Pooled,
}

impl Scope {
    pub fn name(self) -> &'static str {
        match self {
            Scope::PerTrial => "per_trial",
            Scope::Pooled => "pooled",
        }
    }

    pub fn parse(s: &str) -> Result<Scope> {
        match s {
            "per-trial" | "per_trial" => Ok(Scope::PerTrial),
            "pooled" => Ok(Scope::Pooled),
            other => Err(Error::Config(format!(
                "unknown scope `{other}` (expected per-trial or pooled)"
            ))),
        }
    }
}

/// One fitted standardizer + PCA, tagged with its trial when per-trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessingEntry {
    pub trial_id: Option<String>,
    pub standardizer: Standardizer,
    pub pca: PcaModel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedPreprocessing {
    pub scope: Scope,
    pub n_components: usize,
    pub entries: Vec<PreprocessingEntry>,
}

/// Fits standardization and PCA at the requested scope.
pub fn fit_preprocessing(
    trials: &[BandPowerTrial],
    scope: Scope,
    n_components: usize,
) -> Result<FittedPreprocessing> {
    if trials.is_empty() {
        return Err(Error::Data("no trials to preprocess".into()));
    }
    let entries = match scope {
        Scope::Pooled => {
            let pooled: Vec<Vec<f64>> = trials
                .iter()
                .flat_map(|t| t.frames.iter().cloned())
                .collect();
            let standardizer = standardize_fit(&pooled)?;
            let z = standardize_apply(&standardizer, &pooled)?;
            let pca = pca_fit(&z, n_components)?;
            vec![PreprocessingEntry {
                trial_id: None,
                standardizer,
                pca,
            }]
        }
        Scope::PerTrial => trials
            .iter()
            .map(|trial| {
                let standardizer = standardize_fit(&trial.frames)?;
                let z = standardize_apply(&standardizer, &trial.frames)?;
                let pca = pca_fit(&z, n_components)?;
                Ok(PreprocessingEntry {
                    trial_id: Some(trial.trial_id.clone()),
                    standardizer,
                    pca,
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(FittedPreprocessing {
        scope,
        n_components,
        entries,
    })
}

impl FittedPreprocessing {
    fn entry_for(&self, trial_id: &str) -> Result<&PreprocessingEntry> {
        match self.scope {
            Scope::Pooled => Ok(&self.entries[0]),
            Scope::PerTrial => self
                .entries
                .iter()
                .find(|e| e.trial_id.as_deref() == Some(trial_id))
                .ok_or_else(|| {
                    Error::Data(format!("no preprocessing entry for trial `{trial_id}`"))
                }),
        }
    }

    /// Component scores per trial.
    pub fn transform(&self, trials: &[BandPowerTrial]) -> Result<Vec<Vec<Vec<f64>>>> {
        trials
            .iter()
            .map(|trial| {
                let entry = self.entry_for(&trial.trial_id)?;
                let z = standardize_apply(&entry.standardizer, &trial.frames)?;
                pca_transform(&entry.pca, &z)
            })
            .collect()
    }
}

/// One fitted HMM, tagged with its trial when per-trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HmmEntry {
    pub trial_id: Option<String>,
    pub model: HmmModel,
    pub report: FitReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedHmm {
    pub scope: Scope,
    pub entries: Vec<HmmEntry>,
}

/// Fits HMMs at the requested scope over per-trial score sequences.
pub fn fit_hmm_models(
    trials: &[BandPowerTrial],
    scores: &[Vec<Vec<f64>>],
    scope: Scope,
    opts: &FitOptions,
) -> Result<FittedHmm> {
    if trials.len() != scores.len() {
        return Err(Error::Data("trial/score count mismatch".into()));
    }
    let entries = match scope {
        Scope::Pooled => {
            let (model, report) = hmm_fit(scores, opts)?;
            vec![HmmEntry {
                trial_id: None,
                model,
                report,
            }]
        }
        Scope::PerTrial => trials
            .iter()
            .zip(scores)
            .map(|(trial, seq)| {
                let (model, report) = hmm_fit(std::slice::from_ref(seq), opts)?;
                Ok(HmmEntry {
                    trial_id: Some(trial.trial_id.clone()),
                    model,
                    report,
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(FittedHmm { scope, entries })
}

impl FittedHmm {
    fn entry_for(&self, trial_id: &str) -> Result<&HmmEntry> {
        match self.scope {
            Scope::Pooled => Ok(&self.entries[0]),
            Scope::PerTrial => self
                .entries
                .iter()
                .find(|e| e.trial_id.as_deref() == Some(trial_id))
                .ok_or_else(|| Error::Data(format!("no hmm entry for trial `{trial_id}`"))),
        }
    }
}

/// Decodes every trial and relabels states into stages ordered by mean
/// first-occurrence time: pooled scope orders across all trials, per-trial
/// scope orders within each trial.
pub fn decode_trials(
    fitted: &FittedHmm,
    trials: &[BandPowerTrial],
    scores: &[Vec<Vec<f64>>],
) -> Result<Vec<StagePath>> {
    if trials.len() != scores.len() {
        return Err(Error::Data("trial/score count mismatch".into()));
    }
    let mut raw = Vec::with_capacity(trials.len());
    for (trial, seq) in trials.iter().zip(scores) {
        let entry = fitted.entry_for(&trial.trial_id)?;
        raw.push(hmm_decode(&entry.model, seq)?);
    }
    match fitted.scope {
        Scope::Pooled => {
            let n_states = fitted.entries[0].model.n_states;
            let map = first_occurrence_order(&raw, n_states);
            Ok(raw.iter().map(|p| relabel(p, &map)).collect())
        }
        Scope::PerTrial => Ok(trials
            .iter()
            .zip(&raw)
            .map(|(trial, path)| {
                let n_states = fitted.entry_for(&trial.trial_id).unwrap().model.n_states;
                let map = first_occurrence_order(std::slice::from_ref(path), n_states);
                relabel(path, &map)
            })
            .collect()),
    }
}
