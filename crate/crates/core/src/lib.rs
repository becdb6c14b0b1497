//! EEG band-power intent-prediction pipeline.
//!
//! The crate decomposes band-power trials into latent cognitive stages with a
//! Gaussian HMM, runs a nonparametric statistics battery over the decoded
//! stages, and predicts the decision-resolution moment with a DTW-distance
//! KNN classifier over sliding windows, evaluated with stratified
//! cross-validation and ROC/AUC.
//!
//! Pipeline:
//!
//! ```text
//! raw 128 Hz EEG -> band power (8 Hz, 14 channels x 5 bands)
//!   -> standardize -> PCA (5 components) -> 4-state Gaussian HMM -> stage paths
//!   -> stage statistics (IQR, Shapiro-Wilk, Friedman, Conover, Cohen's d)
//! band-power trials -> sliding windows (end-anchored positives) -> ADASYN
//!   -> DTW-KNN -> stratified 5-fold CV -> metrics, ROC/AUC, label-shuffle test
//! ```

#![allow(clippy::needless_range_loop, clippy::manual_is_multiple_of)]

pub mod dtw;
pub mod error;
pub mod eval;
mod fft;
pub mod hmm;
pub mod ingest;
pub mod knn;
mod linalg;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod seed;
pub mod special;
pub mod stats;
pub mod synth;
pub mod windowing;

pub use error::{Error, Result};
pub use model::{
    feature_index, feature_key, validate_trial, Band, BandDefinition, BandPowerTrial, Channel,
    ChannelBandKey, Scenario, StagePath, FEATURE_RATE_HZ, N_BANDS, N_CHANNELS, N_FEATURES,
    N_STAGES,
};
