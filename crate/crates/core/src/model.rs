//! Canonical data types: the 14-channel/5-band feature schema, band-power
//! trials, and decoded stage paths.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Output rate of the band-power feature stream.
pub const FEATURE_RATE_HZ: f64 = 8.0;
pub const N_CHANNELS: usize = 14;
pub const N_BANDS: usize = 5;
/// Flat feature count: 14 channels x 5 bands.
pub const N_FEATURES: usize = N_CHANNELS * N_BANDS;
/// Number of latent cognitive stages.
pub const N_STAGES: usize = 4;

/// Scalp sites of the 14-channel cap, in on-disk column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    AF3,
    F7,
    F3,
    FC5,
    T7,
    P7,
    O1,
    O2,
    P8,
    T8,
    FC6,
    F4,
    F8,
    AF4,
}

impl Channel {
    pub const ALL: [Channel; N_CHANNELS] = [
        Channel::AF3,
        Channel::F7,
        Channel::F3,
        Channel::FC5,
        Channel::T7,
        Channel::P7,
        Channel::O1,
        Channel::O2,
        Channel::P8,
        Channel::T8,
        Channel::FC6,
        Channel::F4,
        Channel::F8,
        Channel::AF4,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::AF3 => "AF3",
            Channel::F7 => "F7",
            Channel::F3 => "F3",
            Channel::FC5 => "FC5",
            Channel::T7 => "T7",
            Channel::P7 => "P7",
            Channel::O1 => "O1",
            Channel::O2 => "O2",
            Channel::P8 => "P8",
            Channel::T8 => "T8",
            Channel::FC6 => "FC6",
            Channel::F4 => "F4",
            Channel::F8 => "F8",
            Channel::AF4 => "AF4",
        }
    }

    pub fn parse(s: &str) -> Option<Channel> {
        Self::ALL.iter().copied().find(|c| c.name() == s)
    }
}

/// The five power bands, in on-disk column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Theta,
    Alpha,
    LowBeta,
    HighBeta,
    Gamma,
}

impl Band {
    pub const ALL: [Band; N_BANDS] = [
        Band::Theta,
        Band::Alpha,
        Band::LowBeta,
        Band::HighBeta,
        Band::Gamma,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&b| b == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::LowBeta => "low_beta",
            Band::HighBeta => "high_beta",
            Band::Gamma => "gamma",
        }
    }

    pub fn parse(s: &str) -> Option<Band> {
        Self::ALL.iter().copied().find(|b| b.name() == s)
    }

    pub fn definition(self) -> BandDefinition {
        match self {
            Band::Theta => BandDefinition::new(self, 4.0, 8.0, false),
            Band::Alpha => BandDefinition::new(self, 8.0, 12.0, false),
            Band::LowBeta => BandDefinition::new(self, 12.0, 16.0, false),
            Band::HighBeta => BandDefinition::new(self, 16.0, 25.0, false),
            // the top band closes the covered range, so its upper edge is inclusive
            Band::Gamma => BandDefinition::new(self, 25.0, 45.0, true),
        }
    }
}

/// Frequency bounds of one band. Lower edge inclusive; upper edge exclusive
/// except for the top band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandDefinition {
    pub band: Band,
    pub low_hz: f64,
    pub high_hz: f64,
    pub high_inclusive: bool,
}

impl BandDefinition {
    fn new(band: Band, low_hz: f64, high_hz: f64, high_inclusive: bool) -> Self {
        debug_assert!(low_hz < high_hz);
        BandDefinition {
            band,
            low_hz,
            high_hz,
            high_inclusive,
        }
    }

    pub fn contains(&self, freq_hz: f64) -> bool {
        if self.high_inclusive {
            freq_hz >= self.low_hz && freq_hz <= self.high_hz
        } else {
            freq_hz >= self.low_hz && freq_hz < self.high_hz
        }
    }
}

/// One (channel, band) coordinate of the 70-feature space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelBandKey {
    pub channel: Channel,
    pub band: Band,
}

impl ChannelBandKey {
    pub fn new(channel: Channel, band: Band) -> Self {
        ChannelBandKey { channel, band }
    }

    /// Column label used in frame files and CLI flags, e.g. `F4.high_beta`.
    pub fn label(&self) -> String {
        format!("{}.{}", self.channel.name(), self.band.name())
    }

    pub fn parse(s: &str) -> Result<ChannelBandKey> {
        let (ch, band) = s
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("feature key `{s}` is not CHANNEL.band")))?;
        let channel = Channel::parse(ch)
            .ok_or_else(|| Error::Config(format!("unknown channel `{ch}` in feature key `{s}`")))?;
        let band = Band::parse(band)
            .ok_or_else(|| Error::Config(format!("unknown band `{band}` in feature key `{s}`")))?;
        Ok(ChannelBandKey { channel, band })
    }
}

impl fmt::Display for ChannelBandKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Flat column index of a feature key: `channel_index * 5 + band_index`.
pub fn feature_index(key: ChannelBandKey) -> usize {
    key.channel.index() * N_BANDS + key.band.index()
}

/// Inverse of [`feature_index`].
pub fn feature_key(index: usize) -> Result<ChannelBandKey> {
    if index >= N_FEATURES {
        return Err(Error::Config(format!(
            "feature index {index} out of range 0..{N_FEATURES}"
        )));
    }
    Ok(ChannelBandKey {
        channel: Channel::ALL[index / N_BANDS],
        band: Band::ALL[index % N_BANDS],
    })
}

/// All 70 column labels in on-disk order.
pub fn feature_labels() -> Vec<String> {
    (0..N_FEATURES)
        .map(|i| feature_key(i).unwrap().label())
        .collect()
}

/// Traffic scenario shown during a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    None,
    Sparse,
    Busy,
    SurfaceMarked,
    Signalized,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::None,
        Scenario::Sparse,
        Scenario::Busy,
        Scenario::SurfaceMarked,
        Scenario::Signalized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::None => "none",
            Scenario::Sparse => "sparse",
            Scenario::Busy => "busy",
            Scenario::SurfaceMarked => "surface_marked",
            Scenario::Signalized => "signalized",
        }
    }

    pub fn parse(s: &str) -> Option<Scenario> {
        Self::ALL.iter().copied().find(|v| v.name() == s)
    }
}

/// One trial's band-power time series from stimulus onset to key press.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandPowerTrial {
    pub trial_id: String,
    pub subject_id: String,
    pub scenario: Scenario,
    pub feature_rate_hz: f64,
    /// T x 70 power values.
    pub frames: Vec<Vec<f64>>,
    pub response_time_s: f64,
}

impl BandPowerTrial {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    /// One feature's value across all frames.
    pub fn feature_series(&self, feature: usize) -> Vec<f64> {
        self.frames.iter().map(|row| row[feature]).collect()
    }
}

/// Decoded latent-stage sequence for one trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePath {
    pub states: Vec<usize>,
}

impl StagePath {
    pub fn new(states: Vec<usize>) -> Self {
        StagePath { states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// A violated trial invariant, with coordinates where applicable.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Frame count does not match `round(response_time_s * rate)` within one frame.
    FrameCount { expected: usize, actual: usize },
    /// A row does not have 70 columns.
    RowWidth { frame: usize, actual: usize },
    /// NaN or infinite power value.
    NonFinite { frame: usize, feature: usize },
    /// Negative power value.
    NegativePower {
        frame: usize,
        feature: usize,
        value: f64,
    },
    /// Response time must be positive.
    ResponseTime { value: f64 },
    /// Feature rate must equal the schema's 8 Hz.
    FeatureRate { value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::FrameCount { expected, actual } => write!(
                f,
                "frame count {actual} does not match expected {expected} (+/-1 frame)"
            ),
            Violation::RowWidth { frame, actual } => {
                write!(
                    f,
                    "frame {frame} has {actual} columns, expected {N_FEATURES}"
                )
            }
            Violation::NonFinite { frame, feature } => {
                write!(f, "non-finite power at frame {frame}, feature {feature}")
            }
            Violation::NegativePower {
                frame,
                feature,
                value,
            } => write!(
                f,
                "negative power {value} at frame {frame}, feature {feature}"
            ),
            Violation::ResponseTime { value } => {
                write!(f, "response time {value} s is not positive")
            }
            Violation::FeatureRate { value } => {
                write!(
                    f,
                    "feature rate {value} Hz differs from the schema's {FEATURE_RATE_HZ} Hz"
                )
            }
        }
    }
}

/// Checks every trial invariant; an empty list means the trial is valid.
pub fn validate_trial(trial: &BandPowerTrial) -> Vec<Violation> {
    let mut violations = Vec::new();

    if trial.feature_rate_hz != FEATURE_RATE_HZ {
        violations.push(Violation::FeatureRate {
            value: trial.feature_rate_hz,
        });
    }
    if trial.response_time_s.is_nan() || trial.response_time_s <= 0.0 {
        violations.push(Violation::ResponseTime {
            value: trial.response_time_s,
        });
    }

    let expected = (trial.response_time_s * trial.feature_rate_hz).round() as i64;
    let actual = trial.frames.len() as i64;
    if (expected - actual).abs() > 1 {
        violations.push(Violation::FrameCount {
            expected: expected.max(0) as usize,
            actual: trial.frames.len(),
        });
    }

    for (t, row) in trial.frames.iter().enumerate() {
        if row.len() != N_FEATURES {
            violations.push(Violation::RowWidth {
                frame: t,
                actual: row.len(),
            });
            continue;
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                violations.push(Violation::NonFinite {
                    frame: t,
                    feature: j,
                });
            } else if v < 0.0 {
                violations.push(Violation::NegativePower {
                    frame: t,
                    feature: j,
                    value: v,
                });
            }
        }
    }

    violations
}
