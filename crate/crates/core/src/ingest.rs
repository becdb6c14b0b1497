//! Trial loading from disk (JSON-lines manifest + CSV frame files) and
//! band-power extraction from raw 128 Hz recordings.

use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fft::one_sided_power;
use crate::model::{
    feature_labels, validate_trial, Band, BandPowerTrial, Scenario, FEATURE_RATE_HZ, N_CHANNELS,
    N_FEATURES,
};

/// Raw-recording sample rate demanded by the schema.
pub const RAW_SAMPLE_RATE_HZ: f64 = 128.0;
/// Default analysis window and hop; the 0.125 s hop yields the 8 Hz feature rate.
pub const DEFAULT_WINDOW_S: f64 = 2.0;
pub const DEFAULT_HOP_S: f64 = 0.125;

/// One manifest line describing a trial on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialManifestEntry {
    pub trial_id: String,
    pub subject_id: String,
    pub scenario: Scenario,
    pub response_time_s: f64,
    /// Frame-file path, relative to the manifest's directory.
    pub data_path: String,
}

/// Reads a JSON-lines manifest; one entry per line, blank lines ignored.
pub fn load_manifest(path: &Path) -> Result<Vec<TrialManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: TrialManifestEntry = serde_json::from_str(line)
            .map_err(|e| Error::parse(path.display().to_string(), lineno + 1, e.to_string()))?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Writes a JSON-lines manifest.
pub fn write_manifest(path: &Path, entries: &[TrialManifestEntry]) -> Result<()> {
    let mut out = String::new();
    for entry in entries {
        out.push_str(&serde_json::to_string(entry).expect("manifest entry serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Writes a frame file: header `t,AF3.theta,...,AF4.gamma` (71 columns),
/// one row per frame, `.` decimal separator.
pub fn write_frames_csv(path: &Path, frames: &[Vec<f64>], rate_hz: f64) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    let header = format!("t,{}\n", feature_labels().join(","));
    w.write_all(header.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    for (i, row) in frames.iter().enumerate() {
        let mut line = String::with_capacity(row.len() * 12);
        line.push_str(&format!("{}", i as f64 / rate_hz));
        for v in row {
            line.push(',');
            line.push_str(&format!("{v}"));
        }
        line.push('\n');
        w.write_all(line.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a frame file back into T x 70 rows (the timestamp column is
/// positional only and is dropped).
pub fn read_frames_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let display = path.display().to_string();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(&display, 1, "empty frame file"))?;
    let expected_header = format!("t,{}", feature_labels().join(","));
    let header_cols = header.split(',').count();
    if header_cols != N_FEATURES + 1 {
        return Err(Error::parse(
            &display,
            1,
            format!("expected {} columns, found {header_cols}", N_FEATURES + 1),
        ));
    }
    if header != expected_header {
        return Err(Error::parse(
            &display,
            1,
            "unexpected column names or order",
        ));
    }

    let mut frames = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != N_FEATURES + 1 {
            return Err(Error::parse(
                &display,
                lineno + 1,
                format!(
                    "expected {} columns, found {}",
                    N_FEATURES + 1,
                    fields.len()
                ),
            ));
        }
        let mut row = Vec::with_capacity(N_FEATURES);
        for field in &fields[1..] {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(&display, lineno + 1, format!("bad number `{field}`")))?;
            row.push(v);
        }
        frames.push(row);
    }
    Ok(frames)
}

/// Loads and validates every trial named by a manifest; order preserved.
pub fn load_trials(manifest_path: &Path) -> Result<Vec<BandPowerTrial>> {
    let entries = load_manifest(manifest_path)?;
    let base: PathBuf = manifest_path
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_default();
    let mut trials = Vec::with_capacity(entries.len());
    for entry in entries {
        let data_path = base.join(&entry.data_path);
        let frames = read_frames_csv(&data_path)?;
        let trial = BandPowerTrial {
            trial_id: entry.trial_id,
            subject_id: entry.subject_id,
            scenario: entry.scenario,
            feature_rate_hz: FEATURE_RATE_HZ,
            frames,
            response_time_s: entry.response_time_s,
        };
        let violations = validate_trial(&trial);
        if !violations.is_empty() {
            let listing: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::Data(format!(
                "trial `{}` is invalid: {}",
                trial.trial_id,
                listing.join("; ")
            )));
        }
        trials.push(trial);
    }
    Ok(trials)
}

/// A raw multichannel recording at 128 Hz.
#[derive(Debug, Clone)]
pub struct RawRecording {
    pub sample_rate_hz: f64,
    /// 14 channel series in schema order, equal lengths.
    pub channels: Vec<Vec<f64>>,
}

impl RawRecording {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz != RAW_SAMPLE_RATE_HZ {
            return Err(Error::Data(format!(
                "raw sample rate {} Hz, schema requires {RAW_SAMPLE_RATE_HZ}",
                self.sample_rate_hz
            )));
        }
        if self.channels.len() != N_CHANNELS {
            return Err(Error::Data(format!(
                "{} channels, schema requires {N_CHANNELS}",
                self.channels.len()
            )));
        }
        let len = self.channels[0].len();
        if self.channels.iter().any(|c| c.len() != len) {
            return Err(Error::Data("channel lengths differ".into()));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.channels[0].len()
    }
}

/// Extracts band power over a sliding Hann window: per channel and band, the
/// mean power of FFT bins whose center frequency lies in the band, computed
/// over the window ending at each output time. Output rate is `1/hop_s`.
///
/// Band power uses the mean (not sum) of in-band bin powers so values are
/// comparable across bands of different widths.
pub fn extract_band_power(raw: &RawRecording, window_s: f64, hop_s: f64) -> Result<Vec<Vec<f64>>> {
    raw.validate()?;
    let window = (window_s * raw.sample_rate_hz).round() as usize;
    if window < 32 {
        return Err(Error::Config(format!(
            "window of {window} samples is below the 32-sample minimum"
        )));
    }
    let hop = (hop_s * raw.sample_rate_hz).round() as usize;
    if hop < 1 {
        return Err(Error::Config("hop must cover at least one sample".into()));
    }
    let n_samples = raw.n_samples();
    if n_samples < window {
        return Err(Error::Data(format!(
            "insufficient samples: {n_samples} < window {window}"
        )));
    }

    // periodic Hann; a pure DC offset then lands entirely in bins 0 and 1
    let hann: Vec<f64> = (0..window)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / window as f64).cos()))
        .collect();
    let window_norm = hann.iter().map(|w| w * w).sum::<f64>() / window as f64;

    // bin memberships per band
    let df = raw.sample_rate_hz / window as f64;
    let band_bins: Vec<Vec<usize>> = Band::ALL
        .iter()
        .map(|band| {
            let def = band.definition();
            (0..=window / 2)
                .filter(|&k| def.contains(k as f64 * df))
                .collect()
        })
        .collect();
    if band_bins.iter().any(|bins| bins.is_empty()) {
        return Err(Error::Config(format!(
            "window of {window} samples leaves a band without FFT bins"
        )));
    }

    let n_frames = (n_samples - window) / hop + 1;
    let mut output = Vec::with_capacity(n_frames);
    let mut windowed = vec![0.0; window];
    for frame in 0..n_frames {
        let start = frame * hop;
        let mut row = vec![0.0; N_FEATURES];
        for (ch, series) in raw.channels.iter().enumerate() {
            for (w, (&x, &h)) in windowed
                .iter_mut()
                .zip(series[start..start + window].iter().zip(&hann))
            {
                *w = x * h;
            }
            let spectrum = one_sided_power(&windowed, window_norm);
            for (b, bins) in band_bins.iter().enumerate() {
                let mean = bins.iter().map(|&k| spectrum[k]).sum::<f64>() / bins.len() as f64;
                row[ch * Band::ALL.len() + b] = mean;
            }
        }
        output.push(row);
    }
    Ok(output)
}
