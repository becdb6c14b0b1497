//! Declarative run configuration: a flat key-value file with dotted section
//! keys, overridable by CLI flags. Defaults pin the pipeline's canonical
//! hyperparameters (5 components, 4 states, k = 5, 5 folds, the 8 Hz grid).

use std::fmt::Write as _;
use std::path::PathBuf;

use neurocross_core::model::ChannelBandKey;
use neurocross_core::pipeline::Scope;
use neurocross_core::windowing::WindowConfig;
use neurocross_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Split at the segment level (the default).
    Segment,
    /// Keep each trial's windows within one fold.
    Trial,
}

impl SplitMode {
    pub fn name(self) -> &'static str {
        match self {
            SplitMode::Segment => "segment",
            SplitMode::Trial => "trial",
        }
    }

    pub fn parse(s: &str) -> Result<SplitMode> {
        match s {
            "segment" => Ok(SplitMode::Segment),
            "trial" => Ok(SplitMode::Trial),
            other => Err(Error::Config(format!(
                "unknown split mode `{other}` (expected segment or trial)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub jobs: Option<usize>,

    pub pca_components: usize,
    pub pca_scope: Scope,

    pub hmm_states: usize,
    pub hmm_tol: f64,
    pub hmm_max_iter: usize,
    pub hmm_scope: Scope,

    pub feature: String,
    pub multivariate: bool,
    /// Explicit window configurations; `None` selects the default set
    /// (the four comparison-table configs plus the full grid at stride 3).
    pub configs: Option<Vec<WindowConfig>>,
    pub adasyn_k: usize,
    pub adasyn_beta: f64,

    pub knn_k: usize,

    pub n_folds: usize,
    pub split_mode: SplitMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
            jobs: None,
            pca_components: 5,
            pca_scope: Scope::PerTrial,
            hmm_states: 4,
            hmm_tol: 1e-6,
            hmm_max_iter: 200,
            hmm_scope: Scope::PerTrial,
            feature: "F4.high_beta".to_string(),
            multivariate: false,
            configs: None,
            adasyn_k: 5,
            adasyn_beta: 1.0,
            knn_k: 5,
            n_folds: 5,
            split_mode: SplitMode::Segment,
        }
    }
}

impl RunConfig {
    /// Loads a config file and applies each `key = value` line.
    /// Lines starting with `#` and blank lines are ignored.
    pub fn load(path: &std::path::Path) -> Result<RunConfig> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut config = RunConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(
                    path.display().to_string(),
                    lineno + 1,
                    "expected key = value",
                )
            })?;
            config
                .apply(key.trim(), value.trim())
                .map_err(|e| Error::parse(path.display().to_string(), lineno + 1, e.to_string()))?;
        }
        Ok(config)
    }

    /// Applies one dotted key. Unknown keys are config errors.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value `{value}` for {key}")))
        }
        match key {
            "paths.manifest" => self.manifest = Some(PathBuf::from(value)),
            "paths.out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = num(key, value)?,
            "jobs" => self.jobs = Some(num(key, value)?),
            "pca.n_components" => self.pca_components = num(key, value)?,
            "pca.scope" => self.pca_scope = Scope::parse(value)?,
            "hmm.n_states" => self.hmm_states = num(key, value)?,
            "hmm.tol" => self.hmm_tol = num(key, value)?,
            "hmm.max_iter" => self.hmm_max_iter = num(key, value)?,
            "hmm.scope" => self.hmm_scope = Scope::parse(value)?,
            "windowing.feature" => {
                ChannelBandKey::parse(value)?;
                self.feature = value.to_string();
            }
            "windowing.multivariate" => self.multivariate = num(key, value)?,
            "windowing.configs" => self.configs = Some(parse_configs(value)?),
            "windowing.adasyn_k" => self.adasyn_k = num(key, value)?,
            "windowing.beta" => self.adasyn_beta = num(key, value)?,
            "classifier.k" => self.knn_k = num(key, value)?,
            "eval.n_folds" => self.n_folds = num(key, value)?,
            "eval.split_mode" => self.split_mode = SplitMode::parse(value)?,
            other => {
                return Err(Error::Config(format!("unknown config key `{other}`")));
            }
        }
        Ok(())
    }

    pub fn feature_index(&self) -> Result<usize> {
        Ok(neurocross_core::feature_index(ChannelBandKey::parse(
            &self.feature,
        )?))
    }

    /// Flat dump of every effective setting, for the run manifest.
    pub fn dump(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        push(
            "paths.manifest",
            self.manifest
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        push("paths.out_dir", self.out_dir.display().to_string());
        push("seed", self.seed.to_string());
        push("jobs", self.jobs.map(|j| j.to_string()).unwrap_or_default());
        push("pca.n_components", self.pca_components.to_string());
        push("pca.scope", self.pca_scope.name().to_string());
        push("hmm.n_states", self.hmm_states.to_string());
        push("hmm.tol", format!("{}", self.hmm_tol));
        push("hmm.max_iter", self.hmm_max_iter.to_string());
        push("hmm.scope", self.hmm_scope.name().to_string());
        push("windowing.feature", self.feature.clone());
        push("windowing.multivariate", self.multivariate.to_string());
        push(
            "windowing.configs",
            self.configs
                .as_ref()
                .map(|cs| {
                    let mut s = String::new();
                    for (i, c) in cs.iter().enumerate() {
                        if i > 0 {
                            s.push(',');
                        }
                        let _ = write!(s, "{}x{}", c.length_frames, c.stride_frames);
                    }
                    s
                })
                .unwrap_or_else(|| "default".to_string()),
        );
        push("windowing.adasyn_k", self.adasyn_k.to_string());
        push("windowing.beta", format!("{}", self.adasyn_beta));
        push("classifier.k", self.knn_k.to_string());
        push("eval.n_folds", self.n_folds.to_string());
        push("eval.split_mode", self.split_mode.name().to_string());
        out
    }
}

/// Parses `5x9,8x9,9x3` into window configurations.
pub fn parse_configs(value: &str) -> Result<Vec<WindowConfig>> {
    let mut out = Vec::new();
    for part in value.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (l, s) = part
            .split_once('x')
            .ok_or_else(|| Error::Config(format!("config `{part}` is not LENGTHxSTRIDE")))?;
        let length: usize = l
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad window length `{l}`")))?;
        let stride: usize = s
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad stride `{s}`")))?;
        out.push(WindowConfig::new(length, stride)?);
    }
    if out.is_empty() {
        return Err(Error::Config("no window configurations given".into()));
    }
    Ok(out)
}
