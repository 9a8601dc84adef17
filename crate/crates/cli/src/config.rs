//! Run configuration: built-in defaults, overlaid by a TOML file, overlaid by flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use affectsim_core::experiments::{ExperimentConfig, ExperimentKind};
use affectsim_core::sampling::Pairing;
use serde::Deserialize;

/// Keys accepted in a config file. Experiment keys mirror `ExperimentConfig`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub experiment: Option<ExperimentKind>,
    pub models: Option<Vec<String>>,
    pub iterations: Option<usize>,
    pub rounds: Option<usize>,
    pub seed: Option<u64>,
    pub exemplar_k: Option<usize>,
    pub parallelism: Option<usize>,
    pub corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub max_retries: Option<u32>,
    pub pairing: Option<String>,
    pub scorer: Option<ScorerKind>,
    pub mock: Option<bool>,
    pub mock_drift_a: Option<[f64; 2]>,
    pub mock_drift_b: Option<[f64; 2]>,
    pub backend: Option<BackendFlavor>,
    pub requests_per_second: Option<f64>,
    #[serde(default)]
    pub backends: BTreeMap<String, BackendOverride>,
}

/// Per-model endpoint, replacing the environment defaults for that model.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendOverride {
    pub base_url: String,
    pub flavor: Option<BackendFlavor>,
    /// Name of the environment variable holding this endpoint's key.
    pub api_key_env: Option<String>,
    pub requests_per_second: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Lexicon,
    Remote,
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendFlavor {
    #[default]
    Openai,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Setting {
    Zero,
    Few,
}

impl Setting {
    pub fn kind(self) -> ExperimentKind {
        match self {
            Setting::Zero => ExperimentKind::PreliminaryZeroShot,
            Setting::Few => ExperimentKind::PreliminaryFewShot,
        }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Read { path: PathBuf, message: String },
    Parse { path: PathBuf, message: String },
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Read { path, message } => write!(f, "cannot read config file {}: {message}", path.display()),
            ConfigError::Parse { path, message } => write!(f, "invalid config file {}: {message}", path.display()),
            ConfigError::Invalid(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for ConfigError {}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut cfg: FileConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        // paths in the file are relative to the file
        let dir = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.corpus, &mut cfg.lexicon, &mut cfg.output].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Preliminary,
    Chat,
}

/// Flag values of an experiment subcommand; `None` means the flag was not given.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFlags {
    pub experiment: Option<ExperimentKind>,
    pub models: Option<Vec<String>>,
    pub iterations: Option<usize>,
    pub rounds: Option<usize>,
    pub seed: Option<u64>,
    pub exemplar_k: Option<usize>,
    pub parallelism: Option<usize>,
    pub corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub max_retries: Option<u32>,
    pub pairing: Option<String>,
    pub scorer: Option<ScorerKind>,
    pub mock: Option<bool>,
    pub mock_drift_a: Option<[f64; 2]>,
    pub mock_drift_b: Option<[f64; 2]>,
    pub backend: Option<BackendFlavor>,
    pub requests_per_second: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub experiment: ExperimentConfig,
    pub pairing: Option<Pairing>,
    pub corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub output: PathBuf,
    pub scorer: ScorerKind,
    pub mock: bool,
    pub mock_drift_a: [f64; 2],
    pub mock_drift_b: [f64; 2],
    pub backend: BackendFlavor,
    pub requests_per_second: Option<f64>,
    pub backends: BTreeMap<String, BackendOverride>,
    pub seed_generated: bool,
}

pub fn generated_seed() -> u64 {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    (nanos as u64) ^ ((nanos >> 64) as u64) ^ u64::from(std::process::id()).rotate_left(32)
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Flag beats file beats default, key by key.
pub fn resolve(mode: Mode, file: Option<&FileConfig>, flags: RunFlags) -> Result<RunSettings, ConfigError> {
    let empty = FileConfig::default();
    let f = file.unwrap_or(&empty);

    let (kind, pairing) = match mode {
        Mode::Preliminary => {
            let from_file = match f.experiment {
                Some(k) if !k.is_preliminary() => {
                    return Err(invalid(format!("config experiment `{k}` is not a preliminary experiment")))
                }
                other => other,
            };
            let kind = flags.experiment.or(from_file).unwrap_or(ExperimentKind::PreliminaryZeroShot);
            (kind, None)
        }
        Mode::Chat => {
            if let Some(k) = f.experiment.filter(|k| k.is_preliminary()) {
                return Err(invalid(format!("config experiment `{k}` is not a chat experiment")));
            }
            let label = match (&flags.pairing, &f.pairing, f.experiment) {
                (Some(p), _, _) | (None, Some(p), _) => p.clone(),
                (None, None, Some(ExperimentKind::ChatOpposing)) => {
                    return Err(invalid("chat_opposing needs a pairing (hvha-lvha, lvha-nvla or hvha-nvla)"))
                }
                _ => "sampled".to_string(),
            };
            let pairing: Pairing = label.parse().map_err(|e| invalid(format!("{e}")))?;
            let kind = match pairing {
                Pairing::Sampled => ExperimentKind::ChatSampled,
                Pairing::Opposing(..) => ExperimentKind::ChatOpposing,
            };
            if flags.pairing.is_none() {
                if let Some(k) = f.experiment.filter(|k| *k != kind) {
                    return Err(invalid(format!("config experiment `{k}` contradicts pairing `{label}`")));
                }
            }
            (kind, Some(pairing))
        }
    };

    let mock = flags.mock.or(f.mock).unwrap_or(false);
    let (seed, seed_generated) = match flags.seed.or(f.seed) {
        Some(s) => (s, false),
        None if file.is_some() => return Err(invalid("`seed` is required when a config file is used")),
        None => (generated_seed(), true),
    };
    let models = match flags.models.or_else(|| f.models.clone()) {
        Some(m) => m,
        None if mock => vec!["mock".to_string()],
        None => return Err(invalid("--models is required unless --mock is set")),
    };

    let mut exp = ExperimentConfig::new(kind, models, seed);
    if let Some(v) = flags.iterations.or(f.iterations) {
        exp.iterations = v;
    }
    if let Some(v) = flags.rounds.or(f.rounds) {
        exp.rounds = v;
    }
    if let Some(v) = flags.exemplar_k.or(f.exemplar_k) {
        exp.exemplar_k = v;
    }
    if let Some(v) = flags.parallelism.or(f.parallelism) {
        exp.parallelism = v;
    }
    if let Some(v) = flags.temperature.or(f.temperature) {
        exp.decoding.temperature = v;
    }
    if let Some(v) = flags.max_tokens.or(f.max_tokens) {
        exp.decoding.max_tokens = v;
    }
    if let Some(v) = flags.max_retries.or(f.max_retries) {
        exp.retry.max_retries = v;
    }
    exp.validate().map_err(|e| invalid(e.to_string()))?;

    let scorer = flags
        .scorer
        .or(f.scorer)
        .unwrap_or(if mock { ScorerKind::Reference } else { ScorerKind::Lexicon });

    Ok(RunSettings {
        experiment: exp,
        pairing,
        corpus: flags.corpus.or_else(|| f.corpus.clone()),
        lexicon: flags.lexicon.or_else(|| f.lexicon.clone()),
        output: flags
            .output
            .or_else(|| f.output.clone())
            .unwrap_or_else(|| PathBuf::from("runs")),
        scorer,
        mock,
        mock_drift_a: flags.mock_drift_a.or(f.mock_drift_a).unwrap_or([0.0, 0.0]),
        mock_drift_b: flags.mock_drift_b.or(f.mock_drift_b).unwrap_or([0.0, 0.0]),
        backend: flags.backend.or(f.backend).unwrap_or_default(),
        requests_per_second: flags.requests_per_second.or(f.requests_per_second),
        backends: f.backends.clone(),
        seed_generated,
    })
}

/// Mode implied by a config file on its own.
pub fn mode_of(file: &FileConfig) -> Mode {
    match (file.experiment, &file.pairing) {
        (Some(k), _) if k.is_preliminary() => Mode::Preliminary,
        (Some(_), _) | (None, Some(_)) => Mode::Chat,
        (None, None) => Mode::Preliminary,
    }
}
