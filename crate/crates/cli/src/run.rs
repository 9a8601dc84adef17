//! Subcommand bodies: wire settings into corpus, scorer, backends and runners.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use affectsim_core::agents::http::{HttpChatConfig, LocalRunnerBackend, OpenAiCompatBackend, ENV_API_BASE};
use affectsim_core::agents::{AgentSpec, ChatBackend};
use affectsim_core::corpus::{empirical_va, load_corpus, Corpus};
use affectsim_core::experiments::{
    persist, run_chat, run_preliminary, unix_now, AgentId, BackendProvider, MockProvider, RunContext, RunMetadata,
};
use affectsim_core::report::{analyze, ReportOptions};
use affectsim_core::sampling::fit_kde;
use affectsim_core::scorer::remote::{RemoteScorer, ENV_SCORER_URL};
use affectsim_core::scorer::{CachedScorer, Lexicon, LexiconScorer, ReferenceScorer, Scorer};
use affectsim_core::stats::AnalysisOptions;
use anyhow::{anyhow, Context};
use serde_json::json;

use crate::config::{BackendFlavor, ConfigError, Mode, RunSettings, ScorerKind};

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration: exit code 1.
    Usage(String),
    /// Failure while doing the work: exit code 2.
    Runtime(anyhow::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn load_lexicon(path: Option<&Path>) -> anyhow::Result<Lexicon> {
    match path {
        Some(p) => Lexicon::load(p).map_err(|e| anyhow!(e)),
        None => Ok(Lexicon::demo()),
    }
}

pub fn build_scorer(kind: ScorerKind, lexicon: Option<&Path>) -> anyhow::Result<Box<dyn Scorer>> {
    Ok(match kind {
        ScorerKind::Lexicon => Box::new(LexiconScorer::new(load_lexicon(lexicon)?)),
        ScorerKind::Reference => Box::new(ReferenceScorer::new().with_fallback(load_lexicon(lexicon)?)),
        ScorerKind::Remote => {
            let remote = RemoteScorer::from_env()
                .ok_or_else(|| anyhow!("--scorer remote needs {ENV_SCORER_URL} to point at the scoring service"))?;
            let health = remote.health().context("scoring service health check failed")?;
            log::info!("scoring service reports model {} ({})", health.model, health.status);
            Box::new(remote)
        }
    })
}

struct LiveProvider {
    by_model: BTreeMap<String, Arc<dyn ChatBackend>>,
}

impl BackendProvider for LiveProvider {
    fn backend_for(&self, model: &str, _agent: AgentId, _spec: &AgentSpec) -> Arc<dyn ChatBackend> {
        Arc::clone(&self.by_model[model])
    }
}

fn http_backend(flavor: BackendFlavor, cfg: HttpChatConfig) -> Arc<dyn ChatBackend> {
    match flavor {
        BackendFlavor::Openai => Arc::new(OpenAiCompatBackend::new(cfg)),
        BackendFlavor::Local => Arc::new(LocalRunnerBackend::new(cfg)),
    }
}

fn live_provider(settings: &RunSettings) -> Result<(LiveProvider, String), CliError> {
    let mut by_model = BTreeMap::new();
    let mut described = Vec::new();
    let mut shared: Option<Arc<dyn ChatBackend>> = None;
    for model in &settings.experiment.models {
        let backend = match settings.backends.get(model) {
            Some(o) => {
                let mut cfg = HttpChatConfig::new(&o.base_url);
                cfg.api_key = o.api_key_env.as_deref().and_then(|k| std::env::var(k).ok());
                cfg.requests_per_second = o.requests_per_second.or(settings.requests_per_second);
                http_backend(o.flavor.unwrap_or(settings.backend), cfg)
            }
            None => {
                if shared.is_none() {
                    let mut cfg = HttpChatConfig::from_env().ok_or_else(|| {
                        CliError::Usage(format!(
                            "live runs need {ENV_API_BASE} (or a [backends.{model}] entry in the config file); use --mock for offline runs"
                        ))
                    })?;
                    cfg.requests_per_second = settings.requests_per_second;
                    shared = Some(http_backend(settings.backend, cfg));
                }
                Arc::clone(shared.as_ref().unwrap())
            }
        };
        described.push(format!("{model}={}", backend.describe()));
        by_model.insert(model.clone(), backend);
    }
    Ok((LiveProvider { by_model }, described.join(", ")))
}

/// Runs one experiment and persists it; returns the transcript path.
pub fn run_experiment(mode: Mode, settings: &RunSettings) -> Result<PathBuf, CliError> {
    if settings.seed_generated {
        log::warn!("no seed given; using generated seed {}", settings.experiment.seed);
    }
    let corpus = match &settings.corpus {
        Some(p) => load_corpus(p).with_context(|| format!("loading corpus {}", p.display()))?,
        None => Corpus::demo(),
    };
    if !corpus.skipped().is_empty() {
        log::warn!("{}: skipped {} invalid rows", corpus.source_path(), corpus.skipped().len());
    }
    let points = empirical_va(&corpus, Some("en")).context("corpus has no usable English rows")?;
    let kde = fit_kde(&points).context("fitting the VA density")?;
    let scorer = CachedScorer::new(build_scorer(settings.scorer, settings.lexicon.as_deref())?);

    let mock = MockProvider {
        drift_a: (settings.mock_drift_a[0], settings.mock_drift_a[1]),
        drift_b: (settings.mock_drift_b[0], settings.mock_drift_b[1]),
    };
    let live;
    let (provider, backend_desc): (&dyn BackendProvider, String) = if settings.mock {
        (&mock, format!("mock (drift A {:?}, B {:?})", settings.mock_drift_a, settings.mock_drift_b))
    } else {
        let (p, d) = live_provider(settings)?;
        live = p;
        (&live, d)
    };

    let ctx = RunContext {
        corpus: &corpus,
        kde: &kde,
        scorer: &scorer,
        backends: provider,
    };
    let started = unix_now();
    let run = match mode {
        Mode::Preliminary => run_preliminary(&settings.experiment, &ctx),
        Mode::Chat => run_chat(&settings.experiment, settings.pairing.expect("chat has a pairing"), &ctx),
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;

    let aborted = run.transcripts.iter().filter(|t| t.aborted()).count();
    if aborted > 0 {
        log::warn!("{aborted} of {} conversations aborted", run.transcripts.len());
    }
    let meta = RunMetadata::describe(&run, &kde, corpus.source_path(), &scorer.identity(), &backend_desc, started);
    let path = persist(&run, &meta, &settings.output).context("writing transcripts")?;
    log::info!(
        "{}: {} conversations, {} records",
        run.run_id,
        run.transcripts.len(),
        meta.record_count
    );
    Ok(path)
}

pub fn run_analyze(
    inputs: &[PathBuf],
    out: &Path,
    baseline: Option<PathBuf>,
    exclude_greeting: bool,
    ci_level: f64,
) -> Result<PathBuf, CliError> {
    if inputs.is_empty() {
        return Err(CliError::Usage("analyze needs at least one --in file".into()));
    }
    if !(ci_level > 0.0 && ci_level < 1.0) {
        return Err(CliError::Usage(format!("--ci-level must lie in (0,1), got {ci_level}")));
    }
    let options = ReportOptions {
        analysis: AnalysisOptions {
            exclude_greeting,
            ci_level,
        },
        baseline,
    };
    let bundle = analyze(inputs, &options).map_err(|e| CliError::Runtime(anyhow!(e)))?;
    let dir = bundle.write(out).map_err(|e| CliError::Runtime(anyhow!(e)))?;
    Ok(dir)
}

/// Scores ad-hoc texts; one JSON object per line on stdout.
pub fn run_score(texts: Vec<String>, file: Option<PathBuf>, scorer: ScorerKind, lexicon: Option<PathBuf>) -> Result<Vec<String>, CliError> {
    let mut all = texts;
    if let Some(f) = file {
        let body = std::fs::read_to_string(&f).with_context(|| format!("reading {}", f.display()))?;
        all.extend(body.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from));
    }
    if all.is_empty() {
        return Err(CliError::Usage("score needs --text or --file".into()));
    }
    if all.iter().any(|t| t.trim().is_empty()) {
        return Err(CliError::Usage("texts to score must be non-empty".into()));
    }
    let scorer = CachedScorer::new(build_scorer(scorer, lexicon.as_deref())?);
    let scores = scorer.score(&all).map_err(|e| CliError::Runtime(anyhow!(e)))?;
    Ok(all
        .iter()
        .zip(scores)
        .map(|(t, s)| {
            json!({
                "text": t,
                "valence": s.valence(),
                "arousal": s.arousal(),
                "cell": s.cell().to_string(),
            })
            .to_string()
        })
        .collect())
}

/// Human-readable echo of resolved settings.
pub fn describe_settings(settings: &RunSettings) -> String {
    let v = json!({
        "experiment": settings.experiment,
        "pairing": settings.pairing.map(|p| p.label()),
        "corpus": settings.corpus.as_ref().map_or("<bundled demo corpus>".to_string(), |p| p.display().to_string()),
        "lexicon": settings.lexicon.as_ref().map_or("<bundled demo lexicon>".to_string(), |p| p.display().to_string()),
        "output": settings.output.display().to_string(),
        "scorer": format!("{:?}", settings.scorer).to_lowercase(),
        "mock": settings.mock,
        "backend": format!("{:?}", settings.backend).to_lowercase(),
        "backend_overrides": settings.backends.keys().collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&v).expect("serializable")
}
