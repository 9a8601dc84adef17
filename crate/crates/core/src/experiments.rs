//! Protocol runners for the scripted (preliminary) and agent-vs-agent (chat)
//! experiments, and JSON-Lines transcript persistence.
//!
//! Every conversation draws its randomness from its own substream keyed by
//! `(seed, lane, conversation index)`, so results do not depend on how many
//! worker threads run or in which order conversations finish.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affect::{greeting_for, EmotionalState, SamCell, VaPoint};
use crate::agents::{
    dummy_script, loop_suspected, mock_backend, next_turn, rotation, AgentSpec, ChatBackend, Decoding,
    Message, MockProfile, RetryPolicy,
};
use crate::corpus::{exemplars, Corpus, DEFAULT_EXEMPLAR_K};
use crate::sampling::{preset, substream, KdeModel, Pairing};
use crate::scorer::{CachedScorer, Scorer};

pub const SCRIPT_LEN: usize = 5;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: not a transcript record: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PreliminaryZeroShot,
    PreliminaryFewShot,
    ChatSampled,
    ChatOpposing,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::PreliminaryZeroShot => "preliminary_zero_shot",
            ExperimentKind::PreliminaryFewShot => "preliminary_few_shot",
            ExperimentKind::ChatSampled => "chat_sampled",
            ExperimentKind::ChatOpposing => "chat_opposing",
        }
    }

    pub fn is_preliminary(self) -> bool {
        matches!(self, ExperimentKind::PreliminaryZeroShot | ExperimentKind::PreliminaryFewShot)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "preliminary_zero_shot" => ExperimentKind::PreliminaryZeroShot,
            "preliminary_few_shot" => ExperimentKind::PreliminaryFewShot,
            "chat_sampled" => ExperimentKind::ChatSampled,
            "chat_opposing" => ExperimentKind::ChatOpposing,
            other => return Err(ExperimentError::Config(format!("unknown experiment `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub models: Vec<String>,
    /// Preliminary: iterations per model. Chat: conversations per pairing.
    pub iterations: usize,
    /// Chat only: utterances per agent, greeting included.
    pub rounds: usize,
    pub seed: u64,
    pub exemplar_k: usize,
    pub parallelism: usize,
    pub decoding: Decoding,
    #[serde(skip, default)]
    pub retry: RetryPolicy,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, models: Vec<String>, seed: u64) -> Self {
        Self {
            experiment,
            models,
            iterations: if experiment.is_preliminary() { 50 } else { 10 },
            rounds: 20,
            seed,
            exemplar_k: DEFAULT_EXEMPLAR_K,
            parallelism: 1,
            decoding: Decoding::default(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.models.is_empty() {
            return bad("at least one model is required");
        }
        if self.models.iter().any(|m| m.trim().is_empty()) {
            return bad("model identifiers must be non-empty");
        }
        let distinct: BTreeSet<_> = self.models.iter().collect();
        if distinct.len() != self.models.len() {
            return bad("model identifiers must be distinct");
        }
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if self.rounds == 0 {
            return bad("rounds must be positive");
        }
        if self.exemplar_k == 0 {
            return bad("exemplar_k must be positive");
        }
        if self.parallelism == 0 {
            return bad("parallelism must be positive");
        }
        if self.decoding.temperature.is_nan() || self.decoding.temperature < 0.0 {
            return bad("temperature must be >= 0");
        }
        if self.decoding.max_tokens == 0 {
            return bad("max_tokens must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentId {
    A,
    B,
    #[serde(rename = "dummy")]
    Dummy,
}

impl AgentId {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentId::A => "A",
            AgentId::B => "B",
            AgentId::Dummy => "dummy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    LoopSuspected,
    Unscored,
    Aborted,
}

/// One utterance of a conversation with its prompted and scored affect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnRecord {
    pub run_id: String,
    pub experiment: ExperimentKind,
    pub model: String,
    #[serde(default)]
    pub pairing: Option<String>,
    pub conversation_id: String,
    pub round: u32,
    pub agent_id: AgentId,
    pub persona_name: String,
    pub prompted_va: Option<VaPoint>,
    pub prompted_cell: Option<SamCell>,
    pub text: String,
    pub scored_va: Option<VaPoint>,
    pub flags: BTreeSet<Flag>,
}

impl TurnRecord {
    pub fn is_agent_turn(&self) -> bool {
        self.agent_id != AgentId::Dummy
    }

    pub fn has(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }
}

/// One conversation: its agents and its ordered records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub conversation_id: String,
    pub model: String,
    pub pairing: Option<String>,
    pub agents: Vec<AgentSpec>,
    pub records: Vec<TurnRecord>,
    pub failure: Option<String>,
    pub widened_exemplars: bool,
}

impl Transcript {
    pub fn aborted(&self) -> bool {
        self.failure.is_some()
    }
}

/// Supplies the chat backend for each agent of each conversation.
pub trait BackendProvider: Send + Sync {
    fn backend_for(&self, model: &str, agent: AgentId, spec: &AgentSpec) -> Arc<dyn ChatBackend>;
}

/// Offline provider: every agent gets a phrasebook mock targeting its own
/// prompted state, with an optional per-agent drift.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MockProvider {
    pub drift_a: (f64, f64),
    pub drift_b: (f64, f64),
}

impl BackendProvider for MockProvider {
    fn backend_for(&self, _model: &str, agent: AgentId, spec: &AgentSpec) -> Arc<dyn ChatBackend> {
        let drift = if agent == AgentId::B { self.drift_b } else { self.drift_a };
        Arc::new(mock_backend(MockProfile {
            target: spec.state.va(),
            drift,
        }))
    }
}

/// Shares one backend across all agents and models.
pub struct SharedBackend(pub Arc<dyn ChatBackend>);

impl BackendProvider for SharedBackend {
    fn backend_for(&self, _model: &str, _agent: AgentId, _spec: &AgentSpec) -> Arc<dyn ChatBackend> {
        Arc::clone(&self.0)
    }
}

pub struct RunContext<'a, S: Scorer> {
    pub corpus: &'a Corpus,
    pub kde: &'a KdeModel,
    pub scorer: &'a CachedScorer<S>,
    pub backends: &'a dyn BackendProvider,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub run_id: String,
    pub config: ExperimentConfig,
    pub pairing: Option<Pairing>,
    pub transcripts: Vec<Transcript>,
}

impl RunOutput {
    pub fn records(&self) -> impl Iterator<Item = &TurnRecord> {
        self.transcripts.iter().flat_map(|t| t.records.iter())
    }
}

pub fn run_id_for(config: &ExperimentConfig, pairing: Option<Pairing>) -> String {
    match pairing {
        Some(Pairing::Opposing(..)) => format!("{}-{}-{}", config.experiment, pairing.unwrap(), config.seed),
        _ => format!("{}-{}", config.experiment, config.seed),
    }
}

/// Runs `jobs` on up to `parallelism` threads, returning results in job order.
fn run_parallel<J: Sync, T: Send>(jobs: &[J], parallelism: usize, f: impl Fn(&J) -> T + Sync) -> Vec<T> {
    if parallelism <= 1 || jobs.len() <= 1 {
        return jobs.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..parallelism.min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                let out = f(&jobs[i]);
                slots.lock().unwrap()[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|s| s.expect("every job ran"))
        .collect()
}

struct RecordBase<'a> {
    run_id: &'a str,
    experiment: ExperimentKind,
    model: &'a str,
    pairing: Option<String>,
    conversation_id: String,
}

impl RecordBase<'_> {
    fn record(&self, round: u32, agent_id: AgentId, persona: &str, state: Option<EmotionalState>, text: String) -> TurnRecord {
        TurnRecord {
            run_id: self.run_id.to_string(),
            experiment: self.experiment,
            model: self.model.to_string(),
            pairing: self.pairing.clone(),
            conversation_id: self.conversation_id.clone(),
            round,
            agent_id,
            persona_name: persona.to_string(),
            prompted_va: state.map(|s| s.va()),
            prompted_cell: state.map(|s| s.cell()),
            text,
            scored_va: None,
            flags: BTreeSet::new(),
        }
    }
}

/// Scores agent turns in one batch, flags loops and aborted conversations.
fn finalize<S: Scorer>(transcript: &mut Transcript, scorer: &CachedScorer<S>) {
    let idx: Vec<usize> = transcript
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_agent_turn() && !r.text.trim().is_empty())
        .map(|(i, _)| i)
        .collect();
    let texts: Vec<&str> = idx.iter().map(|&i| transcript.records[i].text.as_str()).collect();
    let scores = if texts.is_empty() {
        Ok(vec![])
    } else {
        scorer.score(&texts)
    };
    match scores {
        Ok(scores) => {
            for (&i, s) in idx.iter().zip(scores) {
                transcript.records[i].scored_va = Some(s);
            }
        }
        Err(e) => log::warn!("{}: scoring failed: {e}", transcript.conversation_id),
    }
    for r in transcript.records.iter_mut().filter(|r| r.is_agent_turn()) {
        if r.scored_va.is_none() {
            r.flags.insert(Flag::Unscored);
        }
    }

    let looping = [AgentId::A, AgentId::B].into_iter().any(|who| {
        let replies: Vec<&str> = transcript
            .records
            .iter()
            .filter(|r| r.agent_id == who)
            .map(|r| r.text.as_str())
            .collect();
        loop_suspected(&replies)
    });
    let aborted = transcript.aborted();
    for r in transcript.records.iter_mut() {
        if looping {
            r.flags.insert(Flag::LoopSuspected);
        }
        if aborted {
            r.flags.insert(Flag::Aborted);
        }
    }
}

struct PreliminaryJob {
    model_idx: usize,
    iteration: usize,
}

/// Scripted protocol: the dummy partner speaks the five script lines and
/// the model answers each one in persona.
pub fn run_preliminary<S: Scorer>(config: &ExperimentConfig, ctx: &RunContext<'_, S>) -> Result<RunOutput, ExperimentError> {
    config.validate()?;
    if !config.experiment.is_preliminary() {
        return Err(ExperimentError::Config(format!(
            "{} is not a preliminary experiment",
            config.experiment
        )));
    }
    let few_shot = config.experiment == ExperimentKind::PreliminaryFewShot;
    let run_id = run_id_for(config, None);
    let jobs: Vec<PreliminaryJob> = (0..config.models.len())
        .flat_map(|m| (0..config.iterations).map(move |i| PreliminaryJob { model_idx: m, iteration: i }))
        .collect();

    let transcripts = run_parallel(&jobs, config.parallelism, |job| {
        let model = &config.models[job.model_idx];
        let mut rng = substream(config.seed, job.model_idx as u64, job.iteration as u64);
        let state = ctx.kde.sample_state(&mut rng);
        let (me, other) = rotation(job.iteration);
        let base = RecordBase {
            run_id: &run_id,
            experiment: config.experiment,
            model,
            pairing: None,
            conversation_id: format!("{model}/{:03}", job.iteration + 1),
        };
        let mut transcript = Transcript {
            conversation_id: base.conversation_id.clone(),
            model: model.clone(),
            pairing: None,
            agents: vec![],
            records: vec![],
            failure: None,
            widened_exemplars: false,
        };
        let mut exemplar_texts = vec![];
        if few_shot {
            match exemplars(ctx.corpus, state.cell(), config.exemplar_k, &mut rng) {
                Ok(draw) => {
                    transcript.widened_exemplars = draw.widened;
                    exemplar_texts = draw.texts();
                }
                Err(e) => transcript.failure = Some(e.to_string()),
            }
        }
        let spec = AgentSpec {
            persona: me,
            counterpart: other,
            state,
            exemplars: exemplar_texts,
            model: model.clone(),
            decoding: config.decoding,
        };
        transcript.agents.push(spec.clone());
        if transcript.failure.is_none() {
            let backend = ctx.backends.backend_for(model, AgentId::A, &spec);
            let mut history = Vec::with_capacity(2 * SCRIPT_LEN);
            for (i, line) in dummy_script().into_iter().enumerate() {
                let round = i as u32 + 1;
                transcript
                    .records
                    .push(base.record(round, AgentId::Dummy, &spec.counterpart.name, None, line.to_string()));
                history.push(Message::other(line));
                match next_turn(&spec, &history, backend.as_ref(), &config.retry) {
                    Ok(out) => {
                        history.push(Message::own(out.text.clone()));
                        transcript
                            .records
                            .push(base.record(round, AgentId::A, &spec.persona.name, Some(state), out.text));
                    }
                    Err(e) => {
                        transcript
                            .records
                            .push(base.record(round, AgentId::A, &spec.persona.name, Some(state), String::new()));
                        transcript.failure = Some(e.to_string());
                        break;
                    }
                }
            }
        }
        if let Some(f) = &transcript.failure {
            log::warn!("{}: conversation aborted: {f}", transcript.conversation_id);
        }
        finalize(&mut transcript, ctx.scorer);
        transcript
    });

    Ok(RunOutput {
        run_id,
        config: config.clone(),
        pairing: None,
        transcripts,
    })
}

/// Agent-vs-agent protocol. Agent A opens with the greeting matching its
/// cell (its round 1); the agents then alternate B, A, B, ... until each
/// has spoken `rounds` times.
pub fn run_chat<S: Scorer>(
    config: &ExperimentConfig,
    pairing: Pairing,
    ctx: &RunContext<'_, S>,
) -> Result<RunOutput, ExperimentError> {
    config.validate()?;
    let expected = match pairing {
        Pairing::Sampled => ExperimentKind::ChatSampled,
        Pairing::Opposing(..) => ExperimentKind::ChatOpposing,
    };
    if config.experiment != expected {
        return Err(ExperimentError::Config(format!(
            "pairing {pairing} requires experiment {expected}, config says {}",
            config.experiment
        )));
    }
    let run_id = run_id_for(config, Some(pairing));
    let lane_of = |model_idx: usize| ((model_idx as u64) << 8) | 0x80;
    let jobs: Vec<PreliminaryJob> = (0..config.models.len())
        .flat_map(|m| (0..config.iterations).map(move |i| PreliminaryJob { model_idx: m, iteration: i }))
        .collect();

    let transcripts = run_parallel(&jobs, config.parallelism, |job| {
        let model = &config.models[job.model_idx];
        let mut rng = substream(config.seed, lane_of(job.model_idx), job.iteration as u64);
        let (state_a, state_b) = match pairing {
            Pairing::Sampled => {
                let a = ctx.kde.sample_state(&mut rng);
                let b = ctx.kde.sample_state(&mut rng);
                (a, b)
            }
            Pairing::Opposing(a, b) => (preset(a).state, preset(b).state),
        };
        let (pa, pb) = rotation(job.iteration);
        let spec_a = AgentSpec {
            persona: pa.clone(),
            counterpart: pb.clone(),
            state: state_a,
            exemplars: vec![],
            model: model.clone(),
            decoding: config.decoding,
        };
        let spec_b = AgentSpec {
            persona: pb,
            counterpart: pa,
            state: state_b,
            exemplars: vec![],
            model: model.clone(),
            decoding: config.decoding,
        };
        let base = RecordBase {
            run_id: &run_id,
            experiment: config.experiment,
            model,
            pairing: Some(pairing.label()),
            conversation_id: format!("{model}/{}/{:03}", pairing.label(), job.iteration + 1),
        };
        let mut transcript = Transcript {
            conversation_id: base.conversation_id.clone(),
            model: model.clone(),
            pairing: Some(pairing.label()),
            agents: vec![spec_a.clone(), spec_b.clone()],
            records: vec![],
            failure: None,
            widened_exemplars: false,
        };
        let backend_a = ctx.backends.backend_for(model, AgentId::A, &spec_a);
        let backend_b = ctx.backends.backend_for(model, AgentId::B, &spec_b);

        // (speaker, text) in utterance order.
        let mut spoken: Vec<(AgentId, String)> = Vec::with_capacity(2 * config.rounds);
        let view = |spoken: &[(AgentId, String)], me: AgentId| -> Vec<Message> {
            spoken
                .iter()
                .map(|(who, text)| if *who == me { Message::own(text.clone()) } else { Message::other(text.clone()) })
                .collect()
        };

        let greeting = greeting_for(state_a.cell()).to_string();
        transcript
            .records
            .push(base.record(1, AgentId::A, &spec_a.persona.name, Some(state_a), greeting.clone()));
        spoken.push((AgentId::A, greeting));

        'rounds: for round in 1..=config.rounds as u32 {
            let turns: &[(AgentId, &AgentSpec, &Arc<dyn ChatBackend>)] = if round == 1 {
                &[(AgentId::B, &spec_b, &backend_b)]
            } else {
                &[(AgentId::A, &spec_a, &backend_a), (AgentId::B, &spec_b, &backend_b)]
            };
            for &(who, spec, backend) in turns {
                let history = view(&spoken, who);
                match next_turn(spec, &history, backend.as_ref(), &config.retry) {
                    Ok(out) => {
                        transcript
                            .records
                            .push(base.record(round, who, &spec.persona.name, Some(spec.state), out.text.clone()));
                        spoken.push((who, out.text));
                    }
                    Err(e) => {
                        transcript
                            .records
                            .push(base.record(round, who, &spec.persona.name, Some(spec.state), String::new()));
                        transcript.failure = Some(e.to_string());
                        log::warn!("{}: conversation aborted: {e}", transcript.conversation_id);
                        break 'rounds;
                    }
                }
            }
        }
        finalize(&mut transcript, ctx.scorer);
        transcript
    });

    Ok(RunOutput {
        run_id,
        config: config.clone(),
        pairing: Some(pairing),
        transcripts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationMeta {
    pub conversation_id: String,
    pub model: String,
    pub pairing: Option<String>,
    pub agents: Vec<AgentSpec>,
    pub failure: Option<String>,
    pub widened_exemplars: bool,
}

/// Side-car metadata written next to every transcript file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub run_id: String,
    pub experiment: ExperimentKind,
    pub pairing: Option<String>,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub kde_bandwidth: [f64; 2],
    pub kde_support_size: usize,
    pub corpus: String,
    pub scorer: String,
    pub backend: String,
    pub started_at_unix: u64,
    pub finished_at_unix: u64,
    pub record_count: usize,
    pub conversations: Vec<ConversationMeta>,
}

impl RunMetadata {
    pub fn describe(run: &RunOutput, kde: &KdeModel, corpus: &str, scorer: &str, backend: &str, started_at_unix: u64) -> Self {
        Self {
            run_id: run.run_id.clone(),
            experiment: run.config.experiment,
            pairing: run.pairing.map(|p| p.label()),
            config: run.config.clone(),
            seed: run.config.seed,
            kde_bandwidth: kde.bandwidth(),
            kde_support_size: kde.support().len(),
            corpus: corpus.to_string(),
            scorer: scorer.to_string(),
            backend: backend.to_string(),
            started_at_unix,
            finished_at_unix: unix_now(),
            record_count: run.records().count(),
            conversations: run
                .transcripts
                .iter()
                .map(|t| ConversationMeta {
                    conversation_id: t.conversation_id.clone(),
                    model: t.model.clone(),
                    pairing: t.pairing.clone(),
                    agents: t.agents.clone(),
                    failure: t.failure.clone(),
                    widened_exemplars: t.widened_exemplars,
                })
                .collect(),
        }
    }
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn metadata_path(transcript_path: &Path) -> PathBuf {
    let stem = transcript_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    transcript_path.with_file_name(format!("{stem}.meta.json"))
}

/// Writes `<run_id>.jsonl` (one record per line) and `<run_id>.meta.json`.
pub fn persist(run: &RunOutput, meta: &RunMetadata, output_dir: &Path) -> Result<PathBuf, ExperimentError> {
    fs::create_dir_all(output_dir).map_err(io_err(output_dir))?;
    let path = output_dir.join(format!("{}.jsonl", run.run_id));
    write_records(&path, run.records())?;
    let meta_path = metadata_path(&path);
    let json = serde_json::to_string_pretty(meta).expect("metadata serializes");
    fs::write(&meta_path, json + "\n").map_err(io_err(&meta_path))?;
    Ok(path)
}

pub fn write_records<'a>(path: &Path, records: impl IntoIterator<Item = &'a TurnRecord>) -> Result<(), ExperimentError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a transcript file back; any line that is not a record is a schema error.
pub fn load_records(path: &Path) -> Result<Vec<TurnRecord>, ExperimentError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TurnRecord = serde_json::from_str(&line).map_err(|e| ExperimentError::Schema {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}
