//! `affectsim`: run affect-conditioned dialogue experiments and analyse them.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{BackendFlavor, FileConfig, Mode, RunFlags, ScorerKind, Setting};
use run::CliError;

#[derive(Parser, Debug)]
#[command(name = "affectsim", version, about = "Affect-conditioned agent dialogue experiments")]
struct Cli {
    /// TOML config file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scripted dialogue: a fixed partner speaks five lines, the model answers in persona.
    Preliminary(PreliminaryArgs),
    /// Two prompted agents converse for a fixed number of rounds.
    Chat(ChatArgs),
    /// Build tables, charts and a summary from transcript files.
    Analyze(AnalyzeArgs),
    /// Score ad-hoc texts.
    Score(ScoreArgs),
    /// Check a config file and print the resolved settings.
    ValidateConfig(ValidateArgs),
}

fn parse_drift(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [v, a] => Ok([
            v.parse().map_err(|e| format!("valence drift: {e}"))?,
            a.parse().map_err(|e| format!("arousal drift: {e}"))?,
        ]),
        _ => Err("expected `valence,arousal`".into()),
    }
}

#[derive(Args, Debug, Default)]
struct CommonRunArgs {
    /// Model identifiers, comma separated.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Annotated utterance CSV (text,valence,arousal,language); bundled demo corpus if absent.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// token,valence,arousal CSV for the lexicon scorer.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, value_enum)]
    scorer: Option<ScorerKind>,
    /// Offline phrasebook backends instead of HTTP endpoints.
    #[arg(long)]
    mock: bool,
    /// Per-round drift of mock agent A, as `valence,arousal`.
    #[arg(long, value_parser = parse_drift, allow_hyphen_values = true)]
    mock_drift_a: Option<[f64; 2]>,
    /// Per-round drift of mock agent B.
    #[arg(long, value_parser = parse_drift, allow_hyphen_values = true)]
    mock_drift_b: Option<[f64; 2]>,
    /// Directory for transcripts (default `runs`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Conversations run concurrently.
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_tokens: Option<u32>,
    #[arg(long)]
    max_retries: Option<u32>,
    /// Live endpoint flavour.
    #[arg(long, value_enum)]
    backend: Option<BackendFlavor>,
    /// Client-side request rate cap per endpoint.
    #[arg(long)]
    requests_per_second: Option<f64>,
}

impl CommonRunArgs {
    fn into_flags(self) -> RunFlags {
        RunFlags {
            models: self.models,
            seed: self.seed,
            corpus: self.corpus,
            lexicon: self.lexicon,
            scorer: self.scorer,
            mock: self.mock.then_some(true),
            mock_drift_a: self.mock_drift_a,
            mock_drift_b: self.mock_drift_b,
            output: self.out,
            parallelism: self.parallelism,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            max_retries: self.max_retries,
            backend: self.backend,
            requests_per_second: self.requests_per_second,
            ..Default::default()
        }
    }
}

#[derive(Args, Debug)]
struct PreliminaryArgs {
    #[arg(long, value_enum)]
    setting: Option<Setting>,
    /// Iterations per model (five responses each).
    #[arg(long)]
    iterations: Option<usize>,
    /// Exemplars per prompt in the few-shot setting.
    #[arg(long)]
    exemplar_k: Option<usize>,
    #[command(flatten)]
    common: CommonRunArgs,
}

#[derive(Args, Debug)]
struct ChatArgs {
    /// sampled, hvha-lvha, lvha-nvla or hvha-nvla.
    #[arg(long)]
    pairing: Option<String>,
    /// Conversations per model.
    #[arg(long)]
    conversations: Option<usize>,
    /// Utterances per agent, greeting included.
    #[arg(long)]
    rounds: Option<usize>,
    #[command(flatten)]
    common: CommonRunArgs,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Transcript files (JSON Lines).
    #[arg(long = "in", num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Preliminary-run transcript used as the offset baseline.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Leave agent A's opening greeting out of every aggregate.
    #[arg(long)]
    exclude_greeting: bool,
    #[arg(long, default_value_t = 0.95)]
    ci_level: f64,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long)]
    text: Vec<String>,
    /// One text per line.
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "lexicon")]
    scorer: ScorerKind,
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Config file; falls back to --config.
    file: Option<PathBuf>,
}

fn load_file(path: Option<&PathBuf>) -> Result<Option<FileConfig>, CliError> {
    path.map(|p| FileConfig::load(p)).transpose().map_err(CliError::from)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Preliminary(args) => {
            let file = load_file(cli.config.as_ref())?;
            let mut flags = args.common.into_flags();
            flags.experiment = args.setting.map(Setting::kind);
            flags.iterations = args.iterations;
            flags.exemplar_k = args.exemplar_k;
            let settings = config::resolve(Mode::Preliminary, file.as_ref(), flags)?;
            let path = run::run_experiment(Mode::Preliminary, &settings)?;
            println!("{}", path.display());
        }
        Command::Chat(args) => {
            let file = load_file(cli.config.as_ref())?;
            let mut flags = args.common.into_flags();
            flags.pairing = args.pairing;
            flags.iterations = args.conversations;
            flags.rounds = args.rounds;
            let settings = config::resolve(Mode::Chat, file.as_ref(), flags)?;
            let path = run::run_experiment(Mode::Chat, &settings)?;
            println!("{}", path.display());
        }
        Command::Analyze(args) => {
            let dir = run::run_analyze(&args.inputs, &args.out, args.baseline, args.exclude_greeting, args.ci_level)?;
            println!("{}", dir.display());
        }
        Command::Score(args) => {
            for line in run::run_score(args.text, args.file, args.scorer, args.lexicon)? {
                println!("{line}");
            }
        }
        Command::ValidateConfig(args) => {
            let path = args
                .file
                .or(cli.config)
                .ok_or_else(|| CliError::Usage("validate-config needs a file".into()))?;
            let file = FileConfig::load(&path)?;
            let settings = config::resolve(config::mode_of(&file), Some(&file), RunFlags::default())?;
            println!("{}", run::describe_settings(&settings));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Usage(_)) => {
            eprintln!("error: {e}");
            eprintln!("run `affectsim --help` for usage");
            ExitCode::from(1)
        }
        Err(e @ CliError::Runtime(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
