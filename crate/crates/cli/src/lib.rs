//! The `reliance` command line. Every subcommand reads a corpus directory
//! and writes only into `--out`; stages pick up each other's files there.

use std::io::Write as _;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use reliance_core::analysis::{AnalysisOptions, Suite};
use reliance_core::fixtures::{generate, SynthOptions};
use reliance_core::label::{Axis, LabelSource, RuleConfig, Strategy};
use reliance_core::model::{load_corpus, validate};
use reliance_core::pipeline::{
    write_fixture, CorpusCounts, ExternalSettings, LabelMode, Pipeline, FIXTURE_CORPUS_DIR,
};
use reliance_core::{CoreError, Result};
use reliance_server::{ServerConfig, DEFAULT_PORT};

pub const ENDPOINT_ENV: &str = "RELIANCESCOPE_ENDPOINT";

#[derive(Debug, Parser)]
#[command(name = "reliance", version, about = "Segment, label and analyze chatbot reliance logs")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Corpus directory (sessions.jsonl, messages.jsonl, ...).
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Output directory; nothing is written elsewhere.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Generate a seeded synthetic corpus into <out>/corpus and use it.
    #[arg(long, global = true, value_enum)]
    pub fixture: Option<Fixture>,
    /// Seed for permutation tests.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-session work.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Where segment labels come from.
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Rules)]
    pub mode: ModeArg,
    /// External classifier: http(s)://... or cmd:PROGRAM ARGS.
    #[arg(long, global = true, env = ENDPOINT_ENV)]
    pub endpoint: Option<String>,
    /// Rule configuration file (key = value lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    Synth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Rules,
    External,
    Gold,
}

impl From<ModeArg> for LabelMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Rules => LabelMode::Rules,
            ModeArg::External => LabelMode::External,
            ModeArg::Gold => LabelMode::Gold,
        }
    }
}

#[derive(Debug, Args)]
pub struct ExternalArgs {
    /// Prompting strategy for the external classifier.
    #[arg(long, default_value = "zero_shot")]
    pub strategy: String,
    /// Ask the model to attend to one axis (help_seeking or response_use).
    #[arg(long)]
    pub axis: Option<String>,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 120)]
    pub timeout: u64,
    /// Gold labels supplying few-shot exemplars.
    #[arg(long)]
    pub exemplars: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalysisArgs {
    /// Suite name or `all`; comma-separated lists are accepted.
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Permutations for permutation p-values; 0 disables them.
    #[arg(long, default_value_t = 10_000)]
    pub permutations: usize,
    /// Zero-replacement constant for compositions.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and check the corpus; print record counts.
    Validate,
    /// Assign knowledge components and build interaction segments.
    Segment,
    /// Label every segment (rules, external classifier or gold).
    Classify(#[command(flatten)] ExternalArgs),
    /// Classify the knowledge context of every segment.
    Context,
    /// Run the analysis suites.
    Analyze {
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[command(flatten)]
        external: ExternalArgs,
    },
    /// Score labels.jsonl in the output directory against gold labels.
    Benchmark {
        /// Gold labels; defaults to labels.jsonl in the corpus directory.
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Score only segments the classifier labeled.
        #[arg(long)]
        drop_unclassified: bool,
        /// Also report linear-weighted kappa for the ordinal axes.
        #[arg(long)]
        weighted: bool,
        #[command(flatten)]
        external: ExternalArgs,
    },
    /// Render report.txt from the analysis (and benchmark, if present).
    Report(#[command(flatten)] AnalysisArgs),
    /// Run the annotation server.
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Built annotation UI to serve at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

fn corpus_dir(common: &Common) -> Result<PathBuf> {
    match (common.fixture, &common.corpus) {
        (Some(_), Some(_)) => Err(CoreError::Config("--fixture and --corpus are mutually exclusive".into())),
        (Some(Fixture::Synth), None) => {
            let dir = common.out.join(FIXTURE_CORPUS_DIR);
            write_fixture(&generate(&SynthOptions::default()), &dir)?;
            Ok(dir)
        }
        (None, Some(dir)) => Ok(dir.clone()),
        (None, None) => Err(CoreError::Config("--corpus DIR or --fixture synth is required".into())),
    }
}

fn rules(common: &Common) -> Result<RuleConfig> {
    common.config.as_deref().map_or_else(|| Ok(RuleConfig::default()), RuleConfig::from_file)
}

fn external(common: &Common, args: &ExternalArgs) -> Result<Option<ExternalSettings>> {
    if common.mode != ModeArg::External {
        return Ok(None);
    }
    let endpoint = common
        .endpoint
        .clone()
        .ok_or_else(|| CoreError::Config(format!("--mode external needs --endpoint or {ENDPOINT_ENV}")))?;
    let axis = match args.axis.as_deref() {
        None => None,
        Some("help_seeking") => Some(Axis::HelpSeeking),
        Some("response_use") => Some(Axis::ResponseUse),
        Some(other) => return Err(CoreError::Config(format!("unknown axis `{other}` (help_seeking, response_use)"))),
    };
    Ok(Some(ExternalSettings {
        endpoint,
        strategy: Strategy::parse(&args.strategy)?,
        axis,
        timeout: Duration::from_secs(args.timeout),
        exemplar_labels: args.exemplars.clone(),
    }))
}

fn analysis_options(common: &Common, args: &AnalysisArgs, rules: &RuleConfig) -> Result<AnalysisOptions> {
    let mut suites = std::collections::BTreeSet::new();
    for part in args.suite.split(',') {
        suites.extend(Suite::parse_set(part.trim())?);
    }
    let permuted = suites.contains(&Suite::Somers) || suites.contains(&Suite::Srl);
    let seed = match common.seed {
        Some(s) => s,
        None if permuted && args.permutations > 0 => {
            return Err(CoreError::Config(
                "--seed is required when permutation tests run (or pass --permutations 0)".into(),
            ))
        }
        None => 0,
    };
    if let Some(d) = args.delta {
        if !(d > 0.0 && d < 1.0) {
            return Err(CoreError::Config(format!("--delta must lie in (0, 1), got {d}")));
        }
    }
    Ok(AnalysisOptions {
        seed,
        permutations: args.permutations,
        delta: args.delta,
        suites,
        thresholds: rules.thresholds(),
    })
}

fn open(common: &Common) -> Result<Pipeline> {
    let rules = rules(common)?;
    Pipeline::open(&corpus_dir(common)?, &common.out, common.jobs, rules)
}

fn print_json(value: &serde_json::Value) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(value).unwrap_or_default());
}

fn relative(out: &Path, name: &str) -> String {
    out.join(name).display().to_string()
}

pub fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    match &cli.command {
        Command::Validate => {
            let dir = corpus_dir(common)?;
            let corpus = load_corpus(&dir)?;
            validate(&corpus)?;
            print_json(&json!({ "valid": true, "counts": CorpusCounts::of(&corpus) }));
        }
        Command::Segment => {
            let p = open(common)?;
            let segments = p.segment()?;
            print_json(&json!({ "segments": segments.len(), "written": relative(&p.out, "segments.jsonl") }));
        }
        Command::Classify(args) => {
            let p = open(common)?;
            let ext = external(common, args)?;
            let labels = p.classify(common.mode.into(), ext.as_ref())?;
            let unclassified = labels.iter().filter(|l| l.pattern().is_none()).count();
            let source = labels.first().map(|l| l.source).unwrap_or(LabelSource::Rules);
            print_json(&json!({
                "segments": labels.len(),
                "unclassified": unclassified,
                "source": source,
                "written": relative(&p.out, "labels.jsonl"),
            }));
        }
        Command::Context => {
            let p = open(common)?;
            let contexts = p.context()?;
            print_json(&json!({ "segments": contexts.len(), "written": relative(&p.out, "contexts.jsonl") }));
        }
        Command::Analyze { analysis, external: args } => {
            let p = open(common)?;
            let options = analysis_options(common, analysis, &p.rules)?;
            let ext = external(common, args)?;
            let report = p.analyze(&options, common.mode.into(), ext.as_ref())?;
            let suites: Vec<&str> = options.suites.iter().map(|s| s.as_str()).collect();
            print_json(&json!({
                "segments": report.segments,
                "suites": suites,
                "inputs_digest": report.inputs_digest,
                "written": relative(&p.out, "analysis_report.json"),
            }));
        }
        Command::Benchmark { gold, drop_unclassified, weighted, external: args } => {
            let p = open(common)?;
            let ext = external(common, args)?;
            p.labels(common.mode.into(), ext.as_ref())?;
            let report = p.benchmark(gold.as_deref(), *drop_unclassified, *weighted)?;
            let f1: serde_json::Map<String, serde_json::Value> = report
                .confusion
                .iter()
                .map(|m| (m.target.as_str().to_string(), json!({ "micro": m.f1_micro, "macro": m.f1_macro })))
                .collect();
            print_json(&json!({
                "segments": report.segments,
                "unclassified": report.unclassified,
                "f1": f1,
                "written": relative(&p.out, "benchmark_report.json"),
            }));
        }
        Command::Report(args) => {
            let p = open(common)?;
            let options = analysis_options(common, args, &p.rules)?;
            let text = p.report(&options, common.mode.into())?;
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
        }
        Command::Serve { port, host, static_dir } => {
            let config = ServerConfig {
                corpus_dir: corpus_dir(common)?,
                out: common.out.clone(),
                addr: SocketAddr::new(*host, *port),
                static_dir: static_dir.clone(),
                jobs: common.jobs,
            };
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| CoreError::Config(format!("async runtime: {e}")))?;
            runtime.block_on(reliance_server::serve(config))?;
        }
    }
    Ok(())
}

/// Process exit code for an error: 1 for bad input, 2 for everything else.
pub fn exit_code(e: &CoreError) -> i32 {
    if e.is_validation() {
        1
    } else {
        2
    }
}

/// The error as one JSON line for standard error.
pub fn error_json(e: &CoreError) -> String {
    let kind = if e.is_validation() { "validation" } else { "runtime" };
    json!({ "kind": kind, "message": e.to_string() }).to_string()
}
