//! The `leakprobe` command line.

mod commands;
mod output;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use output::{read_jsonl_values, JsonlWriter};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "leakprobe",
    version,
    about = "Benchmark contamination probes: corpus overlap retrieval and testset slot guessing"
)]
pub struct Cli {
    /// Log verbosity on stderr.
    #[arg(long, value_enum, default_value_t = LogLevel::Warn, global = true)]
    pub log_level: LogLevel,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LogLevel {
    Off,
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl LogLevel {
    fn filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Off => log::LevelFilter::Off,
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
            LogLevel::Trace => log::LevelFilter::Trace,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or query a BM25 index.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Prefilter benchmark instances and record one decision per instance.
    Filter(FilterArgs),
    /// Retrieve corpus documents for each instance and score their overlap.
    Overlap(OverlapArgs),
    /// Run testset slot guessing against a model.
    Guess(GuessArgs),
    /// Summarize a guess results file.
    Report(ReportArgs),
    /// Krippendorff's alpha over nominal annotations.
    Agree(AgreeArgs),
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Ingest JSONL corpora and write an index file.
    Build(IndexBuildArgs),
    /// Top-k BM25 search over a saved index.
    Search(IndexSearchArgs),
}

#[derive(Debug, Args)]
pub struct IndexBuildArgs {
    /// Corpus JSONL file; repeat for several.
    #[arg(long = "corpus", required = true)]
    pub corpus: Vec<PathBuf>,
    /// Source name for synthesized ids; defaults to each file's stem.
    #[arg(long)]
    pub source: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    pub k1: f64,
    #[arg(long, default_value_t = 0.4)]
    pub b: f64,
}

#[derive(Debug, Args)]
pub struct IndexSearchArgs {
    #[arg(long)]
    pub idx: PathBuf,
    #[arg(long)]
    pub query: String,
    #[arg(short = 'k', long = "k", default_value_t = 10)]
    pub k: usize,
    /// Write hits here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemaArg {
    GenericQa,
    Multichoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Truthfulqa,
    General,
}

#[derive(Debug, Args)]
pub struct BenchmarkInput {
    #[arg(long)]
    pub benchmark: PathBuf,
    #[arg(long, value_enum, default_value_t = SchemaArg::GenericQa)]
    pub schema: SchemaArg,
    /// Benchmark name for records without one; defaults to the file stem.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub input: BenchmarkInput,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long, default_value_t = crate::bench::DEFAULT_ROUGE_THRESHOLD)]
    pub rouge_threshold: f64,
    #[arg(long)]
    pub decisions_out: PathBuf,
    /// Also write the kept instances as benchmark JSONL.
    #[arg(long)]
    pub kept_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QueryKindArg {
    QuestionOnly,
    LabelOnly,
    QuestionLabel,
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    #[arg(long)]
    pub idx: PathBuf,
    #[command(flatten)]
    pub input: BenchmarkInput,
    #[arg(short = 'k', long = "k", default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = crate::overlap::DEFAULT_NGRAM)]
    pub ngram: usize,
    /// Comma-separated: bm25, rouge_l, bleu, gpt_score.
    #[arg(long, value_delimiter = ',', default_value = "bm25,rouge_l,bleu")]
    pub metrics: Vec<String>,
    /// Defaults to question plus label when the instance has one.
    #[arg(long, value_enum)]
    pub query_kind: Option<QueryKindArg>,
    /// Model profile for gpt_score.
    #[arg(long)]
    pub judge: Option<String>,
    #[arg(long, default_value_t = crate::overlap::DEFAULT_JUDGE_RETRIES)]
    pub judge_retries: u32,
    /// TOML or JSON model profiles.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Question,
    Multichoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HintArg {
    None,
    Type,
    Category,
    Url,
}

#[derive(Debug, Args)]
pub struct GuessArgs {
    #[command(flatten)]
    pub input: BenchmarkInput,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = HintArg::None)]
    pub hint: HintArg,
    /// Profile name, or a built-in `mock:<kind>`.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Prefilter with these rules before guessing.
    #[arg(long, value_enum)]
    pub prefilter: Option<KindArg>,
    #[arg(long, default_value_t = crate::bench::DEFAULT_ROUGE_THRESHOLD)]
    pub rouge_threshold: f64,
    /// Byte-exact match instead of normalized match.
    #[arg(long)]
    pub strict_em: bool,
    /// Profile asked to pick the keyword in question mode.
    #[arg(long)]
    pub keyword_model: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Markdown,
    Csv,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AgreeArgs {
    /// CSV with columns item_id,annotator_id,label.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn init_logging(level: LogLevel) {
    let _ = env_logger::Builder::new()
        .filter_level(level.filter())
        .target(env_logger::Target::Stderr)
        .format(|buf, record| {
            writeln!(
                buf,
                "level={} target={} msg={:?}",
                record.level(),
                record.target(),
                record.args().to_string()
            )
        })
        .try_init();
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(cli.log_level);
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    match commands::run(cli.command, jobs) {
        Ok(()) => EXIT_OK,
        Err(e) if e.downcast_ref::<commands::UsageError>().is_some() => {
            eprintln!("error: {e:#}\n\nFor more information, try '--help'.");
            EXIT_USAGE
        }
        Err(e) => {
            log::error!("{e:#}");
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}
