mod cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Hierarchical sentence alignment of comparable corpora.
#[derive(Parser, Debug)]
#[command(name = "lha", version, about)]
pub struct Cli {
    /// Stop-word list (one word per line) replacing the built-in English list.
    #[arg(long, global = true)]
    pub stopwords: Option<PathBuf>,
    /// Only log errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    /// Log debug messages.
    #[arg(short, long, global = true, conflicts_with = "quiet")]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the full pipeline from a TOML config, reusing cached stages.
    Run(RunArgs),
    /// Embed documents or sentences of a JSONL corpus.
    Embed(EmbedArgs),
    /// Build an approximate nearest-neighbour index over embeddings.
    Index(IndexArgs),
    /// Align source documents to their nearest target documents.
    AlignDocs(AlignDocsArgs),
    /// Align sentences within aligned document pairs.
    AlignSents(AlignSentsArgs),
    /// Evaluate against a labelled dataset.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Convert tab-separated sentence labels to the dataset label format.
    AdaptGold(AdaptGoldArgs),
    /// Write the synthetic benchmark dataset and its word vectors.
    Fixture(FixtureArgs),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(short, long)]
    pub config: PathBuf,
    /// Override a config key, e.g. `--set theta_s=0.7` or `--set filter.min_overlap=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Validate the config and exit.
    #[arg(long)]
    pub check: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LevelArg {
    Doc,
    Sent,
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    /// Corpus JSONL file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "doc")]
    pub level: LevelArg,
    /// `avg` or `precomputed:<embedding file>`.
    #[arg(long, default_value = "avg")]
    pub strategy: String,
    /// Word vectors (text format), required by `avg`.
    #[arg(long)]
    pub word_vectors: Option<PathBuf>,
    /// Keep raw vectors instead of scaling them to unit length.
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub trees: usize,
    #[arg(long, default_value_t = 6000)]
    pub search_k: usize,
    #[arg(long, default_value_t = 32)]
    pub leaf_size: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct AlignDocsArgs {
    /// Source document embeddings.
    #[arg(long)]
    pub source: PathBuf,
    /// Target document index.
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub theta_d: f64,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScorerArg {
    Cosine,
    Overlap,
    Bm25,
    Wmd,
    Rwmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FilterModeArg {
    PerGroup,
    PerPair,
}

#[derive(Args, Debug)]
pub struct AlignSentsArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Document pairs written by `align-docs`.
    #[arg(long)]
    pub doc_pairs: PathBuf,
    #[arg(long, value_enum, default_value = "cosine")]
    pub scorer: ScorerArg,
    /// Word vectors, for WMD/RWMD or for embedding sentences on the fly.
    #[arg(long)]
    pub word_vectors: Option<PathBuf>,
    /// Precomputed source sentence embeddings (cosine scorer).
    #[arg(long)]
    pub source_embeddings: Option<PathBuf>,
    /// Precomputed target sentence embeddings (cosine scorer).
    #[arg(long)]
    pub target_embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0.65, allow_negative_numbers = true)]
    pub theta_s: f64,
    #[arg(long, default_value_t = 0.4)]
    pub min_overlap: f64,
    #[arg(long, default_value_t = 1.5)]
    pub max_len_ratio: f64,
    #[arg(long, value_enum, default_value = "per-group")]
    pub filter_mode: FilterModeArg,
    /// Tab-separated (source, target) sentence pairs to drop.
    #[arg(long)]
    pub exclude: Option<PathBuf>,
    /// Output groups as JSONL.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Also write groups as TSV.
    #[arg(long)]
    pub tsv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalCommon {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Word vectors (text format).
    #[arg(long)]
    pub word_vectors: Option<PathBuf>,
    /// Count `good_partial` labels as positives too.
    #[arg(long)]
    pub include_partial: bool,
    /// Print only the JSON report.
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EvalScorerArg {
    /// Cosine of averaged word vectors.
    Avg,
    Overlap,
    Bm25,
    Wmd,
    Rwmd,
}

#[derive(Subcommand, Debug)]
pub enum EvalCommand {
    /// Sentence alignment within the gold document pairs.
    Sent {
        #[command(flatten)]
        common: EvalCommon,
        #[arg(long, value_enum, default_value = "avg")]
        scorer: EvalScorerArg,
        /// Row/column top-k candidates per document pair; 0 keeps every cell.
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Document alignment with sampled noise documents.
    Doc {
        #[command(flatten)]
        common: EvalCommon,
        #[arg(long, value_enum, default_value = "avg")]
        scorer: EvalScorerArg,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        noise: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// End-to-end alignment with noise documents, hierarchical or global.
    Joint {
        #[command(flatten)]
        common: EvalCommon,
        #[arg(long, default_value = "lha")]
        mode: lha::evaluate::JointMode,
        #[arg(long, default_value_t = 1000)]
        noise: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        k_doc: usize,
        #[arg(long, default_value_t = 1)]
        k_sent: usize,
        /// Re-score the top-n cosine neighbours with WMD.
        #[arg(long)]
        wmd: bool,
        #[arg(long, default_value_t = 50)]
        top_n: usize,
        #[arg(long, default_value_t = 6000)]
        search_k: usize,
    },
}

#[derive(Args, Debug)]
pub struct AdaptGoldArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Rows of label, source doc, source sentence, target doc, target sentence.
    #[arg(long)]
    pub tsv: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FixtureArgs {
    /// Output directory.
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub noise: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Write the small toy pipeline (corpora, vectors, config) instead.
    #[arg(long)]
    pub toy: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        "error"
    } else if cli.verbose {
        "debug"
    } else {
        "info"
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match cmd::dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            let mut msg = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !msg.contains(&cause) {
                    msg += if msg.is_empty() { "" } else { ": " };
                    msg += &cause;
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
