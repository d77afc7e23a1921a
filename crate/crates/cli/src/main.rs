use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use ctsbench_core::Error;

mod commands;

#[derive(Debug, Parser)]
#[command(name = "ctsbench", version, about = "Evaluation harness and synthetic benchmark generator for conditional time-series generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Compute a metric family and write a report.
    #[command(subcommand)]
    Metrics(MetricsCommand),
    /// Run an evaluation protocol.
    #[command(subcommand)]
    Protocol(ProtocolCommand),
    /// Discover a schema, assign attribute values, index labels.
    #[command(subcommand)]
    Schema(SchemaCommand),
    /// Check series, conditions and schema against each other.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Variant {
    U,
    M,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    variant: Variant,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    n_per_combo: usize,
    #[arg(long, default_value_t = ctsbench_core::synth::DEFAULT_LENGTH)]
    length: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Provenance written into metric reports.
#[derive(Debug, Args)]
struct ContextArgs {
    #[arg(long, default_value = "dataset")]
    dataset_id: String,
    #[arg(long, default_value = "model")]
    model_id: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum MetricsCommand {
    /// MDD, ACD, SD and KD on raw series.
    Stat {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        gen: PathBuf,
        #[arg(long, default_value_t = ctsbench_core::stats::DEFAULT_BINS)]
        bins: usize,
        #[arg(long)]
        max_lag: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        context: ContextArgs,
    },
    /// FID and kNN precision/recall; CTTP score and joint-space metrics with --cond-emb.
    Embed {
        #[arg(long)]
        real_emb: PathBuf,
        #[arg(long)]
        gen_emb: PathBuf,
        #[arg(long)]
        cond_emb: Option<PathBuf>,
        #[arg(long, default_value_t = ctsbench_core::embed::DEFAULT_K)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        context: ContextArgs,
    },
    /// Best-of-K DTW and CRPS against references.
    Align {
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        gen_bundle: PathBuf,
        #[arg(long)]
        k_per_sample: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        context: ContextArgs,
    },
}

#[derive(Debug, Subcommand)]
enum ProtocolCommand {
    /// Top-1 text retrieval accuracy of generated embeddings.
    Retrieval {
        #[arg(long)]
        gen_emb: PathBuf,
        #[arg(long)]
        text_emb: PathBuf,
        /// Conditions whose captions identify duplicate descriptions.
        #[arg(long)]
        conditions: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        pool_size: usize,
        #[arg(long, default_value_t = 100)]
        repeats: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        context: ContextArgs,
    },
    /// Positional retrieval of segment embeddings, both tensors shaped (n, P, d).
    Temporal {
        #[arg(long)]
        segment_emb: PathBuf,
        #[arg(long)]
        text_emb: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Head/tail retrieval accuracy split by compositional distance.
    Compgen {
        #[arg(long)]
        train_conditions: PathBuf,
        #[arg(long)]
        test_conditions: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        gen_emb: PathBuf,
        #[arg(long)]
        ref_emb: PathBuf,
        #[arg(long)]
        text_emb: PathBuf,
        #[arg(long, default_value_t = 10)]
        pool_size: usize,
        #[arg(long, default_value_t = 100)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = ctsbench_core::protocols::DEFAULT_HEAD_TAIL_FRACTION)]
        fraction: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Downstream utility drop rate.
    Droprate {
        #[arg(long)]
        acc_real: f64,
        #[arg(long)]
        acc_gen: f64,
        #[arg(long)]
        acc_rand: f64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        context: ContextArgs,
    },
    /// Aggregate metric reports into per-group model ranks.
    Rank {
        #[arg(long, num_args = 1.., required = true)]
        reports: Vec<PathBuf>,
        /// JSON object mapping metric names to "fidelity" or "adherence".
        #[arg(long)]
        grouping: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum SchemaCommand {
    /// Iteratively discover an attribute schema from captions (one per line).
    Discover {
        #[arg(long)]
        captions: PathBuf,
        /// `mock:RULES.json`, `pipe:COMMAND` or an http URL.
        #[arg(long)]
        proposer: String,
        #[arg(long, default_value_t = 100)]
        batch: usize,
        #[arg(long, default_value_t = 3)]
        stable: usize,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the round-by-round trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Assign attribute values to captions; labels are left at 0 for `schema label`.
    Assign {
        #[arg(long)]
        captions: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        proposer: String,
        #[arg(long, default_value_t = 20)]
        batch: usize,
        #[arg(long, default_value = "sample")]
        id_prefix: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Number distinct attribute combinations, or apply an existing combination table.
    Label {
        #[arg(long)]
        conditions: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        /// Existing table to apply; unseen combinations are an error.
        #[arg(long, conflicts_with = "table_out")]
        table: Option<PathBuf>,
        /// Where to write the fitted table.
        #[arg(long)]
        table_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    conditions: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Contract(_) => 3,
        Error::Proposer(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match commands::run(cli.command, &matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
