use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use predsim::analysis::{
    additive_fit, aggregate_similarity, bloc_average, read_groups, MetricKind, SimilarityTable,
};
use predsim::conditioning::{read_keywords, weighted_covariance, ConditionedMetric, WeightSpec};
use predsim::error::{Error, Result};
use predsim::io::{load_model, save_model, VectorFormat};
use predsim::model::EmbeddingModel;
use predsim::psim::{conditioned_knn, source_cosine, source_psim, word_cosine, word_psim};
use predsim::trainer::{train, TrainConfig, TrainMode};
use predsim::{IssueSet, TrainingCorpus};

/// Conditioned predictive similarity over word and source embeddings.
#[derive(Parser)]
#[command(name = "predsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train embeddings from a line-delimited JSON corpus.
    Train(TrainArgs),
    /// Print the corpus vocabulary with frequencies as TSV.
    Vocab(VocabArgs),
    /// Conditioned nearest neighbors of a token.
    Knn(KnnArgs),
    /// Similarity between two words, or two sources with --sources.
    Psim(PsimArgs),
    /// Aggregate (media group x issue set x party) similarity table.
    Table(TableArgs),
    /// Bloc-average a similarity table and print additive-model residuals.
    Normalize(NormalizeArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus file: one JSON object per line with "source" and "text".
    #[arg(long)]
    corpus: PathBuf,
    /// Directory receiving targets/contexts/sources vector files.
    #[arg(long)]
    output: PathBuf,
    /// Vector file format.
    #[arg(long, default_value = "text")]
    format: String,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 8)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 0.025)]
    lr_start: f64,
    #[arg(long, default_value_t = 1e-4)]
    lr_end: f64,
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Scoring mode: "sgns" or "source" (source-augmented, required for
    /// source similarity tables).
    #[arg(long, default_value = "sgns")]
    mode: String,
    /// 1 = deterministic single-threaded; >1 = lock-free parallel shards.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Frequent-word subsampling threshold, e.g. 1e-4. Off when omitted.
    #[arg(long)]
    subsample: Option<f64>,
}

#[derive(Args)]
struct VocabArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 1)]
    min_count: u64,
}

#[derive(Args)]
struct ConditionArgs {
    /// Keyword file defining indicator conditioning weights.
    #[arg(long, conflicts_with = "focus")]
    keywords: Option<PathBuf>,
    /// Single token carrying half the conditioning weight.
    #[arg(long)]
    focus: Option<String>,
}

#[derive(Args)]
struct KnnArgs {
    /// Model directory (from `train`) or a single vector file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    token: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[command(flatten)]
    condition: ConditionArgs,
}

#[derive(Args)]
struct PsimArgs {
    #[arg(long)]
    model: PathBuf,
    left: String,
    right: String,
    /// Compare source vectors instead of word target vectors.
    #[arg(long)]
    sources: bool,
    /// "psim" or "cosine".
    #[arg(long, default_value = "psim")]
    metric: String,
    #[command(flatten)]
    condition: ConditionArgs,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long)]
    model: PathBuf,
    /// Source-group file: [group] sections, one member per line.
    #[arg(long)]
    groups: PathBuf,
    /// Keyword files, one per issue set; the file stem names the issue.
    #[arg(long, required = true, num_args = 1..)]
    issues: Vec<PathBuf>,
    /// Party source labels (comma separated).
    #[arg(long, required = true, value_delimiter = ',')]
    parties: Vec<String>,
    /// "psim" or "cosine".
    #[arg(long, default_value = "psim")]
    metric: String,
    /// Write the TSV here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct NormalizeArgs {
    /// Similarity table TSV, as produced by `table`.
    #[arg(long)]
    table: PathBuf,
    /// Bloc file: [bloc] sections listing party columns.
    #[arg(long)]
    blocs: PathBuf,
    /// Party columns to drop before bloc averaging.
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
    /// Media levels to keep, in order (comma separated; default all).
    #[arg(long, value_delimiter = ',')]
    media: Option<Vec<String>>,
    /// Issue levels to keep, in order (comma separated; default all).
    #[arg(long, value_delimiter = ',')]
    issues: Option<Vec<String>>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Vocab(args) => cmd_vocab(args),
        Command::Knn(args) => cmd_knn(args),
        Command::Psim(args) => cmd_psim(args),
        Command::Table(args) => cmd_table(args),
        Command::Normalize(args) => cmd_normalize(args),
    }
}

fn parse_mode(s: &str) -> Result<TrainMode> {
    match s {
        "sgns" => Ok(TrainMode::Sgns),
        "source" => Ok(TrainMode::SourceAugmented),
        other => Err(Error::InvalidConfig(format!(
            "unknown mode {other:?}; expected \"sgns\" or \"source\""
        ))),
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let format: VectorFormat = args.format.parse()?;
    let config = TrainConfig {
        dim: args.dim,
        window: args.window,
        epochs: args.epochs,
        negatives: args.negatives,
        lr_start: args.lr_start,
        lr_end: args.lr_end,
        min_count: args.min_count,
        seed: args.seed,
        mode: parse_mode(&args.mode)?,
        threads: args.threads,
        subsample: args.subsample,
    };
    let corpus = TrainingCorpus::read_jsonl(&args.corpus)?;
    let model = train(&corpus, config)?;
    save_model(&model, &args.output, format)?;
    eprintln!(
        "trained {} x {} vectors from {} documents into {}",
        model.vocab().len(),
        model.dim(),
        corpus.len(),
        args.output.display()
    );
    Ok(())
}

fn cmd_vocab(args: VocabArgs) -> Result<()> {
    let corpus = TrainingCorpus::read_jsonl(&args.corpus)?;
    let vocab = predsim::build_vocabulary(&corpus, args.min_count)?;
    let mut out = String::new();
    for (_, token, count) in vocab.iter() {
        out.push_str(&format!("{token}\t{count}\n"));
    }
    print!("{out}");
    Ok(())
}

fn build_metric(model: &EmbeddingModel, condition: &ConditionArgs) -> Result<ConditionedMetric> {
    let spec = match (&condition.keywords, &condition.focus) {
        (Some(path), None) => {
            let keywords = read_keywords(path)?;
            WeightSpec::indicator(&keywords, model.vocab())?
        }
        (None, Some(token)) => WeightSpec::focus(token, model.vocab())?,
        (None, None) => WeightSpec::uniform(model.vocab())?,
        (Some(_), Some(_)) => unreachable!("clap rejects --keywords with --focus"),
    };
    weighted_covariance(model.targets(), &spec)
}

fn cmd_knn(args: KnnArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let metric = build_metric(&model, &args.condition)?;
    let neighbors = conditioned_knn(&model, &metric, &args.token, args.k)?;
    println!("rank\ttoken\tpsim");
    for (rank, (token, score)) in neighbors.iter().enumerate() {
        println!("{}\t{token}\t{score:.6}", rank + 1);
    }
    Ok(())
}

fn cmd_psim(args: PsimArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let kind: MetricKind = args.metric.parse()?;
    let value = match (kind, args.sources) {
        (MetricKind::Cosine, false) => word_cosine(&model, &args.left, &args.right)?,
        (MetricKind::Cosine, true) => source_cosine(&model, &args.left, &args.right)?,
        (MetricKind::Psim, as_sources) => {
            let metric = build_metric(&model, &args.condition)?;
            if as_sources {
                source_psim(&model, &metric, &args.left, &args.right)?
            } else {
                word_psim(&model, &metric, &args.left, &args.right)?
            }
        }
    };
    println!("{value:.6}");
    Ok(())
}

fn issue_sets(paths: &[PathBuf]) -> Result<Vec<IssueSet>> {
    let mut issues = Vec::with_capacity(paths.len());
    for path in paths {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| {
                Error::InvalidConfig(format!("cannot derive issue name from {}", path.display()))
            })?;
        if issues.iter().any(|i: &IssueSet| i.name == name) {
            return Err(Error::InvalidConfig(format!(
                "duplicate issue set name {name:?}"
            )));
        }
        issues.push(IssueSet::new(name, read_keywords(path)?));
    }
    Ok(issues)
}

fn write_table(table: &SimilarityTable, output: Option<&Path>) -> Result<()> {
    let text = table.to_tsv_string();
    match output {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
    }
}

fn cmd_table(args: TableArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let kind: MetricKind = args.metric.parse()?;
    let groups = read_groups(&args.groups)?;
    let issues = issue_sets(&args.issues)?;
    let table = aggregate_similarity(&model, &groups, &args.parties, &issues, kind)?;
    write_table(&table, args.output.as_deref())
}

fn cmd_normalize(args: NormalizeArgs) -> Result<()> {
    let table = SimilarityTable::read_tsv(&args.table, MetricKind::Psim)?;
    let table = table.restrict(args.media.as_deref(), args.issues.as_deref())?;
    let blocs = read_groups(&args.blocs)?;
    let bloc_table = bloc_average(&table, &blocs, &args.exclude)?;
    let fit = additive_fit(&bloc_table)?;
    write_table(&fit.residuals, args.output.as_deref())
}
