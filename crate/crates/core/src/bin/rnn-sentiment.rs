use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rnn_sentiment::analysis::{
    classify_corpus, export_report, sentiment_distribution, temporal_buckets, write_classified,
    Granularity, Report, ReportFormat,
};
use rnn_sentiment::corpus::{
    self, filter_by_collection_window, load_stopwords, load_tweets, parse_stopwords,
    parse_timestamp, preprocess_corpus, read_clean_corpus, write_clean_corpus, PreprocessConfig,
    TweetFormat, Vocabulary,
};
use rnn_sentiment::embedding::{
    load_embeddings, nearest_neighbors, save_embeddings, train_embeddings, EmbeddingMatrix,
    EmbeddingParams,
};
use rnn_sentiment::eval::evaluate;
use rnn_sentiment::gradcheck::{self, GradCheckConfig};
use rnn_sentiment::model::{load_model, save_model, BpttMode, Direction, ModelConfig};
use rnn_sentiment::numeric::RngState;
use rnn_sentiment::training::{
    binary_subset, load_annotations, prepare_dataset, run_grid, train, write_annotations,
    SplitStrategy, Task, TrainConfig,
};
use rnn_sentiment::Error;

#[derive(Parser)]
#[command(name = "rnn-sentiment", version, about = "Tweet sentiment classification with recurrent networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean raw tweets and build the vocabulary
    Preprocess(PreprocessArgs),
    /// Train skip-gram word embeddings
    Embed(EmbedArgs),
    /// Train a classifier
    Train(TrainArgs),
    /// Score a trained classifier on annotated tweets
    Eval(EvalArgs),
    /// Train and score the batch size x dropout x architecture grid
    Grid(GridArgs),
    /// Classify a corpus and aggregate by class and period
    Analyze(AnalyzeArgs),
    /// Print the nearest neighbors of a word
    Neighbors(NeighborsArgs),
    /// Compare analytic gradients with finite differences
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Serialize)]
struct PreprocessArgs {
    /// Raw tweets, JSONL or CSV (by extension)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, alias = "output-dir")]
    output: PathBuf,
    /// Stopword file, one word per line; the built-in list when omitted
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    min_freq: u64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    min_len: u64,
    /// Comma-separated collection keywords; no keyword filter when omitted
    #[arg(long, value_delimiter = ',')]
    keywords: Vec<String>,
    /// Start of the collection window
    #[arg(long, default_value = "2013-11-08T00:00:00Z")]
    from: String,
    /// End of the collection window
    #[arg(long, default_value = "2014-01-31T23:59:59Z")]
    to: String,
}

#[derive(Args, Serialize)]
struct EmbedArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    /// Subsampling threshold; 0 disables subsampling
    #[arg(long, default_value_t = 1e-3)]
    subsample: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum TaskArg {
    Fine,
    Binary,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Fine => Task::FineGrained,
            TaskArg::Binary => Task::Binary,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ModelArg {
    Standard,
    Bi,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum BpttArg {
    Full,
    Truncated,
}

#[derive(Args, Serialize)]
struct DataArgs {
    /// Cleaned corpus (JSONL)
    #[arg(long)]
    corpus: PathBuf,
    /// CSV with columns id,label
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, value_enum, default_value_t = TaskArg::Fine)]
    task: TaskArg,
    #[arg(long, default_value_t = 1.8e-3)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    /// Truncation length for truncated BPTT
    #[arg(long, default_value_t = 50)]
    k: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Fraction of each class used for training
    #[arg(long, default_value_t = 0.8)]
    split_ratio: f64,
    /// Examples kept per class; the smallest class size when omitted
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value_t = ModelArg::Standard)]
    model: ModelArg,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    /// Defaults to truncated for standard and full for bidirectional models
    #[arg(long, value_enum)]
    bptt: Option<BpttArg>,
}

#[derive(Args, Serialize)]
struct GridArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
struct AnalyzeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value = "month", value_parser = ["month", "week", "day"])]
    granularity: String,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
struct NeighborsArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// Vocabulary file; must list the same tokens as the embeddings
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    word: String,
    #[arg(long, default_value_t = 5)]
    k: usize,
}

#[derive(Args, Serialize)]
struct GradcheckArgs {
    /// Largest hidden size drawn
    #[arg(long, default_value_t = 4)]
    hidden: usize,
    /// Longest sequence drawn
    #[arg(long, default_value_t = 8)]
    seq_len: usize,
    #[arg(long, default_value_t = 25)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Corrupt the analytic gradient (test fixture)
    #[arg(long, hide = true)]
    corrupt: bool,
}

/// Failure kinds mapped to exit codes.
enum Failure {
    Input(String),
    Internal(String),
    /// Ran correctly, but the outcome is a failure (gradcheck).
    Check,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::IndexOutOfRange { .. } | Error::TraceMismatch(_) | Error::ZeroVector => {
                Failure::Internal(e.to_string())
            }
            _ => Failure::Input(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    subcommand: &'a str,
    tool_version: &'a str,
    seed: Option<u64>,
    config: &'a C,
    inputs: BTreeMap<&'a str, &'a Path>,
    outputs: Vec<String>,
    duration_seconds: f64,
}

struct Run<'a, C: Serialize> {
    name: &'a str,
    config: &'a C,
    seed: Option<u64>,
    started: Instant,
    out_dir: &'a Path,
    outputs: Vec<String>,
}

impl<'a, C: Serialize> Run<'a, C> {
    fn start(name: &'a str, config: &'a C, seed: Option<u64>, out_dir: &'a Path) -> Result<Self, Failure> {
        fs::create_dir_all(out_dir)
            .map_err(|e| Failure::Input(format!("{}: {e}", out_dir.display())))?;
        Ok(Run {
            name,
            config,
            seed,
            started: Instant::now(),
            out_dir,
            outputs: Vec::new(),
        })
    }

    fn path(&mut self, file: &str) -> PathBuf {
        self.outputs.push(file.to_string());
        self.out_dir.join(file)
    }

    fn finish(self, inputs: &[(&'a str, &'a Path)]) -> CmdResult {
        let manifest = Manifest {
            subcommand: self.name,
            tool_version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            config: self.config,
            inputs: inputs.iter().copied().collect(),
            outputs: self.outputs,
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        write_json(&self.out_dir.join("manifest.json"), &manifest)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Failure::Internal(e.to_string()))?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn timestamp(s: &str, flag: &str) -> Result<chrono::DateTime<chrono::Utc>, Failure> {
    parse_timestamp(s).ok_or_else(|| Failure::Input(format!("--{flag}: cannot parse timestamp `{s}`")))
}

fn load_embedding_file(path: &Path) -> Result<(EmbeddingMatrix, Vocabulary), Failure> {
    let (emb, tokens) = load_embeddings(path)?;
    Ok((emb, Vocabulary::from_tokens(tokens)?))
}

fn cmd_preprocess(args: &PreprocessArgs) -> CmdResult {
    let mut run = Run::start("preprocess", args, None, &args.output)?;
    let stopwords = match &args.stopwords {
        Some(p) => load_stopwords(p)?,
        None => parse_stopwords(corpus::DEFAULT_STOPWORDS),
    };
    let config = PreprocessConfig {
        stopwords,
        min_token_length: args.min_len as usize,
        min_global_frequency: args.min_freq as usize,
        ..Default::default()
    };
    let raw = load_tweets(&args.input, TweetFormat::from_path(&args.input))?;
    let (from, to) = (timestamp(&args.from, "from")?, timestamp(&args.to, "to")?);
    let keywords: BTreeSet<String> = args.keywords.iter().map(|k| k.trim().to_string()).collect();
    let raw = filter_by_collection_window(&raw, &keywords, from, to)?;
    let (tweets, vocab, stats) = preprocess_corpus(&raw, &config)?;
    write_clean_corpus(&run.path("corpus.jsonl"), &tweets)?;
    vocab.write(&run.path("vocab.tsv"))?;
    write_json(&run.path("stats.json"), &stats)?;
    println!(
        "raw {}  deduplicated {}  final {}  vocabulary {}  empty dropped {}  duplicates after cleaning {}",
        stats.raw_count,
        stats.deduplicated_count,
        stats.final_count,
        stats.vocab_size,
        stats.empty_dropped,
        stats.clean_duplicates_dropped
    );
    run.finish(&[("input", &args.input)])
}

fn cmd_embed(args: &EmbedArgs) -> CmdResult {
    let mut run = Run::start("embed", args, Some(args.seed), &args.output)?;
    let params = EmbeddingParams {
        dim: args.dim,
        window: args.window,
        negative_samples: args.negatives,
        epochs: args.epochs,
        learning_rate: args.lr,
        subsample_threshold: args.subsample,
    };
    params.validate()?;
    let tweets = read_clean_corpus(&args.corpus)?;
    let vocab = Vocabulary::read(&args.vocab)?;
    let emb = train_embeddings(&tweets, &vocab, &params, &mut RngState::new(args.seed))?;
    save_embeddings(&emb, &vocab, &run.path("embeddings.txt"))?;
    println!("{} vectors of dimension {}", emb.vocab_size(), emb.dim());
    run.finish(&[("corpus", &args.corpus), ("vocab", &args.vocab)])
}

fn train_config(data: &DataArgs, batch_size: usize) -> TrainConfig {
    TrainConfig {
        batch_size,
        learning_rate: data.lr,
        epochs: data.epochs,
        seed: data.seed,
        task: data.task.into(),
        balance_per_class: data.per_class,
        split_ratio: data.split_ratio,
        split_strategy: SplitStrategy::Stratified,
        ..Default::default()
    }
}

fn load_training_data(
    data: &DataArgs,
    config: &TrainConfig,
) -> Result<(rnn_sentiment::training::DatasetSplit, EmbeddingMatrix, Vocabulary), Failure> {
    let tweets = read_clean_corpus(&data.corpus)?;
    let labeled = load_annotations(&data.annotations, &tweets)?;
    let (emb, vocab) = load_embedding_file(&data.embeddings)?;
    let split = prepare_dataset(&labeled, config)?;
    Ok((split, emb, vocab))
}

fn cmd_train(args: &TrainArgs) -> CmdResult {
    let data = &args.data;
    let mut run = Run::start("train", args, Some(data.seed), &data.output)?;
    let train_cfg = train_config(data, args.batch);
    let direction = match args.model {
        ModelArg::Standard => Direction::Standard,
        ModelArg::Bi => Direction::Bidirectional,
    };
    let bptt_mode = match (args.bptt, direction) {
        (Some(BpttArg::Full), _) | (None, Direction::Bidirectional) => BpttMode::Full,
        (Some(BpttArg::Truncated), _) | (None, Direction::Standard) => BpttMode::Truncated(data.k),
    };
    let (split, emb, vocab) = load_training_data(data, &train_cfg)?;
    let model_cfg = ModelConfig {
        hidden_size: data.hidden,
        num_classes: train_cfg.task.num_classes(),
        dropout_rate: args.dropout,
        direction,
        bptt_mode,
        embedding_dim: emb.dim(),
    };
    if !model_cfg.is_grid_pairing() {
        eprintln!("warning: {direction} model with {} BPTT is off the reference grid", bptt_mode.label());
    }
    if train_cfg.learning_rate == 0.0 {
        eprintln!("warning: learning rate is 0; parameters will not change");
    }
    let (params, report) = train(&split, &emb, &vocab, &model_cfg, &train_cfg)?;
    save_model(&params, &model_cfg, &run.path("model.txt"))?;
    write_json(&run.path("report.json"), &report)?;
    write_annotations(&run.path("test_annotations.csv"), &split.test)?;
    if let Some(m) = &report.test_metrics {
        println!("test accuracy {:.4}  macro F1 {:.4}", m.accuracy, m.f1_macro);
    }
    println!("parameter change {:.6e}", report.parameter_change);
    run.finish(&[
        ("corpus", &data.corpus),
        ("annotations", &data.annotations),
        ("embeddings", &data.embeddings),
    ])
}

fn cmd_eval(args: &EvalArgs) -> CmdResult {
    let mut run = Run::start("eval", args, None, &args.output)?;
    let (params, model_cfg) = load_model(&args.model)?;
    let (emb, vocab) = load_embedding_file(&args.embeddings)?;
    if emb.dim() != model_cfg.embedding_dim {
        return Err(Failure::Input(format!(
            "embeddings have dimension {}, model expects {}",
            emb.dim(),
            model_cfg.embedding_dim
        )));
    }
    let tweets = read_clean_corpus(&args.corpus)?;
    let mut labeled = load_annotations(&args.annotations, &tweets)?;
    if Task::from_num_classes(model_cfg.num_classes)? == Task::Binary {
        labeled = binary_subset(&labeled);
    }
    let (cm, metrics) = evaluate(&params, &model_cfg, &emb, &vocab, &labeled)?;
    write_json(&run.path("metrics.json"), &metrics)?;
    cm.write_csv(&run.path("confusion.csv"))?;
    println!("accuracy {:.4}", metrics.accuracy);
    println!("macro F1 {:.4}", metrics.f1_macro);
    run.finish(&[
        ("model", &args.model),
        ("corpus", &args.corpus),
        ("annotations", &args.annotations),
        ("embeddings", &args.embeddings),
    ])
}

fn cmd_grid(args: &GridArgs) -> CmdResult {
    let data = &args.data;
    let mut run = Run::start("grid", args, Some(data.seed), &data.output)?;
    let train_cfg = train_config(data, 64);
    let (split, emb, vocab) = load_training_data(data, &train_cfg)?;
    let base = ModelConfig {
        hidden_size: data.hidden,
        num_classes: train_cfg.task.num_classes(),
        bptt_mode: BpttMode::Truncated(data.k),
        embedding_dim: emb.dim(),
        ..Default::default()
    };
    let result = run_grid(&split, &emb, &vocab, &base, &train_cfg)?;
    write_json(&run.path("grid.json"), &result)?;
    let table = result.to_table();
    fs::write(run.path("grid.txt"), &table).map_err(|e| Failure::Input(e.to_string()))?;
    print!("{table}");
    run.finish(&[
        ("corpus", &data.corpus),
        ("annotations", &data.annotations),
        ("embeddings", &data.embeddings),
    ])
}

fn cmd_analyze(args: &AnalyzeArgs) -> CmdResult {
    let mut run = Run::start("analyze", args, None, &args.output)?;
    let granularity: Granularity = args.granularity.parse()?;
    let (params, model_cfg) = load_model(&args.model)?;
    let (emb, vocab) = load_embedding_file(&args.embeddings)?;
    let tweets = read_clean_corpus(&args.corpus)?;
    let classified = classify_corpus(&params, &model_cfg, &emb, &vocab, &tweets)?;
    let report = Report {
        distribution: sentiment_distribution(&classified)?,
        temporal: temporal_buckets(&classified, granularity),
    };
    write_classified(&run.path("classified.jsonl"), &classified)?;
    export_report(&report, &run.path("distribution.json"), ReportFormat::Json)?;
    export_report(&report, &run.path("temporal.csv"), ReportFormat::Csv)?;
    for c in &report.distribution.classes {
        println!("{:<9} {:>8} ({:.1}%)", c.label, c.count, c.percentage);
    }
    let flagged = classified.iter().filter(|c| c.oov).count();
    if flagged > 0 {
        println!("{flagged} tweets had no known token and were labeled neutral");
    }
    run.finish(&[
        ("model", &args.model),
        ("corpus", &args.corpus),
        ("embeddings", &args.embeddings),
    ])
}

fn cmd_neighbors(args: &NeighborsArgs) -> CmdResult {
    let (emb, vocab) = load_embedding_file(&args.embeddings)?;
    if let Some(p) = &args.vocab {
        let other = Vocabulary::read(p)?;
        if other.tokens() != vocab.tokens() {
            return Err(Failure::Input(format!(
                "{} does not match the tokens of {}",
                p.display(),
                args.embeddings.display()
            )));
        }
    }
    for (word, sim) in nearest_neighbors(&emb, &vocab, &args.word, args.k)? {
        println!("{word}\t{sim:.6}");
    }
    Ok(())
}

fn cmd_gradcheck(args: &GradcheckArgs) -> CmdResult {
    let config = GradCheckConfig {
        max_hidden: args.hidden,
        max_seq_len: args.seq_len,
        trials: args.trials,
        seed: args.seed,
    };
    let report = gradcheck::run(&config, args.corrupt)?;
    for (group, err) in &report.per_group {
        println!("{group:<10} {err:.3e}");
    }
    println!(
        "max relative error {:.3e} over {} trials (tolerance {:.0e})",
        report.max_rel_error,
        report.trials.len(),
        gradcheck::TOLERANCE
    );
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Preprocess(a) => cmd_preprocess(a),
        Command::Embed(a) => cmd_embed(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Neighbors(a) => cmd_neighbors(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Check) => {
            eprintln!("gradient check failed");
            ExitCode::from(1)
        }
    }
}
