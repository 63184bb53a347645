//! Labels, dataset balancing and splitting, the minibatch SGD loop, and the
//! batch-size × dropout × architecture grid.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CleanTweet, Vocabulary};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::eval::{evaluate, ConfusionMatrix, Metrics};
use crate::model::{
    argmax, backward, forward, init_params, loss, BpttMode, Direction, Mode, ModelConfig, Params,
    DEFAULT_TRUNCATION,
};
use crate::numeric::{accumulate, clip_gradients, scale, sgd_step, ParamSet, RngState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentimentLabel {
    Positive,
    Negative,
    Neutral,
}

impl SentimentLabel {
    pub const ALL: [SentimentLabel; 3] = [
        SentimentLabel::Positive,
        SentimentLabel::Negative,
        SentimentLabel::Neutral,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentLabel::Positive => "positive",
            SentimentLabel::Negative => "negative",
            SentimentLabel::Neutral => "neutral",
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentimentLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Ok(SentimentLabel::Positive),
            "negative" => Ok(SentimentLabel::Negative),
            "neutral" => Ok(SentimentLabel::Neutral),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    FineGrained,
    Binary,
}

impl Task {
    /// Class order; a label's position is its class index.
    pub fn labels(self) -> &'static [SentimentLabel] {
        match self {
            Task::FineGrained => &SentimentLabel::ALL,
            Task::Binary => &SentimentLabel::ALL[..2],
        }
    }

    pub fn num_classes(self) -> usize {
        self.labels().len()
    }

    pub fn from_num_classes(n: usize) -> Result<Self> {
        match n {
            3 => Ok(Task::FineGrained),
            2 => Ok(Task::Binary),
            _ => Err(Error::Config(format!("no task has {n} classes"))),
        }
    }

    pub fn class_index(self, label: SentimentLabel) -> Option<usize> {
        self.labels().iter().position(|&l| l == label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTweet {
    pub tweet: CleanTweet,
    pub label: SentimentLabel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledTweet>,
    pub test: Vec<LabeledTweet>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    #[default]
    Stratified,
    Global,
}

/// Joins an `id,label` CSV onto the cleaned corpus.
pub fn load_annotations(path: &Path, corpus: &[CleanTweet]) -> Result<Vec<LabeledTweet>> {
    let by_id: HashMap<&str, &CleanTweet> = corpus.iter().map(|t| (t.id.as_str(), t)).collect();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(id_col), Some(label_col)) = (col("id"), col("label")) else {
        return Err(Error::MissingField {
            line: 1,
            field: if col("id").is_none() { "id" } else { "label" },
        });
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id = record.get(id_col).ok_or(Error::MissingField { line, field: "id" })?;
        let label: SentimentLabel = record
            .get(label_col)
            .ok_or(Error::MissingField { line, field: "label" })?
            .parse()?;
        let tweet = by_id
            .get(id)
            .ok_or_else(|| Error::DanglingId(id.to_string()))?;
        if !seen.insert(id.to_string()) {
            return Err(Error::DuplicateId {
                line,
                id: id.to_string(),
            });
        }
        out.push(LabeledTweet {
            tweet: (*tweet).clone(),
            label,
        });
    }
    Ok(out)
}

pub fn write_annotations(path: &Path, data: &[LabeledTweet]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "label"])?;
    for d in data {
        w.write_record([d.tweet.id.as_str(), d.label.as_str()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn indices_by_label(data: &[LabeledTweet], labels: &[SentimentLabel]) -> Vec<Vec<usize>> {
    labels
        .iter()
        .map(|&l| {
            data.iter()
                .enumerate()
                .filter(|(_, d)| d.label == l)
                .map(|(i, _)| i)
                .collect()
        })
        .collect()
}

/// Samples exactly `per_class` examples of each label without replacement.
/// Examples with labels outside `labels` are dropped. Output keeps input
/// order.
pub fn balance_classes(
    data: &[LabeledTweet],
    labels: &[SentimentLabel],
    per_class: usize,
    rng: &mut RngState,
) -> Result<Vec<LabeledTweet>> {
    let mut chosen = Vec::with_capacity(per_class * labels.len());
    for (label, mut idx) in labels.iter().zip(indices_by_label(data, labels)) {
        if idx.len() < per_class {
            return Err(Error::InsufficientClassExamples {
                label: label.to_string(),
                available: idx.len(),
                required: per_class,
            });
        }
        idx.shuffle(rng);
        chosen.extend_from_slice(&idx[..per_class]);
    }
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| data[i].clone()).collect())
}

/// Size of the smallest class among `labels`.
pub fn smallest_class(data: &[LabeledTweet], labels: &[SentimentLabel]) -> usize {
    indices_by_label(data, labels)
        .iter()
        .map(Vec::len)
        .min()
        .unwrap_or(0)
}

/// Positive and negative examples only.
pub fn binary_subset(data: &[LabeledTweet]) -> Vec<LabeledTweet> {
    data.iter()
        .filter(|d| d.label != SentimentLabel::Neutral)
        .cloned()
        .collect()
}

fn split_group(
    mut idx: Vec<usize>,
    ratio: f64,
    rng: &mut RngState,
    what: &str,
) -> Result<(Vec<usize>, Vec<usize>)> {
    idx.shuffle(rng);
    let n_train = (ratio * idx.len() as f64).floor() as usize;
    if n_train == 0 || n_train == idx.len() {
        return Err(Error::DegenerateSplit(format!(
            "{what}: {} examples at ratio {ratio} leave an empty side",
            idx.len()
        )));
    }
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

/// Shuffles and partitions. Stratified splits apply the ratio within each
/// label (`floor(ratio·n)` to train).
pub fn split(
    data: &[LabeledTweet],
    ratio: f64,
    strategy: SplitStrategy,
    rng: &mut RngState,
) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {ratio} outside (0, 1)")));
    }
    if data.len() < 2 {
        return Err(Error::DegenerateSplit(format!(
            "{} examples cannot be split",
            data.len()
        )));
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    match strategy {
        SplitStrategy::Stratified => {
            for (label, idx) in SentimentLabel::ALL
                .iter()
                .zip(indices_by_label(data, &SentimentLabel::ALL))
            {
                if idx.is_empty() {
                    continue;
                }
                let (a, b) = split_group(idx, ratio, rng, label.as_str())?;
                train.extend(a);
                test.extend(b);
            }
        }
        SplitStrategy::Global => {
            let (a, b) = split_group((0..data.len()).collect(), ratio, rng, "dataset")?;
            train = a;
            test = b;
        }
    }
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| data[i].clone()).collect();
    Ok(DatasetSplit {
        train: pick(train),
        test: pick(test),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub task: Task,
    pub clip_norm: f64,
    /// Examples kept per class when balancing; `None` uses the smallest
    /// class size.
    pub balance_per_class: Option<usize>,
    pub split_ratio: f64,
    pub split_strategy: SplitStrategy,
    /// Stop once the epoch loss improves by less than `1e-5` for five
    /// consecutive epochs.
    pub early_stop: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            learning_rate: 1.8e-3,
            epochs: 30,
            seed: 42,
            task: Task::FineGrained,
            clip_norm: 5.0,
            balance_per_class: None,
            split_ratio: 0.8,
            split_strategy: SplitStrategy::Stratified,
            early_stop: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 || self.epochs < 1 {
            return Err(Error::Config("batch_size and epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        Ok(())
    }
}

const EARLY_STOP_DELTA: f64 = 1e-5;
const EARLY_STOP_PATIENCE: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub epoch_accuracies: Vec<f64>,
    pub epochs_run: usize,
    pub test_metrics: Option<Metrics>,
    pub test_confusion: Option<ConfusionMatrix>,
    /// Training examples without any in-vocabulary token; never trained on.
    pub skipped_examples: usize,
    /// L2 distance between initial and final parameters.
    pub parameter_change: f64,
    /// Not serialized, so reports from identical runs are byte-identical.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
}

/// Binary subset when needed, balancing, then the train/test split.
pub fn prepare_dataset(data: &[LabeledTweet], config: &TrainConfig) -> Result<DatasetSplit> {
    let mut rng = RngState::new(config.seed);
    let labels = config.task.labels();
    let pool = match config.task {
        Task::Binary => binary_subset(data),
        Task::FineGrained => data.to_vec(),
    };
    let per_class = config
        .balance_per_class
        .unwrap_or_else(|| smallest_class(&pool, labels));
    let balanced = balance_classes(&pool, labels, per_class, &mut rng)?;
    split(&balanced, config.split_ratio, config.split_strategy, &mut rng)
}

struct Example<'a> {
    inputs: Vec<&'a [f64]>,
    target: usize,
}

fn embed_examples<'a>(
    data: &[LabeledTweet],
    emb: &'a EmbeddingMatrix,
    vocab: &Vocabulary,
    task: Task,
) -> Result<(Vec<Example<'a>>, usize)> {
    let mut out = Vec::with_capacity(data.len());
    let mut skipped = 0;
    for d in data {
        let target = task.class_index(d.label).ok_or_else(|| {
            Error::Config(format!("label `{}` is not part of the {task:?} task", d.label))
        })?;
        let inputs = emb.embed(vocab, &d.tweet.tokens);
        if inputs.is_empty() {
            skipped += 1;
        } else {
            out.push(Example { inputs, target });
        }
    }
    Ok((out, skipped))
}

struct StepResult {
    grads: Params,
    loss: f64,
    correct: bool,
}

fn example_step(
    params: &Params,
    config: &ModelConfig,
    ex: &Example<'_>,
    seed: u64,
) -> Result<StepResult> {
    let mut rng = RngState::new(seed);
    let trace = forward(params, config, &ex.inputs, Mode::Train(&mut rng))?;
    let grads = backward(params, config, &trace, &ex.inputs, ex.target)?;
    Ok(StepResult {
        loss: loss(&trace, ex.target)?,
        correct: argmax(&trace.probabilities) == ex.target,
        grads,
    })
}

pub fn check_compatible(
    emb: &EmbeddingMatrix,
    vocab: &Vocabulary,
    model: &ModelConfig,
    task: Task,
) -> Result<()> {
    model.validate()?;
    if model.num_classes != task.num_classes() {
        return Err(Error::Config(format!(
            "model has {} classes, {task:?} task has {}",
            model.num_classes,
            task.num_classes()
        )));
    }
    if emb.dim() != model.embedding_dim {
        return Err(Error::Config(format!(
            "embeddings have dimension {}, model expects {}",
            emb.dim(),
            model.embedding_dim
        )));
    }
    if emb.vocab_size() != vocab.len() {
        return Err(Error::Config(format!(
            "embeddings have {} rows, vocabulary has {} tokens",
            emb.vocab_size(),
            vocab.len()
        )));
    }
    Ok(())
}

/// Minibatch SGD. Each epoch shuffles the training set, averages
/// per-example gradients over each batch, clips the average to
/// `clip_norm` and takes one step. Per-example work runs in parallel; the
/// reduction follows batch order so results do not depend on thread count.
pub fn train(
    data: &DatasetSplit,
    emb: &EmbeddingMatrix,
    vocab: &Vocabulary,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<(Params, TrainReport)> {
    let started = Instant::now();
    train_cfg.validate()?;
    check_compatible(emb, vocab, model_cfg, train_cfg.task)?;
    let (examples, skipped) = embed_examples(&data.train, emb, vocab, train_cfg.task)?;
    if examples.is_empty() {
        return Err(Error::Empty("training set has no usable example".into()));
    }

    let mut rng = RngState::new(train_cfg.seed);
    let mut params = init_params(model_cfg, &mut rng)?;
    let initial = params.clone();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(train_cfg.epochs);
    let mut epoch_accuracies = Vec::with_capacity(train_cfg.epochs);
    let mut stalled = 0;

    for _ in 0..train_cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(train_cfg.batch_size) {
            let seeds: Vec<u64> = batch.iter().map(|_| rng.next_u64()).collect();
            let results: Vec<StepResult> = batch
                .par_iter()
                .zip(seeds)
                .map(|(&i, seed)| example_step(&params, model_cfg, &examples[i], seed))
                .collect::<Result<_>>()?;

            let mut grads = params.zeros_like();
            for r in &results {
                accumulate(&mut grads, &r.grads);
                loss_sum += r.loss;
                correct += usize::from(r.correct);
            }
            scale(&mut grads, 1.0 / batch.len() as f64);
            clip_gradients(&mut grads, train_cfg.clip_norm)?;
            sgd_step(&mut params, &grads, train_cfg.learning_rate)?;
        }
        let epoch_loss = loss_sum / examples.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Config(format!(
                "training diverged (epoch loss {epoch_loss})"
            )));
        }
        if let Some(&prev) = epoch_losses.last() {
            if prev - epoch_loss < EARLY_STOP_DELTA {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        epoch_losses.push(epoch_loss);
        epoch_accuracies.push(correct as f64 / examples.len() as f64);
        if train_cfg.early_stop && stalled >= EARLY_STOP_PATIENCE {
            break;
        }
    }

    let (test_confusion, test_metrics) = if data.test.is_empty() {
        (None, None)
    } else {
        let (cm, m) = evaluate(&params, model_cfg, emb, vocab, &data.test)?;
        (Some(cm), Some(m))
    };

    let parameter_change = params
        .tensors()
        .iter()
        .zip(initial.tensors())
        .flat_map(|((_, a), (_, b))| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)))
        .sum::<f64>()
        .sqrt();

    let report = TrainReport {
        epochs_run: epoch_losses.len(),
        epoch_losses,
        epoch_accuracies,
        test_metrics,
        test_confusion,
        skipped_examples: skipped,
        parameter_change,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        model_config: model_cfg.clone(),
        train_config: train_cfg.clone(),
    };
    Ok((params, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub model: String,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: Option<f64>,
    pub bptt_type: String,
    pub accuracy: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub task: Task,
    pub rows: Vec<GridRow>,
}

pub const GRID_BATCH_SIZES: [usize; 2] = [64, 128];
pub const GRID_DROPOUT: f64 = 0.5;
pub const GRID_HEADERS: [&str; 7] = [
    "Model",
    "Batch Size",
    "Learning Rate",
    "Drop Out",
    "BPTT Type",
    "ACC",
    "F1 Score",
];

/// Grid cells in table order: architecture, then dropout, then batch size.
pub fn grid_cells(base: &ModelConfig) -> Vec<(ModelConfig, usize)> {
    let mut cells = Vec::with_capacity(8);
    for (direction, bptt_mode) in [
        (Direction::Standard, BpttMode::Truncated(DEFAULT_TRUNCATION)),
        (Direction::Bidirectional, BpttMode::Full),
    ] {
        for dropout_rate in [0.0, GRID_DROPOUT] {
            for batch in GRID_BATCH_SIZES {
                let cfg = ModelConfig {
                    direction,
                    bptt_mode,
                    dropout_rate,
                    ..base.clone()
                };
                cells.push((cfg, batch));
            }
        }
    }
    cells
}

/// Trains and scores every grid cell on the same split.
pub fn run_grid(
    data: &DatasetSplit,
    emb: &EmbeddingMatrix,
    vocab: &Vocabulary,
    base_model: &ModelConfig,
    base_train: &TrainConfig,
) -> Result<GridResult> {
    let mut rows = Vec::with_capacity(8);
    for (model_cfg, batch_size) in grid_cells(base_model) {
        let train_cfg = TrainConfig {
            batch_size,
            ..base_train.clone()
        };
        let (_, report) = train(data, emb, vocab, &model_cfg, &train_cfg)?;
        let m = report
            .test_metrics
            .ok_or_else(|| Error::Empty("test set".into()))?;
        rows.push(GridRow {
            model: match model_cfg.direction {
                Direction::Standard => "Standard RNN".into(),
                Direction::Bidirectional => "Bidirectional RNN".into(),
            },
            batch_size,
            learning_rate: train_cfg.learning_rate,
            dropout: (model_cfg.dropout_rate > 0.0).then_some(model_cfg.dropout_rate),
            bptt_type: model_cfg.bptt_mode.label().into(),
            accuracy: m.accuracy,
            f1: m.f1_macro,
        });
    }
    Ok(GridResult {
        task: base_train.task,
        rows,
    })
}

impl GridResult {
    /// Aligned plain-text table, one line per row, model name shown on the
    /// first row of each architecture only.
    pub fn to_table(&self) -> String {
        let mut lines: Vec<[String; 7]> = vec![GRID_HEADERS.map(String::from)];
        let mut last_model = "";
        for r in &self.rows {
            let model = if r.model == last_model {
                String::new()
            } else {
                r.model.clone()
            };
            last_model = &r.model;
            lines.push([
                model,
                r.batch_size.to_string(),
                format!("{:.2E}", r.learning_rate).replace("E-", "E-0"),
                r.dropout.map_or("-".into(), |d| d.to_string()),
                r.bptt_type.clone(),
                format!("{:.4}", r.accuracy),
                format!("{:.4}", r.f1),
            ]);
        }
        let widths: Vec<usize> = (0..7)
            .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for l in &lines {
            let cells: Vec<String> = l
                .iter()
                .zip(&widths)
                .map(|(cell, &w)| format!("{cell:<w$}"))
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Utc;

    fn labeled(n_each: [usize; 3]) -> Vec<LabeledTweet> {
        let mut out = Vec::new();
        for (label, &n) in SentimentLabel::ALL.iter().zip(&n_each) {
            for i in 0..n {
                out.push(LabeledTweet {
                    tweet: CleanTweet {
                        id: format!("{label}-{i}"),
                        timestamp: Utc::now(),
                        tokens: vec!["word".into()],
                    },
                    label: *label,
                });
            }
        }
        out
    }

    fn count(data: &[LabeledTweet], label: SentimentLabel) -> usize {
        data.iter().filter(|d| d.label == label).count()
    }

    #[test]
    fn label_parsing() {
        assert_eq!("Positive".parse::<SentimentLabel>().unwrap(), SentimentLabel::Positive);
        assert!(matches!(
            "angry".parse::<SentimentLabel>(),
            Err(Error::UnknownLabel(_))
        ));
    }

    #[test]
    fn balancing() {
        let data = labeled([5, 5, 5]);
        let out = balance_classes(&data, &SentimentLabel::ALL, 2, &mut RngState::new(1)).unwrap();
        assert_eq!(out.len(), 6);
        for l in SentimentLabel::ALL {
            assert_eq!(count(&out, l), 2);
        }
        let big = labeled([1400, 1350, 1300]);
        let out = balance_classes(&big, &SentimentLabel::ALL, 1300, &mut RngState::new(1)).unwrap();
        assert_eq!(out.len(), 3900);

        let short = labeled([10, 4, 10]);
        match balance_classes(&short, &SentimentLabel::ALL, 10, &mut RngState::new(1)) {
            Err(Error::InsufficientClassExamples { label, available, .. }) => {
                assert_eq!((label.as_str(), available), ("negative", 4));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn binary_subset_drops_neutral() {
        let out = binary_subset(&labeled([10, 10, 10]));
        assert_eq!(out.len(), 20);
        assert_eq!(count(&out, SentimentLabel::Neutral), 0);
        assert_eq!(count(&out, SentimentLabel::Positive), 10);
        assert!(binary_subset(&labeled([0, 0, 7])).is_empty());
    }

    #[test]
    fn stratified_split_counts() {
        let data = labeled([1300, 1300, 1300]);
        let s = split(&data, 0.8, SplitStrategy::Stratified, &mut RngState::new(2)).unwrap();
        for l in SentimentLabel::ALL {
            assert_eq!(count(&s.train, l), 1040);
            assert_eq!(count(&s.test, l), 260);
        }
        let train_ids: HashSet<_> = s.train.iter().map(|d| &d.tweet.id).collect();
        assert!(s.test.iter().all(|d| !train_ids.contains(&d.tweet.id)));

        let ten = labeled([10, 0, 0]);
        let s = split(&ten, 0.8, SplitStrategy::Stratified, &mut RngState::new(3)).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (8, 2));

        let a = split(&data, 0.8, SplitStrategy::Global, &mut RngState::new(4)).unwrap();
        let b = split(&data, 0.8, SplitStrategy::Global, &mut RngState::new(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train.len(), 3120);
    }

    #[test]
    fn degenerate_splits() {
        let data = labeled([4, 1, 0]);
        assert!(matches!(
            split(&data, 0.8, SplitStrategy::Stratified, &mut RngState::new(5)),
            Err(Error::DegenerateSplit(_))
        ));
        assert!(split(&labeled([1, 0, 0]), 0.5, SplitStrategy::Global, &mut RngState::new(5)).is_err());
        assert!(split(&labeled([5, 5, 5]), 1.0, SplitStrategy::Global, &mut RngState::new(5)).is_err());
    }

    #[test]
    fn grid_layout() {
        let cells = grid_cells(&ModelConfig::default());
        let layout: Vec<_> = cells
            .iter()
            .map(|(c, b)| (c.direction, *b, c.dropout_rate, c.bptt_mode))
            .collect();
        use Direction::*;
        let t = BpttMode::Truncated(50);
        let f = BpttMode::Full;
        assert_eq!(
            layout,
            vec![
                (Standard, 64, 0.0, t),
                (Standard, 128, 0.0, t),
                (Standard, 64, 0.5, t),
                (Standard, 128, 0.5, t),
                (Bidirectional, 64, 0.0, f),
                (Bidirectional, 128, 0.0, f),
                (Bidirectional, 64, 0.5, f),
                (Bidirectional, 128, 0.5, f),
            ]
        );
    }

    #[test]
    fn table_formatting() {
        let row = |model: &str, dropout| GridRow {
            model: model.into(),
            batch_size: 64,
            learning_rate: 1.8e-3,
            dropout,
            bptt_type: "tBPTT".into(),
            accuracy: 0.81789,
            f1: 0.8176,
        };
        let g = GridResult {
            task: Task::FineGrained,
            rows: vec![row("Standard RNN", None), row("Standard RNN", Some(0.5))],
        };
        let table = g.to_table();
        let lines: Vec<&str> = table.lines().collect();
        assert!(lines[0].starts_with("Model"));
        assert!(lines[1].contains("1.80E-03") && lines[1].contains("0.8179"));
        assert!(lines[2].trim_start().starts_with("64"));
        assert!(lines[2].contains("0.5"));
    }
}
