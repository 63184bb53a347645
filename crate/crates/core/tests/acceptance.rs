mod common;

use std::collections::HashMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use rand::Rng;
use rnn_sentiment::analysis::{
    read_report, sentiment_distribution, temporal_buckets, ClassifiedTweet, Granularity,
};
use rnn_sentiment::corpus::{preprocess_corpus, to_raw, CleanTweet, PreprocessConfig, RawTweet, Vocabulary};
use rnn_sentiment::embedding::{
    cosine_similarity, nearest_neighbors, train_embeddings, EmbeddingMatrix, EmbeddingParams,
};
use rnn_sentiment::eval::{accuracy, f1_scores, metrics, ConfusionMatrix};
use rnn_sentiment::model::{
    backward_full, backward_truncated, forward, init_params, BpttMode, Direction, Mode,
    ModelConfig,
};
use rnn_sentiment::numeric::{Matrix, ParamSet, RngState, Vector};
use rnn_sentiment::synthetic::{
    cluster_of, labeled_vocab, sentiment_corpus, two_cluster_corpus, SentimentCorpusConfig,
};
use rnn_sentiment::training::{
    prepare_dataset, train, DatasetSplit, GridResult, LabeledTweet, Task, TrainConfig,
    GRID_HEADERS,
};
use rnn_sentiment::SentimentLabel;

use common::pipeline::{cli, code, run_all, s, stderr, stdout, write_inputs};
use common::{exact_scores, raw, ten_tweets, ten_tweets_expected};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Embeddings for the synthetic sentiment corpus, trained long enough for
/// the keyword classes to separate.
fn sentiment_embeddings(data: &[LabeledTweet]) -> (EmbeddingMatrix, Vocabulary) {
    let vocab = labeled_vocab(data);
    let tweets: Vec<CleanTweet> = data.iter().map(|d| d.tweet.clone()).collect();
    let params = EmbeddingParams {
        dim: 50,
        epochs: 100,
        ..Default::default()
    };
    let emb = train_embeddings(&tweets, &vocab, &params, &mut RngState::new(1)).unwrap();
    (emb, vocab)
}

fn gradient_fidelity() -> Outcome {
    let out = cli(&["gradcheck", "--trials", "25", "--hidden", "8", "--seq-len", "12"]);
    ensure!(code(&out) == 0, "gradcheck exited {}: {}{}", code(&out), stdout(&out), stderr(&out));
    let text = stdout(&out);
    let max_line = text
        .lines()
        .find(|l| l.starts_with("max relative error"))
        .ok_or("no summary line")?;
    let value: f64 = max_line
        .split_whitespace()
        .nth(3)
        .and_then(|v| v.parse().ok())
        .ok_or("unparseable summary")?;
    ensure!(value < 1e-4, "max relative error {value:e}");
    Ok(format!("max relative error {value:.2e}"))
}

fn truncation_equivalence() -> Outcome {
    let mut rng = RngState::new(77);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let config = ModelConfig {
            hidden_size: rng.gen_range(1..=8),
            num_classes: rng.gen_range(2..=3),
            dropout_rate: 0.0,
            direction: if i % 2 == 0 { Direction::Standard } else { Direction::Bidirectional },
            bptt_mode: BpttMode::Full,
            embedding_dim: rng.gen_range(1..=6),
        };
        let len = rng.gen_range(1..=12);
        let k = len + rng.gen_range(0..4);
        let seq: Vec<Vector> = (0..len)
            .map(|_| (0..config.embedding_dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let target = rng.gen_range(0..config.num_classes);
        let params = init_params(&config, &mut rng).unwrap();
        let trace = forward(&params, &config, &seq, Mode::Infer).unwrap();
        let full = backward_full(&params, &config, &trace, &seq, target).unwrap();
        let trunc = backward_truncated(&params, &config, &trace, &seq, target, k).unwrap();
        for ((_, a), (_, b)) in full.tensors().iter().zip(trunc.tensors()) {
            for (x, y) in a.iter().zip(b.iter()) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    ensure!(worst <= 1e-12, "max elementwise difference {worst:e}");
    Ok(format!("max elementwise difference {worst:.1e}"))
}

fn overfit_oracle() -> Outcome {
    let big = sentiment_corpus(&SentimentCorpusConfig::default());
    let (emb, vocab) = sentiment_embeddings(&big);
    let data = sentiment_corpus(&SentimentCorpusConfig {
        per_class: 10,
        filler_words: 0,
        ..Default::default()
    });
    ensure!(data.len() == 30, "corpus has {} examples", data.len());
    let split = DatasetSplit {
        train: data.clone(),
        test: data,
    };
    let model = ModelConfig {
        hidden_size: 16,
        embedding_dim: emb.dim(),
        ..Default::default()
    };
    let cfg = TrainConfig {
        epochs: 500,
        ..Default::default()
    };
    let (_, report) = train(&split, &emb, &vocab, &model, &cfg).map_err(|e| e.to_string())?;
    let reached = report.epoch_accuracies.iter().position(|&a| a >= 0.99);
    let (first, last) = (report.epoch_losses[0], report.epoch_losses[499]);
    ensure!(reached.is_some(), "best training accuracy {:?}", report.epoch_accuracies.iter().cloned().fold(0.0, f64::max));
    ensure!(last < first, "loss {first} -> {last}");
    Ok(format!(
        "accuracy >= 0.99 at epoch {}, loss {first:.4} -> {last:.4}",
        reached.unwrap() + 1
    ))
}

fn separable_generalization() -> Outcome {
    let data = sentiment_corpus(&SentimentCorpusConfig::default());
    ensure!(data.len() == 3900, "corpus has {} tweets", data.len());
    let (emb, vocab) = sentiment_embeddings(&data);
    let mut notes = Vec::new();
    for (task, direction, bptt_mode) in [
        (Task::FineGrained, Direction::Standard, BpttMode::Truncated(50)),
        (Task::Binary, Direction::Bidirectional, BpttMode::Full),
    ] {
        let cfg = TrainConfig {
            task,
            batch_size: 64,
            learning_rate: 1.8e-3,
            ..Default::default()
        };
        let model = ModelConfig {
            hidden_size: 64,
            num_classes: task.num_classes(),
            dropout_rate: 0.5,
            direction,
            bptt_mode,
            embedding_dim: emb.dim(),
        };
        let split = prepare_dataset(&data, &cfg).map_err(|e| e.to_string())?;
        let (_, report) = train(&split, &emb, &vocab, &model, &cfg).map_err(|e| e.to_string())?;
        let acc = report.test_metrics.ok_or("no test metrics")?.accuracy;
        ensure!(acc >= 0.95, "{task:?} test accuracy {acc:.4}");
        notes.push(format!("{task:?} {acc:.4}"));
    }
    Ok(notes.join(", "))
}

fn grid_reproduction() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (raw_path, ann) = write_inputs(dir.path(), 1300);
    let prep = dir.path().join("prep");
    let emb_dir = dir.path().join("emb");
    let out = cli(&["preprocess", "--input", s(&raw_path), "--output", s(&prep), "--keywords", "#YolandaPH"]);
    ensure!(code(&out) == 0, "preprocess: {}", stderr(&out));
    let out = cli(&[
        "embed", "--corpus", s(&prep.join("corpus.jsonl")), "--vocab", s(&prep.join("vocab.tsv")),
        "--dim", "50", "--epochs", "100", "--seed", "1", "--output", s(&emb_dir),
    ]);
    ensure!(code(&out) == 0, "embed: {}", stderr(&out));

    let expected_order: Vec<(&str, usize, Option<f64>, &str)> = [
        ("Standard RNN", "tBPTT"),
        ("Bidirectional RNN", "Full"),
    ]
    .iter()
    .flat_map(|&(m, b)| {
        [None, Some(0.5)]
            .into_iter()
            .flat_map(move |d| [64, 128].map(|bs| (m, bs, d, b)))
    })
    .collect();

    let mut notes = Vec::new();
    for task in ["fine", "binary"] {
        let out_dir = dir.path().join(format!("grid-{task}"));
        let out = cli(&[
            "grid", "--corpus", s(&prep.join("corpus.jsonl")), "--annotations", s(&ann),
            "--embeddings", s(&emb_dir.join("embeddings.txt")), "--task", task,
            "--output", s(&out_dir),
        ]);
        ensure!(code(&out) == 0, "grid {task}: {}", stderr(&out));
        let result: GridResult =
            serde_json::from_str(&fs::read_to_string(out_dir.join("grid.json")).unwrap())
                .map_err(|e| e.to_string())?;
        let table = fs::read_to_string(out_dir.join("grid.txt")).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        ensure!(result.rows.len() == 8 && lines.len() == 9, "{task}: {} rows", result.rows.len());
        for h in GRID_HEADERS {
            ensure!(lines[0].contains(h), "{task}: header lacks {h}");
        }
        for (row, want) in result.rows.iter().zip(&expected_order) {
            let got = (row.model.as_str(), row.batch_size, row.dropout, row.bptt_type.as_str());
            ensure!(got == *want, "{task}: row {got:?}, expected {want:?}");
            ensure!(row.accuracy >= 0.80, "{task}: {got:?} accuracy {:.4}", row.accuracy);
        }
        let min = result.rows.iter().map(|r| r.accuracy).fold(1.0, f64::min);
        notes.push(format!("{task} min accuracy {min:.4}"));
    }
    Ok(notes.join(", "))
}

fn metric_oracles() -> Outcome {
    let mut rng = RngState::new(4242);
    for i in 0..100 {
        let n = 2 + i % 2;
        let mut counts: Vec<Vec<usize>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(0..80)).collect())
            .collect();
        counts[0][0] += 1;
        let (acc, f1) = exact_scores(&counts);
        let cm = ConfusionMatrix {
            classes: SentimentLabel::ALL[..n].to_vec(),
            unpredicted: vec![0; n],
            counts: counts.clone(),
        };
        let got_acc = accuracy(&cm).map_err(|e| e.to_string())?;
        let (_, got_f1) = f1_scores(&cm).map_err(|e| e.to_string())?;
        ensure!(got_acc == acc.to_f64(), "matrix {i}: accuracy {got_acc} vs {acc:?}");
        ensure!(
            (got_f1 - f1.to_f64()).abs() <= 4.0 * f64::EPSILON,
            "matrix {i}: macro F1 {got_f1} vs {f1:?}"
        );
    }
    let cm = ConfusionMatrix {
        classes: SentimentLabel::ALL[..2].to_vec(),
        unpredicted: vec![0; 2],
        counts: vec![vec![40, 10], vec![5, 45]],
    };
    let m = metrics(&cm).map_err(|e| e.to_string())?;
    ensure!(m.accuracy == 0.85, "fixture accuracy {}", m.accuracy);
    Ok("100 matrices, fixture accuracy 0.85".into())
}

fn preprocessing_correctness() -> Outcome {
    let (tweets, config) = ten_tweets();
    let (clean, vocab, stats) = preprocess_corpus(&tweets, &config).map_err(|e| e.to_string())?;
    let (want, want_vocab, want_stats) = ten_tweets_expected();
    let got: Vec<(&str, Vec<&str>)> = clean
        .iter()
        .map(|t| (t.id.as_str(), t.tokens.iter().map(String::as_str).collect()))
        .collect();
    ensure!(got == want, "fixture output {got:?}");
    ensure!(vocab.tokens() == want_vocab.as_slice(), "vocabulary {:?}", vocab.tokens());
    ensure!(stats == want_stats, "stats {stats:?}");

    let again: Vec<RawTweet> = clean.iter().map(to_raw).collect();
    let (second, _, _) = preprocess_corpus(&again, &config).map_err(|e| e.to_string())?;
    ensure!(second == clean, "not idempotent");

    // Power-set corpus: filler words appear 8 times; "rarely" appears 4 or 5 times.
    let planted = |n: usize, extra: &str| -> Vec<RawTweet> {
        let words = ["alpha", "bravo", "charlie", "delta"];
        (1u32..16)
            .map(|mask| {
                let mut text: Vec<String> = (0..4)
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| words[b].to_string())
                    .collect();
                if (mask as usize) <= n {
                    text.push(format!("rarely{}", "!".repeat(mask as usize)));
                }
                text.push(extra.to_string());
                raw(&format!("p{mask}"), 0, &text.join(" "))
            })
            .collect()
    };
    let defaults = PreprocessConfig::default();
    let (_, v4, _) = preprocess_corpus(&planted(4, "xy"), &defaults).map_err(|e| e.to_string())?;
    let (_, v5, _) = preprocess_corpus(&planted(5, "abc"), &defaults).map_err(|e| e.to_string())?;
    ensure!(!v4.contains("rarely") && v5.contains("rarely"), "frequency floor");
    ensure!(!v4.contains("xy") && v5.contains("abc"), "length floor");
    Ok(format!("{} tweets traced, counterexamples hold", clean.len()))
}

fn embedding_sanity() -> Outcome {
    let (tweets, vocab) = two_cluster_corpus(10, 600, 3);
    let params = EmbeddingParams {
        dim: 16,
        window: 3,
        epochs: 20,
        subsample_threshold: 0.0,
        ..Default::default()
    };
    let emb = train_embeddings(&tweets, &vocab, &params, &mut RngState::new(5)).unwrap();
    for word in vocab.tokens() {
        let top = nearest_neighbors(&emb, &vocab, word, 1).map_err(|e| e.to_string())?;
        ensure!(
            cluster_of(&top[0].0) == cluster_of(word),
            "{word} -> {} crosses clusters",
            top[0].0
        );
    }

    let mut rng = RngState::new(9);
    for v in [2usize, 17, 300, 1000] {
        let tokens: Vec<String> = (0..v).map(|i| format!("w{i:04}")).collect();
        let rows: Vec<Vec<f64>> = (0..v)
            .map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let vocab = Vocabulary::from_tokens(tokens.clone()).unwrap();
        let emb = EmbeddingMatrix {
            input_vectors: Matrix::from_rows(&rows).unwrap(),
            output_vectors: Matrix::zeros(v, 8),
        };
        for _ in 0..5 {
            let q = rng.gen_range(0..v);
            let k = rng.gen_range(1..v);
            let got = nearest_neighbors(&emb, &vocab, &tokens[q], k).map_err(|e| e.to_string())?;
            let mut brute: Vec<(usize, f64)> = (0..v)
                .filter(|&i| i != q)
                .map(|i| (i, cosine_similarity(&rows[q], &rows[i]).unwrap()))
                .collect();
            brute.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            let want: Vec<(String, f64)> =
                brute.into_iter().take(k).map(|(i, c)| (tokens[i].clone(), c)).collect();
            ensure!(got == want, "V={v} query {q} k={k} differs from brute force");
        }
    }
    Ok(format!("{} words intra-cluster; brute force agrees up to V=1000", vocab.len()))
}

fn end_to_end_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (raw_path, ann) = write_inputs(dir.path(), 60);
    let a = run_all(&dir.path().join("a"), &raw_path, &ann, "13");
    let b = run_all(&dir.path().join("b"), &raw_path, &ann, "13");
    let files = [
        (&a.prep, &b.prep, "corpus.jsonl"),
        (&a.emb, &b.emb, "embeddings.txt"),
        (&a.train, &b.train, "model.txt"),
        (&a.train, &b.train, "report.json"),
        (&a.eval, &b.eval, "metrics.json"),
        (&a.eval, &b.eval, "confusion.csv"),
        (&a.analyze, &b.analyze, "classified.jsonl"),
        (&a.analyze, &b.analyze, "distribution.json"),
        (&a.analyze, &b.analyze, "temporal.csv"),
    ];
    for (da, db, name) in files {
        let x = fs::read(da.join(name)).map_err(|e| format!("{name}: {e}"))?;
        let y = fs::read(db.join(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure!(x == y, "{name} differs between runs");
    }
    Ok(format!("{} artifacts byte-identical", files.len()))
}

fn analysis_consistency() -> Outcome {
    use SentimentLabel::*;
    let fixture = [
        (2013, 11, 9, Negative),
        (2013, 11, 10, Negative),
        (2013, 11, 20, Positive),
        (2013, 11, 30, Neutral),
        (2013, 12, 1, Positive),
        (2013, 12, 24, Negative),
        (2014, 1, 2, Positive),
        (2014, 1, 15, Positive),
        (2014, 1, 31, Neutral),
    ];
    let classified: Vec<ClassifiedTweet> = fixture
        .iter()
        .enumerate()
        .map(|(i, &(y, m, d, label))| ClassifiedTweet {
            tweet: CleanTweet {
                id: format!("f{i}"),
                timestamp: Utc.with_ymd_and_hms(y, m, d, 12, 0, 0).unwrap(),
                tokens: vec!["word".into()],
            },
            label,
            confidence: 0.9,
            oov: false,
        })
        .collect();
    let dist = sentiment_distribution(&classified).map_err(|e| e.to_string())?;
    let buckets = temporal_buckets(&classified, Granularity::Month);
    let periods: Vec<&str> = buckets.buckets.iter().map(|b| b.period.as_str()).collect();
    ensure!(periods == ["2013-11", "2013-12", "2014-01"], "periods {periods:?}");
    let per_month: Vec<[usize; 3]> = buckets
        .buckets
        .iter()
        .map(|b| [b.counts.positive, b.counts.negative, b.counts.neutral])
        .collect();
    ensure!(per_month == [[1, 2, 1], [1, 1, 0], [2, 0, 1]], "buckets {per_month:?}");
    let sums = buckets.column_sums();
    for label in SentimentLabel::ALL {
        ensure!(sums.get(label) == dist.count(label), "{label}: {} vs {}", sums.get(label), dist.count(label));
    }
    ensure!(
        (dist.count(Positive), dist.count(Negative), dist.count(Neutral)) == (4, 3, 2),
        "distribution {dist:?}"
    );
    let pct: f64 = SentimentLabel::ALL.iter().map(|&l| dist.percentage(l)).sum();
    ensure!((pct - 100.0).abs() <= 0.1 + 1e-9, "percentages sum to {pct}");

    // The same identity on a report written by the CLI.
    let dir = tempfile::tempdir().unwrap();
    let (raw_path, ann) = write_inputs(dir.path(), 30);
    let st = run_all(dir.path(), &raw_path, &ann, "1");
    let report = read_report(&st.analyze.join("distribution.json")).map_err(|e| e.to_string())?;
    let sums = report.temporal.column_sums();
    for label in SentimentLabel::ALL {
        ensure!(sums.get(label) == report.distribution.count(label), "CLI report {label} mismatch");
    }
    let pct_cli: f64 = report.distribution.classes.iter().map(|c| c.percentage).sum();
    ensure!((pct_cli - 100.0).abs() <= 0.1 + 1e-9, "CLI percentages sum to {pct_cli}");
    Ok(format!("percentages sum to {pct:.1} and {pct_cli:.1}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 10] = [
        ("gradient fidelity", gradient_fidelity, Some(Duration::from_secs(30))),
        ("truncation equivalence", truncation_equivalence, Some(Duration::from_secs(10))),
        ("overfit oracle", overfit_oracle, Some(Duration::from_secs(60))),
        ("separable-corpus generalization", separable_generalization, Some(Duration::from_secs(600))),
        ("grid structural reproduction", grid_reproduction, None),
        ("metric oracles", metric_oracles, None),
        ("preprocessing correctness", preprocessing_correctness, None),
        ("embedding sanity", embedding_sanity, None),
        ("end-to-end determinism", end_to_end_determinism, None),
        ("analysis consistency", analysis_consistency, None),
    ];
    let mut failures = 0;
    let mut summary: HashMap<bool, usize> = HashMap::new();
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        let elapsed = started.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(l)) if elapsed > *l => Err(format!("took {elapsed:.1?}, limit {l:?}")),
            (o, _) => o,
        };
        let pass = outcome.is_ok();
        *summary.entry(pass).or_default() += 1;
        if !pass {
            failures += 1;
        }
        let detail = outcome.unwrap_or_else(|e| e);
        println!(
            "[{}] {:>2}. {name} ({:.1}s): {detail}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!(
        "{} passed, {} failed",
        summary.get(&true).copied().unwrap_or(0),
        failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
