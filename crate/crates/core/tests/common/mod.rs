#![allow(dead_code)]

use chrono::{Duration, TimeZone, Utc};
use rnn_sentiment::corpus::{CorpusStats, PreprocessConfig, RawTweet};

pub fn raw(id: &str, day: i64, text: &str) -> RawTweet {
    RawTweet {
        id: id.to_string(),
        timestamp: Utc.with_ymd_and_hms(2013, 11, 9, 8, 0, 0).unwrap() + Duration::days(day),
        text: text.to_string(),
    }
}

/// Ten tweets exercising every cleaning rule, with a frequency floor of 2.
pub fn ten_tweets() -> (Vec<RawTweet>, PreprocessConfig) {
    let tweets = vec![
        raw("a1", 0, "@juan RT Pray for Tacloban!! http://t.co/xy #YolandaPH"),
        raw("a2", 0, "@juan rt  pray for tacloban!! http://t.co/xy #yolandaph"),
        raw("a3", 1, "Relief goods arriving in Leyte 🙏 #BangonPH"),
        raw("a4", 2, "Salamat sa mga volunteers! Relief goods para sa Leyte"),
        raw("a5", 3, "Ang lakas ng hangin sa Tacloban 😭"),
        raw("a6", 4, "Go go go!!! ok"),
        raw("a7", 5, "So sad :( #YolandaPH www.example.com/x"),
        raw("a8", 6, "PRAY for TACLOBAN #YolandaPH http://t.co/zz"),
        raw("a9", 7, "Lakas ng hangin! Pray for Leyte"),
        raw("a10", 8, "RT @maria: sad news, salamat volunteers"),
    ];
    let config = PreprocessConfig {
        min_global_frequency: 2,
        ..Default::default()
    };
    (tweets, config)
}

/// Hand trace of [`ten_tweets`]:
///
/// * a2 repeats a1 after lowercasing and whitespace collapse.
/// * a6 keeps no token of length 3 or more.
/// * arriving, bangonph and news occur once and fall below the floor.
/// * a8 cleans to the same tokens as a1 and is dropped, leaving pray,
///   tacloban and yolandaph at exactly two occurrences each.
pub fn ten_tweets_expected() -> (Vec<(&'static str, Vec<&'static str>)>, Vec<&'static str>, CorpusStats) {
    let tweets = vec![
        ("a1", vec!["pray", "tacloban", "yolandaph"]),
        ("a3", vec!["relief", "goods", "leyte"]),
        ("a4", vec!["salamat", "volunteers", "relief", "goods", "leyte"]),
        ("a5", vec!["lakas", "hangin", "tacloban"]),
        ("a7", vec!["sad", "yolandaph"]),
        ("a9", vec!["lakas", "hangin", "pray", "leyte"]),
        ("a10", vec!["sad", "salamat", "volunteers"]),
    ];
    // leyte occurs three times; every other token twice, alphabetical.
    let vocab = vec![
        "leyte", "goods", "hangin", "lakas", "pray", "relief", "sad", "salamat", "tacloban",
        "volunteers", "yolandaph",
    ];
    let stats = CorpusStats {
        raw_count: 10,
        deduplicated_count: 9,
        final_count: 7,
        vocab_size: 11,
        empty_dropped: 1,
        clean_duplicates_dropped: 1,
    };
    (tweets, vocab, stats)
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Exact non-negative fraction.
#[derive(Clone, Copy, Debug)]
pub struct Frac(pub u128, pub u128);

impl Frac {
    pub fn new(num: u128, den: u128) -> Frac {
        if num == 0 {
            return Frac(0, 1);
        }
        let g = gcd(num, den);
        Frac(num / g, den / g)
    }

    pub fn add(self, o: Frac) -> Frac {
        Frac::new(self.0 * o.1 + o.0 * self.1, self.1 * o.1)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / self.1 as f64
    }
}

/// Accuracy and macro F1 of a square count matrix (rows gold, columns
/// predicted) in exact arithmetic, straight from the definitions.
pub fn exact_scores(counts: &[Vec<usize>]) -> (Frac, Frac) {
    let n = counts.len();
    let total: usize = counts.iter().flatten().sum();
    let correct: usize = (0..n).map(|i| counts[i][i]).sum();
    let mut sum = Frac(0, 1);
    for c in 0..n {
        let tp = counts[c][c] as u128;
        let predicted: usize = (0..n).map(|g| counts[g][c]).sum();
        let actual: usize = counts[c].iter().sum();
        if tp == 0 {
            continue;
        }
        // F1 = 2PR/(P+R) with P = tp/predicted, R = tp/actual.
        let (p, r) = (Frac::new(tp, predicted as u128), Frac::new(tp, actual as u128));
        let num = 2 * p.0 * r.0 * (p.1 * r.1);
        let den = p.1 * r.1 * (p.0 * r.1 + r.0 * p.1);
        sum = sum.add(Frac::new(num, den));
    }
    (
        Frac::new(correct as u128, total as u128),
        Frac::new(sum.0, sum.1 * n as u128),
    )
}

pub mod pipeline {
    use std::path::{Path, PathBuf};
    use std::process::{Command, Output};

    use rnn_sentiment::synthetic::{noisy_raw_corpus, sentiment_corpus, SentimentCorpusConfig};
    use rnn_sentiment::training::write_annotations;

    pub fn cli(args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_rnn-sentiment"))
            .args(args)
            .output()
            .expect("binary runs")
    }

    pub fn code(out: &Output) -> i32 {
        out.status.code().unwrap_or(-1)
    }

    pub fn stdout(out: &Output) -> String {
        String::from_utf8_lossy(&out.stdout).into_owned()
    }

    pub fn stderr(out: &Output) -> String {
        String::from_utf8_lossy(&out.stderr).into_owned()
    }

    pub fn s(p: &Path) -> &str {
        p.to_str().unwrap()
    }

    /// Noisy raw tweets plus their labels.
    pub fn write_inputs(dir: &Path, per_class: usize) -> (PathBuf, PathBuf) {
        let data = sentiment_corpus(&SentimentCorpusConfig {
            per_class,
            ..Default::default()
        });
        let raw = noisy_raw_corpus(&data, 11);
        let raw_path = dir.join("raw.jsonl");
        let lines: Vec<String> = raw
            .iter()
            .map(|t| {
                serde_json::json!({
                    "id": t.id,
                    "timestamp": t.timestamp.to_rfc3339(),
                    "text": t.text,
                })
                .to_string()
            })
            .collect();
        std::fs::write(&raw_path, lines.join("\n") + "\n").unwrap();
        let ann = dir.join("labels.csv");
        write_annotations(&ann, &data).unwrap();
        (raw_path, ann)
    }

    pub struct Stages {
        pub prep: PathBuf,
        pub emb: PathBuf,
        pub train: PathBuf,
        pub eval: PathBuf,
        pub analyze: PathBuf,
    }

    fn check(out: Output, what: &str) {
        assert_eq!(code(&out), 0, "{what} failed: {}", stderr(&out));
    }

    /// preprocess → embed → train → eval → analyze, small settings.
    pub fn run_all(dir: &Path, raw: &Path, ann: &Path, seed: &str) -> Stages {
        let st = Stages {
            prep: dir.join("prep"),
            emb: dir.join("emb"),
            train: dir.join("train"),
            eval: dir.join("eval"),
            analyze: dir.join("analyze"),
        };
        let corpus = st.prep.join("corpus.jsonl");
        let embeddings = st.emb.join("embeddings.txt");
        let model = st.train.join("model.txt");
        check(
            cli(&["preprocess", "--input", s(raw), "--output", s(&st.prep), "--keywords", "#YolandaPH,#BangonPH"]),
            "preprocess",
        );
        check(
            cli(&[
                "embed", "--corpus", s(&corpus), "--vocab", s(&st.prep.join("vocab.tsv")),
                "--dim", "16", "--epochs", "3", "--seed", seed, "--output", s(&st.emb),
            ]),
            "embed",
        );
        check(
            cli(&[
                "train", "--corpus", s(&corpus), "--annotations", s(ann), "--embeddings",
                s(&embeddings), "--hidden", "8", "--epochs", "3", "--seed", seed, "--output",
                s(&st.train),
            ]),
            "train",
        );
        check(
            cli(&[
                "eval", "--model", s(&model), "--corpus", s(&corpus), "--annotations",
                s(&st.train.join("test_annotations.csv")), "--embeddings", s(&embeddings),
                "--output", s(&st.eval),
            ]),
            "eval",
        );
        check(
            cli(&[
                "analyze", "--model", s(&model), "--corpus", s(&corpus), "--embeddings",
                s(&embeddings), "--output", s(&st.analyze),
            ]),
            "analyze",
        );
        st
    }
}
