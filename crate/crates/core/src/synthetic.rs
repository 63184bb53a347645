//! Seeded generators for test corpora: a planted two-cluster corpus for
//! embedding checks, and a keyword-driven sentiment corpus with optional
//! tweet-style noise.

use std::collections::HashMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{CleanTweet, RawTweet, Vocabulary};
use crate::numeric::RngState;
use crate::training::{LabeledTweet, SentimentLabel};

pub const POSITIVE_KEYWORDS: [&str; 8] = [
    "salamat", "blessed", "hopeful", "survived", "grateful", "thankful", "strong", "rebuild",
];
pub const NEGATIVE_KEYWORDS: [&str; 8] = [
    "devastated", "tragic", "hungry", "looting", "dead", "destroyed", "missing", "suffering",
];
pub const NEUTRAL_KEYWORDS: [&str; 8] = [
    "pagasa", "bulletin", "advisory", "signal", "forecast", "landfall", "track", "update",
];
pub const FILLER_WORDS: [&str; 30] = [
    "tacloban", "leyte", "samar", "typhoon", "haiyan", "storm", "city", "people", "family",
    "water", "food", "relief", "government", "volunteers", "victims", "airport", "coast",
    "houses", "roads", "power", "church", "school", "island", "province", "news", "photo",
    "video", "morning", "night", "winds",
];

pub fn keywords(label: SentimentLabel) -> &'static [&'static str; 8] {
    match label {
        SentimentLabel::Positive => &POSITIVE_KEYWORDS,
        SentimentLabel::Negative => &NEGATIVE_KEYWORDS,
        SentimentLabel::Neutral => &NEUTRAL_KEYWORDS,
    }
}

fn vocab_of<'a>(tweets: impl Iterator<Item = &'a CleanTweet>) -> Vocabulary {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for t in tweets {
        for tok in &t.tokens {
            *counts.entry(tok.clone()).or_default() += 1;
        }
    }
    Vocabulary::from_counts(counts)
}

fn base_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2013, 11, 8, 0, 0, 0).unwrap()
}

/// Two disjoint word clusters (`alpha000…`, `omega000…`); each tweet draws
/// 3 to 6 distinct words from a single cluster.
pub fn two_cluster_corpus(
    words_per_cluster: usize,
    n_tweets: usize,
    seed: u64,
) -> (Vec<CleanTweet>, Vocabulary) {
    let mut rng = RngState::new(seed);
    let clusters: Vec<Vec<String>> = ["alpha", "omega"]
        .iter()
        .map(|p| (0..words_per_cluster).map(|i| format!("{p}{i:03}")).collect())
        .collect();
    let max_len = words_per_cluster.clamp(1, 6);
    let min_len = max_len.min(3);
    let tweets: Vec<CleanTweet> = (0..n_tweets)
        .map(|i| {
            let words = &clusters[i % 2];
            let len = rng.gen_range(min_len..=max_len);
            let tokens = words.choose_multiple(&mut rng, len).cloned().collect();
            CleanTweet {
                id: format!("c{i:05}"),
                timestamp: base_time() + Duration::minutes(i as i64),
                tokens,
            }
        })
        .collect();
    let vocab = vocab_of(tweets.iter());
    (tweets, vocab)
}

/// Cluster (0 or 1) of a word produced by [`two_cluster_corpus`].
pub fn cluster_of(word: &str) -> usize {
    usize::from(word.starts_with("omega"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentimentCorpusConfig {
    pub per_class: usize,
    pub keywords_per_class: usize,
    /// Number of filler words in play; 0 builds tweets from keywords only.
    pub filler_words: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Timestamps are spread uniformly over this many days from 2013-11-08.
    pub days: i64,
    pub seed: u64,
}

impl Default for SentimentCorpusConfig {
    fn default() -> Self {
        SentimentCorpusConfig {
            per_class: 1300,
            keywords_per_class: 8,
            filler_words: 30,
            min_tokens: 4,
            max_tokens: 10,
            days: 84,
            seed: 7,
        }
    }
}

/// Labeled tweets whose label is signalled by one or two class keywords
/// mixed among filler words. Classes are interleaved; token lists are
/// unique, so the keyword and length ranges must leave room for
/// `3 * per_class` distinct tweets.
pub fn sentiment_corpus(config: &SentimentCorpusConfig) -> Vec<LabeledTweet> {
    let mut rng = RngState::new(config.seed);
    let fillers = &FILLER_WORDS[..config.filler_words.min(FILLER_WORDS.len())];
    let n_kw = config.keywords_per_class.clamp(1, 8);
    let span_minutes = config.days.max(1) * 24 * 60;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(config.per_class * 3);
    for i in 0..config.per_class * 3 {
        let label = SentimentLabel::ALL[i % 3];
        let kws = &keywords(label)[..n_kw];
        let tokens = loop {
            let len = rng.gen_range(config.min_tokens.max(2)..=config.max_tokens.max(2));
            let n_class = if fillers.is_empty() {
                len
            } else {
                rng.gen_range(1..=2).min(len)
            };
            let mut tokens: Vec<String> = (0..len - n_class)
                .map(|_| fillers.choose(&mut rng).unwrap().to_string())
                .collect();
            for _ in 0..n_class {
                let at = rng.gen_range(0..=tokens.len());
                tokens.insert(at, kws.choose(&mut rng).unwrap().to_string());
            }
            if seen.insert(tokens.clone()) {
                break tokens;
            }
        };
        out.push(LabeledTweet {
            tweet: CleanTweet {
                id: format!("t{i:06}"),
                timestamp: base_time() + Duration::minutes(rng.gen_range(0..span_minutes)),
                tokens,
            },
            label,
        });
    }
    out
}

/// Vocabulary over the labeled tweets.
pub fn labeled_vocab(data: &[LabeledTweet]) -> Vocabulary {
    vocab_of(data.iter().map(|d| &d.tweet))
}

const EMOJI: [&str; 4] = ["😢", "🙏", "❤", "😭"];

/// Dresses a token list up as a raw tweet: mixed case, retweet markers,
/// mentions, links, hashtags, punctuation and emoji. Preprocessing with
/// default rules maps it back to the tokens (plus `yolandaph`).
pub fn noisy_text(tokens: &[String], rng: &mut RngState) -> String {
    let mut parts: Vec<String> = Vec::new();
    if rng.gen_bool(0.3) {
        parts.push(format!("RT @user_{}:", rng.gen_range(0..500)));
    }
    for tok in tokens {
        let mut w = if rng.gen_bool(0.2) {
            let mut c = tok.chars();
            c.next()
                .map(|f| f.to_uppercase().collect::<String>() + c.as_str())
                .unwrap_or_default()
        } else {
            tok.clone()
        };
        if rng.gen_bool(0.1) {
            w.push_str(["!", "!!", ",", "..."][rng.gen_range(0..4)]);
        }
        parts.push(w);
    }
    if rng.gen_bool(0.3) {
        parts.push(EMOJI[rng.gen_range(0..EMOJI.len())].to_string());
    }
    parts.push("#YolandaPH".into());
    if rng.gen_bool(0.3) {
        parts.push(format!("http://t.co/{:08x}", rng.gen::<u32>()));
    }
    parts.join(" ")
}

/// Raw tweets for the labeled corpus with [`noisy_text`] applied.
pub fn noisy_raw_corpus(data: &[LabeledTweet], seed: u64) -> Vec<RawTweet> {
    let mut rng = RngState::new(seed);
    data.iter()
        .map(|d| RawTweet {
            id: d.tweet.id.clone(),
            timestamp: d.tweet.timestamp,
            text: noisy_text(&d.tweet.tokens, &mut rng),
        })
        .collect()
}
