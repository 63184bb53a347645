//! Tweet ingestion, cleaning and vocabulary construction.
//!
//! Cleaning runs in a fixed order so that output is reproducible:
//!
//! 1. drop later duplicates of a tweet (whitespace-collapsed, lowercased text)
//! 2. lowercase
//! 3. strip patterns in [`StripRule::ORDER`]
//! 4. split on whitespace
//! 5. drop stopwords
//! 6. drop tokens shorter than `min_token_length` characters
//! 7. count tokens over the whole corpus and drop those seen fewer than
//!    `min_global_frequency` times
//! 8. drop tweets left without tokens
//!
//! Steps 7 and 8 are repeated together with a removal of tweets whose final
//! token list repeats an earlier one, until nothing changes. This keeps the
//! pipeline idempotent on its own output.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::LazyLock;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTweet {
    pub id: String,
    pub timestamp: DateTime<Utc>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanTweet {
    pub id: String,
    #[serde(with = "timestamp_format")]
    pub timestamp: DateTime<Utc>,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StripRule {
    Username,
    Url,
    RetweetMarker,
    HashtagSymbolOnly,
    Emoji,
    SpecialChars,
}

impl StripRule {
    /// Application order, independent of how a config lists the rules.
    pub const ORDER: [StripRule; 6] = [
        StripRule::Username,
        StripRule::Url,
        StripRule::RetweetMarker,
        StripRule::HashtagSymbolOnly,
        StripRule::Emoji,
        StripRule::SpecialChars,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub stopwords: BTreeSet<String>,
    pub min_token_length: usize,
    pub min_global_frequency: usize,
    pub strip_patterns: Vec<StripRule>,
    /// Extra characters that survive the emoji and special-character rules.
    #[serde(default)]
    pub keep_chars: BTreeSet<char>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            stopwords: parse_stopwords(DEFAULT_STOPWORDS),
            min_token_length: 3,
            min_global_frequency: 5,
            strip_patterns: StripRule::ORDER.to_vec(),
            keep_chars: BTreeSet::new(),
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_token_length < 1 {
            return Err(Error::Config("min_token_length must be at least 1".into()));
        }
        if self.min_global_frequency < 1 {
            return Err(Error::Config(
                "min_global_frequency must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn enabled(&self, rule: StripRule) -> bool {
        self.strip_patterns.contains(&rule)
    }
}

/// Token index with corpus counts. Indices are dense, ordered by descending
/// count and then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<usize>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_counts(counts: HashMap<String, usize>) -> Self {
        let mut entries: Vec<(String, usize)> = counts.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let (tokens, counts): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        Self::from_parts(tokens, counts)
    }

    /// Index built from an ordered token list whose counts are unknown
    /// (recorded as 0), e.g. the token column of an embedding file.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let counts = vec![0; tokens.len()];
        let vocab = Self::from_parts(tokens, counts);
        if vocab.index.len() != vocab.tokens.len() {
            return Err(Error::Corrupt("duplicate token in vocabulary".into()));
        }
        Ok(vocab)
    }

    fn from_parts(tokens: Vec<String>, counts: Vec<usize>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            tokens,
            counts,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn count(&self, index: usize) -> Option<usize> {
        self.counts.get(index).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = create(path)?;
        for (i, (t, c)) in self.tokens.iter().zip(&self.counts).enumerate() {
            writeln!(out, "{t}\t{i}\t{c}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let reader = open(path)?;
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let lineno = n + 1;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(tok), Some(idx), Some(cnt), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(Error::Parse {
                    line: lineno,
                    message: "expected token<TAB>index<TAB>count".into(),
                });
            };
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|e| Error::Parse {
                    line: lineno,
                    message: e.to_string(),
                })
            };
            if parse(idx)? != tokens.len() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("index {idx} out of sequence"),
                });
            }
            counts.push(parse(cnt)?);
            tokens.push(tok.to_string());
        }
        let vocab = Self::from_parts(tokens, counts);
        if vocab.index.len() != vocab.tokens.len() {
            return Err(Error::Corrupt(format!("{}: duplicate token", path.display())));
        }
        Ok(vocab)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    pub raw_count: usize,
    pub deduplicated_count: usize,
    pub final_count: usize,
    pub vocab_size: usize,
    /// Tweets dropped because no token survived filtering.
    pub empty_dropped: usize,
    /// Tweets dropped because their cleaned tokens repeat an earlier tweet.
    pub clean_duplicates_dropped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TweetFormat {
    Jsonl,
    Csv,
}

impl TweetFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => TweetFormat::Csv,
            _ => TweetFormat::Jsonl,
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    // Offset-less timestamps are taken as UTC.
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|n| n.and_utc())
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

mod timestamp_format {
    use chrono::{DateTime, Utc};
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_timestamp(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_timestamp(&s)
            .ok_or_else(|| de::Error::custom(format!("invalid timestamp `{s}`")))
    }
}

/// Reads tweets in file order. Ids must be unique.
pub fn load_tweets(path: &Path, format: TweetFormat) -> Result<Vec<RawTweet>> {
    let tweets = match format {
        TweetFormat::Jsonl => read_jsonl_tweets(path)?,
        TweetFormat::Csv => read_csv_tweets(path)?,
    };
    let mut seen = HashSet::new();
    for (line, t) in &tweets {
        if !seen.insert(t.id.as_str()) {
            return Err(Error::DuplicateId {
                line: *line,
                id: t.id.clone(),
            });
        }
    }
    Ok(tweets.into_iter().map(|(_, t)| t).collect())
}

fn make_tweet(
    line: usize,
    id: Option<&str>,
    timestamp: Option<&str>,
    text: Option<&str>,
) -> Result<RawTweet> {
    let id = id.ok_or(Error::MissingField { line, field: "id" })?;
    let timestamp = timestamp.ok_or(Error::MissingField {
        line,
        field: "timestamp",
    })?;
    let text = text.ok_or(Error::MissingField { line, field: "text" })?;
    if id.is_empty() {
        return Err(Error::Parse {
            line,
            message: "empty id".into(),
        });
    }
    let timestamp = parse_timestamp(timestamp).ok_or_else(|| Error::Parse {
        line,
        message: format!("invalid timestamp `{timestamp}`"),
    })?;
    Ok(RawTweet {
        id: id.to_string(),
        timestamp,
        text: text.to_string(),
    })
}

fn read_jsonl_tweets(path: &Path) -> Result<Vec<(usize, RawTweet)>> {
    let mut out = Vec::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let field = |name: &str| value.get(name).and_then(|v| v.as_str());
        out.push((
            lineno,
            make_tweet(lineno, field("id"), field("timestamp"), field("text"))?,
        ));
    }
    Ok(out)
}

fn read_csv_tweets(path: &Path) -> Result<Vec<(usize, RawTweet)>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(open(path)?);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (id_col, ts_col, text_col) = (col("id"), col("timestamp"), col("text"));
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let lineno = record.position().map_or(0, |p| p.line() as usize);
        let get = |c: Option<usize>| c.and_then(|c| record.get(c));
        out.push((
            lineno,
            make_tweet(lineno, get(id_col), get(ts_col), get(text_col))?,
        ));
    }
    Ok(out)
}

/// Keeps tweets mentioning any keyword (case-insensitive substring) whose
/// timestamp lies in `[start, end]`. An empty keyword set keeps every tweet
/// in the window.
pub fn filter_by_collection_window(
    tweets: &[RawTweet],
    keywords: &BTreeSet<String>,
    start: DateTime<Utc>,
    end: DateTime<Utc>,
) -> Result<Vec<RawTweet>> {
    if start > end {
        return Err(Error::Config(format!(
            "collection window starts after it ends ({start} > {end})"
        )));
    }
    let keywords: Vec<String> = keywords.iter().map(|k| k.to_lowercase()).collect();
    Ok(tweets
        .iter()
        .filter(|t| t.timestamp >= start && t.timestamp <= end)
        .filter(|t| {
            let text = t.text.to_lowercase();
            keywords.is_empty() || keywords.iter().any(|k| text.contains(k.as_str()))
        })
        .cloned()
        .collect())
}

fn dedup_key(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Keeps the first tweet for each whitespace-collapsed, lowercased text.
pub fn deduplicate(tweets: &[RawTweet]) -> Vec<RawTweet> {
    let mut seen = HashSet::new();
    tweets
        .iter()
        .filter(|t| seen.insert(dedup_key(&t.text)))
        .cloned()
        .collect()
}

static USERNAME: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@[\p{L}\p{N}_]+").unwrap());
static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:https?://|www\.)\S+").unwrap());
static RETWEET: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\brt\b").unwrap());

pub fn normalize_text(text: &str, config: &PreprocessConfig) -> String {
    let mut s = text.to_lowercase();
    for rule in StripRule::ORDER {
        if !config.enabled(rule) {
            continue;
        }
        s = match rule {
            StripRule::Username => USERNAME.replace_all(&s, " ").into_owned(),
            StripRule::Url => URL.replace_all(&s, " ").into_owned(),
            StripRule::RetweetMarker => RETWEET.replace_all(&s, " ").into_owned(),
            StripRule::HashtagSymbolOnly => s.replace('#', ""),
            // Pictographs and other non-ASCII symbols vanish without a gap.
            StripRule::Emoji => s
                .chars()
                .filter(|&c| {
                    c.is_alphanumeric()
                        || c.is_whitespace()
                        || c.is_ascii_punctuation()
                        || config.keep_chars.contains(&c)
                })
                .collect(),
            // Remaining punctuation separates words.
            StripRule::SpecialChars => s
                .chars()
                .map(|c| {
                    if c.is_alphanumeric() || c.is_whitespace() || config.keep_chars.contains(&c)
                    {
                        c
                    } else {
                        ' '
                    }
                })
                .collect(),
        };
    }
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

pub fn parse_stopwords(contents: &str) -> BTreeSet<String> {
    contents
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>> {
    let contents = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_stopwords(&contents))
}

fn token_counts<'a>(tweets: impl Iterator<Item = &'a Vec<String>>) -> HashMap<String, usize> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for tokens in tweets {
        for t in tokens {
            *counts.entry(t.clone()).or_default() += 1;
        }
    }
    counts
}

pub fn preprocess_corpus(
    raw: &[RawTweet],
    config: &PreprocessConfig,
) -> Result<(Vec<CleanTweet>, Vocabulary, CorpusStats)> {
    config.validate()?;
    let deduped = deduplicate(raw);
    let mut stats = CorpusStats {
        raw_count: raw.len(),
        deduplicated_count: deduped.len(),
        ..Default::default()
    };

    let mut tweets: Vec<CleanTweet> = deduped
        .par_iter()
        .map(|t| {
            let tokens = tokenize(&normalize_text(&t.text, config))
                .into_iter()
                .filter(|tok| !config.stopwords.contains(tok))
                .filter(|tok| tok.chars().count() >= config.min_token_length)
                .collect();
            CleanTweet {
                id: t.id.clone(),
                timestamp: t.timestamp,
                tokens,
            }
        })
        .collect();

    let counts = loop {
        let counts = token_counts(tweets.iter().map(|t| &t.tokens));
        let mut changed = false;
        for t in &mut tweets {
            let before = t.tokens.len();
            t.tokens
                .retain(|tok| counts[tok] >= config.min_global_frequency);
            changed |= t.tokens.len() != before;
        }
        let before = tweets.len();
        tweets.retain(|t| !t.tokens.is_empty());
        stats.empty_dropped += before - tweets.len();

        let before = tweets.len();
        let mut seen = HashSet::new();
        tweets.retain(|t| seen.insert(t.tokens.clone()));
        stats.clean_duplicates_dropped += before - tweets.len();
        changed |= tweets.len() != before;

        if !changed {
            break counts;
        }
    };

    let surviving: HashMap<String, usize> = counts
        .into_iter()
        .filter(|(_, c)| *c >= config.min_global_frequency)
        .collect();
    let vocab = Vocabulary::from_counts(surviving);
    stats.final_count = tweets.len();
    stats.vocab_size = vocab.len();
    Ok((tweets, vocab, stats))
}

pub fn write_clean_corpus(path: &Path, tweets: &[CleanTweet]) -> Result<()> {
    let mut out = create(path)?;
    for t in tweets {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_clean_corpus(path: &Path) -> Result<Vec<CleanTweet>> {
    let mut out = Vec::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: n + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Raw form of a cleaned tweet, with tokens joined by single spaces.
pub fn to_raw(tweet: &CleanTweet) -> RawTweet {
    RawTweet {
        id: tweet.id.clone(),
        timestamp: tweet.timestamp,
        text: tweet.tokens.join(" "),
    }
}
