//! Corpus-wide classification, the overall sentiment distribution and its
//! breakdown by calendar period.

use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CleanTweet, Vocabulary};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::model::{predict, ModelConfig, Params};
use crate::training::{SentimentLabel, Task};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedTweet {
    #[serde(flatten)]
    pub tweet: CleanTweet,
    pub label: SentimentLabel,
    pub confidence: f64,
    /// No token of the tweet is in the vocabulary; the label is a default.
    #[serde(default)]
    pub oov: bool,
}

/// Predicts every tweet. Tweets with no known token are labeled neutral with
/// confidence 0 and flagged.
pub fn classify_corpus(
    params: &Params,
    config: &ModelConfig,
    emb: &EmbeddingMatrix,
    vocab: &Vocabulary,
    corpus: &[CleanTweet],
) -> Result<Vec<ClassifiedTweet>> {
    if corpus.is_empty() {
        return Err(Error::Empty("corpus".into()));
    }
    let classes = Task::from_num_classes(config.num_classes)?.labels();
    corpus
        .par_iter()
        .map(|tweet| {
            let (label, confidence, oov) =
                match predict(params, config, emb, vocab, &tweet.tokens) {
                    Ok(p) => (classes[p.class], p.confidence(), false),
                    Err(Error::AllTokensUnknown) => (SentimentLabel::Neutral, 0.0, true),
                    Err(e) => return Err(e),
                };
            Ok(ClassifiedTweet {
                tweet: tweet.clone(),
                label,
                confidence,
                oov,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub positive: usize,
    pub negative: usize,
    pub neutral: usize,
}

impl ClassCounts {
    pub fn add(&mut self, label: SentimentLabel) {
        *self.get_mut(label) += 1;
    }

    pub fn get(&self, label: SentimentLabel) -> usize {
        match label {
            SentimentLabel::Positive => self.positive,
            SentimentLabel::Negative => self.negative,
            SentimentLabel::Neutral => self.neutral,
        }
    }

    fn get_mut(&mut self, label: SentimentLabel) -> &mut usize {
        match label {
            SentimentLabel::Positive => &mut self.positive,
            SentimentLabel::Negative => &mut self.negative,
            SentimentLabel::Neutral => &mut self.neutral,
        }
    }

    pub fn total(&self) -> usize {
        self.positive + self.negative + self.neutral
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub label: SentimentLabel,
    pub count: usize,
    /// Percentage of the total, rounded to one decimal place.
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentDistribution {
    pub classes: Vec<ClassShare>,
    pub total: usize,
}

impl SentimentDistribution {
    pub fn count(&self, label: SentimentLabel) -> usize {
        self.classes
            .iter()
            .find(|c| c.label == label)
            .map_or(0, |c| c.count)
    }

    pub fn percentage(&self, label: SentimentLabel) -> f64 {
        self.classes
            .iter()
            .find(|c| c.label == label)
            .map_or(0.0, |c| c.percentage)
    }
}

fn one_decimal_percent(count: usize, total: usize) -> f64 {
    (count as f64 * 1000.0 / total as f64).round() / 10.0
}

pub fn sentiment_distribution(classified: &[ClassifiedTweet]) -> Result<SentimentDistribution> {
    if classified.is_empty() {
        return Err(Error::Empty("classified corpus".into()));
    }
    let mut counts = ClassCounts::default();
    for c in classified {
        counts.add(c.label);
    }
    let total = classified.len();
    Ok(SentimentDistribution {
        classes: SentimentLabel::ALL
            .iter()
            .map(|&label| ClassShare {
                label,
                count: counts.get(label),
                percentage: one_decimal_percent(counts.get(label), total),
            })
            .collect(),
        total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Month,
    Week,
    Day,
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "month" => Ok(Granularity::Month),
            "week" => Ok(Granularity::Week),
            "day" => Ok(Granularity::Day),
            _ => Err(Error::Config(format!("unknown granularity `{s}`"))),
        }
    }
}

impl Granularity {
    /// Start of the period containing `t` (weeks start on Monday).
    pub fn period_start(self, t: DateTime<Utc>) -> NaiveDate {
        let d = t.date_naive();
        match self {
            Granularity::Day => d,
            Granularity::Week => d - Duration::days(i64::from(d.weekday().num_days_from_monday())),
            Granularity::Month => d.with_day(1).unwrap(),
        }
    }

    fn next(self, start: NaiveDate) -> NaiveDate {
        match self {
            Granularity::Day => start + Duration::days(1),
            Granularity::Week => start + Duration::days(7),
            Granularity::Month => start.checked_add_months(chrono::Months::new(1)).unwrap(),
        }
    }

    fn label(self, start: NaiveDate) -> String {
        match self {
            Granularity::Month => start.format("%Y-%m").to_string(),
            _ => start.format("%Y-%m-%d").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub period: String,
    pub start: DateTime<Utc>,
    pub counts: ClassCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalBuckets {
    pub granularity: Granularity,
    pub buckets: Vec<Bucket>,
}

impl TemporalBuckets {
    pub fn column_sums(&self) -> ClassCounts {
        let mut sums = ClassCounts::default();
        for b in &self.buckets {
            sums.positive += b.counts.positive;
            sums.negative += b.counts.negative;
            sums.neutral += b.counts.neutral;
        }
        sums
    }
}

/// Counts per UTC calendar period from the earliest to the latest tweet;
/// periods without tweets appear with zero counts.
pub fn temporal_buckets(classified: &[ClassifiedTweet], granularity: Granularity) -> TemporalBuckets {
    let starts: Vec<NaiveDate> = classified
        .iter()
        .map(|c| granularity.period_start(c.tweet.timestamp))
        .collect();
    let (Some(&first), Some(&last)) = (starts.iter().min(), starts.iter().max()) else {
        return TemporalBuckets {
            granularity,
            buckets: Vec::new(),
        };
    };
    let mut periods = vec![first];
    while *periods.last().unwrap() < last {
        let next = granularity.next(*periods.last().unwrap());
        periods.push(next);
    }
    let mut buckets: Vec<Bucket> = periods
        .iter()
        .map(|&p| Bucket {
            period: granularity.label(p),
            start: Utc.from_utc_datetime(&p.and_hms_opt(0, 0, 0).unwrap()),
            counts: ClassCounts::default(),
        })
        .collect();
    for (c, start) in classified.iter().zip(&starts) {
        let i = periods.binary_search(start).expect("period in span");
        buckets[i].counts.add(c.label);
    }
    TemporalBuckets {
        granularity,
        buckets,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub distribution: SentimentDistribution,
    pub temporal: TemporalBuckets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents).map_err(|e| Error::io(path, e))
}

/// Writes the report. JSON holds both structures; CSV holds the temporal
/// table with columns `period,positive,negative,neutral`.
pub fn export_report(report: &Report, path: &Path, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Json => {
            let mut json = serde_json::to_vec_pretty(report)?;
            json.push(b'\n');
            write_file(path, &json)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["period", "positive", "negative", "neutral"])?;
            for b in &report.temporal.buckets {
                w.write_record([
                    b.period.clone(),
                    b.counts.positive.to_string(),
                    b.counts.negative.to_string(),
                    b.counts.neutral.to_string(),
                ])?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Error::Corrupt(e.to_string()))?;
            write_file(path, &bytes)
        }
    }
}

pub fn read_report(path: &Path) -> Result<Report> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// One JSON object per line: the cleaned tweet plus `label`, `confidence`
/// and `oov`.
pub fn write_classified(path: &Path, classified: &[ClassifiedTweet]) -> Result<()> {
    let mut out = Vec::new();
    for c in classified {
        serde_json::to_writer(&mut out, c)?;
        out.push(b'\n');
    }
    write_file(path, &out)
}
