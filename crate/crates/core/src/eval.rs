//! Confusion matrices and the metrics derived from them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::model::{predict, ModelConfig, Params};
use crate::training::{LabeledTweet, SentimentLabel, Task};

/// Rows are gold labels, columns predictions. Examples that could not be
/// classified (no in-vocabulary token) are kept per gold class in
/// `unpredicted`; they count towards the total and never as correct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<SentimentLabel>,
    pub counts: Vec<Vec<usize>>,
    pub unpredicted: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<SentimentLabel>) -> Self {
        let n = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![vec![0; n]; n],
            unpredicted: vec![0; n],
        }
    }

    fn index(&self, label: SentimentLabel) -> Result<usize> {
        self.classes
            .iter()
            .position(|&c| c == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn record(&mut self, gold: SentimentLabel, predicted: SentimentLabel) -> Result<()> {
        let (g, p) = (self.index(gold)?, self.index(predicted)?);
        self.counts[g][p] += 1;
        Ok(())
    }

    pub fn record_unpredicted(&mut self, gold: SentimentLabel) -> Result<()> {
        let g = self.index(gold)?;
        self.unpredicted[g] += 1;
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum::<usize>() + self.unpredicted.iter().sum::<usize>()
    }

    pub fn trace(&self) -> usize {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    fn row_total(&self, c: usize) -> usize {
        self.counts[c].iter().sum::<usize>() + self.unpredicted[c]
    }

    fn col_total(&self, c: usize) -> usize {
        self.counts.iter().map(|row| row[c]).sum()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["gold\\predicted".to_string()];
        header.extend(self.classes.iter().map(|c| c.to_string()));
        header.push("unpredicted".into());
        w.write_record(&header)?;
        for (i, c) in self.classes.iter().enumerate() {
            let mut row = vec![c.to_string()];
            row.extend(self.counts[i].iter().map(|n| n.to_string()));
            row.push(self.unpredicted[i].to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: SentimentLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1_macro: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Share of all examples wrongly predicted as negative.
    pub false_negative_share: f64,
    pub total: usize,
    pub unpredicted: usize,
}

pub fn confusion_matrix(
    golds: &[SentimentLabel],
    preds: &[SentimentLabel],
    classes: &[SentimentLabel],
) -> Result<ConfusionMatrix> {
    if golds.len() != preds.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} gold labels, {} predictions",
            golds.len(),
            preds.len()
        )));
    }
    let mut cm = ConfusionMatrix::new(classes.to_vec());
    for (&g, &p) in golds.iter().zip(preds) {
        cm.record(g, p)?;
    }
    Ok(cm)
}

fn nonempty(cm: &ConfusionMatrix) -> Result<usize> {
    match cm.total() {
        0 => Err(Error::Empty("confusion matrix".into())),
        n => Ok(n),
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = nonempty(cm)?;
    Ok(cm.trace() as f64 / total as f64)
}

/// Per-class (precision, recall, f1); zero denominators give 0.
pub fn per_class_scores(cm: &ConfusionMatrix) -> Result<Vec<(f64, f64, f64)>> {
    nonempty(cm)?;
    Ok((0..cm.classes.len())
        .map(|c| {
            let (tp, col, row) = (cm.counts[c][c], cm.col_total(c), cm.row_total(c));
            // 2pr/(p+r) reduces to 2tp/(row+col): one rounding instead of several.
            (ratio(tp, col), ratio(tp, row), ratio(2 * tp, row + col))
        })
        .collect())
}

/// Per-class F1 and their unweighted mean.
pub fn f1_scores(cm: &ConfusionMatrix) -> Result<(Vec<f64>, f64)> {
    let f1: Vec<f64> = per_class_scores(cm)?.into_iter().map(|s| s.2).collect();
    let macro_f1 = f1.iter().sum::<f64>() / f1.len() as f64;
    Ok((f1, macro_f1))
}

/// Off-diagonal mass in the `negative` column over the total.
pub fn false_negative_share(cm: &ConfusionMatrix, negative: SentimentLabel) -> Result<f64> {
    let n = cm.index(negative)?;
    let total = nonempty(cm)?;
    let wrong: usize = (0..cm.classes.len())
        .filter(|&g| g != n)
        .map(|g| cm.counts[g][n])
        .sum();
    Ok(wrong as f64 / total as f64)
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let scores = per_class_scores(cm)?;
    let (_, f1_macro) = f1_scores(cm)?;
    Ok(Metrics {
        accuracy: accuracy(cm)?,
        f1_macro,
        per_class: cm
            .classes
            .iter()
            .zip(scores)
            .map(|(&label, (precision, recall, f1))| ClassMetrics {
                label,
                precision,
                recall,
                f1,
            })
            .collect(),
        false_negative_share: if cm.classes.contains(&SentimentLabel::Negative) {
            false_negative_share(cm, SentimentLabel::Negative)?
        } else {
            0.0
        },
        total: cm.total(),
        unpredicted: cm.unpredicted.iter().sum(),
    })
}

/// Predicts every example and scores the predictions. The class list follows
/// the model's task.
pub fn evaluate(
    params: &Params,
    config: &ModelConfig,
    emb: &EmbeddingMatrix,
    vocab: &Vocabulary,
    test: &[LabeledTweet],
) -> Result<(ConfusionMatrix, Metrics)> {
    if test.is_empty() {
        return Err(Error::Empty("test set".into()));
    }
    let task = Task::from_num_classes(config.num_classes)?;
    let classes = task.labels();
    let mut cm = ConfusionMatrix::new(classes.to_vec());
    for example in test {
        match predict(params, config, emb, vocab, &example.tweet.tokens) {
            Ok(pred) => cm.record(example.label, classes[pred.class])?,
            Err(Error::AllTokensUnknown) => cm.record_unpredicted(example.label)?,
            Err(e) => return Err(e),
        }
    }
    let m = metrics(&cm)?;
    Ok((cm, m))
}
