//! Skip-gram word vectors trained with negative sampling, plus cosine
//! nearest-neighbor queries.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CleanTweet, Vocabulary};
use crate::error::{Error, Result};
use crate::numeric::{dot, norm, Matrix, RngState, Vector};

pub const FILE_MAGIC: &str = "SGNS-EMB";
pub const FILE_VERSION: &str = "v1";

const UNIGRAM_POWER: f64 = 0.75;
const MIN_LR_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingParams {
    pub dim: usize,
    pub window: usize,
    pub negative_samples: usize,
    pub epochs: usize,
    /// Starting rate, decayed linearly towards zero over all epochs.
    pub learning_rate: f64,
    /// Frequent-word subsampling threshold; 0 disables subsampling.
    pub subsample_threshold: f64,
}

impl Default for EmbeddingParams {
    fn default() -> Self {
        EmbeddingParams {
            dim: 100,
            window: 5,
            negative_samples: 5,
            epochs: 5,
            learning_rate: 0.025,
            subsample_threshold: 1e-3,
        }
    }
}

impl EmbeddingParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("window", self.window),
            ("negative_samples", self.negative_samples),
            ("epochs", self.epochs),
        ];
        for (name, v) in positive {
            if v < 1 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.subsample_threshold >= 0.0) {
            return Err(Error::Config(
                "subsample_threshold must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Input (word) and output (context) vector tables, one row per vocabulary
/// index.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub input_vectors: Matrix,
    pub output_vectors: Matrix,
}

impl EmbeddingMatrix {
    pub fn vocab_size(&self) -> usize {
        self.input_vectors.rows()
    }

    pub fn dim(&self) -> usize {
        self.input_vectors.cols()
    }

    pub fn vector(&self, index: usize) -> &[f64] {
        self.input_vectors.row(index)
    }

    /// Input vectors of the in-vocabulary tokens, in order. Unknown tokens are
    /// skipped.
    pub fn embed<'a>(&'a self, vocab: &Vocabulary, tokens: &[String]) -> Vec<&'a [f64]> {
        tokens
            .iter()
            .filter_map(|t| vocab.index_of(t))
            .filter(|&i| i < self.vocab_size())
            .map(|i| self.vector(i))
            .collect()
    }
}

/// Cumulative unigram^0.75 distribution for drawing negatives.
struct NoiseDistribution {
    cumulative: Vec<f64>,
}

impl NoiseDistribution {
    fn new(counts: &[usize]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(UNIGRAM_POWER);
                acc
            })
            .collect();
        NoiseDistribution { cumulative }
    }

    fn sample(&self, rng: &mut RngState) -> usize {
        let total = *self.cumulative.last().unwrap_or(&0.0);
        let x = rng.gen::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= x)
            .min(self.cumulative.len() - 1)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn train_embeddings(
    corpus: &[CleanTweet],
    vocab: &Vocabulary,
    params: &EmbeddingParams,
    rng: &mut RngState,
) -> Result<EmbeddingMatrix> {
    train_embeddings_with_loss(corpus, vocab, params, rng).map(|(m, _)| m)
}

/// Trains and also returns the mean negative-sampling loss of every epoch.
///
/// Windows never cross tweet boundaries. Each center position draws a
/// reduced window `b ∈ [1, window]` as in the reference word2vec trainer.
pub fn train_embeddings_with_loss(
    corpus: &[CleanTweet],
    vocab: &Vocabulary,
    params: &EmbeddingParams,
    rng: &mut RngState,
) -> Result<(EmbeddingMatrix, Vec<f64>)> {
    params.validate()?;
    let v = vocab.len();
    let d = params.dim;

    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|t| {
            t.tokens
                .iter()
                .map(|tok| {
                    vocab
                        .index_of(tok)
                        .ok_or_else(|| Error::TokenNotInVocab(tok.clone()))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut counts = vec![0usize; v];
    for s in &sentences {
        for &w in s {
            counts[w] += 1;
        }
    }
    let total_words: usize = counts.iter().sum();

    let bound = 0.5 / d as f64;
    let mut input = Matrix::uniform(v, d, bound, rng);
    let mut output = Matrix::zeros(v, d);
    let mut epoch_losses = Vec::with_capacity(params.epochs);

    if total_words == 0 {
        return Ok((
            EmbeddingMatrix {
                input_vectors: input,
                output_vectors: output,
            },
            vec![0.0; params.epochs],
        ));
    }

    let noise = NoiseDistribution::new(&counts);
    let keep_prob: Vec<f64> = counts
        .iter()
        .map(|&c| {
            if params.subsample_threshold == 0.0 || c == 0 {
                return 1.0;
            }
            let scaled = params.subsample_threshold * total_words as f64;
            ((c as f64 / scaled).sqrt() + 1.0) * scaled / c as f64
        })
        .collect();

    let schedule_len = (params.epochs * total_words) as f64 + 1.0;
    let mut processed = 0usize;
    let mut grad_in: Vector = vec![0.0; d];
    let mut center_vec: Vector = vec![0.0; d];
    let mut kept = Vec::new();

    for _ in 0..params.epochs {
        let mut loss_sum = 0.0;
        let mut pairs = 0usize;
        for sentence in &sentences {
            processed += sentence.len();
            let lr = params.learning_rate
                * (1.0 - processed as f64 / schedule_len).max(MIN_LR_FRACTION);

            kept.clear();
            for &w in sentence {
                if keep_prob[w] >= 1.0 || rng.gen::<f64>() < keep_prob[w] {
                    kept.push(w);
                }
            }

            for (pos, &center) in kept.iter().enumerate() {
                let reach = rng.gen_range(1..=params.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(kept.len() - 1);
                for (ctx_pos, &context) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    grad_in.iter_mut().for_each(|g| *g = 0.0);
                    center_vec.copy_from_slice(input.row(center));
                    for n in 0..=params.negative_samples {
                        let (target, label) = if n == 0 {
                            (context, 1.0)
                        } else {
                            let t = noise.sample(rng);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let score = dot(&center_vec, output.row(target));
                        loss_sum += if label == 1.0 {
                            softplus(-score)
                        } else {
                            softplus(score)
                        };
                        let g = (label - sigmoid(score)) * lr;
                        for (gi, &o) in grad_in.iter_mut().zip(output.row(target)) {
                            *gi += g * o;
                        }
                        for (o, &x) in output.row_mut(target).iter_mut().zip(&center_vec) {
                            *o += g * x;
                        }
                    }
                    for (x, &gi) in input.row_mut(center).iter_mut().zip(&grad_in) {
                        *x += gi;
                    }
                    pairs += 1;
                }
            }
        }
        epoch_losses.push(if pairs == 0 {
            0.0
        } else {
            loss_sum / pairs as f64
        });
    }

    Ok((
        EmbeddingMatrix {
            input_vectors: input,
            output_vectors: output,
        },
        epoch_losses,
    ))
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Top-`k` words by cosine similarity to `word` over the input vectors,
/// excluding `word` itself. Ties go to the lower vocabulary index. Zero
/// vectors score 0.
pub fn nearest_neighbors(
    emb: &EmbeddingMatrix,
    vocab: &Vocabulary,
    word: &str,
    k: usize,
) -> Result<Vec<(String, f64)>> {
    let query = vocab
        .index_of(word)
        .ok_or_else(|| Error::UnknownWord(word.to_string()))?;
    if vocab.len() != emb.vocab_size() {
        return Err(Error::DimensionMismatch(format!(
            "vocabulary has {} tokens, embeddings have {} rows",
            vocab.len(),
            emb.vocab_size()
        )));
    }
    if k < 1 || k >= vocab.len() {
        return Err(Error::Config(format!(
            "k must be in 1..{} for this vocabulary, got {k}",
            vocab.len()
        )));
    }
    let q = emb.vector(query);
    if norm(q) == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut scored: Vec<(usize, f64)> = (0..emb.vocab_size())
        .filter(|&i| i != query)
        .map(|i| (i, cosine_similarity(q, emb.vector(i)).unwrap_or(0.0)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(i, s)| (vocab.tokens()[i].clone(), s))
        .collect())
}

/// Writes the input vectors, one line per token in vocabulary order, with
/// 9 significant digits.
pub fn save_embeddings(emb: &EmbeddingMatrix, vocab: &Vocabulary, path: &Path) -> Result<()> {
    if vocab.len() != emb.vocab_size() {
        return Err(Error::DimensionMismatch(format!(
            "vocabulary has {} tokens, embeddings have {} rows",
            vocab.len(),
            emb.vocab_size()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(
        out,
        "{FILE_MAGIC} {FILE_VERSION} {} {}",
        emb.vocab_size(),
        emb.dim()
    )
    .map_err(io)?;
    for (i, token) in vocab.tokens().iter().enumerate() {
        write!(out, "{token}").map_err(io)?;
        for x in emb.vector(i) {
            write!(out, " {x:.8e}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads an embedding file. Only input vectors are stored, so the returned
/// output table is zero. Also returns the token column in file order.
pub fn load_embeddings(path: &Path) -> Result<(EmbeddingMatrix, Vec<String>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::Corrupt("empty embedding file".into())),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let expected = format!("{FILE_MAGIC} {FILE_VERSION}");
    if fields.len() < 2 || fields[0] != FILE_MAGIC || fields[1] != FILE_VERSION {
        return Err(Error::VersionMismatch {
            found: fields.iter().take(2).copied().collect::<Vec<_>>().join(" "),
            expected,
        });
    }
    let (Some(v), Some(d), None) = (
        fields.get(2).and_then(|s| s.parse::<usize>().ok()),
        fields.get(3).and_then(|s| s.parse::<usize>().ok()),
        fields.get(4),
    ) else {
        return Err(Error::Corrupt(format!("bad header `{header}`")));
    };

    let mut tokens = Vec::with_capacity(v);
    let mut data = Vec::with_capacity(v * d);
    for row in 0..v {
        let line = match lines.next() {
            Some(l) => l.map_err(|e| Error::io(path, e))?,
            None => {
                return Err(Error::Corrupt(format!(
                    "expected {v} vectors, found {row}"
                )))
            }
        };
        let mut parts = line.split(' ');
        let token = parts.next().unwrap_or_default();
        let values: Vec<f64> = parts
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Corrupt(format!("line {}: bad value `{s}`", row + 2)))
            })
            .collect::<Result<_>>()?;
        if token.is_empty() || values.len() != d {
            return Err(Error::Corrupt(format!(
                "line {}: expected a token and {d} values",
                row + 2
            )));
        }
        tokens.push(token.to_string());
        data.extend(values);
    }
    if let Some(extra) = lines.next() {
        let extra = extra.map_err(|e| Error::io(path, e))?;
        if !extra.trim().is_empty() {
            return Err(Error::Corrupt("trailing data after last vector".into()));
        }
    }
    Ok((
        EmbeddingMatrix {
            input_vectors: Matrix::from_vec(v, d, data)?,
            output_vectors: Matrix::zeros(v, d),
        },
        tokens,
    ))
}
