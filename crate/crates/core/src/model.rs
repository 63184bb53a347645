//! Elman and bidirectional recurrent classifiers with hand-derived
//! backpropagation through time.
//!
//! A cell computes `h_t = tanh(W_xh·x_t + W_hh·h_{t-1} + b_h)` from `h_0 = 0`.
//! The standard model reads out from its last state. The bidirectional model
//! runs a second cell over the reversed sequence and reads out from the
//! concatenation `[h_T^fwd ; h_1^bwd]`, the last state of each pass. The
//! readout is `softmax(W_hy·(r ⊙ m) + b_y)` where `m` is an inverted-dropout
//! mask during training and all ones at inference.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::numeric::{
    self, cross_entropy, dropout_mask, matvec_acc, matvec_transposed_acc, softmax, Matrix,
    ParamSet, RngState, Vector,
};

pub const FILE_MAGIC: &str = "RNN-SENT";
pub const FILE_VERSION: &str = "v1";

pub const DEFAULT_TRUNCATION: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Standard,
    Bidirectional,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Standard => "standard",
            Direction::Bidirectional => "bidirectional",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Direction::Standard),
            "bidirectional" | "bi" => Ok(Direction::Bidirectional),
            other => Err(Error::Config(format!("unknown direction `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BpttMode {
    Full,
    /// Error propagates at most `k` steps back from the readout state.
    Truncated(usize),
}

impl BpttMode {
    fn horizon(self) -> Option<usize> {
        match self {
            BpttMode::Full => None,
            BpttMode::Truncated(k) => Some(k),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BpttMode::Full => "Full",
            BpttMode::Truncated(_) => "tBPTT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub num_classes: usize,
    /// Readout dropout; 0 disables it.
    pub dropout_rate: f64,
    pub direction: Direction,
    pub bptt_mode: BpttMode,
    pub embedding_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_size: 64,
            num_classes: 3,
            dropout_rate: 0.0,
            direction: Direction::Standard,
            bptt_mode: BpttMode::Truncated(DEFAULT_TRUNCATION),
            embedding_dim: 100,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.num_classes, 2 | 3) {
            return Err(Error::Config(format!(
                "num_classes must be 2 or 3, got {}",
                self.num_classes
            )));
        }
        if self.hidden_size == 0 || self.embedding_dim == 0 {
            return Err(Error::Config(
                "hidden_size and embedding_dim must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if self.bptt_mode == BpttMode::Truncated(0) {
            return Err(Error::Config("truncation length must be at least 1".into()));
        }
        Ok(())
    }

    /// Standard cells train with truncated BPTT and bidirectional ones with
    /// full BPTT in the reference grid. Other pairings are allowed.
    pub fn is_grid_pairing(&self) -> bool {
        matches!(
            (self.direction, self.bptt_mode),
            (Direction::Standard, BpttMode::Truncated(_)) | (Direction::Bidirectional, BpttMode::Full)
        )
    }

    fn readout_size(&self) -> usize {
        match self.direction {
            Direction::Standard => self.hidden_size,
            Direction::Bidirectional => 2 * self.hidden_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub w_xh: Matrix,
    pub w_hh: Matrix,
    pub b_h: Vector,
}

impl Cell {
    fn zeros(hidden: usize, input: usize) -> Self {
        Cell {
            w_xh: Matrix::zeros(hidden, input),
            w_hh: Matrix::zeros(hidden, hidden),
            b_h: vec![0.0; hidden],
        }
    }

    fn glorot(hidden: usize, input: usize, rng: &mut RngState) -> Self {
        Cell {
            w_xh: glorot(hidden, input, rng),
            w_hh: glorot(hidden, hidden, rng),
            b_h: vec![0.0; hidden],
        }
    }
}

/// Uniform in `±√(6 / (fan_in + fan_out))`.
pub fn glorot_bound(rows: usize, cols: usize) -> f64 {
    (6.0 / (rows + cols) as f64).sqrt()
}

fn glorot(rows: usize, cols: usize, rng: &mut RngState) -> Matrix {
    Matrix::uniform(rows, cols, glorot_bound(rows, cols), rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnParams {
    pub cell: Cell,
    pub w_hy: Matrix,
    pub b_y: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiRnnParams {
    pub forward_cell: Cell,
    pub backward_cell: Cell,
    pub w_hy: Matrix,
    pub b_y: Vector,
}

/// Parameters of either architecture. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Standard(RnnParams),
    Bidirectional(BiRnnParams),
}

impl Params {
    pub fn zeros(config: &ModelConfig) -> Self {
        let (h, e, c) = (config.hidden_size, config.embedding_dim, config.num_classes);
        match config.direction {
            Direction::Standard => Params::Standard(RnnParams {
                cell: Cell::zeros(h, e),
                w_hy: Matrix::zeros(c, h),
                b_y: vec![0.0; c],
            }),
            Direction::Bidirectional => Params::Bidirectional(BiRnnParams {
                forward_cell: Cell::zeros(h, e),
                backward_cell: Cell::zeros(h, e),
                w_hy: Matrix::zeros(c, 2 * h),
                b_y: vec![0.0; c],
            }),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.iter_mut().for_each(|x| *x = 0.0);
        }
        z
    }

    pub fn direction(&self) -> Direction {
        match self {
            Params::Standard(_) => Direction::Standard,
            Params::Bidirectional(_) => Direction::Bidirectional,
        }
    }

    fn cells(&self) -> (&Cell, Option<&Cell>) {
        match self {
            Params::Standard(p) => (&p.cell, None),
            Params::Bidirectional(p) => (&p.forward_cell, Some(&p.backward_cell)),
        }
    }

    fn readout(&self) -> (&Matrix, &Vector) {
        match self {
            Params::Standard(p) => (&p.w_hy, &p.b_y),
            Params::Bidirectional(p) => (&p.w_hy, &p.b_y),
        }
    }

    /// Name and shape of every tensor, in file order.
    pub fn shapes(&self) -> Vec<(&'static str, (usize, usize))> {
        let cell = |prefix: [&'static str; 3], c: &Cell| {
            [
                (prefix[0], c.w_xh.shape()),
                (prefix[1], c.w_hh.shape()),
                (prefix[2], (1, c.b_h.len())),
            ]
        };
        let (w_hy, b_y) = self.readout();
        let mut out = Vec::new();
        match self {
            Params::Standard(p) => out.extend(cell(["W_xh", "W_hh", "b_h"], &p.cell)),
            Params::Bidirectional(p) => {
                out.extend(cell(["fwd.W_xh", "fwd.W_hh", "fwd.b_h"], &p.forward_cell));
                out.extend(cell(["bwd.W_xh", "bwd.W_hh", "bwd.b_h"], &p.backward_cell));
            }
        }
        out.push(("W_hy", w_hy.shape()));
        out.push(("b_y", (1, b_y.len())));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}

impl ParamSet for Params {
    fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        let names: Vec<&'static str> = self.shapes().into_iter().map(|(n, _)| n).collect();
        let slices: Vec<&[f64]> = match self {
            Params::Standard(p) => vec![
                p.cell.w_xh.as_slice(),
                p.cell.w_hh.as_slice(),
                &p.cell.b_h,
                p.w_hy.as_slice(),
                &p.b_y,
            ],
            Params::Bidirectional(p) => vec![
                p.forward_cell.w_xh.as_slice(),
                p.forward_cell.w_hh.as_slice(),
                &p.forward_cell.b_h,
                p.backward_cell.w_xh.as_slice(),
                p.backward_cell.w_hh.as_slice(),
                &p.backward_cell.b_h,
                p.w_hy.as_slice(),
                &p.b_y,
            ],
        };
        names.into_iter().zip(slices).collect()
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let names: Vec<&'static str> = self.shapes().into_iter().map(|(n, _)| n).collect();
        let slices: Vec<&mut [f64]> = match self {
            Params::Standard(p) => vec![
                p.cell.w_xh.as_mut_slice(),
                p.cell.w_hh.as_mut_slice(),
                &mut p.cell.b_h,
                p.w_hy.as_mut_slice(),
                &mut p.b_y,
            ],
            Params::Bidirectional(p) => vec![
                p.forward_cell.w_xh.as_mut_slice(),
                p.forward_cell.w_hh.as_mut_slice(),
                &mut p.forward_cell.b_h,
                p.backward_cell.w_xh.as_mut_slice(),
                p.backward_cell.w_hh.as_mut_slice(),
                &mut p.backward_cell.b_h,
                p.w_hy.as_mut_slice(),
                &mut p.b_y,
            ],
        };
        names.into_iter().zip(slices).collect()
    }
}

pub fn init_params(config: &ModelConfig, rng: &mut RngState) -> Result<Params> {
    config.validate()?;
    let (h, e, c) = (config.hidden_size, config.embedding_dim, config.num_classes);
    Ok(match config.direction {
        Direction::Standard => {
            let cell = Cell::glorot(h, e, rng);
            Params::Standard(RnnParams {
                cell,
                w_hy: glorot(c, h, rng),
                b_y: vec![0.0; c],
            })
        }
        Direction::Bidirectional => {
            let forward_cell = Cell::glorot(h, e, rng);
            let backward_cell = Cell::glorot(h, e, rng);
            Params::Bidirectional(BiRnnParams {
                forward_cell,
                backward_cell,
                w_hy: glorot(c, 2 * h, rng),
                b_y: vec![0.0; c],
            })
        }
    })
}

/// States of one recurrent pass, in the order the pass visited the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTrace {
    pub hidden_states: Vec<Vector>,
    pub pre_activations: Vec<Vector>,
}

impl CellTrace {
    pub fn len(&self) -> usize {
        self.hidden_states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hidden_states.is_empty()
    }

    fn last(&self) -> &[f64] {
        self.hidden_states.last().map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub forward: CellTrace,
    /// Present for bidirectional models; index 0 is the state after `x_T`.
    pub backward: Option<CellTrace>,
    /// Readout input before dropout.
    pub readout: Vector,
    pub dropout_mask: Option<Vector>,
    pub probabilities: Vector,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }
}

pub enum Mode<'a> {
    Train(&'a mut RngState),
    Infer,
}

fn run_cell<'a>(cell: &Cell, inputs: impl Iterator<Item = &'a [f64]>) -> CellTrace {
    let hidden = cell.b_h.len();
    let mut trace = CellTrace {
        hidden_states: Vec::new(),
        pre_activations: Vec::new(),
    };
    let zero = vec![0.0; hidden];
    for x in inputs {
        let prev = trace.hidden_states.last().unwrap_or(&zero);
        let mut a = cell.b_h.clone();
        matvec_acc(&cell.w_xh, x, &mut a);
        matvec_acc(&cell.w_hh, prev, &mut a);
        trace.hidden_states.push(numeric::tanh_elementwise(&a));
        trace.pre_activations.push(a);
    }
    trace
}

fn check_sequence<S: AsRef<[f64]>>(config: &ModelConfig, sequence: &[S]) -> Result<()> {
    if sequence.is_empty() {
        return Err(Error::Empty("input sequence".into()));
    }
    if let Some(bad) = sequence
        .iter()
        .find(|x| x.as_ref().len() != config.embedding_dim)
    {
        return Err(Error::DimensionMismatch(format!(
            "input vector of length {}, model expects {}",
            bad.as_ref().len(),
            config.embedding_dim
        )));
    }
    Ok(())
}

fn expected_shapes(config: &ModelConfig) -> Vec<(&'static str, (usize, usize))> {
    let (h, e, c) = (config.hidden_size, config.embedding_dim, config.num_classes);
    let mut out = match config.direction {
        Direction::Standard => vec![("W_xh", (h, e)), ("W_hh", (h, h)), ("b_h", (1, h))],
        Direction::Bidirectional => vec![
            ("fwd.W_xh", (h, e)),
            ("fwd.W_hh", (h, h)),
            ("fwd.b_h", (1, h)),
            ("bwd.W_xh", (h, e)),
            ("bwd.W_hh", (h, h)),
            ("bwd.b_h", (1, h)),
        ],
    };
    out.push(("W_hy", (c, config.readout_size())));
    out.push(("b_y", (1, c)));
    out
}

fn check_params(params: &Params, config: &ModelConfig) -> Result<()> {
    let expected = expected_shapes(config);
    if params.shapes() != expected {
        return Err(Error::ShapeInconsistency(format!(
            "parameters {:?} do not match config {:?}",
            params.shapes(),
            expected
        )));
    }
    Ok(())
}

pub fn forward<S: AsRef<[f64]>>(
    params: &Params,
    config: &ModelConfig,
    sequence: &[S],
    mode: Mode<'_>,
) -> Result<ForwardTrace> {
    let mask = match mode {
        Mode::Train(rng) if config.dropout_rate > 0.0 => Some(dropout_mask(
            config.readout_size(),
            config.dropout_rate,
            rng,
        )?),
        _ => None,
    };
    forward_with_mask(params, config, sequence, mask)
}

/// Forward pass with an explicit readout mask (`None` for no dropout).
pub fn forward_with_mask<S: AsRef<[f64]>>(
    params: &Params,
    config: &ModelConfig,
    sequence: &[S],
    mask: Option<Vector>,
) -> Result<ForwardTrace> {
    config.validate()?;
    check_params(params, config)?;
    check_sequence(config, sequence)?;
    if let Some(m) = &mask {
        if m.len() != config.readout_size() {
            return Err(Error::DimensionMismatch(format!(
                "dropout mask of length {}, readout has {}",
                m.len(),
                config.readout_size()
            )));
        }
    }

    let (fwd_cell, bwd_cell) = params.cells();
    let forward = run_cell(fwd_cell, sequence.iter().map(AsRef::as_ref));
    let backward = bwd_cell.map(|c| run_cell(c, sequence.iter().rev().map(AsRef::as_ref)));

    let mut readout = forward.last().to_vec();
    if let Some(b) = &backward {
        readout.extend_from_slice(b.last());
    }
    let masked: Vector = match &mask {
        Some(m) => readout.iter().zip(m).map(|(r, m)| r * m).collect(),
        None => readout.clone(),
    };
    let (w_hy, b_y) = params.readout();
    let mut logits = b_y.clone();
    matvec_acc(w_hy, &masked, &mut logits);

    Ok(ForwardTrace {
        forward,
        backward,
        readout,
        dropout_mask: mask,
        probabilities: softmax(&logits),
    })
}

pub fn loss(trace: &ForwardTrace, target_class: usize) -> Result<f64> {
    cross_entropy(&trace.probabilities, target_class)
}

/// Accumulates one cell's gradients, walking back from the final state for
/// at most `horizon` steps (all steps when `None`).
fn cell_backward<'a>(
    cell: &Cell,
    grad: &mut Cell,
    trace: &CellTrace,
    inputs: &[&'a [f64]],
    d_last: Vector,
    horizon: Option<usize>,
) {
    let len = trace.len();
    let steps = horizon.map_or(len, |k| k.min(len));
    let mut dh = d_last;
    for s in 0..steps {
        let t = len - 1 - s;
        let h = &trace.hidden_states[t];
        let da: Vector = dh.iter().zip(h).map(|(d, h)| d * (1.0 - h * h)).collect();
        grad.w_xh.add_outer(&da, inputs[t]);
        if t > 0 {
            grad.w_hh.add_outer(&da, &trace.hidden_states[t - 1]);
        }
        for (b, d) in grad.b_h.iter_mut().zip(&da) {
            *b += d;
        }
        if s + 1 < steps {
            dh = vec![0.0; dh.len()];
            matvec_transposed_acc(&cell.w_hh, &da, &mut dh);
        }
    }
}

fn backward_with_horizon<S: AsRef<[f64]>>(
    params: &Params,
    config: &ModelConfig,
    trace: &ForwardTrace,
    sequence: &[S],
    target_class: usize,
    horizon: Option<usize>,
) -> Result<Params> {
    check_params(params, config)?;
    check_sequence(config, sequence)?;
    if trace.len() != sequence.len()
        || trace.backward.as_ref().is_some_and(|b| b.len() != sequence.len())
    {
        return Err(Error::TraceMismatch(format!(
            "trace covers {} steps, sequence has {}",
            trace.len(),
            sequence.len()
        )));
    }
    if trace.backward.is_some() != (params.direction() == Direction::Bidirectional) {
        return Err(Error::TraceMismatch("trace direction differs from model".into()));
    }
    if target_class >= config.num_classes {
        return Err(Error::IndexOutOfRange {
            index: target_class,
            len: config.num_classes,
        });
    }

    let mut grads = params.zeros_like();

    // Softmax + cross-entropy: dL/dlogits = p − onehot(target).
    let mut d_logits = trace.probabilities.clone();
    d_logits[target_class] -= 1.0;

    let masked: Vector = match &trace.dropout_mask {
        Some(m) => trace.readout.iter().zip(m).map(|(r, m)| r * m).collect(),
        None => trace.readout.clone(),
    };
    let (w_hy, _) = params.readout();
    let mut d_readout = vec![0.0; trace.readout.len()];
    matvec_transposed_acc(w_hy, &d_logits, &mut d_readout);
    if let Some(m) = &trace.dropout_mask {
        d_readout.iter_mut().zip(m).for_each(|(d, m)| *d *= m);
    }

    let forward_inputs: Vec<&[f64]> = sequence.iter().map(AsRef::as_ref).collect();
    let hidden = config.hidden_size;
    match (params, &mut grads) {
        (Params::Standard(p), Params::Standard(g)) => {
            g.w_hy.add_outer(&d_logits, &masked);
            g.b_y.copy_from_slice(&d_logits);
            cell_backward(&p.cell, &mut g.cell, &trace.forward, &forward_inputs, d_readout, horizon);
        }
        (Params::Bidirectional(p), Params::Bidirectional(g)) => {
            g.w_hy.add_outer(&d_logits, &masked);
            g.b_y.copy_from_slice(&d_logits);
            let d_bwd = d_readout.split_off(hidden);
            cell_backward(
                &p.forward_cell,
                &mut g.forward_cell,
                &trace.forward,
                &forward_inputs,
                d_readout,
                horizon,
            );
            let reversed: Vec<&[f64]> = forward_inputs.iter().rev().copied().collect();
            let bwd_trace = trace.backward.as_ref().expect("checked above");
            cell_backward(&p.backward_cell, &mut g.backward_cell, bwd_trace, &reversed, d_bwd, horizon);
        }
        _ => unreachable!("zeros_like preserves the variant"),
    }
    Ok(grads)
}

/// Exact cross-entropy gradients through every timestep.
pub fn backward_full<S: AsRef<[f64]>>(
    params: &Params,
    config: &ModelConfig,
    trace: &ForwardTrace,
    sequence: &[S],
    target_class: usize,
) -> Result<Params> {
    backward_with_horizon(params, config, trace, sequence, target_class, None)
}

/// Like [`backward_full`], but temporal error propagation stops `k` steps
/// back from the readout state of each pass.
pub fn backward_truncated<S: AsRef<[f64]>>(
    params: &Params,
    config: &ModelConfig,
    trace: &ForwardTrace,
    sequence: &[S],
    target_class: usize,
    k: usize,
) -> Result<Params> {
    if k == 0 {
        return Err(Error::Config("truncation length must be at least 1".into()));
    }
    backward_with_horizon(params, config, trace, sequence, target_class, Some(k))
}

/// Gradients using the configured BPTT mode.
pub fn backward<S: AsRef<[f64]>>(
    params: &Params,
    config: &ModelConfig,
    trace: &ForwardTrace,
    sequence: &[S],
    target_class: usize,
) -> Result<Params> {
    backward_with_horizon(
        params,
        config,
        trace,
        sequence,
        target_class,
        config.bptt_mode.horizon(),
    )
}

/// Index of the largest probability; the lowest index wins ties.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub probabilities: Vector,
}

impl Prediction {
    pub fn confidence(&self) -> f64 {
        self.probabilities[self.class]
    }
}

/// Classifies a token list. Out-of-vocabulary tokens are skipped.
pub fn predict(
    params: &Params,
    config: &ModelConfig,
    emb: &EmbeddingMatrix,
    vocab: &Vocabulary,
    tokens: &[String],
) -> Result<Prediction> {
    if emb.dim() != config.embedding_dim {
        return Err(Error::DimensionMismatch(format!(
            "embeddings have dimension {}, model expects {}",
            emb.dim(),
            config.embedding_dim
        )));
    }
    let sequence = emb.embed(vocab, tokens);
    if sequence.is_empty() {
        return Err(Error::AllTokensUnknown);
    }
    let trace = forward(params, config, &sequence, Mode::Infer)?;
    Ok(Prediction {
        class: argmax(&trace.probabilities),
        probabilities: trace.probabilities,
    })
}

pub fn save_model(params: &Params, config: &ModelConfig, path: &Path) -> Result<()> {
    check_params(params, config)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_model(params, config, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn write_model(params: &Params, config: &ModelConfig, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{FILE_MAGIC} {FILE_VERSION}")?;
    writeln!(out, "direction {}", config.direction)?;
    writeln!(out, "hidden_size {}", config.hidden_size)?;
    writeln!(out, "num_classes {}", config.num_classes)?;
    writeln!(out, "embedding_dim {}", config.embedding_dim)?;
    writeln!(out, "dropout_rate {}", config.dropout_rate)?;
    match config.bptt_mode {
        BpttMode::Full => {
            writeln!(out, "bptt_mode full")?;
            writeln!(out, "k none")?;
        }
        BpttMode::Truncated(k) => {
            writeln!(out, "bptt_mode truncated")?;
            writeln!(out, "k {k}")?;
        }
    }
    for ((name, (rows, cols)), (_, data)) in params.shapes().into_iter().zip(params.tensors()) {
        writeln!(out, "{name} {rows} {cols}")?;
        for row in data.chunks(cols.max(1)) {
            let line: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
    }
    Ok(())
}

struct LineReader<I> {
    lines: I,
    number: usize,
}

impl<I: Iterator<Item = std::io::Result<String>>> LineReader<I> {
    fn next(&mut self, what: &str) -> Result<String> {
        self.number += 1;
        match self.lines.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(Error::Corrupt(format!("line {}: {e}", self.number))),
            None => Err(Error::Corrupt(format!(
                "unexpected end of file, expected {what}"
            ))),
        }
    }

    fn key_value(&mut self, key: &str) -> Result<String> {
        let line = self.next(key)?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            _ => Err(Error::Corrupt(format!(
                "line {}: expected `{key} <value>`, found `{line}`",
                self.number
            ))),
        }
    }

    fn parsed<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.key_value(key)?;
        v.parse()
            .map_err(|_| Error::Corrupt(format!("line {}: bad {key} `{v}`", self.number)))
    }
}

pub fn load_model(path: &Path) -> Result<(Params, ModelConfig)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = LineReader {
        lines: BufReader::new(file).lines(),
        number: 0,
    };

    let header = r.next("header")?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(FILE_MAGIC) {
        return Err(Error::Corrupt(format!("not a model file (header `{header}`)")));
    }
    let version = parts.next().unwrap_or("");
    if version != FILE_VERSION {
        return Err(Error::VersionMismatch {
            found: version.to_string(),
            expected: FILE_VERSION.to_string(),
        });
    }

    let direction: Direction = r.key_value("direction")?.parse()?;
    let hidden_size = r.parsed("hidden_size")?;
    let num_classes = r.parsed("num_classes")?;
    let embedding_dim = r.parsed("embedding_dim")?;
    let dropout_rate = r.parsed("dropout_rate")?;
    let mode = r.key_value("bptt_mode")?;
    let k = r.key_value("k")?;
    let bptt_mode = match (mode.as_str(), k.as_str()) {
        ("full", _) => BpttMode::Full,
        ("truncated", k) => BpttMode::Truncated(
            k.parse()
                .map_err(|_| Error::Corrupt(format!("bad truncation length `{k}`")))?,
        ),
        (other, _) => return Err(Error::Corrupt(format!("unknown bptt_mode `{other}`"))),
    };
    let config = ModelConfig {
        hidden_size,
        num_classes,
        dropout_rate,
        direction,
        bptt_mode,
        embedding_dim,
    };
    config.validate()?;

    let mut params = Params::zeros(&config);
    let shapes = params.shapes();
    for ((name, (rows, cols)), (_, data)) in shapes.into_iter().zip(params.tensors_mut()) {
        let line = r.next(name)?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let found = match fields.as_slice() {
            [n, r, c] => (n.to_string(), r.parse::<usize>().ok(), c.parse::<usize>().ok()),
            _ => return Err(Error::Corrupt(format!("line {}: bad shape line `{line}`", r.number))),
        };
        if found.0 != name || found.1 != Some(rows) || found.2 != Some(cols) {
            return Err(Error::ShapeInconsistency(format!(
                "line {}: expected `{name} {rows} {cols}` for this config, found `{line}`",
                r.number
            )));
        }
        for chunk in data.chunks_mut(cols.max(1)) {
            let row = r.next(name)?;
            let values: Vec<f64> = row
                .split_whitespace()
                .map(|s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::Corrupt(format!("line {}: bad value", r.number)))?;
            if values.len() != chunk.len() {
                return Err(Error::Corrupt(format!(
                    "line {}: expected {} values, found {}",
                    r.number,
                    chunk.len(),
                    values.len()
                )));
            }
            chunk.copy_from_slice(&values);
        }
    }
    Ok((params, config))
}
