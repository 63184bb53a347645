//! Dense double-precision kernels shared by the embedding, model and training
//! code. Everything is row-major `f64`; gradients are hand-derived elsewhere.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = Vec<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    /// Entries drawn uniformly from `[-bound, bound]`.
    pub fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut RngState) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += a · bᵀ`, the gradient shape of a linear map.
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (r, &ar) in a.iter().enumerate() {
            if ar == 0.0 {
                continue;
            }
            for (dst, &bc) in self.row_mut(r).iter_mut().zip(b) {
                *dst += ar * bc;
            }
        }
    }
}

/// Seeded ChaCha8 stream. Identical seeds yield identical streams on every
/// platform.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64) -> Self {
        RngState {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream, used to hand out per-example generators
    /// from a single sequential draw.
    pub fn fork(&mut self) -> RngState {
        RngState::new(self.inner.next_u64())
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn matvec(m: &Matrix, v: &[f64]) -> Result<Vector> {
    if m.cols != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix times vector of length {}",
            m.rows,
            m.cols,
            v.len()
        )));
    }
    Ok((0..m.rows).map(|r| dot(m.row(r), v)).collect())
}

/// `out += m · v` without bounds reporting; callers have validated shapes.
pub(crate) fn matvec_acc(m: &Matrix, v: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o += dot(m.row(r), v);
    }
}

/// `out += mᵀ · v`.
pub(crate) fn matvec_transposed_acc(m: &Matrix, v: &[f64], out: &mut [f64]) {
    for (r, &vr) in v.iter().enumerate() {
        if vr == 0.0 {
            continue;
        }
        for (o, &w) in out.iter_mut().zip(m.row(r)) {
            *o += w * vr;
        }
    }
}

pub fn softmax(v: &[f64]) -> Vector {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vector = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub const PROB_FLOOR: f64 = 1e-12;

pub fn cross_entropy(probs: &[f64], target_class: usize) -> Result<f64> {
    let p = probs.get(target_class).ok_or(Error::IndexOutOfRange {
        index: target_class,
        len: probs.len(),
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

pub fn tanh_elementwise(v: &[f64]) -> Vector {
    v.iter().map(|x| x.tanh()).collect()
}

/// Inverted dropout: each entry is 0 with probability `rate`, otherwise
/// `1 / (1 - rate)`, so the expected value of every entry is 1.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut RngState) -> Result<Vector> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    if rate == 0.0 {
        return Ok(vec![1.0; len]);
    }
    let keep = 1.0 / (1.0 - rate);
    Ok((0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect())
}

/// A fixed, ordered collection of parameter tensors viewed as flat slices.
/// Gradients share the type of the parameters they belong to.
pub trait ParamSet {
    fn tensors(&self) -> Vec<(&'static str, &[f64])>;
    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

fn check_same_shape<P: ParamSet, G: ParamSet>(params: &P, grads: &G) -> Result<()> {
    let p = params.tensors();
    let g = grads.tensors();
    if p.len() != g.len() || p.iter().zip(&g).any(|(a, b)| a.1.len() != b.1.len()) {
        return Err(Error::DimensionMismatch(
            "parameter and gradient sets differ in shape".into(),
        ));
    }
    Ok(())
}

/// `p ← p − lr·g` elementwise.
pub fn sgd_step<P: ParamSet, G: ParamSet>(params: &mut P, grads: &G, lr: f64) -> Result<()> {
    check_same_shape(params, grads)?;
    let grads = grads.tensors();
    for ((_, p), (_, g)) in params.tensors_mut().into_iter().zip(grads) {
        for (pi, gi) in p.iter_mut().zip(g) {
            *pi -= lr * gi;
        }
    }
    Ok(())
}

/// Rescales the whole set so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_gradients<G: ParamSet>(grads: &mut G, max_norm: f64) -> Result<f64> {
    if max_norm <= 0.0 || max_norm.is_nan() {
        return Err(Error::Config(format!("clip norm {max_norm} must be positive")));
    }
    let norm = grads.global_norm();
    if norm > max_norm {
        let scale = max_norm / norm;
        for (_, g) in grads.tensors_mut() {
            g.iter_mut().for_each(|x| *x *= scale);
        }
    }
    Ok(norm)
}

/// `acc += other`, used to reduce per-example gradients.
pub fn accumulate<G: ParamSet>(acc: &mut G, other: &G) {
    let src = other.tensors();
    for ((_, a), (_, b)) in acc.tensors_mut().into_iter().zip(src) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
}

pub fn scale<G: ParamSet>(grads: &mut G, factor: f64) {
    for (_, g) in grads.tensors_mut() {
        g.iter_mut().for_each(|x| *x *= factor);
    }
}

impl ParamSet for Vec<Vector> {
    fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        self.iter().map(|v| ("v", v.as_slice())).collect()
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        self.iter_mut().map(|v| ("v", v.as_mut_slice())).collect()
    }
}
