//! Finite-difference verification of the BPTT gradients.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{backward_full, forward_with_mask, init_params, loss, BpttMode, Direction, ModelConfig, Params};
use crate::numeric::{ParamSet, RngState, Vector};

/// Pass threshold on the maximum relative error.
pub const TOLERANCE: f64 = 1e-4;
pub const EPSILON: f64 = 1e-5;
/// Denominator floor so that near-zero gradients are compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    /// Upper bound for the hidden size drawn per trial.
    pub max_hidden: usize,
    /// Upper bound for the sequence length drawn per trial.
    pub max_seq_len: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            max_hidden: 4,
            max_seq_len: 8,
            trials: 25,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub direction: Direction,
    pub hidden_size: usize,
    pub seq_len: usize,
    pub num_classes: usize,
    pub embedding_dim: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub trials: Vec<TrialReport>,
    /// Largest error seen per parameter group across all trials.
    pub per_group: BTreeMap<String, f64>,
    pub max_rel_error: f64,
    pub passed: bool,
}

/// Largest relative error per tensor between `analytic` and central
/// differences of the loss at `params`.
pub fn compare<S: AsRef<[f64]>>(
    params: &Params,
    analytic: &Params,
    config: &ModelConfig,
    sequence: &[S],
    target: usize,
) -> Result<Vec<(&'static str, f64)>> {
    let mut probe = params.clone();
    let eval = |p: &Params| -> Result<f64> {
        loss(&forward_with_mask(p, config, sequence, None)?, target)
    };
    let analytic = analytic.tensors();
    let mut out = Vec::with_capacity(analytic.len());
    for (t, (name, grad)) in analytic.iter().enumerate() {
        let mut worst = 0.0f64;
        for (i, &a) in grad.iter().enumerate() {
            let orig = probe.tensors()[t].1[i];
            probe.tensors_mut()[t].1[i] = orig + EPSILON;
            let up = eval(&probe)?;
            probe.tensors_mut()[t].1[i] = orig - EPSILON;
            let down = eval(&probe)?;
            probe.tensors_mut()[t].1[i] = orig;
            let numeric = (up - down) / (2.0 * EPSILON);
            worst = worst.max(relative_error(a, numeric));
        }
        out.push((*name, worst));
    }
    Ok(out)
}

/// Random instances alternating between architectures, dropout off, full
/// BPTT. With `perturb`, one analytic entry per trial is corrupted so the
/// check must fail.
pub fn run(config: &GradCheckConfig, perturb: bool) -> Result<GradCheckReport> {
    if config.max_hidden == 0 || config.max_seq_len == 0 || config.trials == 0 {
        return Err(Error::Config(
            "hidden size, sequence length and trials must be positive".into(),
        ));
    }
    let mut rng = RngState::new(config.seed);
    let mut trials = Vec::with_capacity(config.trials);
    let mut per_group: BTreeMap<String, f64> = BTreeMap::new();
    for trial in 0..config.trials {
        let model = ModelConfig {
            hidden_size: rng.gen_range(1..=config.max_hidden),
            num_classes: rng.gen_range(2..=3),
            dropout_rate: 0.0,
            direction: if trial % 2 == 0 {
                Direction::Standard
            } else {
                Direction::Bidirectional
            },
            bptt_mode: BpttMode::Full,
            embedding_dim: rng.gen_range(1..=5),
        };
        let seq_len = rng.gen_range(1..=config.max_seq_len);
        let sequence: Vec<Vector> = (0..seq_len)
            .map(|_| (0..model.embedding_dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let target = rng.gen_range(0..model.num_classes);
        let params = init_params(&model, &mut rng)?;
        let trace = forward_with_mask(&params, &model, &sequence, None)?;
        let mut grads = backward_full(&params, &model, &trace, &sequence, target)?;
        if perturb {
            let (_, b_y) = grads.tensors_mut().pop().expect("b_y");
            b_y[0] += 1e-2;
        }
        let groups = compare(&params, &grads, &model, &sequence, target)?;
        let mut max_rel_error = 0.0f64;
        for (name, err) in groups {
            let slot = per_group.entry(name.to_string()).or_insert(0.0);
            *slot = slot.max(err);
            max_rel_error = max_rel_error.max(err);
        }
        trials.push(TrialReport {
            direction: model.direction,
            hidden_size: model.hidden_size,
            seq_len,
            num_classes: model.num_classes,
            embedding_dim: model.embedding_dim,
            max_rel_error,
        });
    }
    let max_rel_error = trials.iter().map(|t| t.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        trials,
        per_group,
        max_rel_error,
        passed: max_rel_error < TOLERANCE,
    })
}
