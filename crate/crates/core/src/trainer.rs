//! Adam training loop for the residual loss.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ffnet::{Architecture, FrequencyMode, NetError, NetworkParams};
use crate::io;
use crate::residual::{boundary_points, BcMode, CollocationSet, LossReport, ResidualError, ResidualProblem};

/// Offset mixed into the seed for the batch-shuffling stream so it never
/// aliases the initialization stream.
const SHUFFLE_STREAM: u64 = 0x5eed_5407_f1e5_0001;
const JITTER_STREAM: u64 = 0x5eed_5407_f1e5_0002;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] NetError),
    #[error(transparent)]
    Residual(#[from] ResidualError),
    #[error("non-finite gradient for parameter {name} (slot {slot}) at step {step}")]
    NonFiniteGradient { slot: usize, name: String, step: u64 },
    #[error("loss became non-finite at epoch {epoch}{}", .checkpoint.as_ref().map(|p| format!("; last finite parameters written to {}", p.display())).unwrap_or_default())]
    Diverged {
        epoch: usize,
        checkpoint: Option<PathBuf>,
    },
    #[error("checkpoint write failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub mode: FrequencyMode,
    pub bc_mode: BcMode,
    /// Sweep every collocation point each epoch (several steps per epoch)
    /// instead of one batch per epoch.
    pub full_coverage: bool,
    /// Redraw each batch point uniformly inside its collocation cell every
    /// epoch instead of using the fixed cell centre.
    pub collocation_jitter: bool,
    /// Epoch interval between checkpoints; 0 disables them.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: 1000,
            lr0: 0.01,
            decay: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            mode: FrequencyMode::Trainable,
            bc_mode: BcMode::Hard,
            full_coverage: false,
            collocation_jitter: false,
            checkpoint_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, collocation_points: usize) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.batch_size == 0 || self.batch_size > collocation_points {
            return bad(format!(
                "batch_size {} must be in 1..={collocation_points}",
                self.batch_size
            ));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad(format!("lr0 must be positive, got {}", self.lr0));
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return bad(format!("decay must be non-negative, got {}", self.decay));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)".into());
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        Ok(())
    }
}

/// Inverse-time decay `lr0 / (1 + decay * t)`.
pub fn lr_at(t: u64, cfg: &TrainConfig) -> f64 {
    cfg.lr0 / (1.0 + cfg.decay * t as f64)
}

/// Adam moment accumulators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update at learning rate `lr_at(t)` (with `t` the
/// number of previous steps). Slots below `frozen_prefix` are left untouched.
///
/// On a non-finite gradient nothing is modified and the offending slot is
/// reported.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    cfg: &TrainConfig,
    frozen_prefix: usize,
) -> Result<(), usize> {
    assert_eq!(params.len(), grads.len(), "gradient/parameter length");
    if let Some(slot) = grads.iter().position(|g| !g.is_finite()) {
        return Err(slot);
    }
    let lr = lr_at(state.t, cfg);
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for k in frozen_prefix..params.len() {
        let g = grads[k];
        state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
        state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[k] / c1;
        let v_hat = state.v[k] / c2;
        params[k] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_r: f64,
    pub loss_bc: f64,
    pub lr: f64,
}

/// Trained parameters plus run statistics.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub initial_params: NetworkParams,
    pub adam: AdamState,
    pub history: Vec<EpochRecord>,
    /// Total loss of the returned parameters over the whole collocation set.
    pub final_loss: LossReport,
    pub wall_time_s: f64,
    pub epochs_run: usize,
}

/// Where checkpoints go, if anywhere.
#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    pub checkpoint_dir: Option<PathBuf>,
}

/// Total training loss and gradient on one batch.
pub fn batch_loss(
    problem: &ResidualProblem,
    params: &NetworkParams,
    batch: &[(f64, f64)],
    boundary: &[(f64, f64)],
    mode: FrequencyMode,
) -> Result<(LossReport, Vec<f64>), ResidualError> {
    let (rep, mut grad) = problem.loss_residual(params, batch, mode)?;
    if problem.bc_mode == BcMode::Soft {
        let (lbc, gbc) = problem.loss_boundary(params, boundary, mode)?;
        for (a, b) in grad.iter_mut().zip(&gbc) {
            *a += b;
        }
        return Ok((LossReport::new(rep.loss_r, lbc), grad));
    }
    Ok((rep, grad))
}

/// Runs the optimization. `problem.bc_mode` is overridden by `cfg.bc_mode`.
pub fn train(
    cfg: &TrainConfig,
    arch: &Architecture,
    problem: &ResidualProblem,
    collocation: &CollocationSet,
    boundary_per_edge: usize,
    opts: &TrainOptions,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate(collocation.len())?;
    let mut problem = problem.clone();
    problem.bc_mode = cfg.bc_mode;
    let boundary = match cfg.bc_mode {
        BcMode::Soft => boundary_points(boundary_per_edge.max(1)),
        BcMode::Hard => Vec::new(),
    };
    let initial_params = NetworkParams::init(arch, cfg.seed)?;
    let mut params = initial_params.clone();
    let mut flat = params.to_flat();
    let frozen = match cfg.mode {
        FrequencyMode::Fixed => params.frequency_count(),
        FrequencyMode::Trainable => 0,
    };
    let mut adam = AdamState::new(flat.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_STREAM);
    let mut jitter = ChaCha8Rng::seed_from_u64(cfg.seed ^ JITTER_STREAM);
    let mut order: Vec<usize> = (0..collocation.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut last_checkpoint = None;
    let start = Instant::now();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let batches: Vec<&[usize]> = if cfg.full_coverage {
            order.chunks(cfg.batch_size).collect()
        } else {
            vec![&order[..cfg.batch_size]]
        };
        let lr = lr_at(adam.t, cfg);
        let (mut sum_r, mut sum_bc) = (0.0, 0.0);
        for idx in &batches {
            let batch: Vec<(f64, f64)> = idx
                .iter()
                .map(|&k| match cfg.collocation_jitter {
                    true => collocation.jittered(k, jitter.random(), jitter.random()),
                    false => collocation.points[k],
                })
                .collect();
            let (rep, grad) = batch_loss(&problem, &params, &batch, &boundary, cfg.mode)?;
            if !rep.total.is_finite() {
                let checkpoint = match &opts.checkpoint_dir {
                    Some(dir) => Some(io::write_checkpoint(dir, epoch - 1, &params)?),
                    None => last_checkpoint.clone(),
                };
                return Err(TrainError::Diverged { epoch, checkpoint });
            }
            sum_r += rep.loss_r;
            sum_bc += rep.loss_bc;
            adam_step(&mut flat, &grad, &mut adam, cfg, frozen).map_err(|slot| {
                TrainError::NonFiniteGradient {
                    slot,
                    name: params.slot_name(slot),
                    step: adam.t + 1,
                }
            })?;
            params.set_flat(&flat)?;
        }
        let steps = batches.len() as f64;
        history.push(EpochRecord {
            epoch,
            loss_total: (sum_r + sum_bc) / steps,
            loss_r: sum_r / steps,
            loss_bc: sum_bc / steps,
            lr,
        });
        if let Some(dir) = &opts.checkpoint_dir {
            if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
                last_checkpoint = Some(io::write_checkpoint(dir, epoch, &params)?);
            }
        }
    }
    let wall_time_s = start.elapsed().as_secs_f64();
    let all = &collocation.points;
    let final_loss = full_loss(&problem, &params, all, &boundary, cfg.mode)?;
    Ok(TrainOutcome {
        params,
        initial_params,
        adam,
        history,
        final_loss,
        wall_time_s,
        epochs_run: cfg.epochs,
    })
}

fn full_loss(
    problem: &ResidualProblem,
    params: &NetworkParams,
    points: &[(f64, f64)],
    boundary: &[(f64, f64)],
    mode: FrequencyMode,
) -> Result<LossReport, ResidualError> {
    Ok(batch_loss(problem, params, points, boundary, mode)?.0)
}

/// Path of the checkpoint written after `epoch`.
pub fn checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join(format!("ckpt_{epoch}.json"))
}
