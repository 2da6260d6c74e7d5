//! Mini-batch training loop with deterministic sharding and resumable state.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gru::Mode;
use super::model::Model;
use super::optim::{AdamConfig, AdamState};
use super::params::NamedTensor;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: AdamConfig,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub epochs_uni: usize,
    pub epochs_bi: usize,
    pub dropout: f64,
    /// Global-norm gradient clipping threshold; `None` disables it.
    pub grad_clip: Option<f64>,
    /// Instances per gradient shard. Shards are the unit of parallel work and
    /// are reduced in a fixed order, so results do not depend on worker count.
    pub shard_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: AdamConfig::default(),
            learning_rate: 0.001,
            batch_size: 1000,
            num_layers: 4,
            hidden_dim: 256,
            epochs_uni: 12,
            epochs_bi: 50,
            dropout: 0.2,
            grad_clip: Some(5.0),
            shard_size: 250,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be a non-negative number, got {}", self.learning_rate));
        }
        if self.batch_size == 0 || self.num_layers == 0 || self.hidden_dim == 0 || self.shard_size == 0 {
            return bad("batch_size, num_layers, hidden_dim and shard_size must be positive".into());
        }
        if self.epochs_uni == 0 || self.epochs_bi == 0 {
            return bad("epoch counts must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad(format!("grad_clip must be positive, got {c}"));
            }
        }
        let o = &self.optimizer;
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) || !(o.eps > 0.0) {
            return bad("adam betas must lie in [0, 1) and eps must be positive".into());
        }
        Ok(())
    }
}

/// Model plus everything needed to continue training bit-exactly. Shuffling
/// and dropout randomness derive from `(seed, epoch)`, so the epoch counter
/// stands in for the RNG state.
#[derive(Clone, Debug)]
pub struct Trainer<M: Model> {
    pub model: M,
    pub adam: AdamState,
    pub epoch: usize,
    pub losses: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub tensors: Vec<NamedTensor>,
    pub adam: AdamState,
    pub epoch: usize,
    pub losses: Vec<f64>,
}

const SHUFFLE_STREAM: u64 = 0x5348_5546;
const DROPOUT_STREAM: u64 = 0x4452_4f50;

impl<M: Model> Trainer<M> {
    pub fn new(model: M) -> Self {
        let adam = AdamState::new(&model);
        Self { model, adam, epoch: 0, losses: Vec::new() }
    }

    pub fn state(&self) -> TrainerState {
        TrainerState { tensors: self.model.export(), adam: self.adam.clone(), epoch: self.epoch, losses: self.losses.clone() }
    }

    /// Restores a saved state into `model`, which supplies the architecture.
    pub fn restore(mut model: M, state: &TrainerState) -> Result<Self> {
        model.import(&state.tensors)?;
        let fresh = AdamState::new(&model);
        let shapes_ok = fresh.m.len() == state.adam.m.len()
            && fresh.m.iter().zip(&state.adam.m).all(|(a, b)| a.len() == b.len())
            && fresh.v.iter().zip(&state.adam.v).all(|(a, b)| a.len() == b.len());
        if !shapes_ok || state.losses.len() != state.epoch {
            return Err(Error::Checkpoint("optimizer state does not match the model".into()));
        }
        Ok(Self { model, adam: state.adam.clone(), epoch: state.epoch, losses: state.losses.clone() })
    }

    /// One pass over `n` instances. `make_batch` builds a batch from instance
    /// indices. Returns the mean pre-update batch loss weighted by batch size.
    pub fn run_epoch<F>(&mut self, n: usize, make_batch: F, cfg: &TrainConfig) -> Result<f64>
    where
        F: Fn(&[usize]) -> Result<M::Batch> + Sync,
    {
        if n == 0 {
            return Err(Error::Training("cannot train on zero instances".into()));
        }
        let epoch_seed = derive_seed(cfg.seed, self.epoch as u64);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_for(epoch_seed, SHUFFLE_STREAM));
        let mut weighted = 0.0;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch_seed = derive_seed(derive_seed(epoch_seed, DROPOUT_STREAM), bi as u64);
            let shards: Vec<(usize, &[usize])> = idx.chunks(cfg.shard_size).enumerate().collect();
            let results: Vec<Result<(f64, M)>> = shards
                .par_iter()
                .map(|&(si, ids)| {
                    let batch = make_batch(ids)?;
                    let mut r = rng_for(batch_seed, si as u64);
                    self.model.loss_and_grad(&batch, Mode::Train(&mut r))
                })
                .collect();
            let mut loss = 0.0;
            let mut grad: Option<M> = None;
            for (res, (_, ids)) in results.into_iter().zip(&shards) {
                let (l, g) = res?;
                let w = ids.len() as f64 / idx.len() as f64;
                loss += w * l;
                match grad.as_mut() {
                    None => {
                        let mut g = g;
                        g.scale(w);
                        grad = Some(g);
                    }
                    Some(acc) => acc.add_scaled(&g, w),
                }
            }
            let mut grad = grad.expect("non-empty batch");
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "loss became {loss} at epoch {} batch {bi} (lr {})",
                    self.epoch, cfg.learning_rate
                )));
            }
            let norm = grad.grad_norm();
            if !norm.is_finite() {
                return Err(Error::Training(format!("gradient norm {norm} at epoch {} batch {bi}", self.epoch)));
            }
            if let Some(c) = cfg.grad_clip {
                if norm > c {
                    grad.scale(c / norm);
                }
            }
            self.adam.step(&mut self.model, &grad, cfg.learning_rate, &cfg.optimizer);
            weighted += loss * idx.len() as f64;
        }
        let mean = weighted / n as f64;
        self.losses.push(mean);
        self.epoch += 1;
        log::debug!("epoch {} loss {mean:.6}", self.epoch);
        Ok(mean)
    }
}
