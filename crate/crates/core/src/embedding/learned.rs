//! Autoencoder and multi-label classifier embedders built on dense stacks.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, MlpBatch, MlpTarget, Model, TrainConfig, Trainer};
use crate::rng::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedTrainConfig {
    /// Hidden widths between the input and the embedding layer. The
    /// autoencoder decoder mirrors them.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub grad_clip: Option<f64>,
    pub seed: u64,
}

impl Default for EmbedTrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![512],
            activation: Activation::Tanh,
            epochs: 20,
            learning_rate: 1e-3,
            batch_size: 64,
            grad_clip: Some(5.0),
            seed: 0,
        }
    }
}

impl EmbedTrainConfig {
    fn train_config(&self) -> Result<TrainConfig> {
        if self.epochs == 0 {
            return Err(Error::Config("embedder epochs must be positive".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("embedder hidden widths must be positive".into()));
        }
        let cfg = TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            shard_size: self.batch_size.max(1),
            grad_clip: self.grad_clip,
            dropout: 0.0,
            seed: self.seed,
            ..TrainConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn fit_mlp(net: Mlp, n: usize, cfg: &EmbedTrainConfig, make: impl Fn(&[usize]) -> Result<MlpBatch> + Sync) -> Result<(Mlp, Vec<f64>)> {
    let tc = cfg.train_config()?;
    let mut trainer = Trainer::new(net);
    for _ in 0..cfg.epochs {
        trainer.run_epoch(n, &make, &tc)?;
    }
    Ok((trainer.model, trainer.losses))
}

fn check_width(x: ArrayView2<'_, f64>, want: usize) -> Result<()> {
    if x.ncols() != want {
        return Err(Error::Dimension(format!("embedder expects width {want}, got {}", x.ncols())));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AeModel {
    /// Encoder followed by decoder as one stack.
    pub net: Mlp,
    /// Number of layers making up the encoder.
    pub encoder_depth: usize,
    pub bottleneck_dim: usize,
    pub losses: Vec<f64>,
}

/// Trains a `d -> hidden -> k -> hidden -> d` autoencoder on squared
/// reconstruction error.
pub fn ae_train(x: ArrayView2<'_, f64>, k: usize, cfg: &EmbedTrainConfig) -> Result<AeModel> {
    let (n, d) = x.dim();
    if k == 0 || n == 0 || d == 0 {
        return Err(Error::Config(format!("autoencoder needs k >= 1 and data, got k = {k}, {n} x {d}")));
    }
    let mut widths = vec![d];
    widths.extend(&cfg.hidden);
    widths.push(k);
    widths.extend(cfg.hidden.iter().rev());
    widths.push(d);
    let mut acts = vec![cfg.activation; cfg.hidden.len()];
    acts.push(Activation::Identity);
    acts.extend(vec![cfg.activation; cfg.hidden.len()]);
    acts.push(Activation::Identity);
    let net = Mlp::new(&widths, &acts, &mut rng(cfg.seed))?;
    let (net, losses) = fit_mlp(net, n, cfg, |ids| {
        let rows = x.select(Axis(0), ids);
        Ok(MlpBatch { x: rows.clone(), target: MlpTarget::Regression(rows) })
    })?;
    Ok(AeModel { net, encoder_depth: cfg.hidden.len() + 1, bottleneck_dim: k, losses })
}

impl AeModel {
    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.losses.last().copied()
    }

    pub fn embed_matrix(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_width(x, self.input_dim())?;
        self.net.forward_to(x, self.encoder_depth)
    }

    pub fn reconstruct_matrix(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_width(x, self.input_dim())?;
        self.net.forward(x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClsEmbedModel {
    pub net: Mlp,
    pub embed_depth: usize,
    pub embed_dim: usize,
    pub num_classes: usize,
    pub losses: Vec<f64>,
}

/// Multi-hot encoding of per-image label sets.
pub fn multi_hot(labels: &[BTreeSet<usize>], num_classes: usize) -> Result<Array2<f64>> {
    let mut y = Array2::zeros((labels.len(), num_classes));
    for (i, set) in labels.iter().enumerate() {
        if set.is_empty() {
            return Err(Error::Integrity(format!("image {i} has an empty label set")));
        }
        for &q in set {
            if q >= num_classes {
                return Err(Error::Index { index: q, len: num_classes });
            }
            y[[i, q]] = 1.0;
        }
    }
    Ok(y)
}

/// Trains `d -> hidden -> k -> Q` with independent per-class binary
/// cross-entropy; the `k`-wide layer is the embedding.
pub fn cls_embed_train(
    x: ArrayView2<'_, f64>,
    labels: &[BTreeSet<usize>],
    num_classes: usize,
    k: usize,
    cfg: &EmbedTrainConfig,
) -> Result<ClsEmbedModel> {
    let (n, d) = x.dim();
    if labels.len() != n {
        return Err(Error::Dimension(format!("{n} images vs {} label sets", labels.len())));
    }
    if k == 0 || n == 0 || num_classes == 0 {
        return Err(Error::Config("classifier embedder needs k >= 1, classes and data".into()));
    }
    let y = multi_hot(labels, num_classes)?;
    let mut widths = vec![d];
    widths.extend(&cfg.hidden);
    widths.push(k);
    widths.push(num_classes);
    let mut acts = vec![cfg.activation; cfg.hidden.len() + 1];
    acts.push(Activation::Identity);
    let net = Mlp::new(&widths, &acts, &mut rng(cfg.seed))?;
    let (net, losses) = fit_mlp(net, n, cfg, |ids| {
        Ok(MlpBatch { x: x.select(Axis(0), ids), target: MlpTarget::MultiLabel(y.select(Axis(0), ids)) })
    })?;
    Ok(ClsEmbedModel { net, embed_depth: cfg.hidden.len() + 1, embed_dim: k, num_classes, losses })
}

impl ClsEmbedModel {
    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn embed_matrix(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_width(x, self.input_dim())?;
        self.net.forward_to(x, self.embed_depth)
    }

    /// Classes whose predicted probability exceeds one half.
    pub fn predict_sets(&self, x: ArrayView2<'_, f64>) -> Result<Vec<BTreeSet<usize>>> {
        check_width(x, self.input_dim())?;
        let logits = self.net.forward(x)?;
        Ok(logits.rows().into_iter().map(|r| r.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(q, _)| q).collect()).collect())
    }

    pub fn loss(&self, x: ArrayView2<'_, f64>, labels: &[BTreeSet<usize>]) -> Result<f64> {
        let y = multi_hot(labels, self.num_classes)?;
        self.net.loss(&MlpBatch { x: x.to_owned(), target: MlpTarget::MultiLabel(y) })
    }
}

/// Per-column variance summed over columns, used to scale reconstruction error.
pub fn total_variance(x: ArrayView2<'_, f64>) -> f64 {
    let mean: Array1<f64> = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
    (&x - &mean).iter().map(|v| v * v).sum::<f64>() / x.nrows().max(1) as f64
}
