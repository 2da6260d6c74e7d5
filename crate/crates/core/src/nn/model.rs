use ndarray::{s, Array2, Array3, ArrayView2};
use serde::{Deserialize, Serialize};

use super::dense::{Activation, Dense, Mlp};
use super::gru::{to_time_major, Direction, GruStack, Mode, StackCache};
use super::loss::{bce_with_logits, multistep_cross_entropy, mse};
use super::params::{prefixed, Parameters};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// A trainable model whose gradients are represented by a value of its own type.
pub trait Model: Parameters + Clone + Send + Sync {
    type Batch: Send + Sync;

    /// Mean loss and its gradient. `Mode::Train` enables dropout.
    fn loss_and_grad(&self, batch: &Self::Batch, mode: Mode<'_>) -> Result<(f64, Self)>;

    /// Eval-mode loss without gradients.
    fn loss(&self, batch: &Self::Batch) -> Result<f64>;

    /// Number of instances in a batch, used to weight shards.
    fn batch_len(batch: &Self::Batch) -> usize;
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// GRU encoder followed by a dense head emitting `m` rows of `Q` logits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeqPredictor {
    pub encoder: GruStack,
    pub head: Dense,
    pub horizon: usize,
    pub num_classes: usize,
}

/// Time-major inputs (`(T*B) x D`) with `m` labels per instance.
#[derive(Clone, Debug)]
pub struct SeqBatch {
    pub inputs: Array2<f64>,
    pub steps: usize,
    pub labels: Vec<Vec<usize>>,
}

impl SeqBatch {
    pub fn from_array3(seq: &Array3<f64>, labels: Vec<Vec<usize>>) -> Result<Self> {
        if seq.dim().0 != labels.len() {
            return Err(Error::Dimension(format!("{} sequences vs {} label rows", seq.dim().0, labels.len())));
        }
        Ok(Self { inputs: to_time_major(seq), steps: seq.dim().1, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl SeqPredictor {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        input_dim: usize,
        hidden: usize,
        layers: usize,
        direction: Direction,
        dropout: f64,
        horizon: usize,
        num_classes: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if horizon == 0 || num_classes == 0 {
            return Err(Error::Config("horizon and class count must be positive".into()));
        }
        let encoder = GruStack::new(input_dim, hidden, layers, direction, dropout, rng)?;
        let head = Dense::new(encoder.output_dim(), horizon * num_classes, rng);
        Ok(Self { encoder, head, horizon, num_classes })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    fn check_batch(&self, inputs: ArrayView2<'_, f64>, steps: usize) -> Result<()> {
        if steps == 0 || inputs.nrows() == 0 || inputs.nrows() % steps != 0 {
            return Err(Error::Dimension(format!("{} rows do not split into {steps} steps", inputs.nrows())));
        }
        Ok(())
    }

    /// `B x (m*Q)` logits; row block `k*Q..(k+1)*Q` scores step `k`.
    pub fn logits(&self, inputs: ArrayView2<'_, f64>, steps: usize) -> Result<Array2<f64>> {
        self.check_batch(inputs, steps)?;
        let rep = self.encoder.forward(inputs, steps, Mode::Eval)?;
        self.head.forward(rep.view())
    }

    /// Argmax per step, lowest index on ties.
    pub fn predict(&self, inputs: ArrayView2<'_, f64>, steps: usize) -> Result<Vec<Vec<usize>>> {
        let logits = self.logits(inputs, steps)?;
        let q = self.num_classes;
        Ok(logits
            .rows()
            .into_iter()
            .map(|row| {
                (0..self.horizon)
                    .map(|k| argmax(&row.slice(s![k * q..(k + 1) * q]).to_vec()))
                    .collect()
            })
            .collect())
    }

    fn forward_train(&self, batch: &SeqBatch, mode: Mode<'_>) -> Result<(Array2<f64>, StackCache, Array2<f64>)> {
        self.check_batch(batch.inputs.view(), batch.steps)?;
        let (rep, cache) = self.encoder.forward_cached(batch.inputs.view(), batch.steps, mode)?;
        let logits = self.head.forward(rep.view())?;
        Ok((rep, cache, logits))
    }
}

impl Parameters for SeqPredictor {
    fn named(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = prefixed("encoder", self.encoder.named());
        out.extend(prefixed("head", self.head.named()));
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.encoder.slices_mut();
        out.extend(self.head.slices_mut());
        out
    }
}

impl Model for SeqPredictor {
    type Batch = SeqBatch;

    fn loss_and_grad(&self, batch: &SeqBatch, mode: Mode<'_>) -> Result<(f64, Self)> {
        let (rep, cache, logits) = self.forward_train(batch, mode)?;
        let (loss, d_logits) = multistep_cross_entropy(logits.view(), &batch.labels, self.num_classes)?;
        let mut head = self.head.zeros_like();
        let d_rep = self.head.backward(rep.view(), d_logits.view(), &mut head);
        let (encoder, _) = self.encoder.backward(&cache, d_rep.view());
        Ok((loss, Self { encoder, head, horizon: self.horizon, num_classes: self.num_classes }))
    }

    fn loss(&self, batch: &SeqBatch) -> Result<f64> {
        let logits = self.logits(batch.inputs.view(), batch.steps)?;
        Ok(multistep_cross_entropy(logits.view(), &batch.labels, self.num_classes)?.0)
    }

    fn batch_len(batch: &SeqBatch) -> usize {
        batch.len()
    }
}

/// Training targets for a dense stack.
#[derive(Clone, Debug)]
pub enum MlpTarget {
    /// One or more class indices per row; the output is split into
    /// `labels[i].len()` blocks of `num_classes` logits.
    Classes { labels: Vec<Vec<usize>>, num_classes: usize },
    /// Mean squared error against real targets.
    Regression(Array2<f64>),
    /// Independent binary cross-entropy against multi-hot targets.
    MultiLabel(Array2<f64>),
}

#[derive(Clone, Debug)]
pub struct MlpBatch {
    pub x: Array2<f64>,
    pub target: MlpTarget,
}

impl MlpTarget {
    fn loss(&self, out: ArrayView2<'_, f64>) -> Result<(f64, Array2<f64>)> {
        match self {
            MlpTarget::Classes { labels, num_classes } => multistep_cross_entropy(out, labels, *num_classes),
            MlpTarget::Regression(y) => mse(out, y.view()),
            MlpTarget::MultiLabel(y) => bce_with_logits(out, y.view()),
        }
    }
}

impl Model for Mlp {
    type Batch = MlpBatch;

    fn loss_and_grad(&self, batch: &MlpBatch, _mode: Mode<'_>) -> Result<(f64, Self)> {
        let outs = self.forward_all(batch.x.view())?;
        let (loss, d_out) = batch.target.loss(outs.last().expect("output").view())?;
        Ok((loss, self.backward(&outs, d_out)))
    }

    fn loss(&self, batch: &MlpBatch) -> Result<f64> {
        Ok(batch.target.loss(self.forward(batch.x.view())?.view())?.0)
    }

    fn batch_len(batch: &MlpBatch) -> usize {
        batch.x.nrows()
    }
}

/// Dense stack mapping `d` inputs through `hidden` widths to `out` with the
/// given hidden activation and an identity output layer.
pub fn mlp(input: usize, hidden: &[usize], out: usize, act: Activation, rng: &mut Rng) -> Result<Mlp> {
    let mut widths = vec![input];
    widths.extend_from_slice(hidden);
    widths.push(out);
    let mut acts = vec![act; hidden.len()];
    acts.push(Activation::Identity);
    Mlp::new(&widths, &acts, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;

    #[test]
    fn argmax_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0; 4]), 0);
    }

    #[test]
    fn zero_head_gives_uniform_rows() {
        let mut r = rng(2);
        let mut p = SeqPredictor::new(6, 4, 1, Direction::Forward, 0.0, 5, 128, &mut r).unwrap();
        p.head = p.head.zeros_like();
        let x = Array2::from_elem((3 * 2, 6), 0.3);
        let logits = p.logits(x.view(), 3).unwrap();
        assert_eq!(logits.dim(), (2, 5 * 128));
        let block = logits.slice(s![0, ..]).to_owned().into_shape_with_order((5, 128)).unwrap();
        let probs = super::super::loss::softmax_rows(block.view());
        assert!(probs.iter().all(|v| (v - 1.0 / 128.0).abs() < 1e-15));
        let pred = p.predict(x.view(), 3).unwrap();
        assert_eq!(pred, vec![vec![0; 5]; 2]);
    }
}
