use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::params::{flat, flat_mut, prefixed, Parameters};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Affine layer `y = x W^T + b`, `W` stored as `out x in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

pub(crate) fn uniform_init(rows: usize, cols: usize, fan_in: usize, rng: &mut Rng) -> Array2<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
}

impl Dense {
    pub fn new(input: usize, output: usize, rng: &mut Rng) -> Self {
        let weight = uniform_init(output, input, input, rng);
        let bias = uniform_init(1, output, input, rng).into_shape_with_order(output).expect("1 x n");
        Self { weight, bias }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self { weight: Array2::zeros((output, input)), bias: Array1::zeros(output) }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.output_dim())
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "dense layer expects width {}, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        Ok(x.dot(&self.weight.t()) + &self.bias)
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: ArrayView2<'_, f64>, dy: ArrayView2<'_, f64>, grad: &mut Dense) -> Array2<f64> {
        ndarray::linalg::general_mat_mul(1.0, &dy.t(), &x, 1.0, &mut grad.weight);
        grad.bias += &dy.sum_axis(Axis(0));
        dy.dot(&self.weight)
    }
}

impl Parameters for Dense {
    fn named(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        vec![
            ("weight".into(), self.weight.shape().to_vec(), flat(&self.weight)),
            ("bias".into(), self.bias.shape().to_vec(), flat(&self.bias)),
        ]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![flat_mut(&mut self.weight), flat_mut(&mut self.bias)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, mut a: Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Identity => {}
            Activation::Relu => a.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => a.mapv_inplace(f64::tanh),
            Activation::Sigmoid => a.mapv_inplace(sigmoid),
        }
        a
    }

    /// Derivative expressed through the activation's output `y`.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Stack of dense layers, each followed by its activation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activations: Vec<Activation>,
}

impl Mlp {
    /// `widths = [in, h1, ..., out]`, one activation per layer.
    pub fn new(widths: &[usize], activations: &[Activation], rng: &mut Rng) -> Result<Self> {
        if widths.len() < 2 || activations.len() != widths.len() - 1 {
            return Err(Error::Config(format!(
                "mlp needs n+1 widths for n activations, got {} widths and {} activations",
                widths.len(),
                activations.len()
            )));
        }
        let layers = widths.windows(2).map(|w| Dense::new(w[0], w[1], rng)).collect();
        Ok(Self { layers, activations: activations.to_vec() })
    }

    pub fn zeros_like(&self) -> Self {
        Self { layers: self.layers.iter().map(Dense::zeros_like).collect(), activations: self.activations.clone() }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").output_dim()
    }

    /// Activations after each layer; element 0 is the input itself.
    pub fn forward_all(&self, x: ArrayView2<'_, f64>) -> Result<Vec<Array2<f64>>> {
        let mut outs = Vec::with_capacity(self.layers.len() + 1);
        outs.push(x.to_owned());
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            let y = act.apply(layer.forward(outs.last().expect("input pushed").view())?);
            outs.push(y);
        }
        Ok(outs)
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.forward_all(x)?.pop().expect("at least one layer"))
    }

    /// Output of the first `depth` layers.
    pub fn forward_to(&self, x: ArrayView2<'_, f64>, depth: usize) -> Result<Array2<f64>> {
        let mut h = x.to_owned();
        for (layer, act) in self.layers.iter().zip(&self.activations).take(depth) {
            h = act.apply(layer.forward(h.view())?);
        }
        Ok(h)
    }

    /// Backward pass given `dL/d(output)`; `outs` from [`Mlp::forward_all`].
    pub fn backward(&self, outs: &[Array2<f64>], d_out: Array2<f64>) -> Self {
        let mut grad = self.zeros_like();
        let mut d = d_out;
        for i in (0..self.layers.len()).rev() {
            let act = self.activations[i];
            ndarray::Zip::from(&mut d).and(&outs[i + 1]).for_each(|g, &y| *g *= act.derivative_from_output(y));
            d = self.layers[i].backward(outs[i].view(), d.view(), &mut grad.layers[i]);
        }
        grad
    }
}

impl Parameters for Mlp {
    fn named(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        self.layers.iter().enumerate().flat_map(|(i, l)| prefixed(&format!("layer{i}"), l.named())).collect()
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.slices_mut()).collect()
    }
}
