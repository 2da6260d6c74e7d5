//! GRU layers and stacks with full backpropagation through time.
//!
//! Sequences are stored time-major as a `(T*B) x D` matrix: rows
//! `t*B .. (t+1)*B` hold step `t` for every batch item. This lets the input
//! projections of a whole sequence run as one matrix product.

use ndarray::linalg::general_mat_mul;
use ndarray::{concatenate, s, Array1, Array2, Array3, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::dense::{sigmoid, uniform_init};
use super::params::{flat, flat_mut, prefixed, Parameters};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruLayer {
    pub wz: Array2<f64>,
    pub wr: Array2<f64>,
    pub wh: Array2<f64>,
    pub uz: Array2<f64>,
    pub ur: Array2<f64>,
    pub uh: Array2<f64>,
    pub bz: Array1<f64>,
    pub br: Array1<f64>,
    pub bh: Array1<f64>,
}

/// Per-step activations kept for the backward pass, all `(T*B) x H`.
#[derive(Clone, Debug)]
pub struct GruCache {
    steps: usize,
    batch: usize,
    z: Array2<f64>,
    r: Array2<f64>,
    c: Array2<f64>,
    /// Hidden state after each step.
    pub h: Array2<f64>,
}

impl GruLayer {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let bias = |rng: &mut Rng| uniform_init(1, hidden, hidden, rng).into_shape_with_order(hidden).expect("1 x n");
        Self {
            wz: uniform_init(hidden, input, hidden, rng),
            wr: uniform_init(hidden, input, hidden, rng),
            wh: uniform_init(hidden, input, hidden, rng),
            uz: uniform_init(hidden, hidden, hidden, rng),
            ur: uniform_init(hidden, hidden, hidden, rng),
            uh: uniform_init(hidden, hidden, hidden, rng),
            bz: bias(rng),
            br: bias(rng),
            bh: bias(rng),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Array2::zeros((hidden, input));
        let u = || Array2::zeros((hidden, hidden));
        let b = || Array1::zeros(hidden);
        Self { wz: w(), wr: w(), wh: w(), uz: u(), ur: u(), uh: u(), bz: b(), br: b(), bh: b() }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.hidden_dim())
    }

    pub fn input_dim(&self) -> usize {
        self.wz.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.wz.nrows()
    }

    /// One step for a single item.
    pub fn cell_forward(&self, x: ArrayView1<'_, f64>, h: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.input_dim() || h.len() != self.hidden_dim() {
            return Err(Error::Contract(format!(
                "gru cell expects x[{}] and h[{}], got x[{}] and h[{}]",
                self.input_dim(),
                self.hidden_dim(),
                x.len(),
                h.len()
            )));
        }
        let z = (self.wz.dot(&x) + self.uz.dot(&h) + &self.bz).mapv(sigmoid);
        let r = (self.wr.dot(&x) + self.ur.dot(&h) + &self.br).mapv(sigmoid);
        let c = (self.wh.dot(&x) + self.uh.dot(&(&r * &h)) + &self.bh).mapv(f64::tanh);
        Ok(&h + &(&z * &(&c - &h)))
    }

    /// Runs the layer over a time-major sequence from a zero initial state.
    pub fn forward_seq(&self, x: ArrayView2<'_, f64>, steps: usize) -> Result<GruCache> {
        if x.ncols() != self.input_dim() || steps == 0 || x.nrows() % steps != 0 {
            return Err(Error::Contract(format!(
                "gru layer expects (T*B) x {} input with T = {steps}, got {:?}",
                self.input_dim(),
                x.dim()
            )));
        }
        let batch = x.nrows() / steps;
        let hid = self.hidden_dim();
        let xz = x.dot(&self.wz.t()) + &self.bz;
        let xr = x.dot(&self.wr.t()) + &self.br;
        let xh = x.dot(&self.wh.t()) + &self.bh;
        let mut z = Array2::zeros((x.nrows(), hid));
        let mut r = Array2::zeros((x.nrows(), hid));
        let mut c = Array2::zeros((x.nrows(), hid));
        let mut h = Array2::zeros((x.nrows(), hid));
        let mut prev = Array2::<f64>::zeros((batch, hid));
        for t in 0..steps {
            let rows = s![t * batch..(t + 1) * batch, ..];
            let mut az = xz.slice(rows).to_owned();
            general_mat_mul(1.0, &prev, &self.uz.t(), 1.0, &mut az);
            let mut ar = xr.slice(rows).to_owned();
            general_mat_mul(1.0, &prev, &self.ur.t(), 1.0, &mut ar);
            let zt = az.mapv(sigmoid);
            let rt = ar.mapv(sigmoid);
            let rh = &rt * &prev;
            let mut ac = xh.slice(rows).to_owned();
            general_mat_mul(1.0, &rh, &self.uh.t(), 1.0, &mut ac);
            let ct = ac.mapv(f64::tanh);
            let ht = &prev + &(&zt * &(&ct - &prev));
            z.slice_mut(rows).assign(&zt);
            r.slice_mut(rows).assign(&rt);
            c.slice_mut(rows).assign(&ct);
            h.slice_mut(rows).assign(&ht);
            prev = ht;
        }
        Ok(GruCache { steps, batch, z, r, c, h })
    }

    /// Backpropagates `d_out` (gradient on every step's hidden state) through
    /// the sequence, accumulating into `grad` and returning `dL/dx`.
    pub fn backward_seq(&self, x: ArrayView2<'_, f64>, cache: &GruCache, d_out: ArrayView2<'_, f64>, grad: &mut GruLayer) -> Array2<f64> {
        let (steps, batch, hid) = (cache.steps, cache.batch, self.hidden_dim());
        let n = steps * batch;
        // previous hidden state per step, zeros at t = 0
        let mut h_prev = Array2::<f64>::zeros((n, hid));
        if steps > 1 {
            h_prev.slice_mut(s![batch.., ..]).assign(&cache.h.slice(s![..n - batch, ..]));
        }
        let mut da_z = Array2::<f64>::zeros((n, hid));
        let mut da_r = Array2::<f64>::zeros((n, hid));
        let mut da_c = Array2::<f64>::zeros((n, hid));
        let mut carry = Array2::<f64>::zeros((batch, hid));
        for t in (0..steps).rev() {
            let rows = s![t * batch..(t + 1) * batch, ..];
            let dh = &d_out.slice(rows) + &carry;
            let (z, r, c, hp) = (cache.z.slice(rows), cache.r.slice(rows), cache.c.slice(rows), h_prev.slice(rows));
            let dz = &dh * &(&c - &hp);
            let dac = &dh * &z * &c.mapv(|v| 1.0 - v * v);
            let drh = dac.dot(&self.uh);
            let dar = &drh * &hp * &r.mapv(|v| v * (1.0 - v));
            let daz = dz * &z.mapv(|v| v * (1.0 - v));
            let mut next = &dh * &z.mapv(|v| 1.0 - v) + &drh * &r;
            general_mat_mul(1.0, &dar, &self.ur, 1.0, &mut next);
            general_mat_mul(1.0, &daz, &self.uz, 1.0, &mut next);
            da_z.slice_mut(rows).assign(&daz);
            da_r.slice_mut(rows).assign(&dar);
            da_c.slice_mut(rows).assign(&dac);
            carry = next;
        }
        let rh = &cache.r * &h_prev;
        general_mat_mul(1.0, &da_z.t(), &h_prev, 1.0, &mut grad.uz);
        general_mat_mul(1.0, &da_r.t(), &h_prev, 1.0, &mut grad.ur);
        general_mat_mul(1.0, &da_c.t(), &rh, 1.0, &mut grad.uh);
        general_mat_mul(1.0, &da_z.t(), &x, 1.0, &mut grad.wz);
        general_mat_mul(1.0, &da_r.t(), &x, 1.0, &mut grad.wr);
        general_mat_mul(1.0, &da_c.t(), &x, 1.0, &mut grad.wh);
        grad.bz += &da_z.sum_axis(Axis(0));
        grad.br += &da_r.sum_axis(Axis(0));
        grad.bh += &da_c.sum_axis(Axis(0));
        let mut dx = da_z.dot(&self.wz);
        general_mat_mul(1.0, &da_r, &self.wr, 1.0, &mut dx);
        general_mat_mul(1.0, &da_c, &self.wh, 1.0, &mut dx);
        dx
    }
}

impl Parameters for GruLayer {
    fn named(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::with_capacity(9);
        for (name, a) in [("wz", &self.wz), ("wr", &self.wr), ("wh", &self.wh), ("uz", &self.uz), ("ur", &self.ur), ("uh", &self.uh)] {
            out.push((name.to_string(), a.shape().to_vec(), flat(a)));
        }
        for (name, b) in [("bz", &self.bz), ("br", &self.br), ("bh", &self.bh)] {
            out.push((name.to_string(), b.shape().to_vec(), flat(b)));
        }
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            flat_mut(&mut self.wz),
            flat_mut(&mut self.wr),
            flat_mut(&mut self.wh),
            flat_mut(&mut self.uz),
            flat_mut(&mut self.ur),
            flat_mut(&mut self.uh),
            flat_mut(&mut self.bz),
            flat_mut(&mut self.br),
            flat_mut(&mut self.bh),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Bidirectional,
}

/// Whether dropout is active. Training mode carries the mask RNG.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut Rng),
}

/// Reverses the step order of a time-major sequence.
pub fn reverse_time(a: ArrayView2<'_, f64>, steps: usize) -> Array2<f64> {
    let batch = a.nrows() / steps;
    let mut out = Array2::zeros(a.raw_dim());
    for t in 0..steps {
        let src = steps - 1 - t;
        out.slice_mut(s![t * batch..(t + 1) * batch, ..]).assign(&a.slice(s![src * batch..(src + 1) * batch, ..]));
    }
    out
}

/// `B x T x D` to time-major `(T*B) x D`.
pub fn to_time_major(seq: &Array3<f64>) -> Array2<f64> {
    let (b, t, d) = seq.dim();
    let mut out = Array2::zeros((t * b, d));
    for ti in 0..t {
        out.slice_mut(s![ti * b..(ti + 1) * b, ..]).assign(&seq.slice(s![.., ti, ..]));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruStack {
    pub direction: Direction,
    pub dropout: f64,
    pub fwd: Vec<GruLayer>,
    /// Empty for forward-only stacks.
    pub bwd: Vec<GruLayer>,
}

struct LayerCache {
    input: Array2<f64>,
    mask: Option<Array2<f64>>,
    fwd: GruCache,
    bwd: Option<(Array2<f64>, GruCache)>,
}

pub struct StackCache {
    steps: usize,
    layers: Vec<LayerCache>,
}

impl GruStack {
    pub fn new(input: usize, hidden: usize, layers: usize, direction: Direction, dropout: f64, rng: &mut Rng) -> Result<Self> {
        if input == 0 || hidden == 0 || layers == 0 {
            return Err(Error::Config("gru stack dims and layer count must be positive".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {dropout}")));
        }
        let bi = direction == Direction::Bidirectional;
        let width = |l: usize| if l == 0 { input } else if bi { 2 * hidden } else { hidden };
        let mut fwd = Vec::with_capacity(layers);
        let mut bwd = Vec::new();
        for l in 0..layers {
            fwd.push(GruLayer::new(width(l), hidden, rng));
            if bi {
                bwd.push(GruLayer::new(width(l), hidden, rng));
            }
        }
        Ok(Self { direction, dropout, fwd, bwd })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            direction: self.direction,
            dropout: self.dropout,
            fwd: self.fwd.iter().map(GruLayer::zeros_like).collect(),
            bwd: self.bwd.iter().map(GruLayer::zeros_like).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.fwd[0].input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.fwd[0].hidden_dim()
    }

    pub fn num_layers(&self) -> usize {
        self.fwd.len()
    }

    pub fn output_dim(&self) -> usize {
        match self.direction {
            Direction::Forward => self.hidden_dim(),
            Direction::Bidirectional => 2 * self.hidden_dim(),
        }
    }

    /// Final representation `B x output_dim` of a time-major sequence.
    pub fn forward(&self, x: ArrayView2<'_, f64>, steps: usize, mode: Mode<'_>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(x, steps, mode)?.0)
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>, steps: usize, mut mode: Mode<'_>) -> Result<(Array2<f64>, StackCache)> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "sequence width {} does not match stack input {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        let mut caches: Vec<LayerCache> = Vec::with_capacity(self.num_layers());
        for l in 0..self.num_layers() {
            let mut mask = None;
            let mut input = if l == 0 {
                x.to_owned()
            } else {
                let below = caches.last().expect("previous layer");
                match &below.bwd {
                    None => below.fwd.h.clone(),
                    Some((_, b)) => concatenate![Axis(1), below.fwd.h, reverse_time(b.h.view(), steps)],
                }
            };
            if l > 0 {
                if let Mode::Train(rng) = &mut mode {
                    if self.dropout > 0.0 {
                        let keep = 1.0 - self.dropout;
                        let m = Array2::from_shape_simple_fn(input.raw_dim(), || {
                            if rng.random::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        });
                        input *= &m;
                        mask = Some(m);
                    }
                }
            }
            let fwd = self.fwd[l].forward_seq(input.view(), steps)?;
            let bwd = match self.bwd.get(l) {
                None => None,
                Some(layer) => {
                    let rev = reverse_time(input.view(), steps);
                    let cache = layer.forward_seq(rev.view(), steps)?;
                    Some((rev, cache))
                }
            };
            caches.push(LayerCache { input, mask, fwd, bwd });
        }
        let top = caches.last().expect("at least one layer");
        let batch = x.nrows() / steps;
        let last = s![(steps - 1) * batch.., ..];
        let rep = match &top.bwd {
            None => top.fwd.h.slice(last).to_owned(),
            Some((_, b)) => concatenate![Axis(1), top.fwd.h.slice(last), b.h.slice(last)],
        };
        Ok((rep, StackCache { steps, layers: caches }))
    }

    /// Backward pass from `dL/d(rep)`; returns gradients and `dL/dx`.
    pub fn backward(&self, cache: &StackCache, d_rep: ArrayView2<'_, f64>) -> (Self, Array2<f64>) {
        let mut grad = self.zeros_like();
        let steps = cache.steps;
        let hid = self.hidden_dim();
        let batch = d_rep.nrows();
        let n = steps * batch;
        let last = s![(steps - 1) * batch.., ..];
        let mut d_fwd = Array2::<f64>::zeros((n, hid));
        d_fwd.slice_mut(last).assign(&d_rep.slice(s![.., ..hid]));
        // gradient on the backward layer's outputs, in its own (reversed) time order
        let mut d_bwd = Array2::<f64>::zeros((n, hid));
        if self.direction == Direction::Bidirectional {
            d_bwd.slice_mut(last).assign(&d_rep.slice(s![.., hid..]));
        }
        let mut dx = Array2::zeros((0, 0));
        for l in (0..self.num_layers()).rev() {
            let lc = &cache.layers[l];
            dx = self.fwd[l].backward_seq(lc.input.view(), &lc.fwd, d_fwd.view(), &mut grad.fwd[l]);
            if let Some((rev, bc)) = &lc.bwd {
                let dx_rev = self.bwd[l].backward_seq(rev.view(), bc, d_bwd.view(), &mut grad.bwd[l]);
                dx += &reverse_time(dx_rev.view(), steps);
            }
            if let Some(mask) = &lc.mask {
                dx *= mask;
            }
            if l > 0 {
                d_fwd = dx.slice(s![.., ..hid]).to_owned();
                if self.direction == Direction::Bidirectional {
                    d_bwd = reverse_time(dx.slice(s![.., hid..]), steps);
                }
            }
        }
        (grad, dx)
    }
}

impl Parameters for GruStack {
    fn named(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::new();
        for (l, layer) in self.fwd.iter().enumerate() {
            out.extend(prefixed(&format!("layer{l}.fwd"), layer.named()));
            if let Some(b) = self.bwd.get(l) {
                out.extend(prefixed(&format!("layer{l}.bwd"), b.named()));
            }
        }
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        let mut bwd = self.bwd.iter_mut();
        for layer in self.fwd.iter_mut() {
            out.extend(layer.slices_mut());
            if let Some(b) = bwd.next() {
                out.extend(b.slices_mut());
            }
        }
        out
    }
}

/// Final representation per batch item for a `B x T x D` sequence.
pub fn gru_sequence_forward(stack: &GruStack, seq: &Array3<f64>, mode: Mode<'_>) -> Result<Array2<f64>> {
    let steps = seq.dim().1;
    if steps == 0 || seq.dim().0 == 0 {
        return Err(Error::Dimension("empty sequence batch".into()));
    }
    stack.forward(to_time_major(seq).view(), steps, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;
    use ndarray::array;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(shape: (usize, usize), rng: &mut Rng) -> Array2<f64> {
        Array2::from_shape_simple_fn(shape, || StandardNormal.sample(rng))
    }

    #[test]
    fn zero_params_examples() {
        let layer = GruLayer::zeros(3, 2);
        let h = layer.cell_forward(array![1.0, -2.0, 3.0].view(), array![0.0, 0.0].view()).unwrap();
        assert_eq!(h, array![0.0, 0.0]);
        let h = layer.cell_forward(array![1.0, -2.0, 3.0].view(), array![0.8, -0.4].view()).unwrap();
        assert_eq!(h, array![0.4, -0.2]);
        assert!(layer.cell_forward(array![1.0].view(), array![0.0, 0.0].view()).is_err());
    }

    #[test]
    fn cell_matches_scalar_transcription() {
        let mut r = rng(3);
        let layer = GruLayer::new(4, 3, &mut r);
        let x = [0.3, -1.1, 0.7, 2.0];
        let h = [0.5, -0.25, 0.1];
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let row = |m: &Array2<f64>, i: usize, v: &[f64]| -> f64 { (0..v.len()).map(|j| m[[i, j]] * v[j]).sum() };
        let mut rvec = [0.0; 3];
        for i in 0..3 {
            rvec[i] = sig(row(&layer.wr, i, &x) + row(&layer.ur, i, &h) + layer.br[i]);
        }
        let rh: Vec<f64> = (0..3).map(|i| rvec[i] * h[i]).collect();
        let got = layer.cell_forward(ArrayView1::from(&x), ArrayView1::from(&h)).unwrap();
        for i in 0..3 {
            let z = sig(row(&layer.wz, i, &x) + row(&layer.uz, i, &h) + layer.bz[i]);
            let c = (row(&layer.wh, i, &x) + row(&layer.uh, i, &rh) + layer.bh[i]).tanh();
            let want = (1.0 - z) * h[i] + z * c;
            assert!((got[i] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn sequence_matches_cell_loop() {
        let mut r = rng(5);
        let layer = GruLayer::new(3, 4, &mut r);
        let (steps, batch) = (5, 2);
        let x = randn((steps * batch, 3), &mut r);
        let cache = layer.forward_seq(x.view(), steps).unwrap();
        for b in 0..batch {
            let mut h = Array1::zeros(4);
            for t in 0..steps {
                h = layer.cell_forward(x.row(t * batch + b), h.view()).unwrap();
                let got = cache.h.row(t * batch + b);
                assert!(got.iter().zip(h.iter()).all(|(a, b)| (a - b).abs() < 1e-13));
            }
        }
    }

    #[test]
    fn single_step_stack_is_cell_chain() {
        let mut r = rng(7);
        let stack = GruStack::new(3, 4, 3, Direction::Forward, 0.0, &mut r).unwrap();
        let x = randn((1, 3), &mut r);
        let rep = stack.forward(x.view(), 1, Mode::Eval).unwrap();
        let mut h = x.row(0).to_owned();
        for layer in &stack.fwd {
            h = layer.cell_forward(h.view(), Array1::zeros(4).view()).unwrap();
        }
        assert!(rep.row(0).iter().zip(h.iter()).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn eval_ignores_dropout() {
        let mut r = rng(9);
        let mut stack = GruStack::new(3, 4, 2, Direction::Bidirectional, 0.2, &mut r).unwrap();
        let seq = Array3::from_shape_fn((2, 5, 3), |(b, t, d)| (b + 2 * t) as f64 * 0.1 - d as f64 * 0.3);
        let a = gru_sequence_forward(&stack, &seq, Mode::Eval).unwrap();
        stack.dropout = 0.0;
        let b = gru_sequence_forward(&stack, &seq, Mode::Eval).unwrap();
        assert_eq!(a, b);
        stack.dropout = 0.5;
        let mut dr = rng(1);
        let c = gru_sequence_forward(&stack, &seq, Mode::Train(&mut dr)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn palindrome_tied_halves_agree() {
        let mut r = rng(11);
        let mut stack = GruStack::new(2, 3, 1, Direction::Bidirectional, 0.0, &mut r).unwrap();
        stack.bwd[0] = stack.fwd[0].clone();
        let steps = [[0.1, 0.9], [-0.5, 0.2], [1.0, 1.0], [-0.5, 0.2], [0.1, 0.9]];
        let seq = Array3::from_shape_fn((1, 5, 2), |(_, t, d)| steps[t][d]);
        let rep = gru_sequence_forward(&stack, &seq, Mode::Eval).unwrap();
        for i in 0..3 {
            assert!((rep[[0, i]] - rep[[0, 3 + i]]).abs() < 1e-14);
        }
    }

    #[test]
    fn reverse_is_involution() {
        let a = Array2::from_shape_fn((6, 2), |(i, j)| (i * 2 + j) as f64);
        let r = reverse_time(a.view(), 3);
        assert_eq!(r.row(0), a.row(4));
        assert_eq!(r.row(5), a.row(1));
        assert_eq!(reverse_time(r.view(), 3), a);
    }

    #[test]
    fn output_dims() {
        let mut r = rng(1);
        let uni = GruStack::new(5, 4, 2, Direction::Forward, 0.0, &mut r).unwrap();
        let bi = GruStack::new(5, 4, 2, Direction::Bidirectional, 0.0, &mut r).unwrap();
        let seq = Array3::zeros((3, 2, 5));
        assert_eq!(gru_sequence_forward(&uni, &seq, Mode::Eval).unwrap().dim(), (3, 4));
        assert_eq!(gru_sequence_forward(&bi, &seq, Mode::Eval).unwrap().dim(), (3, 8));
        assert_eq!(bi.bwd[1].input_dim(), 8);
        assert!(gru_sequence_forward(&bi, &Array3::zeros((3, 2, 4)), Mode::Eval).is_err());
        assert!(GruStack::new(5, 4, 2, Direction::Forward, 1.0, &mut r).is_err());
    }
}
