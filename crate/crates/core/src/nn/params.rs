use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform access to a model's trainable tensors as flat slices.
///
/// `named` and `slices_mut` must enumerate tensors in the same order. Gradients
/// are represented by a value of the same type, so the optimizer and the
/// gradient checker can pair parameters and gradients slice by slice.
pub trait Parameters {
    fn named(&self) -> Vec<(String, Vec<usize>, &[f64])>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.named().iter().map(|(_, _, s)| s.len()).sum()
    }

    fn grad_norm(&self) -> f64 {
        self.named().iter().flat_map(|(_, _, s)| s.iter()).map(|g| g * g).sum::<f64>().sqrt()
    }

    fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// `self += alpha * other` for a same-shaped value (typically a gradient).
    fn add_scaled(&mut self, other: &Self, alpha: f64)
    where
        Self: Sized,
    {
        let src = other.named();
        for (dst, (_, _, s)) in self.slices_mut().into_iter().zip(src) {
            dst.iter_mut().zip(s).for_each(|(d, v)| *d += alpha * v);
        }
    }

    fn export(&self) -> Vec<NamedTensor> {
        self.named()
            .into_iter()
            .map(|(name, shape, data)| NamedTensor { name, shape, data: data.to_vec() })
            .collect()
    }

    /// Overwrite every tensor from an export of an identically shaped model.
    fn import(&mut self, tensors: &[NamedTensor]) -> Result<()> {
        let expected: Vec<(String, Vec<usize>)> =
            self.named().into_iter().map(|(n, s, _)| (n, s)).collect();
        if expected.len() != tensors.len() {
            return Err(Error::Checkpoint(format!(
                "model has {} tensors, checkpoint has {}",
                expected.len(),
                tensors.len()
            )));
        }
        for ((name, shape), t) in expected.iter().zip(tensors) {
            if *name != t.name || *shape != t.shape {
                return Err(Error::Checkpoint(format!(
                    "tensor mismatch: model {name} {shape:?} vs checkpoint {} {:?}",
                    t.name, t.shape
                )));
            }
        }
        for (dst, t) in self.slices_mut().into_iter().zip(tensors) {
            dst.copy_from_slice(&t.data);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// `std` layout slices of an owned ndarray.
pub(crate) fn flat<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("parameters are stored in standard layout")
}

pub(crate) fn flat_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are stored in standard layout")
}

pub(crate) fn prefixed<'a>(
    prefix: &str,
    items: Vec<(String, Vec<usize>, &'a [f64])>,
) -> Vec<(String, Vec<usize>, &'a [f64])> {
    items.into_iter().map(|(n, s, d)| (format!("{prefix}.{n}"), s, d)).collect()
}
