//! Camera feature tensors (the stand-in for object-detector feature maps).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `H x W x C` tensor stored row-major with channel fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self { dims, data: vec![0.0; dims.iter().product()] }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::Dimension(format!(
                "feature map {:?} needs {} values, got {}",
                dims,
                dims.iter().product::<usize>(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integrity("feature map holds non-finite values".into()));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flattened view, the input layout of every embedder.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[self.offset(row, col, ch)]
    }

    pub fn add(&mut self, row: usize, col: usize, ch: usize, v: f64) {
        let i = self.offset(row, col, ch);
        self.data[i] += v;
    }

    pub fn clip(&mut self, lo: f64, hi: f64) {
        self.data.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
    }

    /// Cell `(row, col, ch)` holding the largest value; first one on ties.
    pub fn argmax(&self) -> (usize, usize, usize) {
        let mut best = 0;
        for (i, v) in self.data.iter().enumerate() {
            if *v > self.data[best] {
                best = i;
            }
        }
        let [_, w, c] = self.dims;
        (best / (w * c), (best / c) % w, best % c)
    }

    fn offset(&self, row: usize, col: usize, ch: usize) -> usize {
        let [_, w, c] = self.dims;
        (row * w + col) * c + ch
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string(self)?;
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: FeatureMap = serde_json::from_str(&s)?;
        FeatureMap::from_vec(raw.dims, raw.data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_is_channel_fastest() {
        let mut f = FeatureMap::zeros([2, 3, 4]);
        f.add(1, 2, 3, 5.0);
        assert_eq!(f.as_slice()[(1 * 3 + 2) * 4 + 3], 5.0);
        assert_eq!(f.argmax(), (1, 2, 3));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(FeatureMap::from_vec([2, 2, 1], vec![0.0; 3]).is_err());
        assert!(FeatureMap::from_vec([1, 1, 1], vec![f64::NAN]).is_err());
    }
}
