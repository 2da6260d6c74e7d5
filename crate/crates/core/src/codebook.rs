//! Beamforming codebooks and beam-index embedding.
//!
//! A codebook holds `Q` beamforming vectors of complex dimension `N`, stored
//! as real rows of length `2N` laid out as `[re_0 .. re_{N-1}, im_0 .. im_{N-1}]`.
//! Row `q` doubles as the embedding of beam index `q` fed to the sequence
//! models.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub type BeamIndex = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookKind {
    /// i.i.d. standard normal entries.
    Gaussian,
    /// Orthonormal rows obtained by orthogonalizing a seeded Gaussian matrix.
    Orthogonal,
    /// Unit-norm ULA steering vectors on a uniform grid in sine-space,
    /// ordered by angle. With `Q == N` this is a DFT basis.
    Steering,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodebookConfig {
    pub num_beams: usize,
    pub num_antennas: usize,
    pub kind: CodebookKind,
    pub seed: u64,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        Self { num_beams: 128, num_antennas: 128, kind: CodebookKind::Gaussian, seed: 0 }
    }
}

impl CodebookConfig {
    pub fn embedding_dim(&self) -> usize {
        2 * self.num_antennas
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_beams == 0 || self.num_antennas == 0 {
            return Err(Error::Config("codebook needs num_beams >= 1 and num_antennas >= 1".into()));
        }
        if self.kind == CodebookKind::Orthogonal && self.num_beams > self.embedding_dim() {
            return Err(Error::Dimension(format!(
                "orthogonal codebook with {} beams cannot fit in dimension {}",
                self.num_beams,
                self.embedding_dim()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    vectors: Array2<f64>,
    config: CodebookConfig,
}

#[derive(Serialize, Deserialize)]
struct CodebookFile {
    config: CodebookConfig,
    vectors: Vec<Vec<f64>>,
}

impl Codebook {
    pub fn generate(config: &CodebookConfig) -> Result<Self> {
        config.validate()?;
        let q = config.num_beams;
        let n = config.num_antennas;
        let vectors = match config.kind {
            CodebookKind::Gaussian => gaussian_matrix(q, 2 * n, config.seed),
            CodebookKind::Orthogonal => orthonormalize(gaussian_matrix(q, 2 * n, config.seed))?,
            CodebookKind::Steering => {
                let mut m = Array2::zeros((q, 2 * n));
                for (row, mut out) in m.outer_iter_mut().enumerate() {
                    let u = -1.0 + (2 * row + 1) as f64 / q as f64;
                    let v = steering_vector(u, n);
                    out.iter_mut().zip(v.iter()).for_each(|(o, x)| *o = x / (n as f64).sqrt());
                }
                m
            }
        };
        Ok(Self { vectors, config: config.clone() })
    }

    pub fn config(&self) -> &CodebookConfig {
        &self.config
    }

    pub fn num_beams(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn num_antennas(&self) -> usize {
        self.config.num_antennas
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn embed(&self, index: BeamIndex) -> Result<ArrayView1<'_, f64>> {
        if index >= self.num_beams() {
            return Err(Error::Index { index, len: self.num_beams() });
        }
        Ok(self.vectors.row(index))
    }

    /// Pointing direction (sine of the angle from broadside) of a steering beam.
    pub fn steering_direction(&self, index: BeamIndex) -> Option<f64> {
        (self.config.kind == CodebookKind::Steering && index < self.num_beams())
            .then(|| -1.0 + (2 * index + 1) as f64 / self.num_beams() as f64)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = CodebookFile {
            config: self.config.clone(),
            vectors: self.vectors.outer_iter().map(|r| r.to_vec()).collect(),
        };
        let s = serde_json::to_string(&file)?;
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: CodebookFile = serde_json::from_str(&s)?;
        file.config.validate()?;
        let rows = file.vectors.len();
        let dim = file.config.embedding_dim();
        if rows != file.config.num_beams || file.vectors.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension(format!(
                "codebook file holds {rows} rows, expected {} rows of length {dim}",
                file.config.num_beams
            )));
        }
        let flat: Vec<f64> = file.vectors.into_iter().flatten().collect();
        let vectors = Array2::from_shape_vec((rows, dim), flat)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Ok(Self { vectors, config: file.config })
    }
}

/// Unit-gain ULA steering vector (half-wavelength spacing) towards sine-direction `u`,
/// in the real-stacked layout.
pub fn steering_vector(u: f64, num_antennas: usize) -> Vec<f64> {
    let mut v = vec![0.0; 2 * num_antennas];
    for k in 0..num_antennas {
        let phase = PI * k as f64 * u;
        v[k] = phase.cos();
        v[num_antennas + k] = phase.sin();
    }
    v
}

/// `|f^H h|^2` for two vectors in the real-stacked complex layout.
pub fn beam_gain(f: ArrayView1<'_, f64>, h: &[f64]) -> f64 {
    let n = f.len() / 2;
    debug_assert_eq!(f.len(), h.len());
    let (mut re, mut im) = (0.0, 0.0);
    for k in 0..n {
        let (fr, fi) = (f[k], f[n + k]);
        let (hr, hi) = (h[k], h[n + k]);
        re += fr * hr + fi * hi;
        im += fr * hi - fi * hr;
    }
    re * re + im * im
}

fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = rng::rng(seed);
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(&mut rng))
}

/// Modified Gram-Schmidt with one re-orthogonalization pass.
fn orthonormalize(mut m: Array2<f64>) -> Result<Array2<f64>> {
    for i in 0..m.nrows() {
        for _pass in 0..2 {
            for j in 0..i {
                let proj = m.row(i).dot(&m.row(j));
                let prev = m.row(j).to_owned();
                m.row_mut(i).scaled_add(-proj, &prev);
            }
        }
        let norm = m.row(i).dot(&m.row(i)).sqrt();
        if norm < 1e-12 {
            return Err(Error::Dimension("rank-deficient matrix in orthogonalization".into()));
        }
        m.row_mut(i).mapv_inplace(|x| x / norm);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(q: usize, n: usize, kind: CodebookKind, seed: u64) -> CodebookConfig {
        CodebookConfig { num_beams: q, num_antennas: n, kind, seed }
    }

    #[test]
    fn default_gaussian_shape() {
        let cb = Codebook::generate(&cfg(128, 128, CodebookKind::Gaussian, 7)).unwrap();
        assert_eq!(cb.vectors().dim(), (128, 256));
    }

    fn assert_orthonormal(cb: &Codebook) {
        let g = cb.vectors().dot(&cb.vectors().t());
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g[[i, j]] - expect).abs() < 1e-9, "gram[{i},{j}] = {}", g[[i, j]]);
            }
        }
    }

    #[test]
    fn orthogonal_is_orthonormal() {
        let cb = Codebook::generate(&cfg(4, 2, CodebookKind::Orthogonal, 1)).unwrap();
        assert_eq!(cb.vectors().dim(), (4, 4));
        assert_orthonormal(&cb);
        let cb = Codebook::generate(&cfg(100, 64, CodebookKind::Orthogonal, 3)).unwrap();
        assert_orthonormal(&cb);
    }

    #[test]
    fn steering_with_q_equal_n_is_orthonormal() {
        let cb = Codebook::generate(&cfg(16, 16, CodebookKind::Steering, 0)).unwrap();
        assert_orthonormal(&cb);
        assert!(cb.steering_direction(0).unwrap() < cb.steering_direction(15).unwrap());
    }

    #[test]
    fn orthogonal_too_many_beams() {
        let err = Codebook::generate(&cfg(5, 2, CodebookKind::Orthogonal, 1)).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn zero_sizes_rejected() {
        assert!(Codebook::generate(&cfg(0, 2, CodebookKind::Gaussian, 1)).is_err());
        assert!(Codebook::generate(&cfg(2, 0, CodebookKind::Gaussian, 1)).is_err());
    }

    #[test]
    fn deterministic() {
        for kind in [CodebookKind::Gaussian, CodebookKind::Orthogonal, CodebookKind::Steering] {
            let c = cfg(32, 16, kind, 42);
            assert_eq!(Codebook::generate(&c).unwrap(), Codebook::generate(&c).unwrap());
        }
        let a = Codebook::generate(&cfg(8, 8, CodebookKind::Gaussian, 1)).unwrap();
        let b = Codebook::generate(&cfg(8, 8, CodebookKind::Gaussian, 2)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn gaussian_moments() {
        let cb = Codebook::generate(&cfg(128, 128, CodebookKind::Gaussian, 11)).unwrap();
        let v = cb.vectors();
        let n = v.len() as f64;
        let mean = v.sum() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn embed_lookup_and_bounds() {
        let cb = Codebook::generate(&cfg(10, 4, CodebookKind::Gaussian, 5)).unwrap();
        assert_eq!(cb.embed(0).unwrap(), cb.vectors().row(0));
        assert_eq!(cb.embed(9).unwrap(), cb.vectors().row(9));
        assert!(matches!(cb.embed(10), Err(Error::Index { index: 10, len: 10 })));
        for i in 0..10 {
            for j in (i + 1)..10 {
                assert_ne!(cb.embed(i).unwrap(), cb.embed(j).unwrap());
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.json");
        let cb = Codebook::generate(&cfg(6, 3, CodebookKind::Orthogonal, 9)).unwrap();
        cb.save_json(&path).unwrap();
        assert_eq!(Codebook::load_json(&path).unwrap(), cb);
    }

    #[test]
    fn beam_gain_is_phase_invariant() {
        let n = 8;
        let a = steering_vector(0.3, n);
        let f = ndarray::Array1::from(a.clone());
        // rotate h by a common phase
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        let mut h = vec![0.0; 2 * n];
        for k in 0..n {
            h[k] = c * a[k] - s * a[n + k];
            h[n + k] = s * a[k] + c * a[n + k];
        }
        let g = beam_gain(f.view(), &h);
        assert!((g - (n * n) as f64).abs() < 1e-9);
    }
}
