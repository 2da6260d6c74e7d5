use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal-component projection fitted on mean-centred data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `k x d`, orthonormal rows.
    pub components: Array2<f64>,
    /// Variance captured by each component (population normalisation),
    /// non-increasing.
    pub explained_variance: Array1<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum SvdRoute {
    /// Factorise the centred `n x d` data directly.
    Data,
    /// Factorise the `d x d` scatter matrix; its singular vectors are the
    /// right singular vectors of the data.
    Scatter,
}

const DIRECT_SVD_BUDGET: f64 = 1e8;

fn choose_route(n: usize, d: usize) -> SvdRoute {
    let cost = n as f64 * d as f64 * n.min(d) as f64;
    if cost <= DIRECT_SVD_BUDGET || n < d {
        SvdRoute::Data
    } else {
        SvdRoute::Scatter
    }
}

fn to_dmatrix(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn pca_fit(x: ArrayView2<'_, f64>, k: usize) -> Result<PcaModel> {
    pca_fit_via(x, k, choose_route(x.nrows(), x.ncols()))
}

pub(crate) fn pca_fit_via(x: ArrayView2<'_, f64>, k: usize, route: SvdRoute) -> Result<PcaModel> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::Dimension(format!("pca needs at least 2 samples, got {n}")));
    }
    if k == 0 || k > n.min(d) {
        return Err(Error::Dimension(format!("pca k = {k} outside [1, {}]", n.min(d))));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Dimension("pca input contains non-finite values".into()));
    }
    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let centred = &x - &mean;
    // (variance, d-vector) pairs
    let mut pairs: Vec<(f64, Vec<f64>)> = match route {
        SvdRoute::Data => {
            let svd = to_dmatrix(centred.view()).svd(false, true);
            let vt = svd.v_t.expect("requested v_t");
            svd.singular_values
                .iter()
                .enumerate()
                .map(|(i, s)| (s * s / n as f64, vt.row(i).iter().copied().collect()))
                .collect()
        }
        SvdRoute::Scatter => {
            let scatter = centred.t().dot(&centred);
            let svd = to_dmatrix(scatter.view()).svd(true, false);
            let u = svd.u.expect("requested u");
            svd.singular_values
                .iter()
                .enumerate()
                .map(|(i, s)| (s / n as f64, u.column(i).iter().copied().collect()))
                .collect()
        }
    };
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut components = Array2::zeros((k, d));
    let mut explained = Array1::zeros(k);
    for (i, (var, mut v)) in pairs.into_iter().take(k).enumerate() {
        let lead = v.iter().enumerate().fold(0, |best, (j, x)| if x.abs() > v[best].abs() { j } else { best });
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.row_mut(i).assign(&ArrayView1::from(&v));
        explained[i] = var;
    }
    Ok(PcaModel { mean, components, explained_variance: explained })
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn dim(&self) -> usize {
        self.components.nrows()
    }

    fn check(&self, got: usize, want: usize, what: &str) -> Result<()> {
        if got != want {
            return Err(Error::Dimension(format!("pca {what} expects length {want}, got {got}")));
        }
        Ok(())
    }

    /// `components . (x - mean)`
    pub fn embed(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check(x.len(), self.input_dim(), "embed")?;
        Ok(self.components.dot(&(&x - &self.mean)))
    }

    /// `components^T . z + mean`
    pub fn reconstruct(&self, z: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check(z.len(), self.dim(), "reconstruct")?;
        Ok(self.components.t().dot(&z) + &self.mean)
    }

    /// Row-wise embedding of an `n x d` matrix.
    pub fn embed_matrix(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check(x.ncols(), self.input_dim(), "embed")?;
        Ok((&x - &self.mean).dot(&self.components.t()))
    }

    /// Mean squared reconstruction error per sample.
    pub fn reconstruction_error(&self, x: ArrayView2<'_, f64>) -> Result<f64> {
        let z = self.embed_matrix(x)?;
        let back = z.dot(&self.components) + &self.mean;
        Ok((&x - &back).iter().map(|v| v * v).sum::<f64>() / x.nrows() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;
    use ndarray::array;
    use rand_distr::{Distribution, StandardNormal};

    fn cloud(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut r = rng(seed);
        let scales: Vec<f64> = (0..d).map(|j| 1.0 + j as f64).collect();
        Array2::from_shape_fn((n, d), |(_, j)| {
            let v: f64 = StandardNormal.sample(&mut r);
            v * scales[j] + 0.3 * j as f64
        })
    }

    #[test]
    fn line_through_origin() {
        let u = array![0.6, -0.8, 0.0];
        let x = Array2::from_shape_fn((7, 3), |(i, j)| (i as f64 - 2.5) * u[j]);
        let m = pca_fit(x.view(), 1).unwrap();
        let c = m.components.row(0);
        assert!((c.dot(&u).abs() - 1.0).abs() < 1e-12);
        // sign convention: largest-magnitude entry (-0.8) made positive
        assert!(c[1] > 0.0);
        assert!(m.reconstruction_error(x.view()).unwrap() < 1e-18);
    }

    #[test]
    fn full_rank_is_lossless() {
        let x = cloud(30, 5, 1);
        for route in [SvdRoute::Data, SvdRoute::Scatter] {
            let m = pca_fit_via(x.view(), 5, route).unwrap();
            for row in x.rows() {
                let back = m.reconstruct(m.embed(row).unwrap().view()).unwrap();
                assert!(back.iter().zip(row).all(|(a, b)| (a - b).abs() < 1e-9));
            }
        }
    }

    #[test]
    fn routes_agree() {
        let x = cloud(200, 6, 2);
        let a = pca_fit_via(x.view(), 4, SvdRoute::Data).unwrap();
        let b = pca_fit_via(x.view(), 4, SvdRoute::Scatter).unwrap();
        assert!((&a.components - &b.components).iter().all(|v| v.abs() < 1e-8));
        assert!((&a.explained_variance - &b.explained_variance).iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn affine_examples() {
        let x = cloud(50, 4, 3);
        let m = pca_fit(x.view(), 2).unwrap();
        assert!(m.embed(m.mean.view()).unwrap().iter().all(|v| v.abs() < 1e-14));
        let zero = m.embed(Array1::zeros(4).view()).unwrap();
        let want = -m.components.dot(&m.mean);
        assert!((&zero - &want).iter().all(|v| v.abs() < 1e-14));
        // a point in the span round-trips
        let p = m.reconstruct(array![1.5, -2.0].view()).unwrap();
        let back = m.reconstruct(m.embed(p.view()).unwrap().view()).unwrap();
        assert!((&p - &back).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn error_non_increasing_in_k() {
        let x = cloud(80, 6, 4);
        let errs: Vec<f64> = [1, 2, 4].iter().map(|&k| pca_fit(x.view(), k).unwrap().reconstruction_error(x.view()).unwrap()).collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{errs:?}");
    }

    #[test]
    fn range_errors() {
        let x = cloud(5, 3, 5);
        assert!(pca_fit(x.view(), 0).is_err());
        assert!(pca_fit(x.view(), 4).is_err());
        assert!(pca_fit(x.slice(ndarray::s![..1, ..]), 1).is_err());
        let m = pca_fit(x.view(), 2).unwrap();
        assert!(m.embed(array![1.0, 2.0].view()).is_err());
        assert!(m.reconstruct(array![1.0].view()).is_err());
    }

    #[test]
    fn isotropic_variances_close() {
        let mut r = rng(6);
        let x = Array2::from_shape_simple_fn((10_000, 3), || StandardNormal.sample(&mut r));
        let m = pca_fit(x.view(), 3).unwrap();
        let v = &m.explained_variance;
        assert!(v[0] >= v[1] && v[1] >= v[2]);
        assert!(v[0] / v[2] < 1.1, "{v}");
    }
}
