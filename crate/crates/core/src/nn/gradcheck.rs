//! Central finite-difference check of analytic gradients.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::gru::Mode;
use super::model::Model;
use crate::error::Result;
use crate::rng::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub step: f64,
    pub min_coords: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { step: 1e-5, min_coords: 200, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordCheck {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
    pub worst: Option<CoordCheck>,
    /// Largest relative error per tensor that had coordinates sampled.
    pub per_tensor: Vec<(String, f64)>,
}

pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Spread `total` samples over tensors of the given sizes, at least one per
/// non-empty tensor, never more than a tensor holds.
fn quotas(sizes: &[usize], total: usize) -> Vec<usize> {
    let nonempty = sizes.iter().filter(|&&s| s > 0).count().max(1);
    let base = total.div_ceil(nonempty);
    let mut q: Vec<usize> = sizes.iter().map(|&s| s.min(base)).collect();
    let mut have: usize = q.iter().sum();
    while have < total {
        let mut grew = false;
        for (qi, &s) in q.iter_mut().zip(sizes) {
            if have < total && *qi < s {
                *qi += 1;
                have += 1;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    q
}

pub fn grad_check<M: Model>(model: &M, batch: &M::Batch, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    grad_check_with(model, batch, cfg, |_| {})
}

/// As [`grad_check`], applying `tamper` to the analytic gradient first. Used
/// to confirm that a planted fault is detected.
pub fn grad_check_with<M: Model>(
    model: &M,
    batch: &M::Batch,
    cfg: &GradCheckConfig,
    tamper: impl FnOnce(&mut M),
) -> Result<GradCheckReport> {
    let (_, mut grad) = model.loss_and_grad(batch, Mode::Eval)?;
    tamper(&mut grad);
    let names: Vec<(String, usize)> = model.named().into_iter().map(|(n, _, s)| (n, s.len())).collect();
    let grads: Vec<Vec<f64>> = grad.named().into_iter().map(|(_, _, s)| s.to_vec()).collect();
    let sizes: Vec<usize> = names.iter().map(|(_, n)| *n).collect();
    let quota = quotas(&sizes, cfg.min_coords);
    let mut r = rng(cfg.seed);
    let mut work = model.clone();
    let mut report = GradCheckReport { max_rel_error: 0.0, coords_checked: 0, worst: None, per_tensor: Vec::new() };
    for (ti, ((name, size), &k)) in names.iter().zip(&quota).enumerate() {
        if k == 0 {
            continue;
        }
        let mut idx: Vec<usize> = sample(&mut r, *size, k).into_vec();
        idx.sort_unstable();
        let mut tensor_max = 0.0f64;
        for ci in idx {
            let orig = work.slices_mut()[ti][ci];
            work.slices_mut()[ti][ci] = orig + cfg.step;
            let plus = work.loss(batch)?;
            work.slices_mut()[ti][ci] = orig - cfg.step;
            let minus = work.loss(batch)?;
            work.slices_mut()[ti][ci] = orig;
            let numeric = (plus - minus) / (2.0 * cfg.step);
            let analytic = grads[ti][ci];
            let err = rel_error(analytic, numeric);
            tensor_max = tensor_max.max(err);
            report.coords_checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some(CoordCheck { tensor: name.clone(), index: ci, analytic, numeric, rel_error: err });
            }
        }
        report.per_tensor.push((name.clone(), tensor_max));
    }
    Ok(report)
}
