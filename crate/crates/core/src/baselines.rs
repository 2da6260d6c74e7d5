//! Beam-only, non-learned predictors: last-step repetition, least-squares
//! extrapolation and draws from the training beam distribution.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codebook::BeamIndex;
use crate::dataset::{Dataset, InstanceRecord};
use crate::error::{Error, Result};
use crate::rng;

pub fn last_step_predict(record: &InstanceRecord, m: usize) -> Vec<BeamIndex> {
    vec![record.last_beam(); m]
}

/// OLS line through `(k, beams[k])`, evaluated at `k = tau .. tau+m-1`,
/// rounded half away from zero and clamped to `[0, num_beams-1]`.
pub fn linreg_predict(record: &InstanceRecord, m: usize, num_beams: usize) -> Vec<BeamIndex> {
    let n = record.beams.len();
    let nf = n as f64;
    let x_mean = (nf - 1.0) / 2.0;
    let y_mean = record.beams.iter().map(|&b| b as f64).sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, &b) in record.beams.iter().enumerate() {
        let dx = k as f64 - x_mean;
        sxy += dx * (b as f64 - y_mean);
        sxx += dx * dx;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let max = num_beams.saturating_sub(1) as f64;
    (n..n + m)
        .map(|k| {
            let y = y_mean + slope * (k as f64 - x_mean);
            y.round().clamp(0.0, max) as BeamIndex
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct BeamDistribution {
    probs: Vec<f64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDistribution {
    probs: Vec<f64>,
}

impl TryFrom<RawDistribution> for BeamDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        BeamDistribution::new(raw.probs)
    }
}

impl BeamDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Contract(format!(
                "beam distribution needs non-negative entries summing to 1 (sum = {sum})"
            )));
        }
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { probs, cdf })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Inverse-CDF draw.
    pub fn sample(&self, rng: &mut impl rand::Rng) -> BeamIndex {
        let u: f64 = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        let i = self.cdf.partition_point(|&c| c <= u);
        // skip zero-probability tails that rounding could land on
        let i = i.min(self.probs.len() - 1);
        if self.probs[i] > 0.0 {
            i
        } else {
            (0..=i).rev().find(|&j| self.probs[j] > 0.0).unwrap_or(i)
        }
    }
}

/// Empirical frequency of each index over every observed column of `d`.
pub fn fit_beam_distribution(d: &Dataset, num_beams: usize) -> Result<BeamDistribution> {
    if d.is_empty() {
        return Err(Error::Contract("cannot fit a beam distribution on an empty dataset".into()));
    }
    let mut counts = vec![0usize; num_beams];
    let mut total = 0usize;
    for r in d.records() {
        for &b in &r.beams {
            *counts.get_mut(b).ok_or(Error::Index { index: b, len: num_beams })? += 1;
            total += 1;
        }
    }
    BeamDistribution::new(counts.into_iter().map(|c| c as f64 / total as f64).collect())
}

/// `m` i.i.d. draws from `dist`.
pub fn statistical_predict(dist: &BeamDistribution, m: usize, seed: u64) -> Vec<BeamIndex> {
    let mut rng = rng::rng(seed);
    (0..m).map(|_| dist.sample(&mut rng)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    LastStep,
    LinearRegression,
    Statistical,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::LastStep, Baseline::LinearRegression, Baseline::Statistical];

    pub fn label(self) -> &'static str {
        match self {
            Baseline::LastStep => "Last-step repetition",
            Baseline::LinearRegression => "Linear regression",
            Baseline::Statistical => "Statistical baseline",
        }
    }
}

/// Predictions for every record of `val`. The statistical baseline is fitted
/// on `train` and draws per record from a record-indexed sub-seed.
pub fn predict_dataset(
    which: Baseline,
    train: &Dataset,
    val: &Dataset,
    m: usize,
    num_beams: usize,
    seed: u64,
) -> Result<Vec<Vec<BeamIndex>>> {
    Ok(match which {
        Baseline::LastStep => val.records().iter().map(|r| last_step_predict(r, m)).collect(),
        Baseline::LinearRegression => {
            val.records().iter().map(|r| linreg_predict(r, m, num_beams)).collect()
        }
        Baseline::Statistical => {
            let dist = fit_beam_distribution(train, num_beams)?;
            (0..val.len())
                .map(|i| statistical_predict(&dist, m, rng::derive_seed(seed, i as u64)))
                .collect()
        }
    })
}

/// CSV with columns `instance, pred_1 .. pred_m`.
pub fn write_predictions_csv(preds: &[Vec<BeamIndex>], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    let m = preds.first().map_or(0, Vec::len);
    let header: Vec<String> =
        std::iter::once("instance".to_string()).chain((1..=m).map(|k| format!("pred_{k}"))).collect();
    writeln!(out, "{}", header.join(",")).expect("write to vec");
    for (i, p) in preds.iter().enumerate() {
        let cells: Vec<String> = std::iter::once(i.to_string()).chain(p.iter().map(|b| b.to_string())).collect();
        writeln!(out, "{}", cells.join(",")).expect("write to vec");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_predictions_csv(path: &Path) -> Result<Vec<Vec<BeamIndex>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let preds = row
            .iter()
            .skip(1)
            .map(|c| c.parse::<BeamIndex>().map_err(|e| Error::Parse { row: i + 1, msg: e.to_string() }))
            .collect::<Result<Vec<_>>>()?;
        out.push(preds);
    }
    Ok(out)
}
