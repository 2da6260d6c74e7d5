//! Beam-prediction scoring: exponentially penalized absolute index error over
//! the next `m` steps, the weighted TotalScore, and cluster aggregation.

use serde::{Deserialize, Serialize};

use crate::codebook::BeamIndex;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    /// Penalization factor; larger values forgive index errors more.
    pub sigma: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self { sigma: 5.0 }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub score_1: f64,
    pub score_3: f64,
    pub score_5: f64,
    pub total: f64,
    pub sigma: f64,
    pub n_instances: usize,
}

impl ScoreReport {
    pub fn from_scores(score_1: f64, score_3: f64, score_5: f64, sigma: f64, n_instances: usize) -> Self {
        Self { score_1, score_3, score_5, total: total_score(score_1, score_3, score_5), sigma, n_instances }
    }

    /// Score the first 1, 3 and 5 steps of each prediction.
    pub fn compute<P, T>(preds: &[P], truths: &[T], cfg: &ScoringConfig) -> Result<Self>
    where
        P: AsRef<[BeamIndex]>,
        T: AsRef<[BeamIndex]>,
    {
        Ok(Self::from_scores(
            score_m(preds, truths, 1, cfg)?,
            score_m(preds, truths, 3, cfg)?,
            score_m(preds, truths, 5, cfg)?,
            cfg.sigma,
            preds.len(),
        ))
    }
}

/// Mean over instances of `exp(-(1/(m*sigma)) * sum_{k<m} |pred_k - truth_k|)`.
///
/// Only the first `m` entries of each prediction and truth are used; rows
/// shorter than `m` are rejected.
pub fn score_m<P, T>(preds: &[P], truths: &[T], m: usize, cfg: &ScoringConfig) -> Result<f64>
where
    P: AsRef<[BeamIndex]>,
    T: AsRef<[BeamIndex]>,
{
    cfg.validate()?;
    if m == 0 {
        return Err(Error::Contract("score horizon m must be >= 1".into()));
    }
    if preds.len() != truths.len() {
        return Err(Error::Contract(format!("{} predictions vs {} truths", preds.len(), truths.len())));
    }
    if preds.is_empty() {
        return Err(Error::Contract("cannot score zero instances".into()));
    }
    let mut acc = 0.0;
    for (i, (p, t)) in preds.iter().zip(truths).enumerate() {
        let (p, t) = (p.as_ref(), t.as_ref());
        if p.len() < m || t.len() < m {
            return Err(Error::Contract(format!(
                "instance {i}: need {m} steps, got {} predicted / {} true",
                p.len(),
                t.len()
            )));
        }
        let err: usize = p[..m].iter().zip(&t[..m]).map(|(a, b)| a.abs_diff(*b)).sum();
        acc += (-(err as f64) / (m as f64 * cfg.sigma)).exp();
    }
    Ok(acc / preds.len() as f64)
}

pub fn total_score(s1: f64, s3: f64, s5: f64) -> f64 {
    (s1 + 3.0 * s3 + 5.0 * s5) / 9.0
}

/// Cardinality-weighted mean of per-cluster scores.
pub fn weighted_cluster_score(scores: &[f64], cardinalities: &[usize]) -> Result<f64> {
    if scores.len() != cardinalities.len() {
        return Err(Error::Contract(format!(
            "{} scores vs {} cardinalities",
            scores.len(),
            cardinalities.len()
        )));
    }
    let total: usize = cardinalities.iter().sum();
    if total == 0 {
        return Err(Error::Contract("total cluster cardinality is zero".into()));
    }
    let num: f64 = scores.iter().zip(cardinalities).map(|(s, &n)| s * n as f64).sum();
    Ok(num / total as f64)
}

/// Cardinality-weighted combination of per-cluster reports.
pub fn weighted_report(reports: &[ScoreReport]) -> Result<ScoreReport> {
    let n: Vec<usize> = reports.iter().map(|r| r.n_instances).collect();
    let pick = |f: fn(&ScoreReport) -> f64| -> Result<f64> {
        weighted_cluster_score(&reports.iter().map(f).collect::<Vec<_>>(), &n)
    };
    let sigma = reports.first().map(|r| r.sigma).unwrap_or(ScoringConfig::default().sigma);
    Ok(ScoreReport::from_scores(
        pick(|r| r.score_1)?,
        pick(|r| r.score_3)?,
        pick(|r| r.score_5)?,
        sigma,
        n.iter().sum(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(sigma: f64) -> ScoringConfig {
        ScoringConfig { sigma }
    }

    #[test]
    fn exact_predictions_score_one() {
        let p = vec![vec![1, 2, 3], vec![4, 5, 6]];
        for m in 1..=3 {
            assert_eq!(score_m(&p, &p, m, &cfg(0.7)).unwrap(), 1.0);
        }
    }

    #[test]
    fn one_sigma_error() {
        let s = score_m(&[vec![10]], &[vec![15]], 1, &cfg(5.0)).unwrap();
        assert!((s - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn two_instances_hand_value() {
        // abs-error sums 0 and 4 with m = 2, sigma = 1: (1 + e^-2) / 2
        let preds = vec![vec![3, 3], vec![0, 0]];
        let truth = vec![vec![3, 3], vec![2, 2]];
        let s = score_m(&preds, &truth, 2, &cfg(1.0)).unwrap();
        assert!((s - 0.567_667_641_618_306_3).abs() < 1e-12, "{s}");
    }

    #[test]
    fn contract_errors() {
        assert!(score_m(&[vec![1]], &[vec![1], vec![2]], 1, &cfg(1.0)).is_err());
        assert!(score_m(&[vec![1]], &[vec![1]], 2, &cfg(1.0)).is_err());
        assert!(score_m(&[vec![1]], &[vec![1]], 0, &cfg(1.0)).is_err());
        assert!(score_m(&[vec![1]], &[vec![1]], 1, &cfg(0.0)).is_err());
    }

    #[test]
    fn total_score_examples() {
        assert!((total_score(0.797, 0.635, 0.541) - 0.6008).abs() < 1e-4);
        assert!((total_score(0.862, 0.642, 0.517) - 0.5970).abs() < 1e-4);
        assert_eq!(total_score(1.0, 1.0, 1.0), 1.0);
    }

    #[test]
    fn weighted_examples() {
        assert!((weighted_cluster_score(&[0.5, 0.3], &[100, 300]).unwrap() - 0.35).abs() < 1e-15);
        assert!((weighted_cluster_score(&[0.4, 0.4, 0.4], &[1, 2, 3]).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(weighted_cluster_score(&[0.9], &[7]).unwrap(), 0.9);
        assert!(weighted_cluster_score(&[0.9], &[0]).is_err());
        assert!(weighted_cluster_score(&[0.9, 0.1], &[1]).is_err());
    }

    #[test]
    fn report_total_identity() {
        let preds = vec![vec![1, 2, 3, 4, 5], vec![9, 9, 9, 9, 9]];
        let truth = vec![vec![1, 2, 4, 4, 8], vec![9, 8, 7, 6, 5]];
        let r = ScoreReport::compute(&preds, &truth, &ScoringConfig::default()).unwrap();
        assert!((r.total - (r.score_1 + 3.0 * r.score_3 + 5.0 * r.score_5) / 9.0).abs() < 1e-12);
        assert_eq!(r.n_instances, 2);
    }
}
