//! Beam-sequence stability clustering (LOS-like / light NLOS-like / serious NLOS-like).

use serde::{Deserialize, Serialize};

use super::{Dataset, InstanceRecord};
use crate::error::{Error, Result};

/// Population standard deviation of the observed beam indices. Labels are
/// not included, so the value is available at inference time.
pub fn beam_std(record: &InstanceRecord) -> f64 {
    let n = record.beams.len() as f64;
    let mean = record.beams.iter().map(|&b| b as f64).sum::<f64>() / n;
    let var = record.beams.iter().map(|&b| (b as f64 - mean).powi(2)).sum::<f64>() / n;
    var.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub thresholds: (f64, f64),
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { thresholds: (0.0, 2.0) }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        let (t1, t2) = self.thresholds;
        if !(t1 >= 0.0 && t1 < t2) {
            return Err(Error::Config(format!("cluster thresholds need 0 <= t1 < t2, got ({t1}, {t2})")));
        }
        Ok(())
    }

    pub fn assign(&self, std: f64) -> StdCluster {
        let (t1, t2) = self.thresholds;
        if std <= t1 {
            StdCluster::A
        } else if std <= t2 {
            StdCluster::B
        } else {
            StdCluster::C
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StdCluster {
    /// `std <= t1`
    A,
    /// `t1 < std <= t2`
    B,
    /// `std > t2`
    C,
}

impl StdCluster {
    pub const ALL: [StdCluster; 3] = [StdCluster::A, StdCluster::B, StdCluster::C];

    pub fn letter(self) -> char {
        match self {
            StdCluster::A => 'A',
            StdCluster::B => 'B',
            StdCluster::C => 'C',
        }
    }
}

#[derive(Debug)]
pub struct Clusters {
    pub a: Dataset,
    pub b: Dataset,
    pub c: Dataset,
}

impl Clusters {
    pub fn get(&self, which: StdCluster) -> &Dataset {
        match which {
            StdCluster::A => &self.a,
            StdCluster::B => &self.b,
            StdCluster::C => &self.c,
        }
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.a.len(), self.b.len(), self.c.len()]
    }
}

pub fn cluster_by_std(d: &Dataset, cfg: &ClusterConfig) -> Result<Clusters> {
    cfg.validate()?;
    let mut parts: [Vec<InstanceRecord>; 3] = Default::default();
    for r in d.records() {
        let idx = cfg.assign(beam_std(r)) as usize;
        parts[idx].push(r.clone());
    }
    let [a, b, c] = parts;
    Ok(Clusters {
        a: d.select(format!("A({})", d.name), a)?,
        b: d.select(format!("B({})", d.name), b)?,
        c: d.select(format!("C({})", d.name), c)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::testutil::dataset;

    fn rec(beams: &[usize]) -> InstanceRecord {
        InstanceRecord {
            beams: beams.to_vec(),
            features: vec!["x".into(); beams.len()],
            labels: vec![0],
            user_id: "u".into(),
            t: 0,
        }
    }

    #[test]
    fn std_examples() {
        assert_eq!(beam_std(&rec(&[5; 8])), 0.0);
        assert!((beam_std(&rec(&[1, 2, 1, 2, 1, 2, 1, 2])) - 0.5).abs() < 1e-15);
        // mean 1, squared deviations 7*1 + 49 = 56, /8 = 7
        assert!((beam_std(&rec(&[0, 0, 0, 0, 0, 0, 0, 8])) - 7f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn boundaries() {
        let cfg = ClusterConfig::default();
        assert_eq!(cfg.assign(0.0), StdCluster::A);
        assert_eq!(cfg.assign(0.5), StdCluster::B);
        assert_eq!(cfg.assign(2.0), StdCluster::B);
        assert_eq!(cfg.assign(2.0000001), StdCluster::C);
        // [0,4,0,4,...] has std exactly 2
        assert_eq!(cfg.assign(beam_std(&rec(&[0, 4, 0, 4, 0, 4, 0, 4]))), StdCluster::B);
    }

    #[test]
    fn invalid_thresholds() {
        assert!(ClusterConfig { thresholds: (2.0, 2.0) }.validate().is_err());
        assert!(ClusterConfig { thresholds: (-1.0, 2.0) }.validate().is_err());
    }

    #[test]
    fn partition() {
        let d = dataset(
            "d",
            &[
                (&[3, 3, 3], &["a", "b", "c"], &[3]),
                (&[1, 2, 1], &["b", "c", "d"], &[1]),
                (&[0, 30, 9], &["d", "e", "f"], &[1]),
            ],
        );
        let c = cluster_by_std(&d, &ClusterConfig::default()).unwrap();
        assert_eq!(c.sizes(), [1, 1, 1]);
        assert_eq!(c.a.records()[0].beams, vec![3, 3, 3]);
        assert_eq!(c.c.records()[0].beams, vec![0, 30, 9]);
    }
}
