use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train_predictor, InputMode, PipelineConfig, SequenceModel, TrainedPredictor};
use crate::dataset::{cluster_by_std, leakage_between, union, ClusterConfig, Clusters, Dataset, StdCluster};
use crate::embedding::EmbedderKind;
use crate::error::{Error, Result};
use crate::metrics::{weighted_report, ScoreReport};

/// Fails with [`Error::Leakage`] if the two datasets share any image.
pub fn guard_disjoint(train: &Dataset, val: &Dataset) -> Result<()> {
    let ids = leakage_between(train, val);
    if ids.is_empty() {
        Ok(())
    } else {
        Err(Error::Leakage { ids })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: usize,
    pub report: ScoreReport,
}

/// Trains and scores one predictor per memory length. Both datasets are
/// truncated to their most recent `tau` observations.
pub fn run_memory_sweep(train: &Dataset, val: &Dataset, cfg: &PipelineConfig, taus: &[usize]) -> Result<Vec<SweepRow>> {
    guard_disjoint(train, val)?;
    if taus.is_empty() {
        return Err(Error::Config("memory sweep needs at least one tau".into()));
    }
    taus.par_iter()
        .map(|&tau| {
            let cfg = PipelineConfig { tau, ..cfg.clone() };
            let (t, v) = (train.truncated(tau)?, val.truncated(tau)?);
            let model = train_predictor(&t, &cfg)?;
            Ok(SweepRow { tau, report: model.evaluate(&v, &cfg.scoring)? })
        })
        .collect()
}

/// Union of std clusters, written `A`, `A+B`, or `D` for all three.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SubsetExpr(BTreeSet<StdCluster>);

impl SubsetExpr {
    pub fn all() -> Self {
        Self(StdCluster::ALL.into_iter().collect())
    }

    pub fn single(c: StdCluster) -> Self {
        Self(BTreeSet::from([c]))
    }

    pub fn clusters(&self) -> &BTreeSet<StdCluster> {
        &self.0
    }

    pub fn as_single(&self) -> Option<StdCluster> {
        (self.0.len() == 1).then(|| *self.0.iter().next().expect("one element"))
    }

    pub fn is_all(&self) -> bool {
        self.0.len() == StdCluster::ALL.len()
    }

    fn resolve(&self, whole: &Dataset, parts: &Clusters, suffix: &str) -> Result<Dataset> {
        if self.is_all() {
            return Ok(whole.clone());
        }
        let mut d = union(format!("{self}_{suffix}"), self.0.iter().map(|&c| parts.get(c)))?;
        d.name = format!("{self}_{suffix}");
        Ok(d)
    }
}

impl fmt::Display for SubsetExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_all() {
            return f.write_str("D");
        }
        let letters: Vec<String> = self.0.iter().map(|c| c.letter().to_string()).collect();
        f.write_str(&letters.join("+"))
    }
}

impl FromStr for SubsetExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut set = BTreeSet::new();
        for part in s.split(['+', ',']).map(str::trim) {
            match part.trim_end_matches("_t").trim_end_matches("_v") {
                "A" => set.insert(StdCluster::A),
                "B" => set.insert(StdCluster::B),
                "C" => set.insert(StdCluster::C),
                "D" => {
                    set.extend(StdCluster::ALL);
                    true
                }
                _ => return Err(Error::Config(format!("unknown subset {part:?} in {s:?}; use A, B, C or D joined by '+'"))),
            };
        }
        Ok(Self(set))
    }
}

impl TryFrom<String> for SubsetExpr {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SubsetExpr> for String {
    fn from(e: SubsetExpr) -> String {
        e.to_string()
    }
}

fn default_modes() -> Vec<InputMode> {
    vec![InputMode::BeamOnly, InputMode::Concat]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub train: SubsetExpr,
    pub val: SubsetExpr,
    #[serde(default = "default_modes")]
    pub modes: Vec<InputMode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentPlan {
    pub cluster: ClusterConfig,
    pub rows: Vec<PlanRow>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        let row = |train: &str, val: &str| PlanRow {
            train: train.parse().expect("static subset"),
            val: val.parse().expect("static subset"),
            modes: default_modes(),
        };
        Self {
            cluster: ClusterConfig::default(),
            rows: vec![
                row("A", "A"),
                row("D", "A"),
                row("B", "B"),
                row("A+B", "B"),
                row("D", "B"),
                row("C", "C"),
                row("B+C", "C"),
                row("D", "C"),
            ],
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        self.cluster.validate()?;
        if self.rows.is_empty() {
            return Err(Error::Config("experiment plan has no rows".into()));
        }
        for (i, r) in self.rows.iter().enumerate() {
            if r.train.clusters().is_empty() || r.val.clusters().is_empty() || r.modes.is_empty() {
                return Err(Error::Config(format!("plan row {i} needs a train subset, a validation subset and a mode")));
            }
        }
        Ok(())
    }

    /// Distinct `(train subset, mode)` pairs in order of first appearance.
    fn jobs(&self) -> Vec<(SubsetExpr, InputMode)> {
        let mut out: Vec<(SubsetExpr, InputMode)> = Vec::new();
        for r in &self.rows {
            for &m in &r.modes {
                if !out.iter().any(|(t, mm)| *t == r.train && *mm == m) {
                    out.push((r.train.clone(), m));
                }
            }
        }
        out
    }
}

/// `base` adjusted for one input mode: no embedder for beam-only input, a
/// uni-GRU for staggered input.
pub fn mode_config(base: &PipelineConfig, mode: InputMode) -> PipelineConfig {
    let mut cfg = PipelineConfig { input_mode: mode, ..base.clone() };
    match mode {
        InputMode::BeamOnly => {
            cfg.embedder = EmbedderKind::None;
            cfg.embed_dim = None;
        }
        InputMode::Staggered | InputMode::Concat => {
            if cfg.embedder == EmbedderKind::None {
                cfg.embedder = EmbedderKind::Pca;
            }
            if mode == InputMode::Staggered {
                cfg.sequence_model = SequenceModel::UniGru;
            }
        }
    }
    cfg
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub train: SubsetExpr,
    pub val: SubsetExpr,
    pub n_train: usize,
    pub n_val: usize,
    /// `None` when the validation subset is empty.
    pub reports: BTreeMap<InputMode, Option<ScoreReport>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterAggregate {
    pub mode: InputMode,
    /// For each validation cluster, the plan row with the best Score_5.
    pub picks: Vec<(StdCluster, usize)>,
    /// Cardinality-weighted combination of the picked rows.
    pub report: ScoreReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterTable {
    pub train_sizes: [usize; 3],
    pub val_sizes: [usize; 3],
    pub rows: Vec<ClusterRow>,
    pub aggregates: Vec<ClusterAggregate>,
    /// Score of the model trained on all of `D_t` over the whole validation
    /// set, per mode, when the plan trains such a model.
    pub unclustered: BTreeMap<InputMode, ScoreReport>,
}

/// Trains one model per distinct `(train subset, mode)` of the plan, scores
/// every row, and aggregates the best row per validation cluster.
pub fn run_cluster_experiment(
    train: &Dataset,
    val: &Dataset,
    plan: &ExperimentPlan,
    base: &PipelineConfig,
) -> Result<ClusterTable> {
    plan.validate()?;
    guard_disjoint(train, val)?;
    let (tc, vc) = (cluster_by_std(train, &plan.cluster)?, cluster_by_std(val, &plan.cluster)?);
    let jobs = plan.jobs();
    let trained: Vec<TrainedPredictor> = jobs
        .par_iter()
        .map(|(subset, mode)| {
            let d = subset.resolve(train, &tc, "t")?;
            if d.is_empty() {
                return Err(Error::Config(format!("training subset {subset} is empty")));
            }
            let cfg = mode_config(base, *mode);
            log::info!("training {subset} with {mode:?} input on {} instances", d.len());
            train_predictor(&d, &cfg)
        })
        .collect::<Result<_>>()?;
    let model_for = |subset: &SubsetExpr, mode: InputMode| -> &TrainedPredictor {
        let i = jobs.iter().position(|(t, m)| t == subset && *m == mode).expect("job exists for every row");
        &trained[i]
    };

    let mut rows = Vec::with_capacity(plan.rows.len());
    for r in &plan.rows {
        let v = r.val.resolve(val, &vc, "v")?;
        let mut reports = BTreeMap::new();
        for &mode in &r.modes {
            let rep = if v.is_empty() { None } else { Some(model_for(&r.train, mode).evaluate(&v, &base.scoring)?) };
            reports.insert(mode, rep);
        }
        let n_train = r.train.resolve(train, &tc, "t")?.len();
        rows.push(ClusterRow { train: r.train.clone(), val: r.val.clone(), n_train, n_val: v.len(), reports });
    }

    let mut modes: Vec<InputMode> = jobs.iter().map(|(_, m)| *m).collect();
    modes.sort();
    modes.dedup();
    let mut aggregates = Vec::new();
    let mut unclustered = BTreeMap::new();
    for mode in modes {
        if let Some(agg) = aggregate(&rows, mode)? {
            aggregates.push(agg);
        }
        if jobs.iter().any(|(t, m)| t.is_all() && *m == mode) && !val.is_empty() {
            unclustered.insert(mode, model_for(&SubsetExpr::all(), mode).evaluate(val, &base.scoring)?);
        }
    }
    Ok(ClusterTable { train_sizes: tc.sizes(), val_sizes: vc.sizes(), rows, aggregates, unclustered })
}

/// Best row (highest Score_5, earliest on ties) for each single-cluster
/// validation subset, weighted by cluster size. `None` unless every
/// cluster has a scored row.
pub fn aggregate(rows: &[ClusterRow], mode: InputMode) -> Result<Option<ClusterAggregate>> {
    let mut picks = Vec::new();
    let mut reports = Vec::new();
    for c in StdCluster::ALL {
        let mut best: Option<(usize, &ScoreReport)> = None;
        for (i, r) in rows.iter().enumerate() {
            if r.val.as_single() != Some(c) {
                continue;
            }
            if let Some(Some(rep)) = r.reports.get(&mode) {
                if best.is_none_or(|(_, b)| rep.score_5 > b.score_5) {
                    best = Some((i, rep));
                }
            }
        }
        let Some((i, rep)) = best else { return Ok(None) };
        picks.push((c, i));
        reports.push(rep.clone());
    }
    Ok(Some(ClusterAggregate { mode, picks, report: weighted_report(&reports)? }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_expressions() {
        let e: SubsetExpr = "A+B".parse().unwrap();
        assert_eq!(e.to_string(), "A+B");
        assert_eq!("B_t+A_t".parse::<SubsetExpr>().unwrap(), e);
        assert!("A+B+C".parse::<SubsetExpr>().unwrap().is_all());
        assert_eq!("D".parse::<SubsetExpr>().unwrap().to_string(), "D");
        assert_eq!("C".parse::<SubsetExpr>().unwrap().as_single(), Some(StdCluster::C));
        assert!("E".parse::<SubsetExpr>().is_err());
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, "\"A+B\"");
        assert_eq!(serde_json::from_str::<SubsetExpr>(&json).unwrap(), e);
    }

    #[test]
    fn default_plan_shares_models() {
        let plan = ExperimentPlan::default();
        plan.validate().unwrap();
        assert_eq!(plan.rows.len(), 8);
        // A, D, B, A+B, C, B+C for each of two modes
        assert_eq!(plan.jobs().len(), 12);
    }

    fn row(val: &str, s5: Option<f64>, n: usize) -> ClusterRow {
        ClusterRow {
            train: "D".parse().unwrap(),
            val: val.parse().unwrap(),
            n_train: 0,
            n_val: n,
            reports: BTreeMap::from([(InputMode::BeamOnly, s5.map(|s| ScoreReport::from_scores(s, s, s, 5.0, n)))]),
        }
    }

    #[test]
    fn aggregate_picks_best_per_cluster() {
        let rows = vec![
            row("A", Some(0.5), 10),
            row("A", Some(0.6), 10),
            row("B", Some(0.4), 30),
            row("C", Some(0.2), 60),
            row("C", Some(0.2), 60),
        ];
        let agg = aggregate(&rows, InputMode::BeamOnly).unwrap().unwrap();
        assert_eq!(agg.picks, vec![(StdCluster::A, 1), (StdCluster::B, 2), (StdCluster::C, 3)]);
        let want = (10.0 * 0.6 + 30.0 * 0.4 + 60.0 * 0.2) / 100.0;
        assert!((agg.report.score_5 - want).abs() < 1e-12);
        assert!(aggregate(&rows[..3], InputMode::BeamOnly).unwrap().is_none());
        assert!(aggregate(&rows, InputMode::Concat).unwrap().is_none());
    }
}
