use std::path::Path;

use beamtrack::baselines::{predict_dataset, write_predictions_csv, Baseline};
use beamtrack::dataset::{
    cluster_by_std, ingest_viwi_csv, split_leakage_free, write_feature_store, write_viwi_csv, ClusterConfig, Dataset,
    SplitCuts, StdCluster,
};
use beamtrack::metrics::ScoringConfig;
use beamtrack::pipeline::{
    run_cluster_experiment, run_memory_sweep, score_predictions, ClusterTable, ExperimentPlan, PipelineConfig,
    PredictorCheckpoint, SweepRow, TrainedPredictor, TrainingSession,
};
use beamtrack::report::{cluster_table_csv, cluster_table_text, ScoreTable};
use beamtrack::scene::{simulate_corpus, CorpusConfig};
use beamtrack::{Error, Result};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{self, Resolved};
use crate::manifest::ManifestGuard;
use crate::{ConfigArgs, Format};

const INSTANCES: &str = "instances.csv";
const FEATURES: &str = "features";
const CHECKPOINT: &str = "checkpoint.json";
const MODEL: &str = "model.json";

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source: e }
}

/// A dataset directory holds `instances.csv` and `features/<id>.json`.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let out = ingest_viwi_csv(&dir.join(INSTANCES), &dir.join(FEATURES))?;
    if !out.skipped.is_empty() {
        warn!("{}: skipped {} rows with unresolved images", dir.display(), out.skipped.len());
    }
    let mut d = out.dataset;
    d.name = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(d)
}

pub fn save_dataset(d: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_viwi_csv(d, &dir.join(INSTANCES))?;
    write_feature_store(d, &dir.join(FEATURES))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Runs `f` between the initial and final manifest writes.
fn run<T>(
    command: &str,
    cfg: Option<(&ConfigArgs, &Resolved<T>)>,
    seed: Option<u64>,
    out: &Path,
    f: impl FnOnce() -> Result<()>,
) -> Result<()> {
    let (path, hash) = match cfg {
        Some((args, r)) => (args.config.as_deref(), Some(r.hash())),
        None => (None, None),
    };
    let guard = ManifestGuard::start(command, path, hash, seed, out)?;
    if let Some((_, r)) = cfg {
        write_json(&out.join("config.json"), &r.json)?;
    }
    let result = f();
    guard.finish(&result)?;
    result
}

/// Report files share one JSON envelope so `report` can re-render them.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedReport {
    Scores { table: ScoreTable },
    Clusters { table: ClusterTable },
    Sweep { rows: Vec<SweepRow> },
}

impl SavedReport {
    fn sweep_table(rows: &[SweepRow]) -> ScoreTable {
        let mut t = ScoreTable::new("Memory length sweep");
        for r in rows {
            t.push(format!("tau = {}", r.tau), r.report.clone());
        }
        t
    }

    pub fn render(&self, format: Format) -> Result<String> {
        Ok(match (self, format) {
            (SavedReport::Scores { table }, Format::Text) => table.to_text(),
            (SavedReport::Scores { table }, Format::Csv) => table.to_csv()?,
            (SavedReport::Clusters { table }, Format::Text) => cluster_table_text(table),
            (SavedReport::Clusters { table }, Format::Csv) => cluster_table_csv(table)?,
            (SavedReport::Sweep { rows }, Format::Text) => Self::sweep_table(rows).to_text(),
            (SavedReport::Sweep { rows }, Format::Csv) => Self::sweep_table(rows).to_csv()?,
        })
    }

    /// Writes `<stem>.json`, `<stem>.txt` and `<stem>.csv` under `out`.
    fn save(&self, out: &Path, stem: &str) -> Result<()> {
        write_json(&out.join(format!("{stem}.json")), self)?;
        let text = self.render(Format::Text)?;
        write_text(&out.join(format!("{stem}.txt")), &text)?;
        write_text(&out.join(format!("{stem}.csv")), &self.render(Format::Csv)?)?;
        print!("{text}");
        Ok(())
    }
}

pub fn simulate(args: &ConfigArgs, out: &Path) -> Result<()> {
    let r: Resolved<CorpusConfig> = config::load(args.config.as_deref(), &args.sets)?;
    r.value.scene.validate()?;
    run("simulate", Some((args, &r)), Some(r.value.scene.seed), out, || {
        let d = simulate_corpus(&r.value)?;
        save_dataset(&d, out)?;
        let sizes = cluster_by_std(&d, &ClusterConfig::default())?.sizes();
        write_json(
            &out.join("summary.json"),
            &json!({"instances": d.len(), "images": d.feature_store().len(), "cluster_sizes": sizes}),
        )?;
        info!("wrote {} instances and {} images to {}", d.len(), d.feature_store().len(), out.display());
        Ok(())
    })
}

pub fn ingest(csv: &Path, features: &Path, out: &Path) -> Result<()> {
    run::<()>("ingest", None, None, out, || {
        let outcome = ingest_viwi_csv(csv, features)?;
        let skipped: Vec<_> = outcome.skipped.iter().map(|s| json!({"row": s.row, "image_id": s.image_id})).collect();
        for s in &outcome.skipped {
            warn!("row {}: unresolved image {}", s.row, s.image_id);
        }
        save_dataset(&outcome.dataset, out)?;
        write_json(
            &out.join("ingest_report.json"),
            &json!({"instances": outcome.dataset.len(), "images": outcome.dataset.feature_store().len(), "skipped": skipped}),
        )
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutMode {
    /// The reference cut points, for sources of the reference sizes.
    Paper,
    /// Reference cuts scaled to the actual source sizes.
    Proportional,
    /// Cuts given in `explicit`.
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSettings {
    pub mode: CutMode,
    pub explicit: SplitCuts,
    /// Move cuts to the nearest positions that keep images within one side.
    pub snap: bool,
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self { mode: CutMode::Proportional, explicit: SplitCuts::default(), snap: true }
    }
}

pub fn split(train: &Path, val: &Path, args: &ConfigArgs, out: &Path) -> Result<()> {
    let r: Resolved<SplitSettings> = config::load(args.config.as_deref(), &args.sets)?;
    run("split", Some((args, &r)), None, out, || {
        let (mut d_t, mut d_v) = (load_dataset(train)?, load_dataset(val)?);
        d_t.name = "train_source".into();
        d_v.name = "val_source".into();
        let s = &r.value;
        let mut cuts = match s.mode {
            CutMode::Paper => SplitCuts::default(),
            CutMode::Proportional => SplitCuts::proportional(d_t.len(), d_v.len()),
            CutMode::Explicit => s.explicit,
        };
        if s.snap {
            cuts = cuts.snapped(&d_t, &d_v);
        }
        let parts = split_leakage_free(&d_t, &d_v, cuts)?;
        for (name, d) in [("train", &parts.train), ("val1", &parts.val1), ("val2", &parts.val2)] {
            save_dataset(d, &out.join(name))?;
        }
        write_json(&out.join("split_manifest.json"), &parts.manifest)?;
        write_json(
            &out.join("split_report.json"),
            &json!({"sizes": parts.manifest.sizes, "image_counts": parts.manifest.image_counts, "pairwise_shared_images": 0}),
        )?;
        info!("split sizes {:?}", parts.manifest.sizes);
        Ok(())
    })
}

pub fn cluster(data: &Path, args: &ConfigArgs, out: &Path) -> Result<()> {
    let r: Resolved<ClusterConfig> = config::load(args.config.as_deref(), &args.sets)?;
    r.value.validate()?;
    run("cluster", Some((args, &r)), None, out, || {
        let d = load_dataset(data)?;
        let c = cluster_by_std(&d, &r.value)?;
        for which in StdCluster::ALL {
            save_dataset(c.get(which), &out.join(which.letter().to_string()))?;
        }
        write_json(&out.join("clusters.json"), &json!({"thresholds": r.value.thresholds, "sizes": c.sizes()}))
    })
}

pub fn baselines(data: &Path, train: Option<&Path>, sigma: f64, num_beams: usize, seed: u64, out: &Path) -> Result<()> {
    let scoring = ScoringConfig { sigma };
    scoring.validate()?;
    run::<()>("baselines", None, Some(seed), out, || {
        let val = load_dataset(data)?;
        let fit = match train {
            Some(p) => load_dataset(p)?,
            None => val.clone(),
        };
        let m = val.horizon().ok_or_else(|| Error::Config("dataset to score is empty".into()))?;
        let mut table = ScoreTable::new(format!("Baselines on {} (sigma = {sigma})", val.name));
        for b in Baseline::ALL {
            let preds = predict_dataset(b, &fit, &val, m, num_beams, seed)?;
            let name = serde_json::to_value(b)?.as_str().unwrap_or("baseline").to_string();
            write_predictions_csv(&preds, &out.join(format!("predictions_{name}.csv")))?;
            table.push(b.label(), score_predictions(&preds, &val, &scoring)?);
        }
        SavedReport::Scores { table }.save(out, "baselines")
    })
}

fn load_checkpoint(path: &Path) -> Result<PredictorCheckpoint> {
    if !path.exists() {
        return Err(Error::Checkpoint(format!("no checkpoint at {}", path.display())));
    }
    PredictorCheckpoint::load_json(path).map_err(|e| match e {
        Error::Io { path, source } => Error::Checkpoint(format!("{}: {source}", path.display())),
        other => other,
    })
}

fn save_atomic(ckpt: &PredictorCheckpoint, path: &Path) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    ckpt.save_json(&tmp)?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn train(data: &Path, args: &ConfigArgs, resume: bool, stop_after: Option<usize>, out: &Path) -> Result<()> {
    let r: Resolved<PipelineConfig> = config::load(args.config.as_deref(), &args.sets)?;
    r.value.validate()?;
    run("train", Some((args, &r)), Some(r.value.train.seed), out, || {
        let d = load_dataset(data)?;
        let ckpt_path = out.join(CHECKPOINT);
        let mut session = if resume {
            let ckpt = load_checkpoint(&ckpt_path)?;
            if ckpt.config != r.value {
                return Err(Error::Checkpoint("checkpoint was written with a different config".into()));
            }
            info!("resuming at epoch {}", ckpt.trainer.epoch);
            TrainingSession::resume(&d, &ckpt)?
        } else {
            TrainingSession::new(&d, &r.value)?
        };
        let total = session.target_epochs();
        let keep_going = |s: &TrainingSession| stop_after.is_none_or(|k| s.epoch() < k);
        if keep_going(&session) {
            session.run(|s| {
                info!("epoch {}/{total}: loss {:.5}", s.epoch(), s.losses().last().copied().unwrap_or(f64::NAN));
                save_atomic(&s.checkpoint(), &ckpt_path)?;
                Ok(keep_going(s))
            })?;
        }
        let ckpt = session.checkpoint();
        save_atomic(&ckpt, &ckpt_path)?;
        let mut losses = String::from("epoch,loss\n");
        for (i, l) in session.losses().iter().enumerate() {
            losses += &format!("{},{l}\n", i + 1);
        }
        write_text(&out.join("losses.csv"), &losses)?;
        if session.is_done() {
            ckpt.save_json(&out.join(MODEL))?;
            info!("training finished; model at {}", out.join(MODEL).display());
        } else {
            info!("stopped after epoch {} of {total}; continue with --resume", session.epoch());
        }
        Ok(())
    })
}

pub fn eval(model: &Path, data: &Path, sigma: Option<f64>, out: &Path) -> Result<()> {
    let ckpt = load_checkpoint(model)?;
    let mut scoring = ckpt.config.scoring;
    if let Some(s) = sigma {
        scoring.sigma = s;
    }
    scoring.validate()?;
    run::<()>("eval", None, Some(ckpt.config.train.seed), out, || {
        let predictor = TrainedPredictor::from_checkpoint(&ckpt)?;
        let d = load_dataset(data)?;
        predictor.check_disjoint(&d)?;
        let preds = predictor.predict(&d)?;
        write_predictions_csv(&preds, &out.join("predictions.csv"))?;
        let mut table = ScoreTable::new(format!("Evaluation (sigma = {})", scoring.sigma));
        table.push(d.name.clone(), score_predictions(&preds, &d, &scoring)?);
        SavedReport::Scores { table }.save(out, "eval")
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Clusters,
    Memory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub pipeline: PipelineConfig,
    pub plan: ExperimentPlan,
    pub taus: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { kind: ExperimentKind::Clusters, pipeline: PipelineConfig::default(), plan: ExperimentPlan::default(), taus: vec![4, 6, 8] }
    }
}

pub fn experiment(train: &Path, val: &Path, args: &ConfigArgs, out: &Path) -> Result<()> {
    let r: Resolved<ExperimentConfig> = config::load(args.config.as_deref(), &args.sets)?;
    let cfg = &r.value;
    cfg.plan.validate()?;
    run("experiment", Some((args, &r)), Some(cfg.pipeline.train.seed), out, || {
        let (t, v) = (load_dataset(train)?, load_dataset(val)?);
        let rep = match cfg.kind {
            ExperimentKind::Clusters => SavedReport::Clusters { table: run_cluster_experiment(&t, &v, &cfg.plan, &cfg.pipeline)? },
            ExperimentKind::Memory => SavedReport::Sweep { rows: run_memory_sweep(&t, &v, &cfg.pipeline, &cfg.taus)? },
        };
        rep.save(out, "experiment")
    })
}

pub fn report(input: &Path, format: Format, output: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(input).map_err(|e| io_err(input, e))?;
    let rep: SavedReport = serde_json::from_str(&text)?;
    let rendered = rep.render(format)?;
    match output {
        Some(p) => write_text(p, &rendered),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}
