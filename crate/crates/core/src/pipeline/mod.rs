//! Predictors composed of beam embeddings, optional image embeddings and a
//! GRU sequence model, plus the experiment runners built on them.

mod experiments;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ndarray::{s, Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

pub use experiments::{
    aggregate, guard_disjoint, mode_config, run_cluster_experiment, run_memory_sweep, ClusterAggregate, ClusterRow, ClusterTable, ExperimentPlan,
    PlanRow, SubsetExpr, SweepRow,
};

use crate::codebook::{Codebook, CodebookConfig, CodebookKind};
use crate::dataset::{Dataset, InstanceRecord};
use crate::embedding::{fit_embedder, EmbedTrainConfig, Embedder, EmbedderKind};
use crate::error::{Error, Result};
use crate::metrics::{ScoreReport, ScoringConfig};
use crate::nn::{Direction, SeqBatch, SeqPredictor, TrainConfig, Trainer, TrainerState};
use crate::rng::{derive_seed, rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    BeamOnly,
    Staggered,
    Concat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceModel {
    UniGru,
    BiGru,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub input_mode: InputMode,
    pub sequence_model: SequenceModel,
    pub embedder: EmbedderKind,
    /// Image embedding width; defaults to `2N` for staggered input and 64
    /// for concatenated input.
    pub embed_dim: Option<usize>,
    pub tau: usize,
    pub horizon: usize,
    pub train: TrainConfig,
    /// Overrides the epoch count implied by the sequence model.
    pub epochs: Option<usize>,
    pub embed_train: EmbedTrainConfig,
    pub scoring: ScoringConfig,
    /// Codebook providing beam embeddings; its size is the class count.
    pub codebook: CodebookConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input_mode: InputMode::Concat,
            sequence_model: SequenceModel::BiGru,
            embedder: EmbedderKind::Pca,
            embed_dim: None,
            tau: 8,
            horizon: 5,
            train: TrainConfig::default(),
            epochs: None,
            embed_train: EmbedTrainConfig::default(),
            scoring: ScoringConfig::default(),
            codebook: CodebookConfig { kind: CodebookKind::Gaussian, ..CodebookConfig::default() },
        }
    }
}

const CONCAT_EMBED_DIM: usize = 64;

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.train.validate()?;
        self.scoring.validate()?;
        self.codebook.validate()?;
        if self.tau == 0 || self.horizon == 0 {
            return bad("tau and horizon must be >= 1".into());
        }
        if self.epochs == Some(0) {
            return bad("epochs must be positive".into());
        }
        match self.input_mode {
            InputMode::BeamOnly if self.embedder != EmbedderKind::None => {
                return bad("beam_only input takes no image embedder; set embedder to none".into());
            }
            InputMode::Staggered | InputMode::Concat if self.embedder == EmbedderKind::None => {
                return bad(format!("{:?} input needs an image embedder", self.input_mode));
            }
            InputMode::Staggered if self.sequence_model != SequenceModel::UniGru => {
                return bad("staggered input is only defined for the uni-GRU".into());
            }
            _ => {}
        }
        if self.input_mode == InputMode::Staggered && self.resolved_embed_dim() != Some(self.codebook.embedding_dim()) {
            return Err(Error::Dimension(format!(
                "staggered input interleaves beam and image steps, so the image embedding must be {} wide, got {:?}",
                self.codebook.embedding_dim(),
                self.resolved_embed_dim()
            )));
        }
        if self.embed_dim == Some(0) {
            return bad("embed_dim must be positive".into());
        }
        Ok(())
    }

    pub fn resolved_embed_dim(&self) -> Option<usize> {
        match self.input_mode {
            InputMode::BeamOnly => None,
            InputMode::Staggered => Some(self.embed_dim.unwrap_or(self.codebook.embedding_dim())),
            InputMode::Concat => Some(self.embed_dim.unwrap_or(CONCAT_EMBED_DIM)),
        }
    }

    pub fn resolved_epochs(&self) -> usize {
        self.epochs.unwrap_or(match self.sequence_model {
            SequenceModel::UniGru => self.train.epochs_uni,
            SequenceModel::BiGru => self.train.epochs_bi,
        })
    }

    pub fn direction(&self) -> Direction {
        match self.sequence_model {
            SequenceModel::UniGru => Direction::Forward,
            SequenceModel::BiGru => Direction::Bidirectional,
        }
    }

    /// Sequence length and per-step width seen by the GRU.
    pub fn input_shape(&self) -> (usize, usize) {
        let beam = self.codebook.embedding_dim();
        match self.input_mode {
            InputMode::BeamOnly => (self.tau, beam),
            InputMode::Staggered => (2 * self.tau, beam),
            InputMode::Concat => (self.tau, beam + self.resolved_embed_dim().unwrap_or(0)),
        }
    }
}

/// Per-dimension standardisation of image embeddings, fitted on training images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
}

impl Standardizer {
    fn fit(rows: &BTreeMap<String, Array1<f64>>, dim: usize) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = Array1::zeros(dim);
        rows.values().for_each(|r| mean += r);
        mean /= n;
        let mut var = Array1::<f64>::zeros(dim);
        rows.values().for_each(|r| var += &(r - &mean).mapv(|v| v * v));
        let scale = (var / n).mapv(|v| if v.sqrt() > 1e-8 { 1.0 / v.sqrt() } else { 1.0 });
        Self { mean, scale }
    }

    fn apply(&self, v: &Array1<f64>) -> Array1<f64> {
        (v - &self.mean) * &self.scale
    }
}

/// Beam and image lookups that turn records into GRU inputs.
pub struct InputBuilder<'a> {
    pub mode: InputMode,
    pub tau: usize,
    pub codebook: &'a Codebook,
    pub images: Option<&'a BTreeMap<String, Array1<f64>>>,
}

impl InputBuilder<'_> {
    pub fn steps(&self) -> usize {
        match self.mode {
            InputMode::Staggered => 2 * self.tau,
            _ => self.tau,
        }
    }

    fn image_dim(&self) -> usize {
        self.images.and_then(|m| m.values().next()).map_or(0, |v| v.len())
    }

    pub fn width(&self) -> usize {
        match self.mode {
            InputMode::BeamOnly | InputMode::Staggered => self.codebook.dim(),
            InputMode::Concat => self.codebook.dim() + self.image_dim(),
        }
    }

    fn image(&self, id: &str) -> Result<&Array1<f64>> {
        let table = self.images.ok_or_else(|| Error::Contract("image input requested without embeddings".into()))?;
        table.get(id).ok_or_else(|| Error::Integrity(format!("no embedding for image {id}")))
    }

    /// `steps x width` input for one record.
    pub fn record_matrix(&self, rec: &InstanceRecord) -> Result<Array2<f64>> {
        if rec.tau() != self.tau {
            return Err(Error::Contract(format!("record has tau {}, model expects {}", rec.tau(), self.tau)));
        }
        let beam_w = self.codebook.dim();
        let mut out = Array2::zeros((self.steps(), self.width()));
        for (t, (&beam, id)) in rec.beams.iter().zip(&rec.features).enumerate() {
            let e = self.codebook.embed(beam)?;
            match self.mode {
                InputMode::BeamOnly => out.row_mut(t).assign(&e),
                InputMode::Staggered => {
                    let img = self.image(id)?;
                    if img.len() != beam_w {
                        return Err(Error::Dimension(format!("staggered steps need width {beam_w}, image embedding is {}", img.len())));
                    }
                    out.row_mut(2 * t).assign(&e);
                    out.row_mut(2 * t + 1).assign(img);
                }
                InputMode::Concat => {
                    let img = self.image(id)?;
                    if img.len() != self.width() - beam_w {
                        return Err(Error::Dimension(format!("image embedding width {} does not fit the concat layout", img.len())));
                    }
                    out.slice_mut(s![t, ..beam_w]).assign(&e);
                    out.slice_mut(s![t, beam_w..]).assign(img);
                }
            }
        }
        Ok(out)
    }

    /// `B x T x D` input tensor.
    pub fn array3(&self, records: &[&InstanceRecord]) -> Result<Array3<f64>> {
        let mut out = Array3::zeros((records.len(), self.steps(), self.width()));
        for (b, rec) in records.iter().enumerate() {
            out.slice_mut(s![b, .., ..]).assign(&self.record_matrix(rec)?);
        }
        Ok(out)
    }

    /// Time-major `(T*B) x D` input matrix.
    pub fn time_major(&self, records: &[&InstanceRecord]) -> Result<Array2<f64>> {
        let batch = records.len();
        let mut out = Array2::zeros((self.steps() * batch, self.width()));
        for (b, rec) in records.iter().enumerate() {
            for (t, row) in self.record_matrix(rec)?.rows().into_iter().enumerate() {
                out.row_mut(t * batch + b).assign(&row);
            }
        }
        Ok(out)
    }
}

/// The `B x T x D` input for `records`.
pub fn build_sequence_input(
    records: &[&InstanceRecord],
    codebook: &Codebook,
    images: Option<&BTreeMap<String, Array1<f64>>>,
    mode: InputMode,
    tau: usize,
) -> Result<Array3<f64>> {
    if mode != InputMode::BeamOnly && images.is_none() {
        return Err(Error::Contract(format!("{mode:?} input needs image embeddings")));
    }
    InputBuilder { mode, tau, codebook, images }.array3(records)
}

/// Everything needed to continue or reproduce a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorCheckpoint {
    pub config: PipelineConfig,
    pub embedder: Option<Embedder>,
    pub image_norm: Option<Standardizer>,
    /// Image IDs seen by embedder fitting and sequence training.
    pub seen_images: BTreeSet<String>,
    pub trainer: TrainerState,
}

impl PredictorCheckpoint {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Debug)]
pub struct TrainedPredictor {
    pub config: PipelineConfig,
    pub codebook: Codebook,
    pub embedder: Option<Embedder>,
    pub image_norm: Option<Standardizer>,
    pub model: SeqPredictor,
    pub seen_images: BTreeSet<String>,
    pub losses: Vec<f64>,
    state: TrainerState,
}

fn fresh_model(cfg: &PipelineConfig) -> Result<SeqPredictor> {
    let (_, width) = cfg.input_shape();
    let mut r = rng(derive_seed(cfg.train.seed, 0x1417));
    SeqPredictor::new(
        width,
        cfg.train.hidden_dim,
        cfg.train.num_layers,
        cfg.direction(),
        cfg.train.dropout,
        cfg.horizon,
        cfg.codebook.num_beams,
        &mut r,
    )
}

fn embed_images(
    embedder: Option<&Embedder>,
    norm: Option<&Standardizer>,
    d: &Dataset,
) -> Result<Option<BTreeMap<String, Array1<f64>>>> {
    let (Some(e), Some(n)) = (embedder, norm) else { return Ok(None) };
    let raw = e.embed_store(d.feature_store())?;
    Ok(Some(raw.into_iter().map(|(id, v)| (id, n.apply(&v))).collect()))
}

/// A training run in progress. Resumable from a [`PredictorCheckpoint`].
pub struct TrainingSession<'a> {
    cfg: PipelineConfig,
    train: &'a Dataset,
    codebook: Codebook,
    embedder: Option<Embedder>,
    image_norm: Option<Standardizer>,
    images: Option<BTreeMap<String, Array1<f64>>>,
    seen_images: BTreeSet<String>,
    trainer: Trainer<SeqPredictor>,
}

impl<'a> TrainingSession<'a> {
    /// Fits the image embedder on `train`'s images and initialises the model.
    pub fn new(train: &'a Dataset, cfg: &PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        Self::check_data(train, cfg)?;
        let codebook = Codebook::generate(&cfg.codebook)?;
        let embedder = match cfg.resolved_embed_dim() {
            None => None,
            Some(k) => fit_embedder(cfg.embedder, k, train, cfg.codebook.num_beams, &cfg.embed_train)?,
        };
        let image_norm = match &embedder {
            None => None,
            Some(e) => Some(Standardizer::fit(&e.embed_store(train.feature_store())?, e.dim())),
        };
        let images = embed_images(embedder.as_ref(), image_norm.as_ref(), train)?;
        let seen_images = train.image_ids().into_iter().map(str::to_string).collect();
        let trainer = Trainer::new(fresh_model(cfg)?);
        Ok(Self { cfg: cfg.clone(), train, codebook, embedder, image_norm, images, seen_images, trainer })
    }

    /// Continues from a checkpoint taken on the same data and configuration.
    pub fn resume(train: &'a Dataset, ckpt: &PredictorCheckpoint) -> Result<Self> {
        let cfg = &ckpt.config;
        cfg.validate().map_err(|e| Error::Checkpoint(format!("checkpoint config invalid: {e}")))?;
        let seen: BTreeSet<String> = train.image_ids().into_iter().map(str::to_string).collect();
        if seen != ckpt.seen_images {
            return Err(Error::Checkpoint("training images differ from those recorded in the checkpoint".into()));
        }
        Self::check_data(train, cfg)?;
        let codebook = Codebook::generate(&cfg.codebook)?;
        let images = embed_images(ckpt.embedder.as_ref(), ckpt.image_norm.as_ref(), train)?;
        let trainer = Trainer::restore(fresh_model(cfg)?, &ckpt.trainer)?;
        Ok(Self {
            cfg: cfg.clone(),
            train,
            codebook,
            embedder: ckpt.embedder.clone(),
            image_norm: ckpt.image_norm.clone(),
            images,
            seen_images: seen,
            trainer,
        })
    }

    fn check_data(train: &Dataset, cfg: &PipelineConfig) -> Result<()> {
        if train.is_empty() {
            return Err(Error::Config("training set is empty".into()));
        }
        if train.tau() != Some(cfg.tau) || train.horizon().map_or(true, |h| h < cfg.horizon) {
            return Err(Error::Contract(format!(
                "dataset has tau {:?} and horizon {:?}, config expects tau {} and horizon >= {}",
                train.tau(),
                train.horizon(),
                cfg.tau,
                cfg.horizon
            )));
        }
        train.check_beam_range(cfg.codebook.num_beams)
    }

    pub fn epoch(&self) -> usize {
        self.trainer.epoch
    }

    pub fn target_epochs(&self) -> usize {
        self.cfg.resolved_epochs()
    }

    pub fn is_done(&self) -> bool {
        self.epoch() >= self.target_epochs()
    }

    pub fn losses(&self) -> &[f64] {
        &self.trainer.losses
    }

    pub fn run_epoch(&mut self) -> Result<f64> {
        let builder = InputBuilder { mode: self.cfg.input_mode, tau: self.cfg.tau, codebook: &self.codebook, images: self.images.as_ref() };
        let records = self.train.records();
        let m = self.cfg.horizon;
        let make = |ids: &[usize]| -> Result<SeqBatch> {
            let recs: Vec<&InstanceRecord> = ids.iter().map(|&i| &records[i]).collect();
            Ok(SeqBatch {
                inputs: builder.time_major(&recs)?,
                steps: builder.steps(),
                labels: recs.iter().map(|r| r.labels[..m].to_vec()).collect(),
            })
        };
        self.trainer.run_epoch(records.len(), make, &self.cfg.train)
    }

    /// Runs remaining epochs, calling `after_epoch` after each one. The
    /// callback may stop training early by returning `false`.
    pub fn run(&mut self, mut after_epoch: impl FnMut(&Self) -> Result<bool>) -> Result<()> {
        while !self.is_done() {
            self.run_epoch()?;
            if !after_epoch(self)? {
                break;
            }
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> PredictorCheckpoint {
        PredictorCheckpoint {
            config: self.cfg.clone(),
            embedder: self.embedder.clone(),
            image_norm: self.image_norm.clone(),
            seen_images: self.seen_images.clone(),
            trainer: self.trainer.state(),
        }
    }

    pub fn finish(self) -> TrainedPredictor {
        let state = self.trainer.state();
        TrainedPredictor {
            config: self.cfg,
            codebook: self.codebook,
            embedder: self.embedder,
            image_norm: self.image_norm,
            losses: self.trainer.losses,
            model: self.trainer.model,
            seen_images: self.seen_images,
            state,
        }
    }
}

/// Fits the embedder (if any) on `train` and trains the sequence model for
/// the configured number of epochs.
pub fn train_predictor(train: &Dataset, cfg: &PipelineConfig) -> Result<TrainedPredictor> {
    let mut session = TrainingSession::new(train, cfg)?;
    session.run(|_| Ok(true))?;
    Ok(session.finish())
}

const PREDICT_CHUNK: usize = 1024;

impl TrainedPredictor {
    pub fn from_checkpoint(ckpt: &PredictorCheckpoint) -> Result<Self> {
        let cfg = &ckpt.config;
        cfg.validate().map_err(|e| Error::Checkpoint(format!("checkpoint config invalid: {e}")))?;
        let mut model = fresh_model(cfg)?;
        crate::nn::Parameters::import(&mut model, &ckpt.trainer.tensors)?;
        Ok(Self {
            config: cfg.clone(),
            codebook: Codebook::generate(&cfg.codebook)?,
            embedder: ckpt.embedder.clone(),
            image_norm: ckpt.image_norm.clone(),
            model,
            seen_images: ckpt.seen_images.clone(),
            losses: ckpt.trainer.losses.clone(),
            state: ckpt.trainer.clone(),
        })
    }

    pub fn checkpoint(&self) -> PredictorCheckpoint {
        PredictorCheckpoint {
            config: self.config.clone(),
            embedder: self.embedder.clone(),
            image_norm: self.image_norm.clone(),
            seen_images: self.seen_images.clone(),
            trainer: self.state.clone(),
        }
    }

    /// Argmax beam per future step for each record, lowest index on ties.
    pub fn predict(&self, d: &Dataset) -> Result<Vec<Vec<usize>>> {
        if let Some(t) = d.tau() {
            if t != self.config.tau {
                return Err(Error::Contract(format!("records have tau {t}, model was trained with tau {}", self.config.tau)));
            }
        }
        let images = embed_images(self.embedder.as_ref(), self.image_norm.as_ref(), d)?;
        let builder = InputBuilder { mode: self.config.input_mode, tau: self.config.tau, codebook: &self.codebook, images: images.as_ref() };
        let mut out = Vec::with_capacity(d.len());
        let records: Vec<&InstanceRecord> = d.records().iter().collect();
        for chunk in records.chunks(PREDICT_CHUNK) {
            let x = builder.time_major(chunk)?;
            out.extend(self.model.predict(x.view(), builder.steps())?);
        }
        Ok(out)
    }

    /// Rejects evaluation sets sharing images with anything seen in training.
    pub fn check_disjoint(&self, d: &Dataset) -> Result<()> {
        let shared: Vec<String> = d.image_ids().into_iter().filter(|id| self.seen_images.contains(*id)).map(str::to_string).collect();
        if shared.is_empty() {
            Ok(())
        } else {
            Err(Error::Leakage { ids: shared })
        }
    }

    pub fn evaluate(&self, val: &Dataset, scoring: &ScoringConfig) -> Result<ScoreReport> {
        self.check_disjoint(val)?;
        score_predictions(&self.predict(val)?, val, scoring)
    }
}

/// Scores per-record predictions against `val`'s labels, in record order.
pub fn score_predictions(preds: &[Vec<usize>], val: &Dataset, scoring: &ScoringConfig) -> Result<ScoreReport> {
    let truths: Vec<&[usize]> = val.records().iter().map(|r| &r.labels[..]).collect();
    ScoreReport::compute(preds, &truths, scoring)
}

/// Scores `model` on `val` with the leakage guard applied.
pub fn evaluate(model: &TrainedPredictor, val: &Dataset, scoring: &ScoringConfig) -> Result<ScoreReport> {
    model.evaluate(val, scoring)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_input_shapes() {
        let stag = PipelineConfig { input_mode: InputMode::Staggered, sequence_model: SequenceModel::UniGru, ..Default::default() };
        assert_eq!(stag.input_shape(), (16, 256));
        stag.validate().unwrap();
        let concat = PipelineConfig::default();
        assert_eq!(concat.input_shape(), (8, 320));
        let beam = PipelineConfig { input_mode: InputMode::BeamOnly, embedder: EmbedderKind::None, ..Default::default() };
        assert_eq!(beam.input_shape(), (8, 256));
    }

    #[test]
    fn config_invariants() {
        let bad_stag = PipelineConfig { input_mode: InputMode::Staggered, ..Default::default() };
        assert!(bad_stag.validate().is_err());
        let bad_width = PipelineConfig {
            input_mode: InputMode::Staggered,
            sequence_model: SequenceModel::UniGru,
            embed_dim: Some(64),
            ..Default::default()
        };
        assert!(matches!(bad_width.validate(), Err(Error::Dimension(_))));
        let beam_with_images = PipelineConfig { input_mode: InputMode::BeamOnly, ..Default::default() };
        assert!(beam_with_images.validate().is_err());
        let concat_without = PipelineConfig { embedder: EmbedderKind::None, ..Default::default() };
        assert!(concat_without.validate().is_err());
    }
}
