use beamtrack::baselines::{predict_dataset, read_predictions_csv, write_predictions_csv, Baseline};
use beamtrack::dataset::{Dataset, InstanceRecord};
use beamtrack::embedding::{fit_embedder, EmbedTrainConfig, EmbedderKind};
use beamtrack::metrics::{weighted_cluster_score, ScoreReport, ScoringConfig};
use beamtrack::pipeline::*;
use beamtrack::scene::{simulate_corpus, CorpusConfig, SceneConfig};
use beamtrack::Error;

fn scene(seed: u64) -> SceneConfig {
    SceneConfig { num_users: 8, duration: 24, user_speed_range: (0.0, 2.0), feature_map_dims: [9, 9, 4], seed, ..Default::default() }
}

fn corpus(name: &str, seed: u64, episodes: usize) -> Dataset {
    simulate_corpus(&CorpusConfig { scene: scene(seed), episodes, name: name.into() }).unwrap()
}

fn small(mode: InputMode) -> PipelineConfig {
    let mut cfg = mode_config(&PipelineConfig::default(), mode);
    cfg.train.hidden_dim = 12;
    cfg.train.num_layers = 1;
    cfg.train.batch_size = 16;
    cfg.train.shard_size = 8;
    cfg.train.learning_rate = 0.005;
    cfg.epochs = Some(2);
    cfg
}

#[test]
fn sequence_input_shapes_and_layout() {
    let d = corpus("s", 1, 8);
    assert!(d.feature_store().len() >= 256);
    let cb = beamtrack::codebook::Codebook::generate(&PipelineConfig::default().codebook).unwrap();
    let recs: Vec<&InstanceRecord> = d.records().iter().take(3).collect();
    let cfg = EmbedTrainConfig::default();

    let e256 = fit_embedder(EmbedderKind::Pca, 256, &d, 128, &cfg).unwrap().unwrap();
    let z256 = e256.embed_store(d.feature_store()).unwrap();
    let stag = build_sequence_input(&recs, &cb, Some(&z256), InputMode::Staggered, 8).unwrap();
    assert_eq!(stag.dim(), (3, 16, 256));
    // beam step then image step
    assert_eq!(stag.slice(ndarray::s![1, 2, ..]), cb.embed(recs[1].beams[1]).unwrap());
    assert_eq!(stag.slice(ndarray::s![1, 3, ..]), z256[&recs[1].features[1]]);

    let e64 = fit_embedder(EmbedderKind::Pca, 64, &d, 128, &cfg).unwrap().unwrap();
    let z64 = e64.embed_store(d.feature_store()).unwrap();
    let concat = build_sequence_input(&recs, &cb, Some(&z64), InputMode::Concat, 8).unwrap();
    assert_eq!(concat.dim(), (3, 8, 320));
    assert_eq!(concat.slice(ndarray::s![2, 7, 256..]), z64[&recs[2].features[7]]);

    let beams = build_sequence_input(&recs, &cb, None, InputMode::BeamOnly, 8).unwrap();
    assert_eq!(beams.dim(), (3, 8, 256));

    assert!(matches!(build_sequence_input(&recs, &cb, Some(&z64), InputMode::Staggered, 8), Err(Error::Dimension(_))));
    assert!(build_sequence_input(&recs, &cb, None, InputMode::Concat, 8).is_err());
}

#[test]
fn zero_learning_rate_leaves_scores_unchanged() {
    let (t, v) = (corpus("t", 2, 3), corpus("v", 3, 2));
    let mut cfg = small(InputMode::Concat);
    cfg.train.learning_rate = 0.0;
    let untrained = TrainingSession::new(&t, &cfg).unwrap().finish();
    let trained = train_predictor(&t, &cfg).unwrap();
    assert_eq!(trained.losses.len(), 2);
    assert_eq!(
        untrained.evaluate(&v, &cfg.scoring).unwrap(),
        trained.evaluate(&v, &cfg.scoring).unwrap()
    );
}

#[test]
fn overfits_fifty_records() {
    let d = corpus("o", 4, 2);
    let d = d.slice(0, 50).unwrap();
    let mut cfg = mode_config(&PipelineConfig::default(), InputMode::BeamOnly);
    cfg.train.hidden_dim = 32;
    cfg.train.num_layers = 1;
    cfg.train.batch_size = 50;
    cfg.train.shard_size = 50;
    cfg.train.dropout = 0.0;
    cfg.train.learning_rate = 0.01;
    cfg.epochs = Some(150);
    let model = train_predictor(&d, &cfg).unwrap();
    let rep = score_predictions(&model.predict(&d).unwrap(), &d, &cfg.scoring).unwrap();
    assert!(rep.score_1 > 0.95, "{rep:?}");
}

#[test]
fn training_is_deterministic_and_resumable() {
    let t = corpus("t", 5, 3);
    let cfg = PipelineConfig { epochs: Some(3), ..small(InputMode::Concat) };
    let a = train_predictor(&t, &cfg).unwrap().checkpoint();
    let b = train_predictor(&t, &cfg).unwrap().checkpoint();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    let mut s = TrainingSession::new(&t, &cfg).unwrap();
    s.run_epoch().unwrap();
    s.checkpoint().save_json(&path).unwrap();
    drop(s);
    let ckpt = PredictorCheckpoint::load_json(&path).unwrap();
    let mut s = TrainingSession::resume(&t, &ckpt).unwrap();
    assert_eq!(s.epoch(), 1);
    s.run(|_| Ok(true)).unwrap();
    assert_eq!(s.finish().checkpoint(), a);

    // a different training set cannot continue this checkpoint
    let other = corpus("x", 6, 3);
    assert!(matches!(TrainingSession::resume(&other, &ckpt), Err(Error::Checkpoint(_))));
    let restored = TrainedPredictor::from_checkpoint(&ckpt).unwrap();
    assert_eq!(restored.checkpoint(), ckpt);
}

#[test]
fn predictions_and_evaluation_contracts() {
    let (t, v) = (corpus("t", 7, 3), corpus("v", 8, 2));
    let cfg = small(InputMode::Concat);
    let model = train_predictor(&t, &cfg).unwrap();
    let preds = model.predict(&v).unwrap();
    assert_eq!(preds.len(), v.len());
    assert!(preds.iter().all(|p| p.len() == 5 && p.iter().all(|&q| q < 128)));
    assert_eq!(preds, model.predict(&v).unwrap());

    let rep = model.evaluate(&v, &cfg.scoring).unwrap();
    for s in [rep.score_1, rep.score_3, rep.score_5, rep.total] {
        assert!(s > 0.0 && s <= 1.0);
    }
    assert!((rep.total - (rep.score_1 + 3.0 * rep.score_3 + 5.0 * rep.score_5) / 9.0).abs() < 1e-12);

    let reversed = v.select("rev", v.records().iter().rev().cloned().collect()).unwrap();
    let rev = model.evaluate(&reversed, &cfg.scoring).unwrap();
    assert!((rev.total - rep.total).abs() < 1e-12);

    // images seen during training may not be scored
    assert!(matches!(model.evaluate(&t, &cfg.scoring), Err(Error::Leakage { .. })));
    assert!(matches!(model.predict(&v.truncated(4).unwrap()), Err(Error::Contract(_))));

    let labels: Vec<Vec<usize>> = v.records().iter().map(|r| r.labels.clone()).collect();
    assert_eq!(score_predictions(&labels, &v, &cfg.scoring).unwrap(), ScoreReport::from_scores(1.0, 1.0, 1.0, 5.0, v.len()));
}

#[test]
fn last_step_scores_agree_across_paths() {
    let (t, v) = (corpus("t", 9, 2), corpus("v", 10, 2));
    let preds = predict_dataset(Baseline::LastStep, &t, &v, 5, 128, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    write_predictions_csv(&preds, &path).unwrap();
    let back = read_predictions_csv(&path).unwrap();
    let truths: Vec<Vec<usize>> = v.records().iter().map(|r| r.labels.clone()).collect();
    let direct = ScoreReport::compute(&back, &truths, &ScoringConfig::default()).unwrap();
    assert_eq!(score_predictions(&preds, &v, &ScoringConfig::default()).unwrap(), direct);
}

#[test]
fn memory_sweep_rows() {
    let (t, v) = (corpus("t", 11, 3), corpus("v", 12, 2));
    let cfg = small(InputMode::BeamOnly);
    let rows = run_memory_sweep(&t, &v, &cfg, &[4, 6, 8]).unwrap();
    assert_eq!(rows.iter().map(|r| r.tau).collect::<Vec<_>>(), vec![4, 6, 8]);
    assert!(rows.iter().all(|r| r.report.n_instances == v.len()));
    assert!(run_memory_sweep(&t, &v, &cfg, &[9]).is_err());
    assert!(matches!(run_memory_sweep(&t, &t, &cfg, &[4]), Err(Error::Leakage { .. })));
}

#[test]
fn truncation_keeps_most_recent_steps() {
    let r = InstanceRecord {
        beams: vec![1, 1, 1, 1, 9, 9, 9, 9],
        features: (0..8).map(|i| format!("img{i}")).collect(),
        labels: vec![9; 5],
        user_id: "u".into(),
        t: 0,
    };
    let r4 = r.truncated(4).unwrap();
    assert_eq!(r4.beams, vec![9; 4]);
    assert_eq!(r4.features, vec!["img4", "img5", "img6", "img7"]);
}

#[test]
fn cluster_experiment_structure() {
    let (t, v) = (corpus("t", 13, 6), corpus("v", 14, 4));
    let cfg = PipelineConfig { epochs: Some(1), embed_dim: Some(8), ..small(InputMode::Concat) };
    let table = run_cluster_experiment(&t, &v, &ExperimentPlan::default(), &cfg).unwrap();
    assert_eq!(table.rows.len(), 8);
    let names: Vec<String> = table.rows.iter().map(|r| format!("{}->{}", r.train, r.val)).collect();
    assert_eq!(names, ["A->A", "D->A", "B->B", "A+B->B", "D->B", "C->C", "B+C->C", "D->C"]);
    assert!(table.rows.iter().all(|r| r.reports.len() == 2));
    assert!(table.val_sizes.iter().all(|&n| n > 0), "{:?}", table.val_sizes);
    assert_eq!(table.aggregates.len(), 2);
    for agg in &table.aggregates {
        let (mut s, mut n) = (Vec::new(), Vec::new());
        for &(c, i) in &agg.picks {
            let rep = table.rows[i].reports[&agg.mode].as_ref().unwrap();
            assert_eq!(table.rows[i].val.as_single(), Some(c));
            s.push(rep.score_5);
            n.push(rep.n_instances);
        }
        let hand: f64 = s.iter().zip(&n).map(|(a, &b)| a * b as f64).sum::<f64>() / n.iter().sum::<usize>() as f64;
        assert!((agg.report.score_5 - hand).abs() < 1e-12);
        assert!((agg.report.score_5 - weighted_cluster_score(&s, &n).unwrap()).abs() < 1e-12);
    }
    // D_t -> D_v is the size-weighted combination of the D_t rows
    for (mode, whole) in &table.unclustered {
        let parts: Vec<&ScoreReport> = [1, 4, 7].iter().map(|&i| table.rows[i].reports[mode].as_ref().unwrap()).collect();
        let w: f64 = parts.iter().map(|r| r.score_5 * r.n_instances as f64).sum::<f64>() / v.len() as f64;
        assert!((whole.score_5 - w).abs() < 1e-12);
    }
    let text = beamtrack::report::cluster_table_text(&table);
    assert!(text.contains("A+B_t -> B_v"));
    assert_eq!(beamtrack::report::cluster_table_csv(&table).unwrap().lines().count(), 1 + 16 + 2 + 2);

    assert!(matches!(run_cluster_experiment(&t, &t, &ExperimentPlan::default(), &cfg), Err(Error::Leakage { .. })));
    assert!(serde_json::from_str::<ExperimentPlan>(r#"{"rows":[{"train":"A+E","val":"A"}]}"#).is_err());
}
