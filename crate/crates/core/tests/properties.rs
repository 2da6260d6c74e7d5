use std::collections::BTreeMap;
use std::sync::Arc;

use beamtrack::dataset::{beam_std, cluster_by_std, split_leakage_free, ClusterConfig, Dataset, InstanceRecord, SplitCuts, StdCluster};
use beamtrack::feature::FeatureMap;
use beamtrack::metrics::{score_m, total_score, weighted_cluster_score, ScoringConfig};
use proptest::prelude::*;

fn record(beams: Vec<usize>, ids: Vec<String>) -> InstanceRecord {
    InstanceRecord { beams, features: ids, labels: vec![0; 5], user_id: "u".into(), t: 0 }
}

/// Episodes of overlapping windows: rows of one episode share images, so
/// only episode boundaries are clean cuts.
fn episodes(name: &str, lens: &[usize]) -> Dataset {
    let map = Arc::new(FeatureMap::zeros([1, 1, 1]));
    let mut store = BTreeMap::new();
    let mut records = Vec::new();
    for (e, &len) in lens.iter().enumerate() {
        for i in 0..len {
            let ids: Vec<String> = (0..3).map(|k| format!("{name}{e}_{}", i + k)).collect();
            for id in &ids {
                store.insert(id.clone(), map.clone());
            }
            records.push(record(vec![i, i + 1, i + 2], ids));
        }
    }
    Dataset::new(name, records, store).unwrap()
}

proptest! {
    #[test]
    fn beam_std_invariants(beams in proptest::collection::vec(0usize..128, 1..12), shift in 0usize..64) {
        let ids = vec!["x".to_string(); beams.len()];
        let s = beam_std(&record(beams.clone(), ids.clone()));
        prop_assert!(s >= 0.0);
        prop_assert_eq!(s == 0.0, beams.iter().all(|&b| b == beams[0]));
        let shifted = beam_std(&record(beams.iter().map(|b| b + shift).collect(), ids));
        prop_assert!((s - shifted).abs() < 1e-9);
        let range = (beams.iter().max().unwrap() - beams.iter().min().unwrap()) as f64;
        prop_assert!(s <= range / 2.0 + 1e-12);
    }

    #[test]
    fn clusters_partition(rows in proptest::collection::vec(proptest::collection::vec(0usize..16, 4), 1..60), t2 in 0.5f64..6.0) {
        let map = Arc::new(FeatureMap::zeros([1, 1, 1]));
        let store: BTreeMap<String, Arc<FeatureMap>> = [("x".to_string(), map)].into();
        let records: Vec<_> = rows.into_iter().map(|b| record(b, vec!["x".into(); 4])).collect();
        let d = Dataset::new("d", records, store).unwrap();
        let cfg = ClusterConfig { thresholds: (0.0, t2) };
        let c = cluster_by_std(&d, &cfg).unwrap();
        prop_assert_eq!(c.sizes().iter().sum::<usize>(), d.len());
        for which in StdCluster::ALL {
            for r in c.get(which).records() {
                prop_assert_eq!(cfg.assign(beam_std(r)), which);
            }
        }
    }

    #[test]
    fn snapped_splits_are_disjoint(
        lt in proptest::collection::vec(1usize..6, 3..12),
        lv in proptest::collection::vec(1usize..6, 3..12),
        fa in 0.0f64..1.0, fb in 0.0f64..1.0, fc in 0.0f64..1.0, fd in 0.0f64..1.0,
    ) {
        let (t, v) = (episodes("t", &lt), episodes("v", &lv));
        let pick = |x: f64, y: f64, n: usize| {
            let (a, b) = ((x * n as f64) as usize, (y * n as f64) as usize);
            (a.min(b).min(n - 1), a.max(b).max(a.min(b) + 1).min(n))
        };
        let cuts = SplitCuts { train: pick(fa, fb, t.len()), val: pick(fc, fd, v.len()) }.snapped(&t, &v);
        let s = split_leakage_free(&t, &v, cuts).unwrap();
        prop_assert_eq!(s.train.len() + s.val1.len() + s.val2.len(), t.len() + v.len());
        for (x, y) in [(&s.train, &s.val1), (&s.train, &s.val2), (&s.val1, &s.val2)] {
            prop_assert!(x.image_ids().is_disjoint(&y.image_ids()));
        }
    }

    #[test]
    fn scores_are_bounded(
        rows in proptest::collection::vec((proptest::collection::vec(0usize..128, 5), proptest::collection::vec(0usize..128, 5)), 1..20),
        sigma in 0.1f64..100.0,
    ) {
        let (p, t): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let cfg = ScoringConfig { sigma };
        let s: Vec<f64> = [1, 3, 5].iter().map(|&m| score_m(&p, &t, m, &cfg).unwrap()).collect();
        for v in &s {
            prop_assert!(*v > 0.0 && *v <= 1.0);
        }
        let total = total_score(s[0], s[1], s[2]);
        prop_assert!(total >= s.iter().cloned().fold(1.0, f64::min) - 1e-15);
        prop_assert!(total <= s.iter().cloned().fold(0.0, f64::max) + 1e-15);
    }

    #[test]
    fn weighted_score_is_a_convex_combination(parts in proptest::collection::vec((0.0f64..1.0, 1usize..500), 1..6)) {
        let (s, n): (Vec<f64>, Vec<usize>) = parts.into_iter().unzip();
        let w = weighted_cluster_score(&s, &n).unwrap();
        prop_assert!(w >= s.iter().cloned().fold(1.0, f64::min) - 1e-12);
        prop_assert!(w <= s.iter().cloned().fold(0.0, f64::max) + 1e-12);
    }
}
