//! Instance records, datasets, leakage-free splits and std clustering.

mod cluster;
mod io;
mod split;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::codebook::BeamIndex;
use crate::error::{Error, Result};
use crate::feature::FeatureMap;

pub use cluster::{beam_std, cluster_by_std, ClusterConfig, Clusters, StdCluster};
pub use io::{ingest_viwi_csv, write_feature_store, write_viwi_csv, IngestOutcome, SkippedRow};
pub use split::{
    clean_cut_points, leakage_between, snap_cut, split_leakage_free, DatasetSplit, SplitCuts,
    SplitManifest, PAPER_CUTS_TRAIN, PAPER_CUTS_VAL, PAPER_ROWS_TRAIN, PAPER_ROWS_VAL,
};

/// One user instance: `tau` observed (beam, image) pairs and `m` future labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub beams: Vec<BeamIndex>,
    /// Image IDs, one per observed step.
    pub features: Vec<String>,
    pub labels: Vec<BeamIndex>,
    pub user_id: String,
    pub t: i64,
}

impl InstanceRecord {
    pub fn tau(&self) -> usize {
        self.beams.len()
    }

    pub fn horizon(&self) -> usize {
        self.labels.len()
    }

    pub fn last_beam(&self) -> BeamIndex {
        *self.beams.last().expect("record with no observations")
    }

    /// Keep only the most recent `tau` observed steps.
    pub fn truncated(&self, tau: usize) -> Result<Self> {
        let have = self.tau();
        if tau == 0 || tau > have {
            return Err(Error::Bounds(format!("cannot truncate a {have}-step record to {tau} steps")));
        }
        Ok(Self {
            beams: self.beams[have - tau..].to_vec(),
            features: self.features[have - tau..].to_vec(),
            labels: self.labels.clone(),
            user_id: self.user_id.clone(),
            t: self.t,
        })
    }

    fn check_shape(&self) -> Result<()> {
        if self.beams.is_empty() || self.beams.len() != self.features.len() {
            return Err(Error::Integrity(format!(
                "record {}@{}: {} beams vs {} feature refs",
                self.user_id,
                self.t,
                self.beams.len(),
                self.features.len()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub name: String,
    records: Vec<InstanceRecord>,
    feature_store: BTreeMap<String, Arc<FeatureMap>>,
}

impl Dataset {
    /// Builds a dataset, pruning store entries no record references.
    pub fn new(
        name: impl Into<String>,
        records: Vec<InstanceRecord>,
        mut feature_store: BTreeMap<String, Arc<FeatureMap>>,
    ) -> Result<Self> {
        let mut referenced = BTreeSet::new();
        let mut shape: Option<(usize, usize)> = None;
        for r in &records {
            r.check_shape()?;
            match shape {
                None => shape = Some((r.tau(), r.horizon())),
                Some(s) if s != (r.tau(), r.horizon()) => {
                    return Err(Error::Integrity(format!(
                        "inconsistent record shapes: (tau, m) = {s:?} and ({}, {})",
                        r.tau(),
                        r.horizon()
                    )))
                }
                _ => {}
            }
            for id in &r.features {
                if !feature_store.contains_key(id) {
                    return Err(Error::Integrity(format!("unresolved image reference {id}")));
                }
                referenced.insert(id.as_str());
            }
        }
        feature_store.retain(|k, _| referenced.contains(k.as_str()));
        Ok(Self { name: name.into(), records, feature_store })
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Default::default() }
    }

    pub fn records(&self) -> &[InstanceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature_store(&self) -> &BTreeMap<String, Arc<FeatureMap>> {
        &self.feature_store
    }

    pub fn feature(&self, id: &str) -> Option<&FeatureMap> {
        self.feature_store.get(id).map(Arc::as_ref)
    }

    pub fn image_ids(&self) -> BTreeSet<&str> {
        self.feature_store.keys().map(String::as_str).collect()
    }

    /// Observation length, or `None` for an empty dataset.
    pub fn tau(&self) -> Option<usize> {
        self.records.first().map(InstanceRecord::tau)
    }

    pub fn horizon(&self) -> Option<usize> {
        self.records.first().map(InstanceRecord::horizon)
    }

    /// Half-open row slice `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.len() {
            return Err(Error::Bounds(format!("slice [{start}, {end}) of {} rows", self.len())));
        }
        self.select(format!("{}[{start}:{end}]", self.name), self.records[start..end].to_vec())
    }

    /// A dataset over the given records sharing this dataset's feature store.
    pub fn select(&self, name: impl Into<String>, records: Vec<InstanceRecord>) -> Result<Self> {
        Dataset::new(name, records, self.feature_store.clone())
    }

    pub fn filter(&self, name: impl Into<String>, keep: impl Fn(&InstanceRecord) -> bool) -> Result<Self> {
        let records = self.records.iter().filter(|r| keep(r)).cloned().collect();
        self.select(name, records)
    }

    /// Every record truncated to its most recent `tau` observations.
    pub fn truncated(&self, tau: usize) -> Result<Self> {
        let records = self.records.iter().map(|r| r.truncated(tau)).collect::<Result<Vec<_>>>()?;
        self.select(format!("{}@tau{tau}", self.name), records)
    }

    pub fn max_beam_index(&self) -> Option<BeamIndex> {
        self.records.iter().flat_map(|r| r.beams.iter().chain(&r.labels)).copied().max()
    }

    pub fn check_beam_range(&self, num_beams: usize) -> Result<()> {
        match self.max_beam_index() {
            Some(max) if max >= num_beams => Err(Error::Index { index: max, len: num_beams }),
            _ => Ok(()),
        }
    }
}

/// Concatenate records and merge feature stores. Shared image IDs must map to
/// identical tensors.
pub fn union<'a>(name: impl Into<String>, datasets: impl IntoIterator<Item = &'a Dataset>) -> Result<Dataset> {
    let mut records = Vec::new();
    let mut store: BTreeMap<String, Arc<FeatureMap>> = BTreeMap::new();
    for d in datasets {
        records.extend(d.records.iter().cloned());
        for (id, fm) in &d.feature_store {
            match store.get(id) {
                Some(existing) if !Arc::ptr_eq(existing, fm) && existing.as_ref() != fm.as_ref() => {
                    return Err(Error::Integrity(format!(
                        "image {id} appears with conflicting tensors"
                    )));
                }
                Some(_) => {}
                None => {
                    store.insert(id.clone(), Arc::clone(fm));
                }
            }
        }
    }
    Dataset::new(name, records, store)
}


#[cfg(test)]
mod tests {
    use super::testutil::dataset;
    use super::*;

    #[test]
    fn unresolved_reference_rejected() {
        let r = InstanceRecord {
            beams: vec![1],
            features: vec!["x".into()],
            labels: vec![1],
            user_id: "u".into(),
            t: 0,
        };
        assert!(matches!(Dataset::new("d", vec![r], BTreeMap::new()), Err(Error::Integrity(_))));
    }

    #[test]
    fn store_pruned_to_references() {
        let d = dataset("d", &[(&[1, 2], &["a", "b"], &[3]), (&[1, 2], &["c", "d"], &[3])]);
        let s = d.slice(1, 2).unwrap();
        assert_eq!(s.image_ids().into_iter().collect::<Vec<_>>(), vec!["c", "d"]);
    }

    #[test]
    fn truncation_keeps_suffix() {
        let d = dataset("d", &[(&[1, 2, 3, 9, 9, 9], &["a", "b", "c", "x", "y", "z"], &[3])]);
        let t = d.truncated(3).unwrap();
        assert_eq!(t.records()[0].beams, vec![9, 9, 9]);
        assert_eq!(t.records()[0].features, vec!["x", "y", "z"]);
        assert_eq!(t.image_ids().len(), 3);
        assert!(d.truncated(7).is_err());
    }

    #[test]
    fn union_partition_and_identity() {
        let d = dataset("d", &[(&[1], &["a"], &[1]), (&[2], &["b"], &[2]), (&[3], &["a"], &[3])]);
        let parts = [d.slice(0, 1).unwrap(), d.slice(1, 2).unwrap(), d.slice(2, 3).unwrap()];
        let u = union("u", parts.iter()).unwrap();
        assert_eq!(u.records(), d.records());
        assert_eq!(u.image_ids(), d.image_ids());
        let e = Dataset::empty("e");
        let u = union("u", [&d, &e]).unwrap();
        assert_eq!(u.records(), d.records());
    }

    #[test]
    fn union_conflicting_image() {
        let a = dataset("a", &[(&[1], &["img"], &[1])]);
        let mut store = BTreeMap::new();
        store.insert("img".to_string(), Arc::new(FeatureMap::from_vec([1, 1, 1], vec![0.5]).unwrap()));
        let b = Dataset::new("b", a.records().to_vec(), store).unwrap();
        assert!(matches!(union("u", [&a, &b]), Err(Error::Integrity(_))));
    }

    #[test]
    fn mixed_shapes_rejected() {
        let mut store = BTreeMap::new();
        store.insert("a".to_string(), Arc::new(FeatureMap::zeros([1, 1, 1])));
        let r1 = InstanceRecord { beams: vec![1], features: vec!["a".into()], labels: vec![1], user_id: "u".into(), t: 0 };
        let r2 = InstanceRecord { labels: vec![1, 2], ..r1.clone() };
        assert!(Dataset::new("d", vec![r1, r2], store).is_err());
    }
}
