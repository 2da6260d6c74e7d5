//! Image embedders: PCA, autoencoder bottleneck, or the penultimate layer of
//! a multi-label beam classifier.

mod learned;
mod pca;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use learned::{ae_train, cls_embed_train, multi_hot, total_variance, AeModel, ClsEmbedModel, EmbedTrainConfig};
pub use pca::{pca_fit, PcaModel};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::feature::FeatureMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    Pca,
    Ae,
    Cls,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Embedder {
    Pca(PcaModel),
    Ae(AeModel),
    Cls(ClsEmbedModel),
}

/// Rows embedded per parallel work item.
const EMBED_CHUNK: usize = 256;

impl Embedder {
    pub fn kind(&self) -> EmbedderKind {
        match self {
            Embedder::Pca(_) => EmbedderKind::Pca,
            Embedder::Ae(_) => EmbedderKind::Ae,
            Embedder::Cls(_) => EmbedderKind::Cls,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Embedder::Pca(m) => m.input_dim(),
            Embedder::Ae(m) => m.input_dim(),
            Embedder::Cls(m) => m.input_dim(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Embedder::Pca(m) => m.dim(),
            Embedder::Ae(m) => m.bottleneck_dim,
            Embedder::Cls(m) => m.embed_dim,
        }
    }

    pub fn embed_matrix(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self {
            Embedder::Pca(m) => m.embed_matrix(x),
            Embedder::Ae(m) => m.embed_matrix(x),
            Embedder::Cls(m) => m.embed_matrix(x),
        }
    }

    pub fn embed_image(&self, fm: &FeatureMap) -> Result<Array1<f64>> {
        let x = ArrayView2::from_shape((1, fm.len()), fm.as_slice()).expect("1 x len view");
        Ok(self.embed_matrix(x)?.row(0).to_owned())
    }

    /// Embeds every stored feature map, in parallel chunks.
    pub fn embed_store(&self, store: &BTreeMap<String, Arc<FeatureMap>>) -> Result<BTreeMap<String, Array1<f64>>> {
        let ids: Vec<&String> = store.keys().collect();
        let chunks: Vec<Result<Vec<(String, Array1<f64>)>>> = ids
            .par_chunks(EMBED_CHUNK)
            .map(|chunk| {
                let maps: Vec<&FeatureMap> = chunk.iter().map(|id| store[*id].as_ref()).collect();
                let z = self.embed_matrix(feature_matrix(&maps)?.view())?;
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Integrity("embedder produced non-finite values".into()));
                }
                Ok(chunk.iter().zip(z.rows()).map(|(id, r)| ((*id).clone(), r.to_owned())).collect())
            })
            .collect();
        let mut out = BTreeMap::new();
        for c in chunks {
            out.extend(c?);
        }
        Ok(out)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Stacks flattened feature maps as rows; all maps must share dimensions.
pub fn feature_matrix(maps: &[&FeatureMap]) -> Result<Array2<f64>> {
    let d = maps.first().map(|m| m.len()).unwrap_or(0);
    let mut x = Array2::zeros((maps.len(), d));
    for (i, m) in maps.iter().enumerate() {
        if m.len() != d {
            return Err(Error::Dimension(format!("feature map {i} has {} values, expected {d}", m.len())));
        }
        x.row_mut(i).assign(&ndarray::ArrayView1::from(m.as_slice()));
    }
    Ok(x)
}

/// For each image referenced by the dataset, the set of beams served to the
/// users observed in it.
pub fn image_label_sets(d: &Dataset) -> BTreeMap<String, BTreeSet<usize>> {
    let mut out: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for rec in d.records() {
        for (id, &beam) in rec.features.iter().zip(&rec.beams) {
            out.entry(id.clone()).or_default().insert(beam);
        }
    }
    out
}

/// Fits an embedder on the images of `train`. Only the training split's
/// feature store is visible here, so validation images cannot leak in.
pub fn fit_embedder(
    kind: EmbedderKind,
    k: usize,
    train: &Dataset,
    num_beams: usize,
    cfg: &EmbedTrainConfig,
) -> Result<Option<Embedder>> {
    if kind == EmbedderKind::None {
        return Ok(None);
    }
    let store = train.feature_store();
    if store.is_empty() {
        return Err(Error::Config("cannot fit an image embedder without training images".into()));
    }
    let maps: Vec<&FeatureMap> = store.values().map(|m| m.as_ref()).collect();
    let x = feature_matrix(&maps)?;
    let model = match kind {
        EmbedderKind::Pca => Embedder::Pca(pca_fit(x.view(), k)?),
        EmbedderKind::Ae => Embedder::Ae(ae_train(x.view(), k, cfg)?),
        EmbedderKind::Cls => {
            let sets = image_label_sets(train);
            let labels: Vec<BTreeSet<usize>> = store.keys().map(|id| sets.get(id).cloned().unwrap_or_default()).collect();
            Embedder::Cls(cls_embed_train(x.view(), &labels, num_beams, k, cfg)?)
        }
        EmbedderKind::None => unreachable!("handled above"),
    };
    Ok(Some(model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{testutil, InstanceRecord};

    fn with_features(d: &Dataset) -> Dataset {
        let store = d
            .image_ids()
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let v = vec![i as f64, (i * i) as f64 * 0.5, 1.0 - i as f64];
                (id.to_string(), Arc::new(FeatureMap::from_vec([1, 1, 3], v).unwrap()))
            })
            .collect();
        let records: Vec<InstanceRecord> = d.records().to_vec();
        Dataset::new("f", records, store).unwrap()
    }

    #[test]
    fn label_sets_union_users() {
        let d = testutil::dataset("d", &[(&[1, 2], &["a", "b"], &[3]), (&[5, 2], &["a", "c"], &[3])]);
        let sets = image_label_sets(&d);
        assert_eq!(sets["a"], BTreeSet::from([1, 5]));
        assert_eq!(sets["b"], BTreeSet::from([2]));
        assert_eq!(sets.len(), 3);
    }

    #[test]
    fn store_embedding_shapes() {
        let d = with_features(&testutil::dataset("d", &[(&[1, 2], &["a", "b"], &[3]), (&[5, 2], &["a", "c"], &[3])]));
        let e = fit_embedder(EmbedderKind::Pca, 2, &d, 8, &EmbedTrainConfig::default()).unwrap().unwrap();
        let z = e.embed_store(d.feature_store()).unwrap();
        assert_eq!(z.len(), 3);
        assert!(z.values().all(|v| v.len() == 2 && v.iter().all(|x| x.is_finite())));
        assert_eq!(e.embed_image(d.feature("b").unwrap()).unwrap(), z["b"]);
        assert!(fit_embedder(EmbedderKind::None, 2, &d, 8, &EmbedTrainConfig::default()).unwrap().is_none());
    }
}
