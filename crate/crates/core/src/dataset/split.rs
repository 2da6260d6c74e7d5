//! Leakage-free re-partitioning of a (train, validation) dataset pair.
//!
//! Given cuts `(a, b)` on the training source and `(c, d)` on the validation
//! source, the outputs are
//!
//! ```text
//! train = d_t[a:b] ∪ d_v[c:d]
//! val1  = d_t[:a]  ∪ d_v[:c]
//! val2  = d_t[b:]  ∪ d_v[d:]
//! ```
//!
//! and no image ID may appear in more than one output.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{union, Dataset};
use crate::error::{Error, Result};

pub const PAPER_ROWS_TRAIN: usize = 281_100;
pub const PAPER_ROWS_VAL: usize = 120_468;
pub const PAPER_CUTS_TRAIN: (usize, usize) = (70_251, 210_787);
pub const PAPER_CUTS_VAL: (usize, usize) = (30_141, 90_389);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCuts {
    pub train: (usize, usize),
    pub val: (usize, usize),
}

impl Default for SplitCuts {
    fn default() -> Self {
        Self { train: PAPER_CUTS_TRAIN, val: PAPER_CUTS_VAL }
    }
}

impl SplitCuts {
    /// Scale the reference cuts to sources of the given sizes.
    pub fn proportional(train_len: usize, val_len: usize) -> Self {
        let scale = |cut: usize, total: usize, len: usize| -> usize {
            ((cut as f64 / total as f64) * len as f64).round() as usize
        };
        Self {
            train: (
                scale(PAPER_CUTS_TRAIN.0, PAPER_ROWS_TRAIN, train_len),
                scale(PAPER_CUTS_TRAIN.1, PAPER_ROWS_TRAIN, train_len),
            ),
            val: (
                scale(PAPER_CUTS_VAL.0, PAPER_ROWS_VAL, val_len),
                scale(PAPER_CUTS_VAL.1, PAPER_ROWS_VAL, val_len),
            ),
        }
    }

    /// Move every cut to the nearest position that does not split an image
    /// across two partitions.
    pub fn snapped(self, d_t: &Dataset, d_v: &Dataset) -> Self {
        let (ct, cv) = (clean_cut_points(d_t), clean_cut_points(d_v));
        let mut out = Self {
            train: (snap_cut(&ct, self.train.0), snap_cut(&ct, self.train.1)),
            val: (snap_cut(&cv, self.val.0), snap_cut(&cv, self.val.1)),
        };
        // a cut pair must stay a non-empty range
        out.train = widen(&ct, out.train, d_t.len());
        out.val = widen(&cv, out.val, d_v.len());
        out
    }
}

/// Grows a collapsed range to the next clean cut, or back to the previous
/// one when the start already sits at the end.
fn widen(cuts: &[usize], (a, b): (usize, usize), len: usize) -> (usize, usize) {
    if a < b {
        return (a, b);
    }
    match cuts.iter().copied().find(|&p| p > a && p <= len) {
        Some(p) => (a, p),
        None => (cuts.iter().copied().filter(|&p| p < a).max().unwrap_or(0), a.max(1).min(len)),
    }
}

/// Per-output provenance: half-open row ranges taken from each source.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub cuts: SplitCuts,
    pub source_rows: BTreeMap<String, usize>,
    /// output name -> source name -> row ranges
    pub outputs: BTreeMap<String, BTreeMap<String, Vec<(usize, usize)>>>,
    pub sizes: BTreeMap<String, usize>,
    pub image_counts: BTreeMap<String, usize>,
}

#[derive(Debug)]
pub struct DatasetSplit {
    pub train: Dataset,
    pub val1: Dataset,
    pub val2: Dataset,
    pub manifest: SplitManifest,
}

pub fn split_leakage_free(d_t: &Dataset, d_v: &Dataset, cuts: SplitCuts) -> Result<DatasetSplit> {
    let (a, b) = cuts.train;
    let (c, d) = cuts.val;
    if !(a < b && b <= d_t.len()) {
        return Err(Error::Bounds(format!("train cuts ({a}, {b}) invalid for {} rows", d_t.len())));
    }
    if !(c < d && d <= d_v.len()) {
        return Err(Error::Bounds(format!("validation cuts ({c}, {d}) invalid for {} rows", d_v.len())));
    }
    let train = union("D_t", [&d_t.slice(a, b)?, &d_v.slice(c, d)?])?;
    let val1 = union("D_v1", [&d_t.slice(0, a)?, &d_v.slice(0, c)?])?;
    let val2 = union("D_v2", [&d_t.slice(b, d_t.len())?, &d_v.slice(d, d_v.len())?])?;

    let mut shared: BTreeSet<String> = BTreeSet::new();
    for (x, y) in [(&train, &val1), (&train, &val2), (&val1, &val2)] {
        shared.extend(leakage_between(x, y));
    }
    if !shared.is_empty() {
        return Err(Error::Leakage { ids: shared.into_iter().collect() });
    }

    let src = |t: (usize, usize), v: (usize, usize)| {
        BTreeMap::from([(d_t.name.clone(), vec![t]), (d_v.name.clone(), vec![v])])
    };
    let manifest = SplitManifest {
        cuts,
        source_rows: BTreeMap::from([(d_t.name.clone(), d_t.len()), (d_v.name.clone(), d_v.len())]),
        outputs: BTreeMap::from([
            ("D_t".to_string(), src((a, b), (c, d))),
            ("D_v1".to_string(), src((0, a), (0, c))),
            ("D_v2".to_string(), src((b, d_t.len()), (d, d_v.len()))),
        ]),
        sizes: BTreeMap::from([
            ("D_t".to_string(), train.len()),
            ("D_v1".to_string(), val1.len()),
            ("D_v2".to_string(), val2.len()),
        ]),
        image_counts: BTreeMap::from([
            ("D_t".to_string(), train.image_ids().len()),
            ("D_v1".to_string(), val1.image_ids().len()),
            ("D_v2".to_string(), val2.image_ids().len()),
        ]),
    };
    Ok(DatasetSplit { train, val1, val2, manifest })
}

/// Image IDs present in both datasets, sorted.
pub fn leakage_between(x: &Dataset, y: &Dataset) -> Vec<String> {
    let ys = y.image_ids();
    x.image_ids().into_iter().filter(|id| ys.contains(id)).map(str::to_string).collect()
}

/// Row positions `p` (including 0 and `len`) such that no image is referenced
/// both before and after `p`.
pub fn clean_cut_points(d: &Dataset) -> Vec<usize> {
    let mut span: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (i, r) in d.records().iter().enumerate() {
        for id in &r.features {
            span.entry(id.as_str()).and_modify(|s| s.1 = i).or_insert((i, i));
        }
    }
    // crossing[p] > 0 iff some image spans rows p-1 and p
    let mut delta = vec![0i64; d.len() + 2];
    for (first, last) in span.values() {
        if last > first {
            delta[first + 1] += 1;
            delta[last + 1] -= 1;
        }
    }
    let mut out = Vec::new();
    let mut crossing = 0i64;
    for (p, dp) in delta.iter().enumerate().take(d.len() + 1) {
        crossing += dp;
        if crossing == 0 {
            out.push(p);
        }
    }
    out
}

/// Nearest clean position to `target`; lower position on ties.
pub fn snap_cut(clean: &[usize], target: usize) -> usize {
    match clean.binary_search(&target) {
        Ok(i) => clean[i],
        Err(i) => {
            let below = i.checked_sub(1).map(|j| clean[j]);
            let above = clean.get(i).copied();
            match (below, above) {
                (Some(l), Some(h)) => {
                    if target - l <= h - target {
                        l
                    } else {
                        h
                    }
                }
                (Some(l), None) => l,
                (None, Some(h)) => h,
                (None, None) => target,
            }
        }
    }
}
