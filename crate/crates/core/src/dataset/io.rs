//! ViWi-style CSV ingestion and export.
//!
//! One row per instance with columns
//! `beam_1, img_1, ..., beam_tau, img_tau, label_1, ..., label_m, user_id, t`.
//! Image references are file stems resolved as `<feature_dir>/<id>.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::warn;

use super::{Dataset, InstanceRecord};
use crate::error::{Error, Result};
use crate::feature::FeatureMap;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkippedRow {
    /// 1-based data row number (the header is row 0).
    pub row: usize,
    pub image_id: String,
}

#[derive(Debug)]
pub struct IngestOutcome {
    pub dataset: Dataset,
    pub skipped: Vec<SkippedRow>,
}

struct Layout {
    tau: usize,
    horizon: usize,
}

fn parse_header(header: &csv::StringRecord) -> Result<Layout> {
    let bad = |msg: String| Error::Parse { row: 0, msg };
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    let tau = cols.iter().filter(|c| c.starts_with("beam_")).count();
    let horizon = cols.iter().filter(|c| c.starts_with("label_")).count();
    if tau == 0 || horizon == 0 {
        return Err(bad("header needs beam_k, img_k and label_k columns".into()));
    }
    let mut expected: Vec<String> = Vec::with_capacity(2 * tau + horizon + 2);
    for k in 1..=tau {
        expected.push(format!("beam_{k}"));
        expected.push(format!("img_{k}"));
    }
    expected.extend((1..=horizon).map(|k| format!("label_{k}")));
    expected.push("user_id".into());
    expected.push("t".into());
    if cols != expected {
        return Err(bad(format!("unexpected header layout, expected {}", expected.join(","))));
    }
    Ok(Layout { tau, horizon })
}

fn parse_index(s: &str, row: usize, col: &str) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|_| Error::Parse {
        row,
        msg: format!("column {col}: {s:?} is not a beam index"),
    })
}

pub fn ingest_viwi_csv(path: &Path, feature_dir: &Path) -> Result<IngestOutcome> {
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Ok(IngestOutcome { dataset: Dataset::empty(name), skipped: vec![] });
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let layout = parse_header(reader.headers()?)?;
    let width = 2 * layout.tau + layout.horizon + 2;

    let mut store: BTreeMap<String, Arc<FeatureMap>> = BTreeMap::new();
    let mut missing: BTreeMap<String, ()> = BTreeMap::new();
    let mut records = Vec::new();
    let mut skipped = Vec::new();

    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        if row.len() != width {
            return Err(Error::Parse {
                row: row_no,
                msg: format!(
                    "expected {width} columns ({} beam/image pairs, {} labels, user_id, t), got {}",
                    layout.tau,
                    layout.horizon,
                    row.len()
                ),
            });
        }
        let mut beams = Vec::with_capacity(layout.tau);
        let mut features = Vec::with_capacity(layout.tau);
        for k in 0..layout.tau {
            beams.push(parse_index(&row[2 * k], row_no, &format!("beam_{}", k + 1))?);
            features.push(row[2 * k + 1].trim().to_string());
        }
        let labels = (0..layout.horizon)
            .map(|k| parse_index(&row[2 * layout.tau + k], row_no, &format!("label_{}", k + 1)))
            .collect::<Result<Vec<_>>>()?;
        let user_id = row[width - 2].trim().to_string();
        let t = row[width - 1].trim().parse::<i64>().map_err(|_| Error::Parse {
            row: row_no,
            msg: format!("column t: {:?} is not an integer", &row[width - 1]),
        })?;

        let mut unresolved = None;
        for id in &features {
            if store.contains_key(id) {
                continue;
            }
            if missing.contains_key(id) {
                unresolved = Some(id.clone());
                break;
            }
            let file = feature_path(feature_dir, id);
            if !file.exists() {
                warn!("row {row_no}: feature file {} not found, skipping row", file.display());
                missing.insert(id.clone(), ());
                unresolved = Some(id.clone());
                break;
            }
            store.insert(id.clone(), Arc::new(FeatureMap::load_json(&file)?));
        }
        if let Some(image_id) = unresolved {
            skipped.push(SkippedRow { row: row_no, image_id });
            continue;
        }
        records.push(InstanceRecord { beams, features, labels, user_id, t });
    }
    Ok(IngestOutcome { dataset: Dataset::new(name, records, store)?, skipped })
}

fn feature_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.json"))
}

pub fn write_viwi_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Integrity(format!("{other:?}")),
    })?;
    let (tau, horizon) = match (dataset.tau(), dataset.horizon()) {
        (Some(t), Some(m)) => (t, m),
        _ => {
            w.flush().map_err(|e| Error::io(path, e))?;
            return Ok(());
        }
    };
    let mut header = Vec::new();
    for k in 1..=tau {
        header.push(format!("beam_{k}"));
        header.push(format!("img_{k}"));
    }
    header.extend((1..=horizon).map(|k| format!("label_{k}")));
    header.push("user_id".into());
    header.push("t".into());
    w.write_record(&header)?;
    for r in dataset.records() {
        let mut row = Vec::with_capacity(header.len());
        for (b, img) in r.beams.iter().zip(&r.features) {
            row.push(b.to_string());
            row.push(img.clone());
        }
        row.extend(r.labels.iter().map(|l| l.to_string()));
        row.push(r.user_id.clone());
        row.push(r.t.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_feature_store(dataset: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (id, fm) in dataset.feature_store() {
        fm.save_json(&feature_path(dir, id))?;
    }
    Ok(())
}
