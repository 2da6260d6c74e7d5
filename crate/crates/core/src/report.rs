//! Plain-text and CSV renderings of score tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ScoreReport;
use crate::pipeline::{ClusterTable, InputMode};

/// Named score rows, e.g. one per baseline or per memory length.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub title: String,
    pub rows: Vec<(String, ScoreReport)>,
}

impl ScoreTable {
    pub fn new(title: impl Into<String>) -> Self {
        Self { title: title.into(), rows: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, report: ScoreReport) {
        self.rows.push((name.into(), report));
    }

    pub fn to_text(&self) -> String {
        let w = self.rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(6);
        let mut out = format!("{}\n{:<w$}  {:>8} {:>8} {:>8} {:>8} {:>8}\n", self.title, "method", "Score_1", "Score_3", "Score_5", "Total", "n");
        for (name, r) in &self.rows {
            out += &format!(
                "{name:<w$}  {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8}\n",
                r.score_1, r.score_3, r.score_5, r.total, r.n_instances
            );
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "score_1", "score_3", "score_5", "total", "n_instances", "sigma"])?;
        for (name, r) in &self.rows {
            w.write_record([
                name.clone(),
                r.score_1.to_string(),
                r.score_3.to_string(),
                r.score_5.to_string(),
                r.total.to_string(),
                r.n_instances.to_string(),
                r.sigma.to_string(),
            ])?;
        }
        finish(w)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Integrity(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Integrity(format!("csv output: {e}")))
}

fn mode_label(m: InputMode) -> &'static str {
    match m {
        InputMode::BeamOnly => "beams",
        InputMode::Staggered => "beams+images (staggered)",
        InputMode::Concat => "beams+images",
    }
}

fn modes(t: &ClusterTable) -> Vec<InputMode> {
    let mut m: Vec<InputMode> = t.rows.iter().flat_map(|r| r.reports.keys().copied()).collect();
    m.sort();
    m.dedup();
    m
}

fn cell(r: Option<&ScoreReport>) -> String {
    r.map_or_else(|| "n/a".to_string(), |r| format!("{:.3}", r.score_5))
}

/// Score_5 per plan row and mode, then the weighted aggregates.
pub fn cluster_table_text(t: &ClusterTable) -> String {
    let modes = modes(t);
    let mut out = format!(
        "Score_5 by training subset -> validation cluster\ntrain sizes A/B/C = {:?}, validation sizes A/B/C = {:?}\n",
        t.train_sizes, t.val_sizes
    );
    out += &format!("{:<14}", "train -> val");
    for m in &modes {
        out += &format!(" {:>26}", mode_label(*m));
    }
    out.push('\n');
    for r in &t.rows {
        out += &format!("{:<14}", format!("{}_t -> {}_v", r.train, r.val));
        for m in &modes {
            out += &format!(" {:>26}", cell(r.reports.get(m).and_then(Option::as_ref)));
        }
        out.push('\n');
    }
    for a in &t.aggregates {
        let picks: Vec<String> = a.picks.iter().map(|(c, i)| format!("{}: row {}", c.letter(), i + 1)).collect();
        out += &format!(
            "weighted best ({}): Score_5 {:.3}, total {:.3} [{}]\n",
            mode_label(a.mode),
            a.report.score_5,
            a.report.total,
            picks.join(", ")
        );
    }
    for (m, r) in &t.unclustered {
        out += &format!("D_t -> D_v ({}): Score_5 {:.3}, total {:.3}\n", mode_label(*m), r.score_5, r.total);
    }
    out
}

pub fn cluster_table_csv(t: &ClusterTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["train", "val", "mode", "n_train", "n_val", "score_1", "score_3", "score_5", "total"])?;
    for r in &t.rows {
        for (m, rep) in &r.reports {
            let scores = match rep {
                Some(x) => [x.score_1, x.score_3, x.score_5, x.total].map(|v| v.to_string()),
                None => std::array::from_fn(|_| String::new()),
            };
            let mut rec = vec![r.train.to_string(), r.val.to_string(), mode_name(*m), r.n_train.to_string(), r.n_val.to_string()];
            rec.extend(scores);
            w.write_record(&rec)?;
        }
    }
    for a in &t.aggregates {
        let x = &a.report;
        let rec = ["weighted_best".into(), "A+B+C".into(), mode_name(a.mode), String::new(), x.n_instances.to_string()];
        w.write_record(rec.into_iter().chain([x.score_1, x.score_3, x.score_5, x.total].map(|v| v.to_string())))?;
    }
    for (m, x) in &t.unclustered {
        let rec = ["D".into(), "D".into(), mode_name(*m), String::new(), x.n_instances.to_string()];
        w.write_record(rec.into_iter().chain([x.score_1, x.score_3, x.score_5, x.total].map(|v| v.to_string())))?;
    }
    finish(w)
}

fn mode_name(m: InputMode) -> String {
    serde_json::to_value(m).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_table_renders() {
        let mut t = ScoreTable::new("baselines");
        t.push("last step", ScoreReport::from_scores(0.5, 0.4, 0.3, 5.0, 10));
        let text = t.to_text();
        assert!(text.contains("last step"));
        assert!(text.contains("0.500"));
        let csv = t.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().starts_with("last step,0.5,0.4,0.3,"));
    }
}
