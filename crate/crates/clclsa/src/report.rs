//! Plot-ready result tables: one row per trial plus aggregate rows.

use std::fs;
use std::path::Path;

use clclsa_core::eval::{aggregate, MetricValues, TrialRecord};
use clclsa_core::model::LossWeights;
use clclsa_core::train::{EpochLog, GridResult, TrialStatus};
use serde::{Deserialize, Serialize};

use crate::error::{csv_err, io, Error, Result};
use crate::io::write_json;

pub const COLUMNS: [&str; 14] = [
    "dataset",
    "variant",
    "eta",
    "seed",
    "lambda_al",
    "lambda_co",
    "lambda_cl",
    "alpha",
    "acc",
    "f1",
    "auc",
    "weighted_f1",
    "macro_f1",
    "status",
];

/// One line of a results table. Aggregate rows have no seed and status
/// `mean` or `std`; failed trials have no metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub variant: String,
    pub eta: f64,
    pub seed: Option<u64>,
    pub lambda_al: f64,
    pub lambda_co: f64,
    pub lambda_cl: f64,
    pub alpha: f64,
    pub acc: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub weighted_f1: Option<f64>,
    pub macro_f1: Option<f64>,
    pub status: String,
}

impl ReportRow {
    fn new(t: &TrialRecord, seed: Option<u64>, status: String) -> Self {
        Self {
            dataset: t.dataset.clone(),
            variant: t.variant.clone(),
            eta: t.eta,
            seed,
            lambda_al: t.weights.lambda_al,
            lambda_co: t.weights.lambda_co,
            lambda_cl: t.weights.lambda_cl,
            alpha: t.weights.alpha,
            acc: None,
            f1: None,
            auc: None,
            weighted_f1: None,
            macro_f1: None,
            status,
        }
    }

    fn with_metrics(mut self, m: &MetricValues) -> Self {
        self.acc = Some(m.acc);
        self.f1 = m.f1;
        self.auc = m.auc;
        self.weighted_f1 = Some(m.weighted_f1);
        self.macro_f1 = Some(m.macro_f1);
        self
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda_al: self.lambda_al,
            lambda_co: self.lambda_co,
            lambda_cl: self.lambda_cl,
            alpha: self.alpha,
        }
    }
}

pub fn trial_row(t: &TrialRecord) -> ReportRow {
    let row = ReportRow::new(t, Some(t.seed), t.status.clone());
    match &t.report {
        Some(r) => row.with_metrics(&MetricValues {
            acc: r.acc,
            f1: r.f1,
            auc: r.auc,
            weighted_f1: r.weighted_f1,
            macro_f1: r.macro_f1,
        }),
        None => row,
    }
}

/// Per-trial rows followed by `mean` and `std` rows for every group of
/// trials sharing dataset, variant, eta and weights (in first-seen order).
pub fn report_rows(trials: &[TrialRecord]) -> Vec<ReportRow> {
    let mut rows: Vec<ReportRow> = trials.iter().map(trial_row).collect();
    let mut groups: Vec<Vec<TrialRecord>> = Vec::new();
    for t in trials {
        let same = |g: &Vec<TrialRecord>| {
            let h = &g[0];
            h.dataset == t.dataset && h.variant == t.variant && h.eta == t.eta && h.weights == t.weights
        };
        match groups.iter_mut().find(|g| same(g)) {
            Some(g) => g.push(t.clone()),
            None => groups.push(vec![t.clone()]),
        }
    }
    for g in &groups {
        if let Some(agg) = aggregate(g) {
            rows.push(ReportRow::new(&g[0], None, "mean".into()).with_metrics(&agg.mean));
            rows.push(ReportRow::new(&g[0], None, "std".into()).with_metrics(&agg.std));
        }
    }
    rows
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:?}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Writes the long-format table of `trials` (plus aggregates) to `path`.
pub fn emit_report(trials: &[TrialRecord], path: &Path, format: Format) -> Result<()> {
    let rows = report_rows(trials);
    match format {
        Format::Json => write_json(path, &rows),
        Format::Csv => write_rows_csv(path, &rows),
    }
}

pub fn write_rows_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(COLUMNS).map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.variant.clone(),
            format!("{:?}", r.eta),
            r.seed.map_or_else(String::new, |s| s.to_string()),
            format!("{:?}", r.lambda_al),
            format!("{:?}", r.lambda_co),
            format!("{:?}", r.lambda_cl),
            format!("{:?}", r.alpha),
            cell(r.acc),
            cell(r.f1),
            cell(r.auc),
            cell(r.weighted_f1),
            cell(r.macro_f1),
            r.status.clone(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

/// Reads a CSV written by [`emit_report`].
pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = reader.headers().map_err(csv_err(path))?.clone();
    if headers.iter().ne(COLUMNS) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "unexpected header".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let line = i + 2;
        let bad = |field: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("invalid {field}"),
        };
        let num = |k: usize| -> Result<f64> { record[k].parse().map_err(|_| bad(COLUMNS[k])) };
        let opt = |k: usize| -> Result<Option<f64>> {
            if record[k].is_empty() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        rows.push(ReportRow {
            dataset: record[0].to_string(),
            variant: record[1].to_string(),
            eta: num(2)?,
            seed: if record[3].is_empty() {
                None
            } else {
                Some(record[3].parse().map_err(|_| bad("seed"))?)
            },
            lambda_al: num(4)?,
            lambda_co: num(5)?,
            lambda_cl: num(6)?,
            alpha: num(7)?,
            acc: opt(8)?,
            f1: opt(9)?,
            auc: opt(10)?,
            weighted_f1: opt(11)?,
            macro_f1: opt(12)?,
            status: record[13].to_string(),
        });
    }
    Ok(rows)
}

/// Per-epoch training log.
pub fn write_epoch_log(path: &Path, logs: &[EpochLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record([
        "epoch",
        "l_clf",
        "l_al",
        "l_co",
        "l_cl",
        "total",
        "lr",
        "train_acc",
        "val_acc",
        "latent_variance",
    ])
    .map_err(csv_err(path))?;
    for l in logs {
        let b = &l.breakdown;
        let var: Vec<String> = l.latent_variance.iter().map(|v| format!("{v:?}")).collect();
        w.write_record([
            l.epoch.to_string(),
            format!("{:?}", b.l_clf),
            format!("{:?}", b.l_al),
            format!("{:?}", b.l_co),
            format!("{:?}", b.l_cl),
            format!("{:?}", b.total),
            format!("{:?}", l.lr),
            format!("{:?}", l.train_acc),
            cell(l.val.as_ref().map(|r| r.acc)),
            var.join(";"),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

/// Grid-search summary, best trial first.
pub fn write_grid_summary(path: &Path, result: &GridResult) -> Result<()> {
    let mut text = String::from("lambda_al,lambda_co,lambda_cl,metric,status\n");
    for t in &result.ranked {
        let w = &t.weights;
        let (metric, status) = match &t.status {
            TrialStatus::Ok { metric, .. } => (format!("{metric:?}"), "ok".to_string()),
            TrialStatus::Failed { reason } => (String::new(), format!("failed: {reason}")),
        };
        text.push_str(&format!(
            "{:?},{:?},{:?},{},{}\n",
            w.lambda_al,
            w.lambda_co,
            w.lambda_cl,
            metric,
            csv_quote(&status)
        ));
    }
    fs::write(path, text).map_err(io(path))
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
