//! Per-epoch metric curves as CSV and a model-by-split results table.

use std::fmt::Write as _;
use std::path::Path;

use super::metrics::MetricsRow;
use super::trainer::{EpochMetrics, History};
use crate::error::{Error, Result};
use crate::model::{write_atomic, ModelKind};

pub const HISTORY_HEADER: &str = "epoch,split,loss,accuracy,auc,precision,recall,f1";
pub const TRAIN_SPLIT: &str = "train";
pub const VALIDATION_SPLIT: &str = "validation";

fn push_row(out: &mut String, epoch: usize, split: &str, row: &MetricsRow) {
    let _ = write!(out, "{epoch},{split}");
    for v in row.values() {
        let _ = write!(out, ",{v:.6}");
    }
    out.push('\n');
}

pub fn history_csv(history: &[EpochMetrics]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for e in history {
        push_row(&mut out, e.epoch, TRAIN_SPLIT, &e.train);
        push_row(&mut out, e.epoch, VALIDATION_SPLIT, &e.validation);
    }
    out
}

pub fn export_history(history: &[EpochMetrics], path: &Path) -> Result<()> {
    if history.is_empty() {
        return Err(Error::Data("refusing to export an empty history".into()));
    }
    write_atomic(path, history_csv(history).as_bytes())
}

pub fn parse_history(text: &str) -> Result<History> {
    let bad = |line: usize, m: &str| Error::Data(format!("history line {line}: {m}"));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == HISTORY_HEADER => {}
        _ => return Err(bad(1, "missing header")),
    }
    let mut history: History = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 8 {
            return Err(bad(line_no, "expected 8 fields"));
        }
        let epoch: usize = fields[0].parse().map_err(|_| bad(line_no, "bad epoch"))?;
        let mut v = [0.0; 6];
        for (slot, f) in v.iter_mut().zip(&fields[2..]) {
            *slot = f.parse().map_err(|_| bad(line_no, "bad number"))?;
        }
        let row = MetricsRow::from_values(v);
        match fields[1] {
            TRAIN_SPLIT => history.push(EpochMetrics { epoch, train: row, validation: MetricsRow::default() }),
            VALIDATION_SPLIT => match history.last_mut() {
                Some(e) if e.epoch == epoch => e.validation = row,
                _ => return Err(bad(line_no, "validation row without matching train row")),
            },
            other => return Err(bad(line_no, &format!("unknown split {other}"))),
        }
    }
    Ok(history)
}

pub fn read_history(path: &Path) -> Result<History> {
    parse_history(&std::fs::read_to_string(path)?)
}

/// Rows of `(model, split, metrics)` as a results table: loss
/// to 4 decimals, every other metric as a percentage to 2 decimals. The
/// model name is only printed when it changes.
pub fn format_table(rows: &[(&str, &str, &MetricsRow)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14}{:<12}{:>8}{:>10}{:>9}{:>11}{:>9}{:>9}",
        "Model", "Split", "Loss", "Accuracy", "AUC", "Precision", "Recall", "F1"
    );
    let mut last = None;
    for &(model, split, m) in rows {
        let name = if last == Some(model) { "" } else { model };
        last = Some(model);
        let _ = writeln!(
            out,
            "{:<14}{:<12}{:>8.4}{:>10.2}{:>9.2}{:>11.2}{:>9.2}{:>9.2}",
            name,
            split,
            m.loss,
            m.accuracy * 100.0,
            m.auc * 100.0,
            m.precision * 100.0,
            m.recall * 100.0,
            m.f1 * 100.0
        );
    }
    out
}

/// Training and validation rows of one epoch per model.
pub fn summary_table(rows: &[(ModelKind, &EpochMetrics)]) -> String {
    let flat: Vec<(&str, &str, &MetricsRow)> = rows
        .iter()
        .flat_map(|(kind, e)| {
            [
                (kind.display_name(), "Training", &e.train),
                (kind.display_name(), "Validation", &e.validation),
            ]
        })
        .collect();
    format_table(&flat)
}
