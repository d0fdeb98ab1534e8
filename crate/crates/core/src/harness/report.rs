//! CSV training logs, metrics tables.

use std::io::Write;

use serde::Serialize;

use super::metrics::MetricsReport;
use crate::context::ContextModel;
use crate::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

#[derive(Serialize)]
struct LogRow<'a> {
    record: &'a str,
    class: Option<i32>,
    path: &'a str,
    level: usize,
    round: Option<usize>,
    loss: Option<f64>,
    set_size: Option<usize>,
    misclassified: Option<usize>,
    copied_from: Option<&'a str>,
}

/// One row per boosting round, per classifier and per cascade level.
pub fn write_training_log<W: Write>(out: W, model: &ContextModel) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in &model.pipelines {
        for c in &p.classifiers {
            if c.copied_from.is_none() {
                for (round, &loss) in c.model.train_loss.iter().enumerate() {
                    w.serialize(LogRow {
                        record: "round",
                        class: p.class,
                        path: &c.path,
                        level: c.level,
                        round: Some(round),
                        loss: Some(loss),
                        set_size: None,
                        misclassified: None,
                        copied_from: None,
                    })
                    .map_err(csv_err)?;
                }
            }
            w.serialize(LogRow {
                record: "classifier",
                class: p.class,
                path: &c.path,
                level: c.level,
                round: None,
                loss: c.model.train_loss.last().copied(),
                set_size: Some(c.set_size),
                misclassified: Some(c.misclassified),
                copied_from: c.copied_from.as_deref(),
            })
            .map_err(csv_err)?;
        }
        for l in &p.levels {
            w.serialize(LogRow {
                record: "level",
                class: p.class,
                path: "",
                level: l.level,
                round: None,
                loss: None,
                set_size: Some(l.pixels),
                misclassified: Some(l.misclassified),
                copied_from: None,
            })
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    image: &'a str,
    accuracy: f64,
    voc: f64,
    f_measure: f64,
    dice: f64,
    rand_index: f64,
    threshold: Option<f64>,
}

pub fn write_metrics_csv<W: Write>(out: W, rows: &[(String, MetricsReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (name, m) in rows {
        w.serialize(MetricsRow {
            image: name,
            accuracy: m.accuracy,
            voc: m.voc,
            f_measure: m.f_measure,
            dice: m.dice,
            rand_index: m.rand_index,
            threshold: m.threshold,
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width table of the same columns.
pub fn metrics_table(rows: &[(String, MetricsReport)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
    let mut s = format!(
        "{:<width$}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}  {:>9}\n",
        "image", "accuracy", "voc", "f", "dice", "rand", "threshold"
    );
    for (name, m) in rows {
        let t = m
            .threshold
            .map_or_else(|| "-".to_string(), |t| format!("{t:.4}"));
        s.push_str(&format!(
            "{name:<width$}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}  {t:>9}\n",
            m.accuracy, m.voc, m.f_measure, m.dice, m.rand_index
        ));
    }
    s
}
