use std::fmt::Write as _;
use std::thread;

use super::{evaluate, train_classifier, Accuracy, TrainConfig};
use crate::error::{Error, Result};
use crate::models::{Classifier, EmbeddedQuestion, ModelKind};
use crate::numerics::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub hidden: usize,
    pub train: Accuracy,
    pub test: Accuracy,
}

/// Final accuracies per hidden size.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub kind: ModelKind,
    pub rows: Vec<SweepRow>,
}

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

impl SweepTable {
    fn header(&self) -> &'static [&'static str] {
        match self.kind {
            ModelKind::One => &["h", "train_main", "test_main"],
            ModelKind::Two => &["h", "train_main", "train_sub", "test_main", "test_sub"],
        }
    }

    fn cells(&self, row: &SweepRow) -> Vec<String> {
        let mut cells = vec![row.hidden.to_string(), pct(row.train.main)];
        if self.kind == ModelKind::Two {
            cells.push(pct(row.train.sub.unwrap_or(0.0)));
        }
        cells.push(pct(row.test.main));
        if self.kind == ModelKind::Two {
            cells.push(pct(row.test.sub.unwrap_or(0.0)));
        }
        cells
    }

    /// One line per hidden size; accuracies in percent with two decimals.
    pub fn to_csv(&self) -> String {
        let mut out = self.header().join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&self.cells(row).join(","));
            out.push('\n');
        }
        out
    }

    /// Right-aligned columns with a `%` suffix on accuracies.
    pub fn to_text(&self) -> String {
        let header = self.header();
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                self.cells(r)
                    .into_iter()
                    .enumerate()
                    .map(|(k, c)| if k == 0 { c } else { format!("{c}%") })
                    .collect()
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|k| body.iter().map(|r| r[k].len()).chain([header[k].len()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let mut line = |cells: &[String]| {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{c:>w$}")).collect();
            let _ = writeln!(out, "{}", parts.join("  "));
        };
        line(&header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
        for r in &body {
            line(r);
        }
        out
    }
}

/// Trains and evaluates one classifier per entry of `hs`, in parallel. Run
/// `k` uses seed `derive_seed(config.seed, k)`, so a one-element sweep is
/// exactly one [`train_classifier`] call with `config.seed`.
pub fn sweep_h(
    kind: ModelKind,
    hs: &[usize],
    config: &TrainConfig,
    num_main: usize,
    num_fine: usize,
    train: &[EmbeddedQuestion<f64>],
    test: &[EmbeddedQuestion<f64>],
) -> Result<SweepTable> {
    if hs.is_empty() || hs.contains(&0) {
        return Err(Error::InvalidArgument(format!("hidden sizes must be a non-empty list of positive values, got {hs:?}")));
    }
    let rows = thread::scope(|scope| {
        let handles: Vec<_> = hs
            .iter()
            .enumerate()
            .map(|(k, &hidden)| {
                let cfg = TrainConfig {
                    hidden,
                    seed: Rng::derive_seed(config.seed, k as u64),
                    ..config.clone()
                };
                scope.spawn(move || -> Result<SweepRow> {
                    let (model, _) = train_classifier(kind, &cfg, num_main, num_fine, train, None)?;
                    Ok(SweepRow {
                        hidden,
                        train: accuracy_of(&model, train)?,
                        test: accuracy_of(&model, test)?,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(SweepTable { kind, rows })
}

fn accuracy_of(model: &Classifier<f64>, data: &[EmbeddedQuestion<f64>]) -> Result<Accuracy> {
    match model {
        Classifier::One(m) => evaluate(m, data),
        Classifier::Two(m) => evaluate(m, data),
    }
}
