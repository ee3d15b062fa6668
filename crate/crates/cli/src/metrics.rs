//! Per-epoch metrics records and their CSV serialization.
//!
//! The CSV surface is a compatibility contract: the header is fixed, floats
//! are written in Rust's shortest round-trip form, and two runs with the same
//! flags and seed produce byte-identical files except for the wall_seconds
//! column. Pretraining runs append a `pretrained` column after wall_seconds.

use crate::error::{CliError, Result};
use std::fs;
use std::path::Path;

pub const CSV_HEADER: &str = "epoch,train_accuracy,train_loss,val_accuracy,val_loss,wall_seconds";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub train_accuracy: f64,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub val_loss: f64,
    pub wall_seconds: f64,
}

/// One run's metrics table, as written to / read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub records: Vec<MetricsRecord>,
    /// Set when every row carries the extra `pretrained` column.
    pub pretrained: Option<bool>,
}

impl MetricsTable {
    pub fn new(pretrained: Option<bool>) -> Self {
        MetricsTable {
            records: Vec::new(),
            pretrained,
        }
    }

    pub fn push(&mut self, record: MetricsRecord) {
        self.records.push(record);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        if self.pretrained.is_some() {
            out.push_str(",pretrained");
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{:.3}",
                r.epoch, r.train_accuracy, r.train_loss, r.val_accuracy, r.val_loss, r.wall_seconds
            ));
            if let Some(flag) = self.pretrained {
                out.push_str(if flag { ",true" } else { ",false" });
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("metrics CSV {}: {e}", path.display()))
        })?;
        Self::parse(&text).map_err(|detail| {
            CliError::Usage(format!("metrics CSV {}: {detail}", path.display()))
        })
    }

    fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty file")?;
        let with_flag = header == format!("{CSV_HEADER},pretrained");
        if header != CSV_HEADER && !with_flag {
            return Err(format!("unexpected header {header:?}"));
        }
        let n_cols = if with_flag { 7 } else { 6 };
        let mut table = MetricsTable::new(None);
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n_cols {
                return Err(format!("row {}: expected {n_cols} fields, got {}", i + 1, fields.len()));
            }
            let num = |j: usize| -> std::result::Result<f64, String> {
                fields[j]
                    .parse::<f64>()
                    .map_err(|e| format!("row {}, column {}: {e}", i + 1, j + 1))
            };
            table.records.push(MetricsRecord {
                epoch: fields[0]
                    .parse::<usize>()
                    .map_err(|e| format!("row {}, column 1: {e}", i + 1))?,
                train_accuracy: num(1)?,
                train_loss: num(2)?,
                val_accuracy: num(3)?,
                val_loss: num(4)?,
                wall_seconds: num(5)?,
            });
            if with_flag {
                table.pretrained = Some(match fields[6] {
                    "true" => true,
                    "false" => false,
                    other => return Err(format!("row {}: bad pretrained flag {other:?}", i + 1)),
                });
            }
        }
        Ok(table)
    }

    pub fn best_val_accuracy(&self) -> Option<f64> {
        self.records.iter().map(|r| r.val_accuracy).fold(None, |m, v| {
            Some(m.map_or(v, |m: f64| m.max(v)))
        })
    }

    pub fn best_train_accuracy(&self) -> Option<f64> {
        self.records.iter().map(|r| r.train_accuracy).fold(None, |m, v| {
            Some(m.map_or(v, |m: f64| m.max(v)))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MetricsTable {
        let mut t = MetricsTable::new(None);
        t.push(MetricsRecord {
            epoch: 1,
            train_accuracy: 0.5,
            train_loss: 1.25,
            val_accuracy: 0.4375,
            val_loss: 1.5,
            wall_seconds: 12.3456,
        });
        t.push(MetricsRecord {
            epoch: 2,
            train_accuracy: 0.625,
            train_loss: 1.0,
            val_accuracy: 0.5,
            val_loss: 1.25,
            wall_seconds: 11.0,
        });
        t
    }

    #[test]
    fn csv_round_trips() {
        let t = sample();
        let parsed = MetricsTable::parse(&t.to_csv()).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.records[1].epoch, 2);
        assert_eq!(parsed.records[1].val_accuracy, 0.5);
        // wall_seconds is written at fixed precision
        assert_eq!(parsed.records[0].wall_seconds, 12.346);
    }

    #[test]
    fn header_is_the_documented_schema() {
        let csv = sample().to_csv();
        assert!(csv.starts_with(
            "epoch,train_accuracy,train_loss,val_accuracy,val_loss,wall_seconds\n"
        ));
    }

    #[test]
    fn pretrained_column_appends_after_wall_seconds() {
        let mut t = sample();
        t.pretrained = Some(true);
        let csv = t.to_csv();
        assert!(csv.lines().next().unwrap().ends_with(",pretrained"));
        assert!(csv.lines().nth(1).unwrap().ends_with(",true"));
        let parsed = MetricsTable::parse(&csv).unwrap();
        assert_eq!(parsed.pretrained, Some(true));
    }

    #[test]
    fn parse_rejects_foreign_headers() {
        assert!(MetricsTable::parse("epoch,loss\n1,2\n").is_err());
    }

    #[test]
    fn best_accuracies_scan_all_rows() {
        let t = sample();
        assert_eq!(t.best_val_accuracy(), Some(0.5));
        assert_eq!(t.best_train_accuracy(), Some(0.625));
        assert_eq!(MetricsTable::new(None).best_val_accuracy(), None);
    }
}
