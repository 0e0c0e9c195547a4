//! Sampled outputs and their CSV / JSON encodings.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use twoport_core::{CompiledSystem, EnergyLedger, Trajectory};

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("row {row} has {found} columns, expected {expected}")]
    Width { row: usize, expected: usize, found: usize },
    #[error("time column is not increasing at row {row}")]
    Time { row: usize },
    #[error("unknown output column `{0}`")]
    Column(String),
    #[error("first column must be `t`")]
    Header,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("cannot parse `{text}` at row {row}")]
    Number { row: usize, text: String },
    #[error(transparent)]
    Engine(#[from] twoport_core::Error),
}

/// `t` followed by named outputs, one row per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub const LEDGER_COLUMNS: [&str; 9] = [
    "energy.kinetic",
    "energy.gravity",
    "energy.springs",
    "energy.closures",
    "energy.external",
    "energy.total",
    "energy.dissipated",
    "energy.work",
    "energy.residual",
];

impl ResultTable {
    pub fn new(outputs: impl IntoIterator<Item = String>) -> Self {
        let mut columns = vec!["t".to_string()];
        columns.extend(outputs);
        ResultTable {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<(), TableError> {
        if row.len() != self.columns.len() {
            return Err(TableError::Width {
                row: self.rows.len(),
                expected: self.columns.len(),
                found: row.len(),
            });
        }
        if let Some(last) = self.rows.last() {
            if !(row[0] > last[0]) {
                return Err(TableError::Time { row: self.rows.len() });
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Selected outputs (all when `dofs` is empty) of every `every`-th
    /// sample; the final sample is always kept. Energy ledger columns are
    /// appended when a ledger is given.
    pub fn from_trajectory(
        sys: &CompiledSystem,
        traj: &Trajectory,
        dofs: &[String],
        every: usize,
        ledger: Option<&EnergyLedger>,
    ) -> Result<Self, TableError> {
        let names = sys.output_names();
        let picks: Vec<usize> = if dofs.is_empty() {
            (0..names.len()).collect()
        } else {
            dofs.iter()
                .map(|d| names.iter().position(|n| n == d).ok_or_else(|| TableError::Column(d.clone())))
                .collect::<Result<_, _>>()?
        };
        let mut columns: Vec<String> = picks.iter().map(|&k| names[k].clone()).collect();
        if ledger.is_some() {
            columns.extend(LEDGER_COLUMNS.iter().map(|c| c.to_string()));
        }
        let mut table = ResultTable::new(columns);
        let every = every.max(1);
        let n = traj.len();
        for (k, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
            if k % every != 0 && k + 1 != n {
                continue;
            }
            let out = sys.outputs(x)?;
            let mut row = Vec::with_capacity(table.columns.len());
            row.push(*t);
            row.extend(picks.iter().map(|&i| out[i]));
            if let Some(l) = ledger {
                let e = &l.terms[k];
                row.extend_from_slice(&[
                    e.kinetic,
                    e.gravity,
                    e.springs,
                    e.closures,
                    e.external,
                    e.total(),
                    l.dissipated[k],
                    l.work[k],
                    l.residual[k],
                ]);
            }
            table.push(row)?;
        }
        Ok(table)
    }

    /// Header then one line per row, 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TableError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, TableError> {
        let mut r = csv::Reader::from_reader(input);
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if columns.first().map(String::as_str) != Some("t") {
            return Err(TableError::Header);
        }
        let mut table = ResultTable {
            columns,
            rows: Vec::new(),
        };
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| TableError::Number {
                        row: k,
                        text: s.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            table.push(row)?;
        }
        Ok(table)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<(), TableError> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self, TableError> {
        let raw: ResultTable = serde_json::from_reader(input)?;
        let mut table = ResultTable::new(raw.columns.into_iter().skip(1));
        for row in raw.rows {
            table.push(row)?;
        }
        Ok(table)
    }
}
