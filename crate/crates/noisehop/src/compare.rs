//! Column-wise diff of two artifact tables with the same schema.

use std::path::Path;

use crate::error::{RunError, RunResult};
use crate::io::{self, num, Table};

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnDiff {
    pub column: String,
    /// `None` when neither file has values in the column.
    pub max_abs: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffReport {
    pub columns: Vec<ColumnDiff>,
    pub pass: bool,
}

impl DiffReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(
            io::COMPARE_SCHEMA,
            vec!["column".into(), "max_abs".into(), "pass".into()],
        );
        for c in &self.columns {
            t.push(vec![c.column.clone(), io::opt(c.max_abs), c.pass.to_string()]);
        }
        t
    }
}

/// Refuses tables with different schemas, headers or row counts.
pub fn diff_tables(a: &Table, b: &Table, tol: f64) -> RunResult<DiffReport> {
    if a.schema != b.schema {
        return Err(RunError::config(
            "compare",
            format!("refusing to compare schema `{}` with `{}`", a.schema, b.schema),
        ));
    }
    if a.header != b.header {
        return Err(RunError::config("compare", "column headers differ"));
    }
    if a.rows.len() != b.rows.len() {
        return Err(RunError::config(
            "compare",
            format!("{} rows vs {} rows", a.rows.len(), b.rows.len()),
        ));
    }
    let mut columns = Vec::with_capacity(a.header.len());
    for name in &a.header {
        let (x, y) = (a.column(name).unwrap(), b.column(name).unwrap());
        let mut worst: Option<f64> = None;
        let mut textual_mismatch = false;
        for (i, (p, q)) in x.iter().zip(&y).enumerate() {
            match (p, q) {
                (Some(p), Some(q)) => {
                    let d = (p - q).abs();
                    worst = Some(worst.map_or(d, |w: f64| w.max(d)));
                }
                (None, None) => {
                    let col = a.header.iter().position(|h| h == name).unwrap();
                    textual_mismatch |= a.rows[i][col] != b.rows[i][col];
                }
                _ => worst = Some(f64::INFINITY),
            }
        }
        let pass = !textual_mismatch && worst.is_none_or(|w| w <= tol);
        columns.push(ColumnDiff {
            column: name.clone(),
            max_abs: worst,
            pass,
        });
    }
    let pass = columns.iter().all(|c| c.pass);
    Ok(DiffReport { columns, pass })
}

pub fn diff_files(a: &Path, b: &Path, tol: f64) -> RunResult<DiffReport> {
    diff_tables(&Table::read(a)?, &Table::read(b)?, tol)
}

pub fn describe(report: &DiffReport) -> String {
    let worst = report
        .columns
        .iter()
        .filter_map(|c| c.max_abs.map(|m| (m, &c.column)))
        .fold(None, |acc: Option<(f64, &String)>, x| match acc {
            Some(a) if a.0 >= x.0 => Some(a),
            _ => Some(x),
        });
    match worst {
        Some((m, c)) => format!(
            "{} (largest difference {} in `{c}`)",
            if report.pass { "PASS" } else { "FAIL" },
            num(m)
        ),
        None => (if report.pass { "PASS" } else { "FAIL" }).to_string(),
    }
}
