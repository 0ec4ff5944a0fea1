//! Artifact formats.
//!
//! Every text artifact starts with a `# schema=<name>/<version>` line. CSV
//! numbers use 17 significant digits; an empty cell means "not computed".
//!
//! Snapshot format (`snapshots/rho_<index>.txt`):
//!
//! ```text
//! # schema=noisehop-snapshot/1
//! t <time>
//! dim <D>
//! basis
//! <D lines: occupations of sites 1..N separated by spaces>
//! matrix
//! <D lines: re im re im ... for each row>
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use noisehop_core::operators::{HilbertSpace, SectorBasis};
use noisehop_core::state::DensityMatrix;
use noisehop_core::C64;
use sha2::{Digest, Sha256};

use crate::error::{RunError, RunResult};

pub const TIMESERIES_SCHEMA: &str = "noisehop-timeseries/1";
pub const COMPARE_SCHEMA: &str = "noisehop-compare/1";
pub const HEAT_SCHEMA: &str = "noisehop-heat/1";
pub const SWEEP_SCHEMA: &str = "noisehop-sweep/1";
pub const SNAPSHOT_SCHEMA: &str = "noisehop-snapshot/1";
pub const MANIFEST_SCHEMA: &str = "noisehop-manifest/1";

fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse().ok()
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_file(path: &Path, contents: &str) -> RunResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| RunError::io(path, e))
}

/// In-memory CSV with a schema line.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub schema: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(schema: &str, header: Vec<String>) -> Self {
        Self {
            schema: schema.to_string(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = format!("# schema={}\n", self.schema);
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> RunResult<Self> {
        let mut lines = text.lines();
        let schema = lines
            .next()
            .and_then(|l| l.strip_prefix("# schema="))
            .ok_or_else(|| RunError::config("csv", "missing `# schema=` line"))?
            .to_string();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| RunError::config("csv", "missing header"))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, l) in lines.enumerate() {
            if l.is_empty() {
                continue;
            }
            let r: Vec<String> = l.split(',').map(str::to_string).collect();
            if r.len() != header.len() {
                return Err(RunError::config(
                    format!("csv row {}", i + 1),
                    format!("{} cells, header has {}", r.len(), header.len()),
                ));
            }
            rows.push(r);
        }
        Ok(Self { schema, header, rows })
    }

    pub fn read(path: &Path) -> RunResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| parse_f64(&r[i])).collect())
    }
}

pub fn render_snapshot(t: f64, rho: &DensityMatrix) -> String {
    let b = rho.basis();
    let d = rho.dim();
    let mut s = format!("# schema={SNAPSHOT_SCHEMA}\nt {}\ndim {d}\nbasis\n", num(t));
    for i in 0..d {
        let label: Vec<String> = b.label(i).iter().map(|o| o.to_string()).collect();
        s.push_str(&label.join(" "));
        s.push('\n');
    }
    s.push_str("matrix\n");
    let m = rho.matrix();
    for i in 0..d {
        let mut row = String::new();
        for j in 0..d {
            if j > 0 {
                row.push(' ');
            }
            let _ = write!(row, "{} {}", num(m[(i, j)].re), num(m[(i, j)].im));
        }
        s.push_str(&row);
        s.push('\n');
    }
    s
}

/// Reads a snapshot onto the smallest sector union holding its basis states.
pub fn parse_snapshot(text: &str, space: &HilbertSpace) -> RunResult<(f64, DensityMatrix)> {
    let bad = |msg: &str| RunError::config("initial_state.path", msg.to_string());
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(l) if l == format!("# schema={SNAPSHOT_SCHEMA}") => {}
        _ => return Err(bad("not a snapshot file (schema line)")),
    }
    let mut t = 0.0;
    let mut next = lines.next().ok_or_else(|| bad("truncated"))?;
    if let Some(v) = next.strip_prefix("t ") {
        t = parse_f64(v).ok_or_else(|| bad("bad time"))?;
        next = lines.next().ok_or_else(|| bad("truncated"))?;
    }
    let d: usize = next
        .strip_prefix("dim ")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| bad("expected `dim <D>`"))?;
    if lines.next() != Some("basis") {
        return Err(bad("expected `basis`"));
    }
    let n = space.site_count();
    let mut labels = Vec::with_capacity(d);
    for _ in 0..d {
        let l = lines.next().ok_or_else(|| bad("truncated basis"))?;
        let label: Vec<u8> = l
            .split_whitespace()
            .map(|x| x.parse::<u8>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad("bad occupation"))?;
        if label.len() != n || label.iter().any(|&o| o > space.kind().max_occupation()) {
            return Err(bad("basis label does not fit the chain"));
        }
        labels.push(label);
    }
    if lines.next() != Some("matrix") {
        return Err(bad("expected `matrix`"));
    }
    let mut totals: Vec<usize> = labels.iter().map(|l| l.iter().map(|&o| o as usize).sum()).collect();
    totals.sort_unstable();
    totals.dedup();
    let basis = Arc::new(SectorBasis::union(space, &totals).map_err(|e| bad(&e.to_string()))?);
    let idx: Vec<usize> = labels.iter().map(|l| basis.index_of(l).unwrap()).collect();
    let mut m = nalgebra::DMatrix::<C64>::zeros(basis.len(), basis.len());
    for i in 0..d {
        let l = lines.next().ok_or_else(|| bad("truncated matrix"))?;
        let v: Vec<f64> = l.split_whitespace().map(parse_f64).collect::<Option<_>>().ok_or_else(|| bad("bad number"))?;
        if v.len() != 2 * d {
            return Err(bad("matrix row has the wrong length"));
        }
        for j in 0..d {
            m[(idx[i], idx[j])] = C64::new(v[2 * j], v[2 * j + 1]);
        }
    }
    let rho = DensityMatrix::new(basis, m).map_err(|e| bad(&e.to_string()))?;
    Ok((t, rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use noisehop_core::operators::{build_space, SiteKind};
    use noisehop_core::state::StateVector;

    #[test]
    fn number_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(TIMESERIES_SCHEMA, vec!["t".into(), "x".into()]);
        t.push(vec![num(0.5), String::new()]);
        let back = Table::parse(&t.render()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column("x").unwrap(), vec![None]);
    }

    #[test]
    fn snapshot_round_trip() {
        let space = build_space(3, SiteKind::Tls).unwrap();
        let rho = StateVector::dark_state(&space).unwrap().to_density();
        let text = render_snapshot(1.25, &rho);
        let (t, back) = parse_snapshot(&text, &space).unwrap();
        assert_eq!(t, 1.25);
        assert_eq!(back.matrix(), rho.matrix());
    }
}
