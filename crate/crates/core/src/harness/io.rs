use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::tail::TailEstimate;

pub const CURVE_HEADER: [&str; 6] = ["eps", "hits", "trials", "p_hat", "ci_low", "ci_high"];

/// One row of `curve.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub eps: f64,
    pub hits: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl CurveRow {
    pub fn new(eps: f64, t: &TailEstimate) -> Self {
        Self { eps, hits: t.hits, trials: t.trials, p_hat: t.p_hat, ci_low: t.ci_low, ci_high: t.ci_high }
    }
}

/// Renders rows with shortest round-trip float formatting, so equal
/// numbers always produce equal bytes.
pub fn curve_csv(rows: &[CurveRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CURVE_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.eps.to_string(),
            r.hits.to_string(),
            r.trials.to_string(),
            r.p_hat.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<CurveRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse { line, reason: e.to_string() }
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename,
/// so readers see either the old file or the complete new one.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Reads a matrix from CSV: a header `k,d`, then `k` rows of `d` entries.
/// Errors name the offending line (1-based).
pub fn read_matrix_csv(text: &str) -> Result<crate::RealMatrix> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, reason: "empty input".into() })?;
    let hline = hline as u64 + 1;
    let dims: Vec<&str> = header.split(',').map(str::trim).collect();
    let parse_dim = |s: &str| -> Result<usize> {
        s.parse::<usize>().map_err(|_| Error::Parse { line: hline, reason: format!("bad dimension {s:?}") })
    };
    if dims.len() != 2 {
        return Err(Error::Parse { line: hline, reason: "header must be `k,d`".into() });
    }
    let (k, d) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    if k == 0 || d == 0 {
        return Err(Error::Parse { line: hline, reason: "dimensions must be positive".into() });
    }
    let mut data = Vec::with_capacity(k * d);
    let mut rows = 0usize;
    for (i, line) in lines {
        let ln = i as u64 + 1;
        if rows == k {
            return Err(Error::Parse { line: ln, reason: format!("more than {k} rows") });
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d {
            return Err(Error::Parse { line: ln, reason: format!("expected {d} entries, found {}", fields.len()) });
        }
        for f in fields {
            let v: f64 = f.parse().map_err(|_| Error::Parse { line: ln, reason: format!("bad number {f:?}") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line: ln, reason: format!("non-finite entry {f:?}") });
            }
            data.push(v);
        }
        rows += 1;
    }
    if rows < k {
        let last = text.lines().count() as u64;
        return Err(Error::Parse { line: last + 1, reason: format!("expected {k} rows, found {rows}") });
    }
    Ok(crate::RealMatrix::from_row_slice(k, d, &data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_round_trip() {
        let t = TailEstimate::from_counts(3, 10, 0.95, 1);
        let rows = vec![CurveRow::new(0.1, &t), CurveRow::new(0.3, &TailEstimate::from_counts(0, 10, 0.95, 1))];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/curve.csv");
        atomic_write(&p, &curve_csv(&rows).unwrap()).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("eps,hits,trials,p_hat,ci_low,ci_high\n0.1,3,10,0.3,"));
        assert_eq!(read_curve_csv(&p).unwrap(), rows);
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn matrix_csv() {
        let m = read_matrix_csv("2,3\n1,2,3\n4,5,6\n").unwrap();
        assert_eq!(m[(1, 2)], 6.0);
        match read_matrix_csv("2,3\n1,2,3\n4,x,6\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match read_matrix_csv("2,3\n1,2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_matrix_csv("2;3\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_matrix_csv("1,1\n1\n2\n"), Err(Error::Parse { line: 3, .. })));
    }
}
