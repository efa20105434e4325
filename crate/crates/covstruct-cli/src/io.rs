//! CSV ingestion and table output.
//!
//! Input format: '.' decimal separator, ',' field separator, rows are
//! observations and columns are variables.  Blank lines are skipped.

use std::fmt::Write as _;
use std::path::Path;

use covstruct::moments::Sample;
use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::document::DatasetInfo;
use crate::CliError;

/// Parses a rectangular numeric CSV file into a sample, together with its
/// fingerprint (dimensions plus a hash of the raw bytes).
pub fn load_csv(path: &Path, has_header: bool) -> Result<(Sample, DatasetInfo), CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let sha256 = hex(&Sha256::digest(&bytes));
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| CliError::data(format!("{} is not valid UTF-8", path.display())))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    let mut seen_header = false;
    for (li, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if has_header && !seen_header {
            seen_header = true;
            continue;
        }
        let mut row = Vec::new();
        for (ci, cell) in line.split(',').enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                CliError::data(format!(
                    "row {}, column {}: cannot parse {:?} as a number",
                    li + 1,
                    ci + 1,
                    cell.trim()
                ))
            })?;
            row.push(v);
        }
        if rows.is_empty() {
            width = row.len();
        } else if row.len() != width {
            return Err(CliError::data(format!(
                "row {} has {} fields, expected {}",
                li + 1,
                row.len(),
                width
            )));
        }
        rows.push(row);
    }

    let n = rows.len();
    let data = DMatrix::from_fn(n, width.max(1), |i, j| rows[i][j]);
    let sample = Sample::from_matrix(data)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let info = DatasetInfo {
        path: path.display().to_string(),
        rows: sample.n(),
        cols: sample.d(),
        sha256,
    };
    Ok((sample, info))
}

fn hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        write!(out, "{b:02x}").expect("hex formatting");
    }
    out
}

/// Renders simulation rows as CSV.  The dist and delta columns appear only
/// when some row carries them.
pub fn table_csv(rows: &[covstruct::sim::TableRow]) -> String {
    let with_dist = rows.iter().any(|r| r.dist.is_some());
    let with_delta = rows.iter().any(|r| r.delta.is_some());
    let mut out = String::from("method,N");
    if with_dist {
        out.push_str(",dist");
    }
    if with_delta {
        out.push_str(",delta");
    }
    out.push_str(",reject_pct,stderr_pct,n_sim,excluded\n");
    for r in rows {
        write!(out, "{},{}", r.method, r.n).expect("csv formatting");
        if with_dist {
            write!(out, ",{}", r.dist.as_deref().unwrap_or("")).expect("csv formatting");
        }
        if with_delta {
            match r.delta {
                Some(d) => write!(out, ",{d}"),
                None => write!(out, ","),
            }
            .expect("csv formatting");
        }
        writeln!(out, ",{},{},{},{}", r.reject_pct, r.stderr_pct, r.n_sim, r.excluded)
            .expect("csv formatting");
    }
    out
}
