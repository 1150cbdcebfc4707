//! Metrics CSV: fixed header, shortest round-trip float formatting, `NA`
//! for absent values, `#` comment lines for provenance and error trailers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::RunRecord;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "iter,time_s,loss,gap,max_distance,lambda_used,xi";

fn fmt_f64(out: &mut String, x: f64) {
    // `{:?}` is the shortest string that parses back to the same bits.
    let _ = write!(out, "{x:?}");
}

fn fmt_opt(out: &mut String, x: Option<f64>) {
    match x {
        Some(v) => fmt_f64(out, v),
        None => out.push_str("NA"),
    }
}

/// Renders the CSV text. Comment lines may not contain newlines.
pub fn render_csv(records: &[RunRecord], argv: Option<&str>, trailer: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(argv) = argv {
        let _ = writeln!(out, "# argv: {}", argv.replace('\n', " "));
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = write!(out, "{},", r.iter);
        fmt_f64(&mut out, r.time_s);
        out.push(',');
        fmt_f64(&mut out, r.loss);
        out.push(',');
        fmt_opt(&mut out, r.gap);
        out.push(',');
        fmt_f64(&mut out, r.max_distance);
        out.push(',');
        fmt_opt(&mut out, r.lambda_used);
        out.push(',');
        fmt_opt(&mut out, r.xi);
        out.push('\n');
    }
    if let Some(t) = trailer {
        let _ = writeln!(out, "# {}", t.replace('\n', " "));
    }
    out
}

pub fn emit_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    emit_csv_annotated(records, path, None, None)
}

/// Like [`emit_csv`], with an optional `# argv:` line before the header and
/// an optional comment trailer after the last row.
pub fn emit_csv_annotated(records: &[RunRecord], path: &Path, argv: Option<&str>, trailer: Option<&str>) -> Result<()> {
    fs::write(path, render_csv(records, argv, trailer)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_field(line: usize, name: &str, s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {name} value `{s}`"),
    })
}

fn parse_opt(line: usize, name: &str, s: &str) -> Result<Option<f64>> {
    if s == "NA" {
        Ok(None)
    } else {
        parse_field(line, name, s).map(Some)
    }
}

/// Inverse of [`render_csv`]; comment lines are skipped.
pub fn parse_csv(text: &str) -> Result<Vec<RunRecord>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        Some((line, h)) => {
            return Err(Error::Parse {
                line,
                msg: format!("unexpected header `{h}`"),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "missing header".into(),
            })
        }
    }
    let mut records = Vec::new();
    for (line, l) in lines {
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 7 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 7 fields, found {}", f.len()),
            });
        }
        records.push(RunRecord {
            iter: f[0].parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad iter value `{}`", f[0]),
            })?,
            time_s: parse_field(line, "time_s", f[1])?,
            loss: parse_field(line, "loss", f[2])?,
            gap: parse_opt(line, "gap", f[3])?,
            max_distance: parse_field(line, "max_distance", f[4])?,
            lambda_used: parse_opt(line, "lambda_used", f[5])?,
            xi: parse_opt(line, "xi", f[6])?,
        });
    }
    Ok(records)
}

pub fn read_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text)
}
