//! Line-oriented text helpers shared by the trace, sample, Q-table and report
//! formats. Every format starts with a `#qoco-<kind> v1` header line.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(body.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads `path` and returns its `(line_number, line)` pairs after the header.
///
/// An empty file is accepted and yields no rows. Blank lines are skipped.
pub(crate) fn read_rows(path: &Path, header: &'static str) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        None => return Ok(Vec::new()),
        Some((_, first)) if first.trim() == header => {}
        Some((_, first)) if first.trim().is_empty() && text.trim().is_empty() => {
            return Ok(Vec::new())
        }
        Some(_) => {
            return Err(Error::Header {
                path: path.to_path_buf(),
                expected: header,
            })
        }
    }
    Ok(lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .collect())
}

/// Splits a comma-separated row, requiring exactly `n` columns.
pub(crate) fn columns<'a>(
    path: &Path,
    line: usize,
    row: &'a str,
    n: usize,
) -> Result<Vec<&'a str>> {
    let cols: Vec<&str> = row.split(',').map(str::trim).collect();
    if cols.len() != n {
        return Err(Error::parse(
            path,
            line,
            format!("expected {n} columns, found {}", cols.len()),
        ));
    }
    Ok(cols)
}

pub(crate) fn field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    name: &str,
    raw: &str,
) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::parse(path, line, format!("bad {name} `{raw}`")))
}
