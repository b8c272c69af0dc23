//! Plain CSV and `key=value` output with a fixed float format, so that equal runs
//! produce identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::RawConfig;
use crate::error::CliError;

/// Fixed scientific notation used for every float written.
pub fn num(x: f64) -> String {
    format!("{x:.14e}")
}

/// A table under construction: `#` comment lines, one header row, data rows.
pub struct Table {
    text: String,
    n_cols: usize,
}

impl Table {
    pub fn new(title: &str, cfg: &RawConfig, extra: &[(&str, String)], columns: &[&str]) -> Self {
        let mut text = format!("# dlcz {title}\n");
        for (k, v) in cfg.entries() {
            let _ = writeln!(text, "# {k}={v}");
        }
        for (k, v) in extra {
            let _ = writeln!(text, "# {k}={v}");
        }
        text.push_str(&columns.join(","));
        text.push('\n');
        Self {
            text,
            n_cols: columns.len(),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.n_cols);
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Ordered `key=value` lines.
#[derive(Default)]
pub struct Report {
    text: String,
}

impl Report {
    pub fn put(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "{key}={value}");
    }

    pub fn num(&mut self, key: &str, value: f64) {
        self.put(key, num(value));
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(CliError::io(p)),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(CliError::io("<stdout>"))
        }
    }
}

/// Binned counts read from a CSV with `t_s` and `counts` columns. Explicit
/// `bin_lo_s`/`bin_hi_s` columns, when present, give the bin edges.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsTable {
    pub centers: Vec<f64>,
    pub counts: Vec<f64>,
    pub edges: Option<Vec<f64>>,
}

pub fn read_counts(path: &Path) -> Result<CountsTable, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_counts(&text, path)
}

pub fn parse_counts(text: &str, path: &Path) -> Result<CountsTable, CliError> {
    let err = |line: u64, msg: String| CliError::Parse {
        path: PathBuf::from(path),
        line: line as usize,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let names: Vec<String> = match reader.headers() {
        Ok(h) if !h.is_empty() => h.iter().map(String::from).collect(),
        Ok(_) => return Err(err(1, "no header row; expected columns t_s and counts".into())),
        Err(e) => return Err(err(e.position().map_or(1, |p| p.line()), e.to_string())),
    };
    let header_line = reader.headers().ok().and_then(|h| h.position()).map_or(1, |p| p.line());
    let col = |name: &str| names.iter().position(|n| n == name);
    let t_col = col("t_s").ok_or_else(|| err(header_line, "missing column 't_s'".into()))?;
    let c_col = col("counts").ok_or_else(|| err(header_line, "missing column 'counts'".into()))?;
    let edge_cols = col("bin_lo_s").zip(col("bin_hi_s"));

    let mut centers = Vec::new();
    let mut counts = Vec::new();
    let mut bounds = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            match e.kind() {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    err(line, format!("expected {expected_len} fields, found {len}"))
                }
                _ => err(line, e.to_string()),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |j: usize| {
            record[j]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(line, format!("column '{}': '{}' is not a finite number", names[j], &record[j])))
        };
        let t = field(t_col)?;
        let c = field(c_col)?;
        if c < 0.0 {
            return Err(err(line, format!("column 'counts': negative value {c}")));
        }
        if let Some(&last) = centers.last() {
            if t <= last {
                return Err(err(line, format!("t_s must increase, {t} follows {last}")));
            }
        }
        if let Some((lo, hi)) = edge_cols {
            bounds.push((line, field(lo)?, field(hi)?));
        }
        centers.push(t);
        counts.push(c);
    }
    if centers.len() < 2 {
        return Err(err(header_line, format!("need at least two data rows, found {}", centers.len())));
    }
    let edges = if bounds.is_empty() {
        None
    } else {
        let mut edges = vec![bounds[0].1];
        for (k, &(line, lo, hi)) in bounds.iter().enumerate() {
            let prev = edges[k];
            if (lo - prev).abs() > 1e-9 * prev.abs().max(hi.abs()) || hi <= lo {
                return Err(err(line, "bin_lo_s/bin_hi_s do not form contiguous increasing bins".into()));
            }
            edges.push(hi);
        }
        Some(edges)
    };
    Ok(CountsTable { centers, counts, edges })
}
