//! Reports, tables and where they are written.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "GAPPROB_OUT_DIR";

/// Version of the JSON and CSV layouts.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// One verified quantity.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Common envelope of every JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    /// Identities verified, in the order of `residuals`.
    pub checks: Vec<String>,
    pub digits: u32,
    pub fd_step: Option<f64>,
    pub residuals: BTreeMap<String, Check>,
    pub pass: bool,
    pub data: serde_json::Value,
}

impl Report {
    pub fn new(command: &str, digits: u32) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            checks: Vec::new(),
            digits,
            fd_step: None,
            residuals: BTreeMap::new(),
            pass: true,
            data: serde_json::Value::Null,
        }
    }

    /// Records `residual < tolerance`; NaN fails.
    pub fn check(&mut self, name: impl Into<String>, residual: f64, tolerance: f64) {
        let name = name.into();
        let pass = residual < tolerance;
        self.pass &= pass;
        if !self.residuals.contains_key(&name) {
            self.checks.push(name.clone());
        }
        self.residuals.insert(
            name,
            Check {
                residual,
                tolerance,
                pass,
            },
        );
    }

    /// Records a boolean property as residual 0 (holds) or 1 (fails).
    pub fn assert(&mut self, name: impl Into<String>, holds: bool) {
        self.check(name, if holds { 0.0 } else { 1.0 }, 0.5);
    }

    pub fn with_data(mut self, data: impl Serialize) -> Self {
        self.data = serde_json::to_value(data).expect("report data serializes");
        self
    }

    pub fn first_failure(&self) -> Option<&str> {
        self.checks
            .iter()
            .find(|c| !self.residuals[c.as_str()].pass)
            .map(String::as_str)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// `check,residual,tolerance,pass` rows.
    pub fn checks_table(&self) -> Table {
        let mut t = Table::new(&["check", "residual", "tolerance", "pass"]);
        for name in &self.checks {
            let c = &self.residuals[name];
            t.push(vec![
                name.clone(),
                fmt_f64(c.residual),
                fmt_f64(c.tolerance),
                c.pass.to_string(),
            ]);
        }
        t
    }
}

/// A CSV table of preformatted cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    #[cfg(test)]
    pub fn from_csv(text: &str) -> csv::Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<csv::Result<Vec<Vec<String>>>>()?;
        Ok(Table { header, rows })
    }

    /// Rows as JSON objects keyed by the header.
    pub fn to_json_rows(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    serde_json::Value::Object(
                        self.header
                            .iter()
                            .cloned()
                            .zip(r.iter().map(|c| serde_json::Value::String(c.clone())))
                            .collect(),
                    )
                })
                .collect(),
        )
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:e}")
    }
}

/// Result of a subcommand: a report, and a table for CSV output.
pub struct Outcome {
    pub report: Report,
    pub table: Option<Table>,
    pub default_format: Format,
}

impl Outcome {
    pub fn json(report: Report) -> Self {
        Outcome {
            report,
            table: None,
            default_format: Format::Json,
        }
    }

    pub fn csv(report: Report, table: Table) -> Self {
        Outcome {
            report,
            table: Some(table),
            default_format: Format::Csv,
        }
    }

    /// Text of the artifact in `format`. JSON embeds the table rows under
    /// `data.rows` when the report carries no other data.
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut report = self.report.clone();
                if let (Some(t), serde_json::Value::Null) = (&self.table, &report.data) {
                    report.data = serde_json::json!({ "columns": t.header, "rows": t.to_json_rows() });
                }
                report.to_json()
            }
            Format::Csv => match &self.table {
                Some(t) => t.to_csv(),
                None => self.report.checks_table().to_csv(),
            },
        }
    }
}

/// `--out` if given, else `$GAPPROB_OUT_DIR/<command>.<ext>`, else stdout.
pub fn destination(out: Option<&Path>, command: &str, format: Format) -> Option<PathBuf> {
    if let Some(p) = out {
        return Some(p.to_path_buf());
    }
    std::env::var_os(OUT_DIR_ENV)
        .filter(|d| !d.is_empty())
        .map(|d| PathBuf::from(d).join(format!("{command}.{}", format.extension())))
}

pub fn write_artifact(dest: Option<&Path>, text: &str) -> std::io::Result<()> {
    match dest {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, text)
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1.5e0".into(), "-2e-3".into()]);
        t.push(vec!["x,y".into(), "\"q\"".into()]);
        let text = t.to_csv();
        let back = Table::from_csv(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn nan_residual_fails() {
        let mut r = Report::new("x", 30);
        r.check("ok", 1e-20, 1e-10);
        r.check("bad", f64::NAN, 1e-10);
        assert!(!r.pass);
        assert_eq!(r.first_failure(), Some("bad"));
    }

    #[test]
    fn f64_format_parses_back() {
        for x in [0.1, -3.0e-300, 1.0 / 3.0, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
