//! CSV tables, atomic file writes and the pass/fail summary.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use crate::svg::Plot;

/// Shortest round-trip decimal; scientific notation outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    if x == 0.0 || (1e-4..1e15).contains(&x.abs()) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub struct Table {
    /// `(name, unit)` per column.
    columns: Vec<(&'static str, &'static str)>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[(&'static str, &'static str)]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    /// A comment line with the command and config hash, then the column
    /// header with units in brackets, then the rows.
    pub fn render(&self, command: &str, hash: &str) -> String {
        let mut out = format!("# ncpfr {command}; config_hash={hash}\n");
        let header: Vec<String> = self.columns.iter().map(|(n, u)| format!("{n} [{u}]")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    /// Condition the value must meet, e.g. `<= 1.5`.
    pub threshold: String,
    pub pass: bool,
}

impl Assertion {
    fn new(name: impl Into<String>, value: f64, threshold: String, pass: bool) -> Self {
        Assertion {
            name: name.into(),
            value,
            threshold,
            pass,
        }
    }

    pub fn le(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, format!("<= {}", num(bound)), value <= bound)
    }

    pub fn lt(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, format!("< {}", num(bound)), value < bound)
    }

    pub fn ge(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, format!(">= {}", num(bound)), value >= bound)
    }

    pub fn gt(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, format!("> {}", num(bound)), value > bound)
    }

    /// Closed interval.
    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        let pass = (lo..=hi).contains(&value);
        Self::new(name, value, format!("in [{}, {}]", num(lo), num(hi)), pass)
    }

    /// Open interval.
    pub fn inside(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        let pass = value > lo && value < hi;
        Self::new(name, value, format!("in ({}, {})", num(lo), num(hi)), pass)
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::new(name, if ok { 1.0 } else { 0.0 }, "true".into(), ok)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: String,
    pub config_hash: String,
    pub pass: bool,
    /// One-line result, e.g. `c_hat=0.2997, pass`.
    pub headline: String,
    pub assertions: Vec<Assertion>,
    pub artifacts: Vec<String>,
}

/// Collects the files of one run under the output directory.
pub struct Artifacts {
    dir: PathBuf,
    command: String,
    hash: String,
    written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path, command: &str, hash: &str) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            hash: hash.to_string(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> anyhow::Result<()> {
        write_atomic(&self.dir.join(name), contents)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> anyhow::Result<()> {
        let text = table.render(&self.command, &self.hash);
        self.write(name, text.as_bytes())
    }

    pub fn svg(&mut self, name: &str, plot: &Plot) -> anyhow::Result<()> {
        let text = plot.render(&self.hash);
        self.write(name, text.as_bytes())
    }

    pub fn config(&mut self, text: &str) -> anyhow::Result<()> {
        let name = format!("{}.config.toml", self.command);
        self.write(&name, text.as_bytes())
    }

    /// Writes `<command>.summary.json` last so that it lists every artifact.
    pub fn finish(mut self, headline: String, assertions: Vec<Assertion>) -> anyhow::Result<Summary> {
        let name = format!("{}.summary.json", self.command);
        self.written.push(name.clone());
        let summary = Summary {
            command: self.command.clone(),
            config_hash: self.hash.clone(),
            pass: assertions.iter().all(|a| a.pass),
            headline,
            assertions,
            artifacts: self.written.clone(),
        };
        let mut text = serde_json::to_string_pretty(&summary)?;
        text.push('\n');
        write_atomic(&self.dir.join(&name), text.as_bytes())?;
        Ok(summary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_roundtrip() {
        for x in [0.0, 0.1, -2.5, 1e-12, 3.0e20, 123456.789, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(1e-12), "1e-12");
    }

    #[test]
    fn table_header_names_units_and_hash() {
        let mut t = Table::new(&[("n", "level"), ("L_n", "1")]);
        t.push(vec!["2".into(), num(0.25)]);
        let text = t.render("contraction", "00ff");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines, ["# ncpfr contraction; config_hash=00ff", "n [level],L_n [1]", "2,0.25"]);
    }

    #[test]
    fn assertions_compare() {
        assert!(Assertion::le("x", 1.0, 1.0).pass);
        assert!(!Assertion::lt("x", 1.0, 1.0).pass);
        assert!(!Assertion::inside("x", 1.0, 0.0, 1.0).pass);
        assert!(Assertion::within("x", 1.0, 0.0, 1.0).pass);
        assert!(!Assertion::le("x", f64::NAN, 1.0).pass);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
