//! Run reports and their CSV rendering.
//!
//! Floats are written in shortest round-trip exponent form (`{:e}`), exact
//! rationals as `p/q` (integers as `n/1`). Timings never reach the CSV files,
//! so reruns are bit-identical.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::time::Duration;

use osc_core::stability::Q;

use crate::error::{CliError, Result};
use crate::plot::Series;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Float(f64),
    Int(i64),
    Rational(Q),
    Bool(bool),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Float(x) => write!(f, "{x:e}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Rational(q) => write!(f, "{}/{}", q.numer(), q.denom()),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<usize> for Value {
    fn from(n: usize) -> Self {
        Value::Int(n as i64)
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Int(n)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<Q> for Value {
    fn from(q: Q) -> Self {
        Value::Rational(q)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.into())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

/// Quote a CSV field when needed.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| field(&v.to_string())).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// The task could not run.
    Error,
}

impl Status {
    pub fn tag(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Error => "error",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TaskReport {
    pub name: String,
    pub kind: &'static str,
    pub acceptance: bool,
    pub status: Status,
    /// Named scalar results, in display order.
    pub values: Vec<(String, Value)>,
    pub table: Table,
    pub series: Option<Series>,
    pub elapsed: Duration,
}

impl TaskReport {
    pub fn value(&self, key: &str) -> Option<&Value> {
        self.values.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub scenario: String,
    /// Grid and tolerance metadata, one `key = value` line each.
    pub metadata: Vec<(String, String)>,
    pub tasks: Vec<TaskReport>,
}

pub const SUMMARY_HEADER: &str = "task,kind,acceptance,status,quantity,value";

impl RunReport {
    pub fn passed(&self) -> bool {
        self.tasks.iter().all(|t| t.status == Status::Pass)
    }

    /// 0 when every task passed, 1 otherwise. Acceptance-tagged tasks are
    /// never exempt.
    pub fn exit_code(&self) -> u8 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn summary_csv(&self) -> String {
        let mut t = Table::new(SUMMARY_HEADER.split(',').collect());
        for task in &self.tasks {
            let base = |q: String, v: Value| {
                vec![
                    Value::Text(task.name.clone()),
                    Value::Text(task.kind.into()),
                    Value::Bool(task.acceptance),
                    Value::Text(task.status.tag().into()),
                    Value::Text(q),
                    v,
                ]
            };
            if task.values.is_empty() {
                t.push(base(String::new(), Value::Text(String::new())));
            }
            for (k, v) in &task.values {
                t.push(base(k.clone(), v.clone()));
            }
        }
        t.to_csv()
    }

    /// Human-readable summary, with timings.
    pub fn render(&self) -> String {
        let mut out = format!("scenario {}\n", self.scenario);
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "  {k} = {v}");
        }
        for t in &self.tasks {
            let tag = if t.acceptance { " [acceptance]" } else { "" };
            let _ = writeln!(
                out,
                "{:<5} {} ({}){tag} {:.2}s",
                t.status.tag().to_uppercase(),
                t.name,
                t.kind,
                t.elapsed.as_secs_f64()
            );
            for (k, v) in &t.values {
                let _ = writeln!(out, "      {k}: {v}");
            }
        }
        let passed = self.tasks.iter().filter(|t| t.status == Status::Pass).count();
        let _ = writeln!(out, "{passed}/{} tasks passed", self.tasks.len());
        out
    }

    /// One CSV per task plus `summary.csv`; returns the written paths.
    pub fn emit_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut written = Vec::new();
        let mut write = |name: String, text: String| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
            Ok(())
        };
        for t in &self.tasks {
            write(format!("{}.csv", t.name), t.table.to_csv())?;
        }
        write("summary.csv".into(), self.summary_csv())?;
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use osc_core::stability::qr;

    #[test]
    fn values_render() {
        assert_eq!(Value::from(qr(-4, 6)).to_string(), "-2/3");
        assert_eq!(Value::from(qr(0, 1)).to_string(), "0/1");
        assert_eq!(Value::from(0.1).to_string(), "1e-1");
        assert_eq!(field("a,b"), "\"a,b\"");
    }

    #[test]
    fn empty_table_keeps_header() {
        assert_eq!(Table::new(vec!["x", "y"]).to_csv(), "x,y\n");
    }
}
