//! Results of one command: a summary map plus named tables, rendered as text,
//! a single JSON document, or CSV with `#` header lines.

use crate::error::CliError;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(x) => format!("{x:.16e}"),
            Cell::I(i) => i.to_string(),
            Cell::S(s) => s.clone(),
        }
    }

    fn text(&self) -> String {
        match self {
            Cell::F(x) => format!("{x:.6}"),
            Cell::I(i) => i.to_string(),
            Cell::S(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(x) => json!(x),
            Cell::I(i) => json!(i),
            Cell::S(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Cell {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Cell {
        Cell::I(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Cell {
        Cell::I(x)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Cell {
        Cell::S(s)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Cell {
        Cell::S(s.to_string())
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Cell {
        Cell::S(b.to_string())
    }
}

#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Table {
        Table { name: name.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    let m: Map<String, Value> =
                        self.columns.iter().cloned().zip(r.iter().map(Cell::json)).collect();
                    Value::Object(m)
                })
                .collect(),
        )
    }
}

#[derive(Debug)]
pub struct Report {
    pub command: &'static str,
    pub params: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub summary: Map<String, Value>,
    /// The first table is the one written by `--out`.
    pub tables: Vec<Table>,
    pub budget_limited: bool,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: &'static str) -> Report {
        Report {
            command,
            params: BTreeMap::new(),
            seed: None,
            summary: Map::new(),
            tables: Vec::new(),
            budget_limited: false,
            notes: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, v: impl Into<Value>) {
        self.summary.insert(key.to_string(), v.into());
    }

    pub fn to_json(&self, wall_time_s: f64) -> Value {
        let tables: Map<String, Value> = self.tables.iter().map(|t| (t.name.clone(), t.json())).collect();
        json!({
            "command": self.command,
            "params": self.params,
            "seed": self.seed,
            "results": self.summary,
            "tables": tables,
            "budget_limited": self.budget_limited,
            "notes": self.notes,
            "wall_time_s": wall_time_s,
        })
    }

    pub fn header_lines(&self) -> Vec<String> {
        let mut v = vec![format!("# ghzbayes {} {}", self.command, env!("CARGO_PKG_VERSION"))];
        for (k, val) in &self.params {
            v.push(format!("# {k} = {val}"));
        }
        if let Some(s) = self.seed {
            v.push(format!("# seed = {s}"));
        }
        if self.budget_limited {
            v.push("# budget_limited = true".to_string());
        }
        v
    }

    pub fn write_csv(&self, table: &Table, path: &Path) -> Result<(), CliError> {
        let mut buf: Vec<u8> = Vec::new();
        for line in self.header_lines() {
            writeln!(buf, "{line}")?;
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&table.columns)?;
            for r in &table.rows {
                w.write_record(r.iter().map(Cell::csv))?;
            }
            w.flush()?;
        }
        std::fs::write(path, buf).map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))
    }

    /// gnuplot script plotting every numeric column against the first.
    pub fn write_plot_script(&self, table: &Table, csv_path: &Path, script: &Path) -> Result<(), CliError> {
        let numeric: Vec<usize> = (1..table.columns.len())
            .filter(|&c| table.rows.first().is_some_and(|r| matches!(r[c], Cell::F(_))))
            .collect();
        let mut s = String::new();
        s.push_str("set datafile separator ','\nset key autotitle columnhead\n");
        if let Some(first) = table.columns.first() {
            s.push_str(&format!("set xlabel '{first}'\n"));
        }
        let plots: Vec<String> = numeric
            .iter()
            .map(|&c| format!("'{}' using 1:{} with linespoints", csv_path.display(), c + 1))
            .collect();
        if !plots.is_empty() {
            s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
        }
        std::fs::write(script, s).map_err(|e| CliError::Run(format!("cannot write {}: {e}", script.display())))
    }

    pub fn print_text(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "{}", self.command)?;
        for (k, v) in &self.summary {
            match v {
                Value::String(s) => writeln!(out, "  {k}: {s}")?,
                other => writeln!(out, "  {k}: {other}")?,
            }
        }
        for t in &self.tables {
            writeln!(out)?;
            writeln!(out, "[{}]", t.name)?;
            let cells: Vec<Vec<String>> = t.rows.iter().map(|r| r.iter().map(Cell::text).collect()).collect();
            let widths: Vec<usize> = (0..t.columns.len())
                .map(|c| cells.iter().map(|r| r[c].len()).chain([t.columns[c].len()]).max().unwrap_or(0))
                .collect();
            let line = |r: &[String]| {
                r.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect::<Vec<_>>().join("  ")
            };
            writeln!(out, "{}", line(&t.columns))?;
            for r in &cells {
                writeln!(out, "{}", line(r))?;
            }
        }
        for n in &self.notes {
            writeln!(out, "note: {n}")?;
        }
        if self.budget_limited {
            writeln!(out, "warning: result is budget-limited")?;
        }
        Ok(())
    }
}
