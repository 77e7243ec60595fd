//! Tabular reports emitted as TSV and JSON. Every report carries the tool
//! version, the seeds used and the sha256 of every input file, and contains
//! nothing else that could vary between runs (no timestamps, no host data),
//! so re-running on unchanged inputs is byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ToolError};
use crate::io;

pub const TOOL: &str = "embedstab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    /// Non-finite values become text so JSON never sees a NaN.
    pub fn float(x: f64) -> Cell {
        if x.is_finite() {
            Cell::Float(x)
        } else {
            Cell::Text(format!("{x}"))
        }
    }

    pub fn text(s: impl Into<String>) -> Cell {
        Cell::Text(s.into())
    }

    /// Marker for a value that is undefined by construction.
    pub fn undefined() -> Cell {
        Cell::Text("undefined".into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(i) => Some(i as f64),
            Cell::Float(x) => Some(x),
            Cell::Text(_) => None,
        }
    }

    /// TSV rendering: shortest round-trip decimals, always with a `.` or an
    /// exponent so floats stay distinguishable from integers.
    pub fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format_float(*x),
            Cell::Text(s) => s.replace(['\t', '\n', '\r'], " "),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

pub fn format_float(x: f64) -> String {
    let a = x.abs();
    let s = if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    };
    if s.contains(['.', 'e']) || !x.is_finite() {
        s
    } else {
        s + ".0"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<InputHash>,
    pub params: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new(command: &str, columns: &[&str]) -> Report {
        Report {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            params: BTreeMap::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn seed(&mut self, name: &str, seed: u64) -> &mut Self {
        self.seeds.insert(name.into(), seed);
        self
    }

    pub fn param(&mut self, name: &str, value: impl ToString) -> &mut Self {
        self.params.insert(name.into(), value.to_string());
        self
    }

    /// Records a file input with its content hash.
    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        let sha256 = io::sha256_file(path)?;
        self.inputs.push(InputHash {
            path: path.display().to_string(),
            sha256,
        });
        Ok(self)
    }

    pub fn inputs(&mut self, paths: &[impl AsRef<Path>]) -> Result<&mut Self> {
        for p in paths {
            self.input(p.as_ref())?;
        }
        Ok(self)
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = format!(
            "# tool: {} {}\n# command: {}\n",
            self.tool, self.version, self.command
        );
        for (k, v) in &self.seeds {
            s += &format!("# seed.{k}: {v}\n");
        }
        for i in &self.inputs {
            s += &format!("# input: {} {}\n", i.sha256, i.path);
        }
        for (k, v) in &self.params {
            s += &format!("# param.{k}: {v}\n");
        }
        s += &self.columns.join("\t");
        s.push('\n');
        for r in &self.rows {
            s += &r.iter().map(Cell::render).collect::<Vec<_>>().join("\t");
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Report> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        io::write_string(path, &self.to_tsv())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        io::write_string(path, &self.to_json())
    }

    /// Writes `path` as TSV, or as JSON when it ends in `.json`.
    pub fn write(&self, path: &Path) -> Result<()> {
        if path.extension().is_some_and(|e| e == "json") {
            self.write_json(path)
        } else {
            self.write_tsv(path)
        }
    }
}

/// A TSV report read back as strings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TsvTable {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl TsvTable {
    pub fn parse(s: &str) -> Result<TsvTable> {
        let mut t = TsvTable::default();
        let mut header = false;
        for (n, l) in s.lines().enumerate() {
            if let Some(m) = l.strip_prefix("# ") {
                let (k, v) = m.split_once(": ").unwrap_or((m, ""));
                t.meta.push((k.into(), v.into()));
            } else if !header {
                t.columns = l.split('\t').map(String::from).collect();
                header = true;
            } else {
                let row: Vec<String> = l.split('\t').map(String::from).collect();
                if row.len() != t.columns.len() {
                    return Err(ToolError::parse(
                        "<tsv>",
                        n + 1,
                        "row width differs from header",
                    ));
                }
                t.rows.push(row);
            }
        }
        Ok(t)
    }

    pub fn get(&self, row: usize, column: &str) -> Option<&str> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.rows.get(row).map(|r| r[c].as_str())
    }
}

/// Field-by-field agreement of a JSON report and a TSV rendering: same
/// header, same cells, and every numeric cell parses back to the same value.
pub fn formats_agree(json: &Report, tsv: &TsvTable) -> bool {
    json.columns == tsv.columns
        && json.rows.len() == tsv.rows.len()
        && json.rows.iter().zip(&tsv.rows).all(|(a, b)| {
            a.iter().zip(b).all(|(c, s)| {
                c.render() == *s
                    && match c {
                        Cell::Float(x) => s.parse::<f64>().ok() == Some(*x),
                        Cell::Int(i) => s.parse::<i64>().ok() == Some(*i),
                        Cell::Text(_) => true,
                    }
            })
        })
}
