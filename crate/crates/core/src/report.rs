//! Tables and their CSV and JSON renderings.
//!
//! CSV output starts with `# key: value` comment lines (tool, version,
//! command, the run configuration and the table metadata), followed by a
//! header row and one line per row. Missing or non-finite values are empty
//! fields, and null metadata is left out. JSON output is a single object:
//!
//! ```text
//! {"tool", "version", "command", "config": {..}, "metadata": {..},
//!  "columns": [..], "rows": [{column: value, ..}, ..]}
//! ```
//!
//! with `null` for missing or non-finite values. Neither format contains
//! timestamps, paths or thread counts, so identical runs give identical
//! bytes.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::experiments::{GrowthRow, GrowthTable};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Columns of a growth table in CSV output.
pub const GROWTH_COLUMNS: [&str; 5] = ["N", "input_norm", "output_norm", "ratio", "stderr"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Invalid(format!("unknown format {s:?}"))),
        }
    }
}

/// Where a table came from: the command and the parameters that determine
/// its contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub command: String,
    pub config: Map<String, Value>,
}

impl Provenance {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            config: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.config.insert(key.to_string(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub metadata: Map<String, Value>,
    /// Columns that appear in JSON only.
    pub json_only: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the columns"
        );
        self.rows.push(row);
    }

    pub fn meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn render(&self, provenance: &Provenance, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.to_csv(provenance),
            Format::Json => self.to_json(provenance),
        }
    }

    fn to_csv(&self, provenance: &Provenance) -> Result<String> {
        let mut out = String::new();
        let mut comment = |key: &str, value: &Value| {
            let _ = writeln!(out, "# {key}: {}", plain(value));
        };
        comment("tool", &Value::from(TOOL));
        comment("version", &Value::from(VERSION));
        comment("command", &Value::from(provenance.command.as_str()));
        for (k, v) in &provenance.config {
            comment(&format!("config.{k}"), v);
        }
        for (k, v) in self.metadata.iter().filter(|(_, v)| !v.is_null()) {
            comment(&format!("metadata.{k}"), v);
        }
        let keep: Vec<usize> = (0..self.columns.len())
            .filter(|&i| !self.json_only.contains(&self.columns[i]))
            .collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(keep.iter().map(|&i| &self.columns[i]))
            .map_err(io)?;
        for row in &self.rows {
            w.write_record(keep.iter().map(|&i| plain(&row[i])))
                .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        out.push_str(&String::from_utf8(bytes).expect("CSV output is UTF-8"));
        Ok(out)
    }

    fn to_json(&self, provenance: &Provenance) -> Result<String> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .filter(|(c, v)| !(self.json_only.contains(c) && v.is_null()))
                    .map(|(c, v)| (c.clone(), v.clone()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut doc = Map::new();
        doc.insert("tool".into(), TOOL.into());
        doc.insert("version".into(), VERSION.into());
        doc.insert("command".into(), provenance.command.clone().into());
        doc.insert("config".into(), Value::Object(provenance.config.clone()));
        doc.insert("metadata".into(), Value::Object(self.metadata.clone()));
        doc.insert("columns".into(), self.columns.clone().into());
        doc.insert("rows".into(), rows.into());
        let mut s = serde_json::to_string_pretty(&Value::Object(doc))
            .map_err(|e| Error::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

/// `Value::Null` for non-finite input.
pub fn num(x: f64) -> Value {
    Value::from(x)
}

fn plain(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(plain).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

impl From<&GrowthTable> for Table {
    fn from(t: &GrowthTable) -> Self {
        let mut columns = GROWTH_COLUMNS.to_vec();
        let has_bound = t.rows.iter().any(|r| r.lower_bound.is_some());
        if has_bound {
            columns.push("lower_bound");
        }
        let mut table = Table::new(&columns);
        if has_bound {
            table.json_only.push("lower_bound".into());
        }
        for r in &t.rows {
            let mut row = vec![
                Value::from(r.n),
                num(r.input_norm),
                num(r.output_norm),
                num(r.ratio),
                num(r.stderr),
            ];
            if has_bound {
                row.push(r.lower_bound.map_or(Value::Null, num));
            }
            table.push(row);
        }
        let m = &t.meta;
        table = table
            .meta("experiment", m.experiment.as_str())
            .meta("space", m.space.as_str())
            .meta("schedule", m.schedule.as_str())
            .meta("mode", m.mode.as_str())
            .meta("seed", m.seed.map_or(Value::Null, Value::from))
            .meta("samples", m.samples.map_or(Value::Null, Value::from))
            .meta("p", m.p.map_or(Value::Null, num));
        for (k, v) in &m.extra {
            table = table.meta(k, num(*v));
        }
        table
    }
}

/// Rows of a growth table in the CSV format written by [`Table::render`].
pub fn parse_growth_csv(text: &str) -> Result<Vec<GrowthRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Invalid(e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != GROWTH_COLUMNS {
        return Err(Error::Invalid(format!(
            "expected the columns {}, found {}",
            GROWTH_COLUMNS.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let field = |s: &str| -> Result<f64> {
        if s.is_empty() {
            Ok(f64::NAN)
        } else {
            s.parse()
                .map_err(|_| Error::Invalid(format!("{s:?} is not a number")))
        }
    };
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(|e| Error::Invalid(e.to_string()))?;
            let n = rec[0]
                .parse()
                .map_err(|_| Error::Invalid(format!("{:?} is not a row index", &rec[0])))?;
            Ok(GrowthRow {
                n,
                input_norm: field(&rec[1])?,
                output_norm: field(&rec[2])?,
                ratio: field(&rec[3])?,
                stderr: field(&rec[4])?,
                lower_bound: None,
            })
        })
        .collect()
}

pub fn read_growth_csv(path: &Path) -> Result<Vec<GrowthRow>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_growth_csv(&text)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
