//! Plain-text reports: a title line, `key=value` fields, then an optional
//! comma-delimited table. Numbers carry 12 significant digits, so a report
//! parsed back from its rendering is equal to the original.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

/// Rounds to the 12 significant digits a report can hold.
pub fn round12(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.11e}").parse().expect("rendered float parses")
    } else {
        x
    }
}

impl Cell {
    pub fn num(x: f64) -> Self {
        Cell::Num(round12(x))
    }

    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            Cell::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => format!("{x:.11e}"),
            Cell::Text(s) => s.clone(),
        }
    }

    fn parse(s: &str) -> Self {
        if let Ok(i) = s.parse::<i64>() {
            return Cell::Int(i);
        }
        let numeric = s.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+' || c == '.');
        match s.parse::<f64>() {
            Ok(x) if numeric || x.is_nan() || x.is_infinite() => Cell::Num(x),
            _ => Cell::Text(s.to_string()),
        }
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::text(if b { "true" } else { "false" })
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::text(s)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn get(&self, row: usize, name: &str) -> Option<&Cell> {
        self.rows.get(row)?.get(self.column(name)?)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub title: String,
    pub fields: Vec<(String, Cell)>,
    pub table: Option<Table>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("report is empty")]
    Empty,
    #[error("line {0}: expected key=value")]
    Field(usize),
    #[error("line {line}: expected {expected} columns, got {got}")]
    Width { line: usize, expected: usize, got: usize },
}

const TITLE_PREFIX: &str = "# ";
const TABLE_MARKER: &str = "[table]";

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            ..Self::default()
        }
    }

    pub fn field(&mut self, key: &str, value: impl Into<Cell>) -> &mut Self {
        self.fields.push((key.to_string(), value.into()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&Cell> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{TITLE_PREFIX}{}", self.title).unwrap();
        for (k, v) in &self.fields {
            writeln!(out, "{k}={}", v.render()).unwrap();
        }
        if let Some(t) = &self.table {
            writeln!(out, "{TABLE_MARKER}").unwrap();
            writeln!(out, "{}", t.columns.join(",")).unwrap();
            for row in &t.rows {
                let cells: Vec<String> = row.iter().map(Cell::render).collect();
                writeln!(out, "{}", cells.join(",")).unwrap();
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ReportError> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or(ReportError::Empty)?;
        let mut report = Report::new(first.strip_prefix(TITLE_PREFIX).unwrap_or(first));
        while let Some((i, line)) = lines.next() {
            if line == TABLE_MARKER {
                let columns: Vec<String> = match lines.next() {
                    Some((_, header)) => header.split(',').map(str::to_string).collect(),
                    None => Vec::new(),
                };
                let mut table = Table {
                    columns,
                    rows: Vec::new(),
                };
                for (j, row) in lines.by_ref() {
                    let cells: Vec<Cell> = row.split(',').map(Cell::parse).collect();
                    if cells.len() != table.columns.len() {
                        return Err(ReportError::Width {
                            line: j + 1,
                            expected: table.columns.len(),
                            got: cells.len(),
                        });
                    }
                    table.rows.push(cells);
                }
                report.table = Some(table);
                break;
            }
            let (k, v) = line.split_once('=').ok_or(ReportError::Field(i + 1))?;
            report.fields.push((k.to_string(), Cell::parse(v)));
        }
        Ok(report)
    }
}
