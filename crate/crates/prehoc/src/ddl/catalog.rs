//! In-memory table store persisted as one JSONL file per table.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use super::ast::{ColumnType, CrowdTableDef};
use super::validate::{validate_insert, ExplainerRegistry, Record, ValidateError, Value, Violation};
use super::ExplanationBinding;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    tables: BTreeMap<String, Vec<Record>>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self, table: &str) -> &[Record] {
        self.tables.get(table).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn table_names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    /// Appends a row without validation, e.g. for base relations.
    pub fn push(&mut self, table: &str, row: Record) {
        self.tables.entry(table.to_string()).or_default().push(row);
    }

    /// Validates and, if nothing is violated, stores the record with its
    /// autoincrement columns assigned.
    pub fn insert(
        &mut self,
        table: &CrowdTableDef,
        record: &Record,
        bindings: &[ExplanationBinding],
        explainers: &ExplainerRegistry,
    ) -> Result<Result<Record, Vec<Violation>>, ValidateError> {
        let violations = validate_insert(record, table, self, bindings, explainers)?;
        if !violations.is_empty() {
            return Ok(Err(violations));
        }
        let mut row = record.clone();
        for c in table.columns().filter(|c| c.ty == ColumnType::Autoincrement) {
            let next = self
                .rows(&table.name)
                .iter()
                .filter_map(|r| match r.get(&c.name) {
                    Some(Value::Int(v)) => Some(*v),
                    _ => None,
                })
                .max()
                .unwrap_or(0)
                + 1;
            row.insert(c.name.clone(), Value::Int(next));
        }
        self.push(&table.name, row.clone());
        Ok(Ok(row))
    }

    pub fn read_jsonl(r: impl BufRead) -> io::Result<Vec<Record>> {
        let mut out = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)))?;
            out.push(rec);
        }
        Ok(out)
    }

    /// Loads every `<table>.jsonl` in `dir`.
    pub fn load_dir(dir: &Path) -> io::Result<Self> {
        let mut c = Self::new();
        let mut paths: Vec<_> = fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for p in paths {
            if p.extension().and_then(|e| e.to_str()) != Some("jsonl") {
                continue;
            }
            let Some(name) = p.file_stem().and_then(|s| s.to_str()) else { continue };
            let rows = Self::read_jsonl(io::BufReader::new(fs::File::open(&p)?))?;
            c.tables.insert(name.to_string(), rows);
        }
        Ok(c)
    }

    /// Writes each table to `<dir>/<table>.jsonl` through a rename, so a
    /// reader sees either the old or the new file.
    pub fn save_dir(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, rows) in &self.tables {
            let tmp = dir.join(format!(".{name}.jsonl.tmp"));
            let mut f = io::BufWriter::new(fs::File::create(&tmp)?);
            for r in rows {
                serde_json::to_writer(&mut f, r)?;
                f.write_all(b"\n")?;
            }
            f.into_inner().map_err(|e| e.into_error())?.sync_all()?;
            fs::rename(&tmp, dir.join(format!("{name}.jsonl")))?;
        }
        Ok(())
    }
}
