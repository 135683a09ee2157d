//! JSONL corpus formats.
//!
//! Labeled corpus, one document per line:
//! `{"text": "...", "label": "high" | "low", "split": "train" | "test"}`
//! (`split` optional, default train). Gold segmentation corpus:
//! `{"text": "...", "boundaries": [3, 7]}` with sentence-gap boundaries.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use prehoc_core::segment::Segmentation;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const HIGH: &str = "high";
pub const LOW: &str = "low";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDoc {
    pub text: String,
    pub label: String,
    #[serde(default)]
    pub split: Split,
}

impl LabeledDoc {
    pub fn new(text: impl Into<String>, high: bool) -> Self {
        Self { text: text.into(), label: if high { HIGH } else { LOW }.into(), split: Split::Train }
    }

    pub fn is_high(&self) -> bool {
        self.label == HIGH
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldDoc {
    pub text: String,
    pub boundaries: Vec<usize>,
}

impl GoldDoc {
    pub fn segmentation(&self) -> Segmentation {
        Segmentation { boundaries: self.boundaries.clone() }
    }
}

pub fn parse_jsonl<T: DeserializeOwned>(r: impl BufRead) -> io::Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
    parse_jsonl(BufReader::new(fs::File::open(path)?))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    for it in items {
        serde_json::to_writer(&mut f, it)?;
        f.write_all(b"\n")?;
    }
    f.flush()
}

/// Checks labels are `high`/`low`; returns an error naming the first bad line.
pub fn check_labels(docs: &[LabeledDoc]) -> Result<(), String> {
    match docs.iter().position(|d| d.label != HIGH && d.label != LOW) {
        Some(i) => Err(format!("document {}: label must be \"{HIGH}\" or \"{LOW}\", got {:?}", i + 1, docs[i].label)),
        None => Ok(()),
    }
}
