use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::report::RunHeader;

/// JSON Lines output where every line is an object tagged with `record`.
pub struct JsonlWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JsonlWriter {
    pub fn create(path: &Path, header: &RunHeader) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        w.record("header", header)?;
        Ok(w)
    }

    pub fn record<T: Serialize>(&mut self, tag: &str, value: &T) -> Result<()> {
        let mut v = serde_json::to_value(value)?;
        match &mut v {
            Value::Object(map) => {
                map.insert("record".into(), Value::from(tag));
            }
            other => {
                let mut map = serde_json::Map::new();
                map.insert("record".into(), Value::from(tag));
                map.insert("value".into(), other.take());
                v = Value::Object(map);
            }
        }
        serde_json::to_writer(&mut self.out, &v)?;
        self.out
            .write_all(b"\n")
            .with_context(|| format!("writing {}", self.path.display()))
    }

    /// Writes `value` untagged.
    pub fn raw(&mut self, value: &Value) -> Result<()> {
        serde_json::to_writer(&mut self.out, value)?;
        self.out
            .write_all(b"\n")
            .with_context(|| format!("writing {}", self.path.display()))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out
            .flush()
            .with_context(|| format!("writing {}", self.path.display()))
    }
}

/// Every non-blank line of a JSONL file as a JSON value.
pub fn read_jsonl_values(path: &Path) -> Result<Vec<Value>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .with_context(|| format!("{} line {}", path.display(), i + 1))?,
        );
    }
    Ok(out)
}
