//! Benchmark instances and the pre-filtering rules applied before slot guessing.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::overlap::rouge_l_f1;

pub const DEFAULT_ROUGE_THRESHOLD: f64 = 0.65;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("cannot read benchmark {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: not valid JSON: {message}")]
    Parse { line: usize, message: String },
    #[error("rouge threshold must be in (0, 1], got {0}")]
    BadThreshold(f64),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Value>,
}

impl Metadata {
    pub fn field(&self, name: &str) -> Option<&str> {
        match name {
            "type" => self.kind.as_deref(),
            "category" => self.category.as_deref(),
            "url" => self.url.as_deref(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkInstance {
    pub instance_id: String,
    pub benchmark: String,
    pub question: String,
    #[serde(default)]
    pub options: Vec<String>,
    #[serde(default)]
    pub correct_index: usize,
    #[serde(default)]
    pub metadata: Metadata,
    #[serde(default)]
    pub split: String,
}

impl BenchmarkInstance {
    pub fn correct_option(&self) -> Option<&str> {
        self.options.get(self.correct_index).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    GenericQa,
    Multichoice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedBenchmark {
    pub instances: Vec<BenchmarkInstance>,
    pub errors: Vec<LoadError>,
}

const KNOWN_KEYS: &[&str] = &[
    "id",
    "instance_id",
    "benchmark",
    "question",
    "options",
    "answer",
    "correct_index",
    "type",
    "category",
    "url",
    "split",
    "metadata",
];

/// `"B"` → 1, `1` → 1, `"1"` → 1; option text is matched exactly as a last resort.
fn answer_index(answer: &Value, options: &[String]) -> Result<usize, String> {
    let idx = match answer {
        Value::Number(n) => n
            .as_u64()
            .map(|n| n as usize)
            .ok_or_else(|| format!("answer {n} is not a non-negative integer"))?,
        Value::String(s) => {
            let t = s.trim();
            let mut chars = t.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) if c.is_ascii_alphabetic() => {
                    (c.to_ascii_uppercase() as u8 - b'A') as usize
                }
                _ => match t.parse::<usize>() {
                    Ok(i) => i,
                    Err(_) => options
                        .iter()
                        .position(|o| o == t)
                        .ok_or_else(|| format!("answer {t:?} is not a letter, index or option"))?,
                },
            }
        }
        other => return Err(format!("unsupported answer value {other}")),
    };
    if idx >= options.len() {
        return Err(format!(
            "answer index {idx} out of range for {} options",
            options.len()
        ));
    }
    Ok(idx)
}

fn take_string(obj: &Map<String, Value>, key: &str) -> Option<String> {
    obj.get(key).and_then(|v| match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    })
}

fn parse_record(
    obj: &Map<String, Value>,
    schema: Schema,
    benchmark: &str,
    line: usize,
) -> Result<BenchmarkInstance, String> {
    let question = take_string(obj, "question")
        .filter(|q| !q.trim().is_empty())
        .ok_or("missing or empty \"question\"")?;
    let mut options: Vec<String> = match obj.get("options") {
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or("options must be strings")
            })
            .collect::<Result<_, _>>()?,
        Some(_) => return Err("\"options\" must be an array".into()),
        None if schema == Schema::Multichoice => return Err("missing \"options\"".into()),
        None => Vec::new(),
    };
    let answer = obj.get("answer").or_else(|| obj.get("correct_index"));
    let correct_index = match (schema, answer) {
        (Schema::Multichoice, None) => return Err("missing \"answer\"".into()),
        (Schema::Multichoice, Some(_)) if options.len() < 2 => {
            return Err("multichoice needs at least two options".into())
        }
        (_, Some(a)) if !options.is_empty() => answer_index(a, &options)?,
        (Schema::GenericQa, Some(Value::String(text))) => {
            // free-text answer with no option list becomes a single label option
            options.push(text.clone());
            0
        }
        (_, _) => 0,
    };

    let mut metadata = match obj.get("metadata") {
        Some(Value::Object(m)) => {
            serde_json::from_value::<Metadata>(Value::Object(m.clone())).unwrap_or_default()
        }
        _ => Metadata::default(),
    };
    if let Some(Value::Object(m)) = obj.get("metadata") {
        for (k, v) in m {
            if !matches!(k.as_str(), "type" | "category" | "url" | "extra") {
                metadata.extra.insert(k.clone(), v.clone());
            }
        }
    }
    metadata.kind = take_string(obj, "type").or(metadata.kind);
    metadata.category = take_string(obj, "category").or(metadata.category);
    metadata.url = take_string(obj, "url").or(metadata.url);
    for (k, v) in obj {
        if !KNOWN_KEYS.contains(&k.as_str()) {
            metadata.extra.insert(k.clone(), v.clone());
        }
    }

    let benchmark = take_string(obj, "benchmark").unwrap_or_else(|| benchmark.to_string());
    let instance_id = take_string(obj, "instance_id")
        .or_else(|| take_string(obj, "id"))
        .unwrap_or_else(|| format!("{benchmark}:{line}"));
    Ok(BenchmarkInstance {
        instance_id,
        benchmark,
        question,
        options,
        correct_index,
        metadata,
        split: take_string(obj, "split").unwrap_or_default(),
    })
}

/// Reads one instance per JSONL line. Lines that are not JSON objects abort
/// the load; records missing required fields are collected as [`LoadError`]s.
pub fn load_benchmark(
    path: &Path,
    schema: Schema,
    benchmark: &str,
) -> Result<LoadedBenchmark, BenchError> {
    let io_err = |source| BenchError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut out = LoadedBenchmark::default();
    for (line, text) in reader.lines().enumerate() {
        let text = text.map_err(io_err)?;
        if text.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| BenchError::Parse {
            line,
            message: e.to_string(),
        })?;
        let Value::Object(obj) = value else {
            return Err(BenchError::Parse {
                line,
                message: "expected a JSON object".into(),
            });
        };
        // header records written by the CLI carry provenance, not instances
        if obj.get("record").and_then(Value::as_str) == Some("header") {
            continue;
        }
        match parse_record(&obj, schema, benchmark, line) {
            Ok(inst) => out.instances.push(inst),
            Err(message) => out.errors.push(LoadError { line, message }),
        }
    }
    Ok(out)
}

/// Writes instances back out in a form [`load_benchmark`] reads.
pub fn instance_record(inst: &BenchmarkInstance) -> Value {
    let mut obj = Map::new();
    obj.insert("id".into(), inst.instance_id.clone().into());
    obj.insert("benchmark".into(), inst.benchmark.clone().into());
    obj.insert("question".into(), inst.question.clone().into());
    if !inst.options.is_empty() {
        obj.insert("options".into(), inst.options.clone().into());
        obj.insert("answer".into(), inst.correct_index.into());
    }
    obj.insert(
        "metadata".into(),
        serde_json::to_value(&inst.metadata).unwrap_or(Value::Null),
    );
    if !inst.split.is_empty() {
        obj.insert("split".into(), inst.split.clone().into());
    }
    Value::Object(obj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    Truthfulqa,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterReason {
    Kept,
    TooShort,
    IndexicalError,
    BooleanOptions,
    SymbolicOptions,
    OptionOverlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub instance_id: String,
    pub kept: bool,
    pub reason: FilterReason,
    pub detail: String,
}

pub const MAX_SHORT_QUESTION_WORDS: usize = 4;

fn is_boolean_set(options: &[String]) -> bool {
    let mut set: Vec<String> = options.iter().map(|o| o.trim().to_lowercase()).collect();
    set.sort();
    set.dedup();
    set == ["no", "yes"] || set == ["false", "true"]
}

fn is_symbolic(option: &str) -> bool {
    option
        .trim()
        .chars()
        .all(|c| c.is_ascii_digit() || c.is_whitespace() || "+-−*/=<>%^()".contains(c))
}

fn decide(inst: &BenchmarkInstance, kind: BenchmarkKind, threshold: f64) -> (FilterReason, String) {
    match kind {
        BenchmarkKind::Truthfulqa => {
            if let Some(cat) = inst
                .metadata
                .category
                .as_deref()
                .filter(|c| c.contains("Indexical Error"))
            {
                return (FilterReason::IndexicalError, format!("category {cat:?}"));
            }
            let words = inst.question.split_whitespace().count();
            if words <= MAX_SHORT_QUESTION_WORDS {
                return (FilterReason::TooShort, format!("{words} words"));
            }
        }
        BenchmarkKind::General => {
            if is_boolean_set(&inst.options) {
                return (FilterReason::BooleanOptions, inst.options.join("/"));
            }
            if !inst.options.is_empty() && inst.options.iter().all(|o| is_symbolic(o)) {
                return (FilterReason::SymbolicOptions, inst.options.join(" | "));
            }
            for i in 0..inst.options.len() {
                for j in i + 1..inst.options.len() {
                    let f1 = rouge_l_f1(&inst.options[i], &inst.options[j]);
                    if f1 > threshold {
                        return (
                            FilterReason::OptionOverlap,
                            format!("options {i} and {j}: rouge-l f1 {f1:.4} > {threshold}"),
                        );
                    }
                }
            }
        }
    }
    (FilterReason::Kept, String::new())
}

/// Splits `instances` into the kept subset plus one decision per input.
pub fn prefilter(
    instances: &[BenchmarkInstance],
    kind: BenchmarkKind,
    rouge_threshold: f64,
) -> Result<(Vec<BenchmarkInstance>, Vec<FilterDecision>), BenchError> {
    if !(rouge_threshold > 0.0 && rouge_threshold <= 1.0) {
        return Err(BenchError::BadThreshold(rouge_threshold));
    }
    let mut kept = Vec::new();
    let mut decisions = Vec::with_capacity(instances.len());
    for inst in instances {
        let (reason, detail) = decide(inst, kind, rouge_threshold);
        let keep = reason == FilterReason::Kept;
        if keep {
            kept.push(inst.clone());
        }
        decisions.push(FilterDecision {
            instance_id: inst.instance_id.clone(),
            kept: keep,
            reason,
            detail,
        });
    }
    Ok((kept, decisions))
}
