//! Run summaries, agreement statistics and report rendering.

mod canonical;
mod reference;
mod stats;

use std::collections::BTreeMap;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub use crate::guessing::GuessResult;
use crate::guessing::{Entry, SkippedItem};
pub use canonical::{canonical_json, quantize};
pub use reference::{multichoice_reference, question_based_reference, ReferenceValue};
pub use stats::{average_ranks, krippendorff_alpha, spearman, Annotation, AnnotationSet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReportError {
    #[error("no scored results")]
    NoScoredResults,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 values, got {0}")]
    TooFewValues(usize),
    #[error("constant input has no ranks to correlate")]
    ConstantInput,
    #[error("NaN in input")]
    NotANumber,
    #[error("duplicate annotation for item {item_id:?} by {annotator_id:?}")]
    DuplicateAnnotation {
        item_id: String,
        annotator_id: String,
    },
    #[error("no item has two or more annotations")]
    NoPairableValues,
    #[error("only one label value occurs; alpha is undefined")]
    SingleLabel,
    #[error("annotation csv: {0}")]
    Csv(String),
    #[error("results file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("results file has no header record")]
    MissingHeader,
    #[error("unknown report format {0:?}")]
    UnknownFormat(String),
    #[error("io: {0}")]
    Io(String),
}

/// Mean of `exact_match`.
pub fn em_rate(results: &[GuessResult]) -> Result<f64, ReportError> {
    if results.is_empty() {
        return Err(ReportError::NoScoredResults);
    }
    let hits: u64 = results.iter().map(|r| u64::from(r.exact_match)).sum();
    Ok(hits as f64 / results.len() as f64)
}

/// First record of every data file written by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: BTreeMap<String, Value>,
    /// Instances loaded, before prefiltering.
    #[serde(default)]
    pub n_total: usize,
    #[serde(default)]
    pub n_filtered: usize,
}

impl RunHeader {
    pub fn new(command: &str, config: BTreeMap<String, Value>) -> Self {
        Self {
            tool: "leakprobe".into(),
            version: crate::VERSION.into(),
            command: command.into(),
            config,
            n_total: 0,
            n_filtered: 0,
        }
    }
}

/// One line of a `guess` results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum GuessRecord {
    Header(RunHeader),
    Guess(GuessResult),
    Skipped(SkippedItem),
}

impl From<Entry> for GuessRecord {
    fn from(e: Entry) -> Self {
        match e {
            Entry::Guess(g) => GuessRecord::Guess(g),
            Entry::Skipped(s) => GuessRecord::Skipped(s),
        }
    }
}

/// Reads a results file back into its header and entries.
pub fn read_guess_records<R: BufRead>(reader: R) -> Result<(RunHeader, Vec<Entry>), ReportError> {
    let mut header = None;
    let mut entries = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| ReportError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GuessRecord = serde_json::from_str(&line).map_err(|e| ReportError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        match rec {
            GuessRecord::Header(h) if header.is_none() => header = Some(h),
            GuessRecord::Header(_) => {
                return Err(ReportError::Parse {
                    line: i + 1,
                    message: "second header record".into(),
                })
            }
            GuessRecord::Guess(g) => entries.push(Entry::Guess(g)),
            GuessRecord::Skipped(s) => entries.push(Entry::Skipped(s)),
        }
    }
    Ok((header.ok_or(ReportError::MissingHeader)?, entries))
}

/// Aggregate of one guessing run. All reals are held at 1e-6 resolution so
/// the JSON rendering reads back to identical values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub tool_version: String,
    pub config_snapshot: BTreeMap<String, Value>,
    pub n_total: usize,
    pub n_filtered: usize,
    pub n_scored: usize,
    pub n_skipped: usize,
    /// `None` when nothing was scored.
    pub em_rate: Option<f64>,
    pub mean_rouge_l: Option<f64>,
    pub per_instance: Vec<GuessResult>,
    pub skipped: Vec<SkippedItem>,
}

impl RunReport {
    pub fn build(header: &RunHeader, entries: &[Entry]) -> Self {
        let mut per_instance = Vec::new();
        let mut skipped = Vec::new();
        for e in entries {
            match e {
                Entry::Guess(g) => per_instance.push(GuessResult {
                    rouge_l_f1: quantize(g.rouge_l_f1),
                    ..g.clone()
                }),
                Entry::Skipped(s) => skipped.push(s.clone()),
            }
        }
        let n_scored = per_instance.len();
        let mean_rouge_l = (n_scored > 0).then(|| {
            quantize(per_instance.iter().map(|g| g.rouge_l_f1).sum::<f64>() / n_scored as f64)
        });
        let em = em_rate(&per_instance).ok().map(quantize);

        let mut hasher = Sha256::new();
        hasher.update(canonical_json(
            &serde_json::to_value(header).expect("header serializes"),
        ));
        for e in entries {
            hasher.update(serde_json::to_vec(e).expect("entry serializes"));
        }
        let run_id = hex::encode(&hasher.finalize()[..8]);

        Self {
            run_id,
            tool_version: header.version.clone(),
            config_snapshot: header.config.clone(),
            n_total: header.n_filtered + entries.len(),
            n_filtered: header.n_filtered,
            n_scored,
            n_skipped: skipped.len(),
            em_rate: em,
            mean_rouge_l,
            per_instance,
            skipped,
        }
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        if self.n_total != self.n_filtered + self.n_scored + self.n_skipped {
            return Err("n_total != n_filtered + n_scored + n_skipped".into());
        }
        if self.n_scored != self.per_instance.len() {
            return Err("n_scored does not match per_instance".into());
        }
        let expected = em_rate(&self.per_instance).ok().map(quantize);
        if self.em_rate != expected {
            return Err("em_rate does not match per_instance".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Markdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = ReportError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "markdown" | "md" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            other => Err(ReportError::UnknownFormat(other.into())),
        }
    }
}

fn fmt2(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.2}"))
}

fn config_str(report: &RunReport, key: &str) -> String {
    match report.config_snapshot.get(key) {
        Some(Value::String(s)) => s.clone(),
        Some(v) => v.to_string(),
        None => "-".into(),
    }
}

fn markdown(r: &RunReport) -> String {
    let mut out = format!("# leakprobe run {}\n\n", r.run_id);
    out.push_str("| setting | value |\n|---|---|\n");
    for (k, v) in &r.config_snapshot {
        let v = match v {
            Value::String(s) => s.clone(),
            other => serde_json::to_string(other).unwrap_or_default(),
        };
        out.push_str(&format!("| {k} | {} |\n", v.replace('|', "\\|")));
    }
    out.push_str(&format!("| tool version | {} |\n\n", r.tool_version));

    out.push_str("## Results\n\n");
    out.push_str("| Benchmark | Model | Mode | Hint | Scored | EM | Rouge-L |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    out.push_str(&format!(
        "| {} | {} | {} | {} | {} | {} | {} |\n\n",
        config_str(r, "benchmark"),
        config_str(r, "model"),
        config_str(r, "mode"),
        config_str(r, "hint"),
        r.n_scored,
        fmt2(r.em_rate),
        fmt2(r.mean_rouge_l),
    ));
    out.push_str(&format!(
        "Instances: {} total, {} filtered, {} scored, {} skipped.\n\n",
        r.n_total, r.n_filtered, r.n_scored, r.n_skipped
    ));
    if !r.skipped.is_empty() {
        out.push_str("### Skipped\n\n| Instance | Stage | Reason |\n|---|---|---|\n");
        for s in &r.skipped {
            let stage = serde_json::to_value(s.stage).unwrap_or(Value::Null);
            out.push_str(&format!(
                "| {} | {} | {} |\n",
                s.instance_id,
                stage.as_str().unwrap_or("?"),
                s.reason.replace('|', "\\|")
            ));
        }
        out.push('\n');
    }

    out.push_str("## Reference values\n\n");
    out.push_str("Published numbers for commercial and open models. Not reproducible offline; shown for scale only.\n\n");
    out.push_str("### Question-multichoice\n\n");
    for v in multichoice_reference() {
        out.push_str(&format!("- {}\n", v.line()));
    }
    out.push_str("\n### Question-based (TruthfulQA)\n\n");
    for v in question_based_reference() {
        out.push_str(&format!("- {}\n", v.line()));
    }
    out
}

fn csv_bytes(r: &RunReport) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "instance_id",
        "raw_reply",
        "parsed_guess",
        "exact_match",
        "rouge_l_f1",
    ])
    .expect("in-memory csv");
    for g in &r.per_instance {
        w.write_record([
            g.instance_id.as_str(),
            g.raw_reply.as_str(),
            g.parsed_guess.as_str(),
            &g.exact_match.to_string(),
            &format!("{:.6}", g.rouge_l_f1),
        ])
        .expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

pub fn emit_report(report: &RunReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let value = serde_json::to_value(report).expect("report serializes");
            canonical_json(&value).into_bytes()
        }
        ReportFormat::Markdown => markdown(report).into_bytes(),
        ReportFormat::Csv => csv_bytes(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guessing::SkipStage;

    fn guess(id: &str, em: u8, rouge: f64) -> Entry {
        Entry::Guess(GuessResult {
            instance_id: id.into(),
            raw_reply: format!("reply, \"{id}\"\nline"),
            parsed_guess: id.into(),
            exact_match: em,
            rouge_l_f1: rouge,
        })
    }

    fn sample() -> RunReport {
        let mut config = BTreeMap::new();
        config.insert("model".into(), Value::from("mock:scripted"));
        config.insert("benchmark".into(), Value::from("mmlu"));
        config.insert("seed".into(), Value::from(7));
        let header = RunHeader {
            n_filtered: 2,
            ..RunHeader::new("guess", config)
        };
        let entries = vec![
            guess("a", 1, 1.0),
            guess("b", 0, 1.0 / 3.0),
            Entry::Skipped(SkippedItem {
                instance_id: "c".into(),
                stage: SkipStage::Masking,
                reason: "no maskable keyword".into(),
            }),
            guess("d", 0, 0.123_456_789),
        ];
        RunReport::build(&header, &entries)
    }

    #[test]
    fn em_rate_examples() {
        let mk = |ems: &[u8]| -> Vec<GuessResult> {
            ems.iter()
                .map(|&e| GuessResult {
                    instance_id: "x".into(),
                    raw_reply: String::new(),
                    parsed_guess: String::new(),
                    exact_match: e,
                    rouge_l_f1: f64::from(e),
                })
                .collect()
        };
        assert_eq!(em_rate(&mk(&[1, 1, 0, 0])).unwrap(), 0.5);
        assert_eq!(em_rate(&mk(&[1, 1, 1])).unwrap(), 1.0);
        let mut v = vec![1u8; 13];
        v.extend([0u8; 12]);
        assert_eq!(em_rate(&mk(&v)).unwrap(), 0.52);
        assert_eq!(em_rate(&[]), Err(ReportError::NoScoredResults));
    }

    #[test]
    fn counts_add_up() {
        let r = sample();
        assert_eq!(
            (r.n_total, r.n_filtered, r.n_scored, r.n_skipped),
            (6, 2, 3, 1)
        );
        assert_eq!(r.em_rate, Some(quantize(1.0 / 3.0)));
        r.check_invariants().unwrap();
    }

    #[test]
    fn json_is_stable_and_round_trips() {
        let r = sample();
        let a = emit_report(&r, ReportFormat::Json);
        assert_eq!(a, emit_report(&sample(), ReportFormat::Json));
        let text = String::from_utf8(a).unwrap();
        assert!(text.contains("\"em_rate\": 0.333333"));
        assert!(text.contains("\"seed\": 7"));
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn markdown_and_csv() {
        let r = sample();
        let md = String::from_utf8(emit_report(&r, ReportFormat::Markdown)).unwrap();
        assert!(md.contains("ChatGPT MMLU EM 0.52 (paper)"));
        assert!(md.contains("| mmlu | mock:scripted |"));
        let csv = emit_report(&r, ReportFormat::Csv);
        let rows = csv::Reader::from_reader(csv.as_slice()).records().count();
        assert_eq!(rows, r.n_scored);
    }

    #[test]
    fn records_round_trip() {
        let header = RunHeader::new("guess", BTreeMap::new());
        let entries = vec![guess("a", 1, 1.0)];
        let mut text = serde_json::to_string(&GuessRecord::Header(header.clone())).unwrap();
        for e in &entries {
            text.push('\n');
            text.push_str(&serde_json::to_string(&GuessRecord::from(e.clone())).unwrap());
        }
        let (h, back) = read_guess_records(text.as_bytes()).unwrap();
        assert_eq!((h, back), (header, entries));
        assert_eq!(
            read_guess_records("".as_bytes()).unwrap_err(),
            ReportError::MissingHeader
        );
    }
}
