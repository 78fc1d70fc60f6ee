//! Retrieval-based overlap detection between benchmark instances and a corpus.
//!
//! A query built from the instance retrieves the top-k documents; each
//! document is cut into n-gram chunks and every surface metric reports its
//! maximum over all chunks of all retrieved documents.
//!
//! The benchmark side is windowed the same way, with the window capped at the
//! benchmark text's own length: a chunk is scored against every window of the
//! reference and keeps the best. A verbatim copy of the benchmark text in a
//! retrieved document therefore always reaches Rouge-L 1.0.

mod chunk;
mod judge;
mod metrics;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bench::BenchmarkInstance;
use crate::index::{tokenize, Index, IndexError, RetrievalHit, Token};
use crate::model::ModelClient;

pub use chunk::{chunk_ngrams, chunk_tokens, Chunk, DEFAULT_NGRAM};
pub use judge::{
    gpt_score, judge_prompt, parse_likert, JudgeError, DEFAULT_JUDGE_RETRIES, JUDGE_TEMPLATE,
};
pub use metrics::{
    bleu_sentence, bleu_tokens, lcs_len, rouge_l_f1, rouge_l_tokens, BLEU_MAX_ORDER,
};

#[derive(Debug, thiserror::Error)]
pub enum OverlapError {
    #[error("instance {0} has no options to build a label query from")]
    NoLabel(String),
    #[error("gpt_score requested without a judge model")]
    MissingJudge,
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    QuestionOnly,
    LabelOnly,
    QuestionLabel,
}

impl QueryKind {
    pub const ALL: [QueryKind; 3] = [
        QueryKind::QuestionOnly,
        QueryKind::LabelOnly,
        QueryKind::QuestionLabel,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub kind: QueryKind,
    pub text: String,
}

pub fn build_query(inst: &BenchmarkInstance, kind: QueryKind) -> Result<Query, OverlapError> {
    let label = || {
        inst.correct_option()
            .ok_or_else(|| OverlapError::NoLabel(inst.instance_id.clone()))
    };
    let text = match kind {
        QueryKind::QuestionOnly => inst.question.clone(),
        QueryKind::LabelOnly => label()?.to_string(),
        QueryKind::QuestionLabel => format!("{} {}", inst.question, label()?),
    };
    Ok(Query { kind, text })
}

/// Question plus label when the instance has options, the bare question otherwise.
pub fn default_query(inst: &BenchmarkInstance) -> Query {
    build_query(inst, QueryKind::QuestionLabel).unwrap_or_else(|_| Query {
        kind: QueryKind::QuestionOnly,
        text: inst.question.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Bm25,
    RougeL,
    Bleu,
    GptScore,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Bm25 => "bm25",
            Metric::RougeL => "rouge_l",
            Metric::Bleu => "bleu",
            Metric::GptScore => "gpt_score",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = OverlapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "bm25" => Ok(Metric::Bm25),
            "rouge_l" | "rouge-l" | "rougel" => Ok(Metric::RougeL),
            "bleu" | "sacrebleu" => Ok(Metric::Bleu),
            "gpt_score" | "gptscore" => Ok(Metric::GptScore),
            other => Err(OverlapError::UnknownMetric(other.to_string())),
        }
    }
}

/// Hook for scorers not built in (a learned metric served elsewhere, say).
pub trait ExternalScorer: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, candidate: &str, reference: &str) -> Result<f64, String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkRef {
    pub doc_id: String,
    pub start_token: usize,
    pub text: String,
}

impl From<&Chunk> for ChunkRef {
    fn from(c: &Chunk) -> Self {
        Self {
            doc_id: c.doc_id.clone(),
            start_token: c.start_token,
            text: c.text.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub value: f64,
    /// Absent for BM25, which is scored on whole documents.
    pub best_chunk: Option<ChunkRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub instance_id: String,
    pub query: Query,
    pub hits: Vec<RetrievalHit>,
    pub metric_scores: BTreeMap<String, MetricScore>,
    pub no_hits: bool,
    /// Chunk pairs the judge or an external scorer failed on; excluded from the max.
    pub scoring_errors: usize,
}

pub struct DetectOptions<'a> {
    pub k: usize,
    pub ngram: usize,
    pub metrics: Vec<Metric>,
    pub judge: Option<&'a dyn ModelClient>,
    pub judge_retries: u32,
    pub external: Vec<&'a dyn ExternalScorer>,
    /// Overrides the default question-plus-label query.
    pub query_kind: Option<QueryKind>,
}

impl Default for DetectOptions<'_> {
    fn default() -> Self {
        Self {
            k: 10,
            ngram: DEFAULT_NGRAM,
            metrics: vec![Metric::Bm25, Metric::RougeL, Metric::Bleu],
            judge: None,
            judge_retries: DEFAULT_JUDGE_RETRIES,
            external: Vec::new(),
            query_kind: None,
        }
    }
}

struct Best {
    value: f64,
    chunk: usize,
}

fn keep_max(slot: &mut Option<Best>, value: f64, chunk: usize) {
    // strictly greater keeps the earliest chunk on ties
    if slot.as_ref().is_none_or(|b| value > b.value) {
        *slot = Some(Best { value, chunk });
    }
}

/// Runs retrieval and chunked scoring for one instance. Never mutates `index`.
pub fn detect(
    inst: &BenchmarkInstance,
    index: &Index,
    opts: &DetectOptions<'_>,
) -> Result<OverlapReport, OverlapError> {
    if opts.metrics.contains(&Metric::GptScore) && opts.judge.is_none() {
        return Err(OverlapError::MissingJudge);
    }
    let query = match opts.query_kind {
        Some(kind) => build_query(inst, kind)?,
        None => default_query(inst),
    };
    let hits = index.search(&query.text, opts.k)?;
    let mut report = OverlapReport {
        instance_id: inst.instance_id.clone(),
        query,
        hits,
        metric_scores: BTreeMap::new(),
        no_hits: false,
        scoring_errors: 0,
    };
    if report.hits.is_empty() {
        report.no_hits = true;
        return Ok(report);
    }

    let reference: Vec<Token> = tokenize(&report.query.text);
    let window = opts.ngram.max(1).min(reference.len().max(1));
    let ref_windows: Vec<&[Token]> = if reference.len() <= window {
        vec![&reference[..]]
    } else {
        reference.windows(window).collect()
    };
    let chunks: Vec<Chunk> = report
        .hits
        .iter()
        .flat_map(|hit| {
            let text = index.doc_text(&hit.doc_id).unwrap_or_default();
            chunk_tokens(&hit.doc_id, &tokenize(text), window)
        })
        .collect();
    let best_over_windows = |score: &dyn Fn(&[Token]) -> f64| {
        ref_windows
            .iter()
            .map(|w| score(w))
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let mut best: BTreeMap<String, Option<Best>> = BTreeMap::new();
    for (ci, chunk) in chunks.iter().enumerate() {
        let cand = tokenize(&chunk.text);
        for &metric in &opts.metrics {
            let value = match metric {
                Metric::Bm25 => continue,
                Metric::RougeL => best_over_windows(&|r| rouge_l_tokens(&cand, r)),
                Metric::Bleu => best_over_windows(&|r| bleu_tokens(&cand, r)),
                Metric::GptScore => {
                    let judge = opts.judge.expect("checked above");
                    match gpt_score(&chunk.text, &report.query.text, judge, opts.judge_retries) {
                        Ok(v) => v,
                        Err(e) => {
                            log::warn!(
                                "{}: judge failed on {}@{}: {e}",
                                inst.instance_id,
                                chunk.doc_id,
                                chunk.start_token
                            );
                            report.scoring_errors += 1;
                            continue;
                        }
                    }
                }
            };
            keep_max(
                best.entry(metric.name().to_string()).or_default(),
                value,
                ci,
            );
        }
        for scorer in &opts.external {
            match scorer.score(&chunk.text, &report.query.text) {
                Ok(v) => keep_max(best.entry(scorer.name().to_string()).or_default(), v, ci),
                Err(e) => {
                    log::warn!("{}: scorer {} failed: {e}", inst.instance_id, scorer.name());
                    report.scoring_errors += 1;
                }
            }
        }
    }

    if opts.metrics.contains(&Metric::Bm25) {
        report.metric_scores.insert(
            Metric::Bm25.name().to_string(),
            MetricScore {
                value: report.hits[0].score,
                best_chunk: None,
            },
        );
    }
    for (name, slot) in best {
        if let Some(b) = slot {
            report.metric_scores.insert(
                name,
                MetricScore {
                    value: b.value,
                    best_chunk: Some(ChunkRef::from(&chunks[b.chunk])),
                },
            );
        }
    }
    Ok(report)
}

/// 1-based rank of `doc_id` for the given query kind, or `None` if it is not retrieved at all.
pub fn planted_rank(
    inst: &BenchmarkInstance,
    index: &Index,
    kind: QueryKind,
    doc_id: &str,
) -> Result<Option<usize>, OverlapError> {
    let query = build_query(inst, kind)?;
    let hits = match index.search(&query.text, index.doc_count()) {
        Ok(h) => h,
        Err(IndexError::EmptyQuery) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    Ok(hits.iter().find(|h| h.doc_id == doc_id).map(|h| h.rank))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::Metadata;
    use crate::corpus::Document;
    use crate::index::{build_index_from_docs, Bm25Params};
    use crate::model::{make_mock, MockData, MockKind};

    fn inst(q: &str, opts: &[&str], correct: usize) -> BenchmarkInstance {
        BenchmarkInstance {
            instance_id: "i".into(),
            benchmark: "b".into(),
            question: q.into(),
            options: opts.iter().map(|s| s.to_string()).collect(),
            correct_index: correct,
            metadata: Metadata::default(),
            split: String::new(),
        }
    }

    fn docs(texts: &[&str]) -> Index {
        build_index_from_docs(
            texts.iter().enumerate().map(|(i, t)| Document {
                doc_id: format!("d{i}"),
                source: "s".into(),
                text: t.to_string(),
            }),
            Bm25Params::default(),
        )
        .unwrap()
    }

    #[test]
    fn query_kinds() {
        let i = inst(
            "Where did fortune cookies originate?",
            &["Japan", "San Francisco"],
            1,
        );
        assert_eq!(
            build_query(&i, QueryKind::QuestionLabel).unwrap().text,
            "Where did fortune cookies originate? San Francisco"
        );
        assert_eq!(
            build_query(&i, QueryKind::QuestionOnly).unwrap().text,
            i.question
        );
        assert_eq!(
            build_query(&i, QueryKind::LabelOnly).unwrap().text,
            "San Francisco"
        );
        let bare = inst("q here", &[], 0);
        assert!(matches!(
            build_query(&bare, QueryKind::LabelOnly),
            Err(OverlapError::NoLabel(_))
        ));
        assert_eq!(default_query(&bare).kind, QueryKind::QuestionOnly);
    }

    #[test]
    fn metric_names_parse() {
        for m in [Metric::Bm25, Metric::RougeL, Metric::Bleu, Metric::GptScore] {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("bleurt".parse::<Metric>().is_err());
    }

    #[test]
    fn planted_text_scores_one() {
        let idx = docs(&[
            "cooking tips for busy people and their families on weekdays",
            "trivia night: where did fortune cookies originate? san francisco is the answer many give",
            "the weather will be sunny with light winds",
        ]);
        let i = inst(
            "Where did fortune cookies originate?",
            &["Japan", "San Francisco"],
            1,
        );
        let r = detect(
            &i,
            &idx,
            &DetectOptions {
                k: 1,
                ..DetectOptions::default()
            },
        )
        .unwrap();
        assert_eq!(r.hits[0].doc_id, "d1");
        assert_eq!(r.metric_scores["rouge_l"].value, 1.0);
        assert!(r.metric_scores["bleu"].value > 0.0);
        assert_eq!(r.metric_scores["bm25"].value, r.hits[0].score);
        assert!(r.metric_scores["bm25"].best_chunk.is_none());
        let best = r.metric_scores["rouge_l"].best_chunk.as_ref().unwrap();
        assert_eq!(
            best.text,
            "where did fortune cookies originate san francisco"
        );
        assert!((r.metric_scores["bleu"].value - 100.0).abs() < 1e-9);
    }

    #[test]
    fn no_hits_flag() {
        let idx = docs(&["alpha beta gamma"]);
        let i = inst("delta epsilon", &[], 0);
        let r = detect(&i, &idx, &DetectOptions::default()).unwrap();
        assert!(r.no_hits);
        assert!(r.metric_scores.is_empty());
    }

    #[test]
    fn gpt_score_needs_judge_and_takes_max() {
        let idx = docs(&["fortune cookies originate here in many chunks of words that go on and on beyond thirteen tokens total"]);
        let i = inst("fortune cookies", &[], 0);
        let opts = DetectOptions {
            metrics: vec![Metric::GptScore],
            ..DetectOptions::default()
        };
        assert!(matches!(
            detect(&i, &idx, &opts),
            Err(OverlapError::MissingJudge)
        ));
        let judge = make_mock(
            MockKind::Scripted,
            &MockData {
                replies: vec![
                    "2".into(),
                    "junk".into(),
                    "junk".into(),
                    "junk".into(),
                    "6".into(),
                    "1".into(),
                ],
                ..MockData::default()
            },
        );
        let opts = DetectOptions {
            metrics: vec![Metric::GptScore],
            judge: Some(judge.as_ref()),
            ..DetectOptions::default()
        };
        let r = detect(&i, &idx, &opts).unwrap();
        // chunk 0 -> 2, chunk 1 -> three junk replies (error), chunk 2 -> 6, rest -> 1
        assert_eq!(r.scoring_errors, 1);
        assert_eq!(r.metric_scores["gpt_score"].value, 6.0);
        assert_eq!(
            r.metric_scores["gpt_score"]
                .best_chunk
                .as_ref()
                .unwrap()
                .start_token,
            2
        );
    }

    struct Constant;
    impl ExternalScorer for Constant {
        fn name(&self) -> &str {
            "const"
        }
        fn score(&self, _: &str, _: &str) -> Result<f64, String> {
            Ok(0.25)
        }
    }

    #[test]
    fn external_scorer_hook() {
        let idx = docs(&["alpha beta"]);
        let i = inst("alpha", &[], 0);
        let opts = DetectOptions {
            metrics: vec![],
            external: vec![&Constant],
            ..DetectOptions::default()
        };
        let r = detect(&i, &idx, &opts).unwrap();
        assert_eq!(r.metric_scores["const"].value, 0.25);
    }
}
