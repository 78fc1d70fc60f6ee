//! Okapi BM25 over an in-memory inverted index.

mod persist;
mod tokenize;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusError, Document};

pub use persist::{load_index, save_index, INDEX_FORMAT_VERSION, INDEX_MAGIC};
pub use tokenize::{tokenize, word_spans, Token};

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("empty corpus: no ingestible documents")]
    EmptyCorpus,
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
    #[error("unknown document id {0:?}")]
    UnknownDocId(String),
    #[error("empty query")]
    EmptyQuery,
    #[error("k must be at least 1")]
    InvalidK,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("index file: {0}")]
    Format(String),
    #[error("index file i/o")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 0.9, b: 0.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Immutable inverted index. Safe to share across threads once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Index {
    params: Bm25Params,
    doc_ids: Vec<String>,
    sources: Vec<String>,
    doc_texts: Vec<String>,
    doc_lengths: Vec<u32>,
    avg_doc_len: f64,
    postings: BTreeMap<String, Vec<Posting>>,
    #[serde(skip)]
    by_id: HashMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
}

impl Index {
    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<usize> {
        self.slot(doc_id).map(|i| self.doc_lengths[i] as usize)
    }

    pub fn doc_text(&self, doc_id: &str) -> Option<&str> {
        self.slot(doc_id).map(|i| self.doc_texts[i].as_str())
    }

    pub fn document(&self, doc_id: &str) -> Option<Document> {
        self.slot(doc_id).map(|i| Document {
            doc_id: self.doc_ids[i].clone(),
            source: self.sources[i].clone(),
            text: self.doc_texts[i].clone(),
        })
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.doc_ids.iter().map(String::as_str)
    }

    /// Number of documents containing `term`.
    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// `(doc_id, term frequency)` pairs for `term`, in insertion order.
    pub fn postings(&self, term: &str) -> Vec<(&str, u32)> {
        self.postings.get(term).map_or_else(Vec::new, |list| {
            list.iter()
                .map(|p| (self.doc_ids[p.doc as usize].as_str(), p.tf))
                .collect()
        })
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    fn slot(&self, doc_id: &str) -> Option<usize> {
        self.by_id.get(doc_id).map(|&i| i as usize)
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.doc_count() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, idf: f64, tf: u32, doc_len: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = f64::from(tf);
        let norm = k1 * (1.0 - b + b * f64::from(doc_len) / self.avg_doc_len);
        idf * tf * (k1 + 1.0) / (tf + norm)
    }

    /// BM25 of one document against the distinct terms of `query`.
    pub fn bm25_score(&self, query: &[Token], doc_id: &str) -> Result<f64, IndexError> {
        let slot = self
            .slot(doc_id)
            .ok_or_else(|| IndexError::UnknownDocId(doc_id.to_string()))? as u32;
        let doc_len = self.doc_lengths[slot as usize];
        let mut seen = HashSet::new();
        let mut score = 0.0;
        for term in query {
            if !seen.insert(term.as_str()) {
                continue;
            }
            let Some(list) = self.postings.get(term.as_str()) else {
                continue;
            };
            // postings are appended in doc order, so they are sorted by slot
            if let Ok(pos) = list.binary_search_by_key(&slot, |p| p.doc) {
                score += self.term_weight(self.idf(list.len()), list[pos].tf, doc_len);
            }
        }
        Ok(score)
    }

    /// Top-`k` documents by BM25, ties broken by ascending doc id.
    /// Documents scoring zero are never returned.
    pub fn search(&self, query_text: &str, k: usize) -> Result<Vec<RetrievalHit>, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        let query = tokenize(query_text);
        if query.is_empty() {
            return Err(IndexError::EmptyQuery);
        }
        let mut seen = HashSet::new();
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for term in &query {
            if !seen.insert(term.as_str()) {
                continue;
            }
            let Some(list) = self.postings.get(term.as_str()) else {
                continue;
            };
            let idf = self.idf(list.len());
            for p in list {
                let w = self.term_weight(idf, p.tf, self.doc_lengths[p.doc as usize]);
                *acc.entry(p.doc).or_insert(0.0) += w;
            }
        }
        let mut scored: Vec<(u32, f64)> = acc.into_iter().filter(|&(_, s)| s > 0.0).collect();
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.doc_ids[a.0 as usize].cmp(&self.doc_ids[b.0 as usize]))
        });
        scored.truncate(k);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(i, (slot, score))| RetrievalHit {
                doc_id: self.doc_ids[slot as usize].clone(),
                score,
                rank: i + 1,
            })
            .collect())
    }

    fn rebuild_lookup(&mut self) -> Result<(), IndexError> {
        self.by_id.clear();
        for (i, id) in self.doc_ids.iter().enumerate() {
            if self.by_id.insert(id.clone(), i as u32).is_some() {
                return Err(IndexError::DuplicateDocId(id.clone()));
            }
        }
        Ok(())
    }

    /// Checks the structural invariants; used after loading from disk.
    fn validate(&self) -> Result<(), IndexError> {
        let n = self.doc_ids.len();
        if n == 0 {
            return Err(IndexError::EmptyCorpus);
        }
        if self.doc_lengths.len() != n || self.doc_texts.len() != n || self.sources.len() != n {
            return Err(IndexError::Format("column lengths disagree".into()));
        }
        for list in self.postings.values() {
            if list.iter().any(|p| p.doc as usize >= n || p.tf == 0) {
                return Err(IndexError::Format("posting out of range".into()));
            }
            if list.windows(2).any(|w| w[0].doc >= w[1].doc) {
                return Err(IndexError::Format("postings not sorted".into()));
            }
        }
        let mean = mean_len(&self.doc_lengths);
        if (mean - self.avg_doc_len).abs() > 1e-9 {
            return Err(IndexError::Format("average length mismatch".into()));
        }
        Ok(())
    }
}

fn mean_len(lengths: &[u32]) -> f64 {
    let total: u64 = lengths.iter().map(|&l| u64::from(l)).sum();
    total as f64 / lengths.len() as f64
}

/// Single pass over `docs`. Documents that tokenize to nothing are skipped.
pub fn build_index<I, E>(docs: I, params: Bm25Params) -> Result<Index, IndexError>
where
    I: IntoIterator<Item = Result<Document, E>>,
    IndexError: From<E>,
{
    let mut index = Index {
        params,
        doc_ids: Vec::new(),
        sources: Vec::new(),
        doc_texts: Vec::new(),
        doc_lengths: Vec::new(),
        avg_doc_len: 0.0,
        postings: BTreeMap::new(),
        by_id: HashMap::new(),
    };
    let mut counts: HashMap<String, u32> = HashMap::new();
    for doc in docs {
        let doc = doc?;
        let tokens = tokenize(&doc.text);
        if tokens.is_empty() {
            continue;
        }
        let slot = index.doc_ids.len() as u32;
        if index.by_id.insert(doc.doc_id.clone(), slot).is_some() {
            return Err(IndexError::DuplicateDocId(doc.doc_id));
        }
        counts.clear();
        for t in &tokens {
            *counts.entry(t.as_str().to_string()).or_insert(0) += 1;
        }
        for (term, tf) in counts.drain() {
            index
                .postings
                .entry(term)
                .or_default()
                .push(Posting { doc: slot, tf });
        }
        index.doc_lengths.push(tokens.len() as u32);
        index.doc_ids.push(doc.doc_id);
        index.sources.push(doc.source);
        index.doc_texts.push(doc.text);
    }
    if index.doc_ids.is_empty() {
        return Err(IndexError::EmptyCorpus);
    }
    index.avg_doc_len = mean_len(&index.doc_lengths);
    Ok(index)
}

/// Convenience for in-memory documents.
pub fn build_index_from_docs(
    docs: impl IntoIterator<Item = Document>,
    params: Bm25Params,
) -> Result<Index, IndexError> {
    build_index(docs.into_iter().map(Ok::<_, IndexError>), params)
}
