//! Streaming JSONL ingestion of corpus documents.
//!
//! One JSON object per line, `{"id": optional string, "text": string}`.
//! Lines are read one at a time through a bounded buffer, so memory use does
//! not grow with the file size. Malformed lines are skipped and counted.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Default read buffer for corpus files.
pub const DEFAULT_BUFFER_BYTES: usize = 64 * 1024;

/// Lines longer than this are treated as malformed rather than buffered.
pub const DEFAULT_MAX_LINE_BYTES: usize = 16 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus file {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// One corpus record, the unit of retrieval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub source: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub lines_read: u64,
    pub documents: u64,
    pub skipped_malformed: u64,
    pub skipped_empty: u64,
    pub skipped_oversized: u64,
    /// Largest single line held in memory, in bytes.
    pub peak_line_bytes: usize,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    #[serde(default)]
    id: Option<serde_json::Value>,
    text: String,
}

/// Iterator over the documents of one JSONL file.
///
/// Yields `Err` only for I/O failures, after which the stream ends.
pub struct DocumentStream<R> {
    reader: R,
    source: String,
    line_no: u64,
    max_line_bytes: usize,
    line: Vec<u8>,
    stats: IngestStats,
    failed: bool,
    path: PathBuf,
}

impl DocumentStream<BufReader<File>> {
    pub fn open(path: &Path, source_name: &str) -> Result<Self, CorpusError> {
        Self::open_with_buffer(path, source_name, DEFAULT_BUFFER_BYTES)
    }

    pub fn open_with_buffer(
        path: &Path,
        source_name: &str,
        buffer_bytes: usize,
    ) -> Result<Self, CorpusError> {
        let file = File::open(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut stream = Self::from_reader(
            BufReader::with_capacity(buffer_bytes.max(1), file),
            source_name,
        );
        stream.path = path.to_path_buf();
        Ok(stream)
    }
}

impl<R: BufRead> DocumentStream<R> {
    pub fn from_reader(reader: R, source_name: &str) -> Self {
        Self {
            reader,
            source: source_name.to_string(),
            line_no: 0,
            max_line_bytes: DEFAULT_MAX_LINE_BYTES,
            line: Vec::new(),
            stats: IngestStats::default(),
            failed: false,
            path: PathBuf::new(),
        }
    }

    pub fn with_max_line_bytes(mut self, max: usize) -> Self {
        self.max_line_bytes = max;
        self
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    /// Reads one line into `self.line`, discarding the tail of lines that
    /// exceed the limit. Returns `Ok(None)` at EOF, `Ok(Some(oversized))` otherwise.
    fn read_line(&mut self) -> io::Result<Option<bool>> {
        self.line.clear();
        let limit = self.max_line_bytes as u64 + 1;
        let n = (&mut self.reader)
            .take(limit)
            .read_until(b'\n', &mut self.line)?;
        if n == 0 {
            return Ok(None);
        }
        let oversized = self.line.len() > self.max_line_bytes && self.line.last() != Some(&b'\n');
        if oversized {
            // drain the remainder of the line without keeping it
            loop {
                let buf = self.reader.fill_buf()?;
                if buf.is_empty() {
                    break;
                }
                match buf.iter().position(|&b| b == b'\n') {
                    Some(pos) => {
                        self.reader.consume(pos + 1);
                        break;
                    }
                    None => {
                        let len = buf.len();
                        self.reader.consume(len);
                    }
                }
            }
        }
        self.stats.peak_line_bytes = self.stats.peak_line_bytes.max(self.line.len());
        Ok(Some(oversized))
    }

    fn parse_current(&self) -> Option<Result<Document, ()>> {
        let raw = std::str::from_utf8(&self.line).ok();
        let Some(raw) = raw else {
            return Some(Err(()));
        };
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return None;
        }
        let record: RawRecord = match serde_json::from_str(trimmed) {
            Ok(r) => r,
            Err(_) => return Some(Err(())),
        };
        let doc_id = match record.id {
            Some(serde_json::Value::String(s)) if !s.is_empty() => s,
            Some(serde_json::Value::Number(n)) => n.to_string(),
            Some(serde_json::Value::Null) | None => format!("{}:{}", self.source, self.line_no),
            Some(serde_json::Value::String(_)) => format!("{}:{}", self.source, self.line_no),
            Some(_) => return Some(Err(())),
        };
        Some(Ok(Document {
            doc_id,
            source: self.source.clone(),
            text: record.text,
        }))
    }
}

impl<R: BufRead> Iterator for DocumentStream<R> {
    type Item = Result<Document, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let oversized = match self.read_line() {
                Ok(Some(o)) => o,
                Ok(None) => return None,
                Err(source) => {
                    self.failed = true;
                    return Some(Err(CorpusError::Io {
                        path: self.path.clone(),
                        source,
                    }));
                }
            };
            self.stats.lines_read += 1;
            let parsed = if oversized {
                self.stats.skipped_oversized += 1;
                None
            } else {
                self.parse_current()
            };
            self.line_no += 1;
            match parsed {
                None => continue,
                Some(Err(())) => {
                    self.stats.skipped_malformed += 1;
                    continue;
                }
                Some(Ok(doc)) if doc.text.trim().is_empty() => {
                    self.stats.skipped_empty += 1;
                    continue;
                }
                Some(Ok(doc)) => {
                    self.stats.documents += 1;
                    return Some(Ok(doc));
                }
            }
        }
    }
}

/// Opens `path` as a document stream whose synthesized ids are prefixed with `source_name`.
pub fn ingest_jsonl(
    path: &Path,
    source_name: &str,
) -> Result<DocumentStream<BufReader<File>>, CorpusError> {
    DocumentStream::open(path, source_name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn collect(input: &str) -> (Vec<Document>, IngestStats) {
        let mut stream = DocumentStream::from_reader(Cursor::new(input.as_bytes()), "src");
        let docs: Vec<Document> = stream.by_ref().map(Result::unwrap).collect();
        (docs, stream.stats())
    }

    #[test]
    fn synthesizes_ids_from_line_numbers() {
        let (docs, stats) = collect("{\"text\":\"a\"}\n{\"text\":\"b\"}\n{\"text\":\"c\"}\n");
        let ids: Vec<&str> = docs.iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, ["src:0", "src:1", "src:2"]);
        assert_eq!(stats.documents, 3);
        assert!(docs.iter().all(|d| d.source == "src"));
    }

    #[test]
    fn malformed_line_is_counted() {
        let (docs, stats) = collect("{\"text\":\"ok\",\"id\":\"x\"}\n{not json\n");
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].doc_id, "x");
        assert_eq!(stats.skipped_malformed, 1);
    }

    #[test]
    fn missing_text_is_malformed_and_blank_text_is_empty() {
        let (docs, stats) = collect("{\"id\":\"a\"}\n{\"text\":\"   \"}\n\n{\"text\":\"z\"}");
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].doc_id, "src:3");
        assert_eq!(stats.skipped_malformed, 1);
        assert_eq!(stats.skipped_empty, 1);
    }

    #[test]
    fn oversized_lines_are_skipped() {
        let long = format!("{{\"text\":\"{}\"}}\n", "x".repeat(200));
        let input = format!("{long}{{\"text\":\"short\"}}\n");
        let mut stream = DocumentStream::from_reader(Cursor::new(input.into_bytes()), "s")
            .with_max_line_bytes(64);
        let docs: Vec<Document> = stream.by_ref().map(Result::unwrap).collect();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].text, "short");
        assert_eq!(stream.stats().skipped_oversized, 1);
        assert!(stream.stats().peak_line_bytes <= 65);
    }

    #[test]
    fn missing_file_is_fatal() {
        let err = ingest_jsonl(Path::new("/definitely/not/here.jsonl"), "x");
        assert!(matches!(err, Err(CorpusError::Io { .. })));
    }
}
