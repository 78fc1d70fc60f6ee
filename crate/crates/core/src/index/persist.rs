use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Index, IndexError};

pub const INDEX_MAGIC: &str = "LEAKPROBE-BM25-INDEX";
pub const INDEX_FORMAT_VERSION: u32 = 1;

/// Writes `<magic> v<version>\n` followed by the index as JSON.
pub fn save_index(index: &Index, path: &Path) -> Result<(), IndexError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{INDEX_MAGIC} v{INDEX_FORMAT_VERSION}")?;
    serde_json::to_writer(&mut out, index).map_err(|e| IndexError::Format(e.to_string()))?;
    out.flush()?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<Index, IndexError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let header = header.trim_end();
    let version = header
        .strip_prefix(INDEX_MAGIC)
        .and_then(|rest| rest.trim().strip_prefix('v'))
        .ok_or_else(|| IndexError::Format("missing magic header".into()))?;
    let version: u32 = version
        .parse()
        .map_err(|_| IndexError::Format(format!("bad version {version:?}")))?;
    if version != INDEX_FORMAT_VERSION {
        return Err(IndexError::Format(format!(
            "unsupported index version {version} (expected {INDEX_FORMAT_VERSION})"
        )));
    }
    let mut index: Index =
        serde_json::from_reader(reader).map_err(|e| IndexError::Format(e.to_string()))?;
    index.rebuild_lookup()?;
    index.validate()?;
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::index::{build_index_from_docs, tokenize, Bm25Params};

    #[test]
    fn round_trip_preserves_scores() {
        let docs = ["the red car", "a blue car parked", "red red wine"]
            .iter()
            .enumerate()
            .map(|(i, t)| Document {
                doc_id: format!("d{i}"),
                source: "s".into(),
                text: t.to_string(),
            });
        let idx = build_index_from_docs(docs, Bm25Params { k1: 1.2, b: 0.75 }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.idx");
        save_index(&idx, &path).unwrap();
        let back = load_index(&path).unwrap();
        assert_eq!(back.params(), idx.params());
        for id in ["d0", "d1", "d2"] {
            let q = tokenize("red car");
            assert_eq!(
                idx.bm25_score(&q, id).unwrap(),
                back.bm25_score(&q, id).unwrap()
            );
        }
        assert_eq!(
            back.search("red", 2).unwrap(),
            idx.search("red", 2).unwrap()
        );
    }

    #[test]
    fn rejects_wrong_magic_and_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.idx");
        std::fs::write(&path, "{}").unwrap();
        assert!(matches!(load_index(&path), Err(IndexError::Format(_))));
        std::fs::write(&path, format!("{INDEX_MAGIC} v99\n{{}}")).unwrap();
        let err = load_index(&path).unwrap_err().to_string();
        assert!(err.contains("unsupported"), "{err}");
    }
}
