use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::index::{tokenize, Token};

pub const DEFAULT_NGRAM: usize = 13;

/// A window of `n` consecutive tokens from one document, re-joined with single spaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub start_token: usize,
    pub text: String,
}

/// Sliding windows of `n` tokens with stride 1.
///
/// A document shorter than `n` yields one chunk holding all its tokens; a
/// document with no tokens yields none. `n` of zero is treated as one.
pub fn chunk_ngrams(doc: &Document, n: usize) -> Vec<Chunk> {
    chunk_tokens(&doc.doc_id, &tokenize(&doc.text), n)
}

pub fn chunk_tokens(doc_id: &str, tokens: &[Token], n: usize) -> Vec<Chunk> {
    let n = n.max(1);
    if tokens.is_empty() {
        return Vec::new();
    }
    let join = |window: &[Token]| {
        window
            .iter()
            .map(Token::as_str)
            .collect::<Vec<_>>()
            .join(" ")
    };
    if tokens.len() < n {
        return vec![Chunk {
            doc_id: doc_id.to_string(),
            start_token: 0,
            text: join(tokens),
        }];
    }
    tokens
        .windows(n)
        .enumerate()
        .map(|(start, window)| Chunk {
            doc_id: doc_id.to_string(),
            start_token: start,
            text: join(window),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc_of(len: usize) -> Document {
        let text = (0..len)
            .map(|i| format!("w{i}"))
            .collect::<Vec<_>>()
            .join(" ");
        Document {
            doc_id: "d".into(),
            source: "s".into(),
            text,
        }
    }

    #[test]
    fn counts() {
        assert_eq!(chunk_ngrams(&doc_of(13), 13).len(), 1);
        assert_eq!(chunk_ngrams(&doc_of(20), 13).len(), 8);
        assert!(chunk_ngrams(&doc_of(0), 13).is_empty());
    }

    #[test]
    fn short_doc_is_one_whole_chunk() {
        // enumerate windows by hand: none of length 13 fit in 5 tokens
        let chunks = chunk_ngrams(&doc_of(5), 13);
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].text, "w0 w1 w2 w3 w4");
        assert_eq!(chunks[0].start_token, 0);
    }

    #[test]
    fn windows_have_n_tokens_and_stride_one() {
        let chunks = chunk_ngrams(&doc_of(15), 13);
        assert_eq!(chunks.len(), 3);
        for (i, c) in chunks.iter().enumerate() {
            assert_eq!(c.start_token, i);
            assert_eq!(c.text.split(' ').count(), 13);
            assert!(c.text.starts_with(&format!("w{i} ")));
        }
    }
}
