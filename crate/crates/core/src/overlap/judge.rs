//! LLM-judged semantic similarity on a 1–7 scale.

use crate::model::{ModelClient, ModelError};

pub const JUDGE_TEMPLATE: &str = include_str!("../../prompts/judge_similarity.txt");
pub const DEFAULT_JUDGE_RETRIES: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JudgeError {
    #[error("judge reply not parsable after {attempts} attempts: {last_reply:?}")]
    Unparsable { attempts: u32, last_reply: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub fn judge_prompt(chunk_text: &str, instance_text: &str) -> String {
    JUDGE_TEMPLATE
        .replace("{benchmark}", instance_text.trim())
        .replace("{retrieved}", chunk_text.trim())
}

/// First standalone integer in the reply that lies in 1..=7.
///
/// A standalone integer is a digit run not touching letters, digits, `.` or
/// `,` on either side, so `3.5`, `v7` and `1,000` are skipped.
pub fn parse_likert(reply: &str) -> Option<u8> {
    let chars: Vec<char> = reply.chars().collect();
    let glued = |c: Option<&char>| {
        c.is_some_and(|c| c.is_alphanumeric() || *c == '.' || *c == ',' || *c == '_')
    };
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
        let before = if start == 0 {
            None
        } else {
            chars.get(start - 1)
        };
        let after = chars.get(i);
        // a trailing sentence period is fine: "7."
        let after_glued = match after {
            Some('.') | Some(',') => chars.get(i + 1).is_some_and(|c| c.is_ascii_digit()),
            other => glued(other),
        };
        if glued(before) || after_glued {
            continue;
        }
        let digits: String = chars[start..i].iter().collect();
        if let Ok(v) = digits.parse::<u8>() {
            if (1..=7).contains(&v) {
                return Some(v);
            }
        }
    }
    None
}

/// Asks `judge` how similar the two texts are, retrying up to `retries`
/// times when the reply carries no usable score.
pub fn gpt_score(
    chunk_text: &str,
    instance_text: &str,
    judge: &dyn ModelClient,
    retries: u32,
) -> Result<f64, JudgeError> {
    let prompt = judge_prompt(chunk_text, instance_text);
    let mut last_reply = String::new();
    for _ in 0..=retries {
        let exchange = judge.complete(&prompt)?;
        if let Some(v) = parse_likert(&exchange.reply) {
            return Ok(f64::from(v));
        }
        last_reply = exchange.reply;
    }
    Err(JudgeError::Unparsable {
        attempts: retries + 1,
        last_reply,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_mock, MockData, MockKind};

    fn scripted(replies: &[&str]) -> Box<dyn ModelClient> {
        make_mock(
            MockKind::Scripted,
            &MockData {
                replies: replies.iter().map(|s| s.to_string()).collect(),
                ..MockData::default()
            },
        )
    }

    #[test]
    fn parse_rules() {
        assert_eq!(parse_likert("7"), Some(7));
        assert_eq!(
            parse_likert("Similarity: 3 because the topics differ"),
            Some(3)
        );
        assert_eq!(parse_likert("Score 9, no wait, 4."), Some(4));
        assert_eq!(parse_likert("3.5 then 6"), Some(6));
        assert_eq!(parse_likert("v7 or 0"), None);
        assert_eq!(parse_likert("no idea"), None);
        assert_eq!(parse_likert("(5)"), Some(5));
    }

    #[test]
    fn scripted_scores() {
        assert_eq!(
            gpt_score("a", "b", scripted(&["7"]).as_ref(), 2).unwrap(),
            7.0
        );
        assert_eq!(
            gpt_score("a", "b", scripted(&["Similarity: 3 because…"]).as_ref(), 2).unwrap(),
            3.0
        );
    }

    #[test]
    fn retries_then_fails() {
        let judge = scripted(&["no idea"]);
        let err = gpt_score("a", "b", judge.as_ref(), 2).unwrap_err();
        assert_eq!(
            err,
            JudgeError::Unparsable {
                attempts: 3,
                last_reply: "no idea".into()
            }
        );
    }

    #[test]
    fn recovers_on_retry() {
        let judge = scripted(&["hmm", "maybe 5"]);
        assert_eq!(gpt_score("a", "b", judge.as_ref(), 1).unwrap(), 5.0);
    }

    #[test]
    fn prompt_embeds_both_texts() {
        let p = judge_prompt("retrieved words", "benchmark words");
        assert!(p.contains("retrieved words") && p.contains("benchmark words"));
        assert!(!p.contains("{retrieved}") && !p.contains("{benchmark}"));
    }
}
