use serde::{Deserialize, Serialize};

use super::pos::{PosTag, PosTagger};
use super::GuessError;
use crate::index::word_spans;
use crate::model::ModelClient;

pub const KEYWORD_TEMPLATE: &str = include_str!("../../prompts/keyword_select.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeywordSource {
    Llm,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordChoice {
    /// Surface form as written in the question.
    pub word: String,
    pub tag: PosTag,
    pub source: KeywordSource,
}

struct Word<'a> {
    text: &'a str,
    lower: String,
    tag: PosTag,
}

fn tagged_words<'a>(question: &'a str, tagger: &dyn PosTagger) -> Vec<Word<'a>> {
    let texts: Vec<&str> = word_spans(question).map(|r| &question[r]).collect();
    let tags = tagger.tag(&texts);
    texts
        .into_iter()
        .zip(tags)
        .map(|(text, tag)| Word {
            text,
            lower: text.to_lowercase(),
            tag,
        })
        .collect()
}

/// Keeps only the single word of a keyword reply, or `None` when the reply
/// is not a single word.
fn reply_word(reply: &str) -> Option<String> {
    let line = reply.trim().lines().next()?.trim();
    let line = line.strip_prefix("Word:").unwrap_or(line).trim();
    let word = line.trim_matches(|c: char| !c.is_alphanumeric());
    let spans: Vec<_> = word_spans(word).collect();
    (spans.len() == 1 && spans[0] == (0..word.len())).then(|| word.to_lowercase())
}

pub fn keyword_prompt(question: &str) -> String {
    KEYWORD_TEMPLATE.replace("{question}", question.trim())
}

/// Picks the word to hide.
///
/// With an `llm`, its one-word answer is used when it names a content word
/// of the question. Otherwise: the longest noun, then adjective, then verb,
/// earliest on ties. Words that occur more than once are never chosen, since
/// masking one occurrence would leave the other in view.
pub fn select_keyword(
    question: &str,
    tagger: &dyn PosTagger,
    llm: Option<&dyn ModelClient>,
) -> Result<KeywordChoice, GuessError> {
    let words = tagged_words(question, tagger);
    let unique = |w: &Word| words.iter().filter(|o| o.lower == w.lower).count() == 1;

    if let Some(llm) = llm {
        match llm.complete(&keyword_prompt(question)) {
            Ok(exchange) => {
                if let Some(pick) = reply_word(&exchange.reply) {
                    if let Some(w) = words.iter().find(|w| w.lower == pick) {
                        if w.tag.is_content() && unique(w) {
                            return Ok(KeywordChoice {
                                word: w.text.to_string(),
                                tag: w.tag,
                                source: KeywordSource::Llm,
                            });
                        }
                    }
                }
                log::debug!(
                    "keyword reply {:?} rejected, using fallback",
                    exchange.reply
                );
            }
            Err(e) => log::warn!("keyword model failed ({e}), using fallback"),
        }
    }

    for class in [PosTag::Noun, PosTag::Adjective, PosTag::Verb] {
        let mut best: Option<&Word> = None;
        for w in words.iter().filter(|w| w.tag == class && unique(w)) {
            if best.is_none_or(|b| w.text.chars().count() > b.text.chars().count()) {
                best = Some(w);
            }
        }
        if let Some(w) = best {
            return Ok(KeywordChoice {
                word: w.text.to_string(),
                tag: class,
                source: KeywordSource::Fallback,
            });
        }
    }
    Err(GuessError::NoKeyword)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guessing::LexiconTagger;
    use crate::model::{make_mock, MockData, MockKind};

    fn scripted(reply: &str) -> Box<dyn ModelClient> {
        make_mock(
            MockKind::Scripted,
            &MockData {
                replies: vec![reply.into()],
                ..MockData::default()
            },
        )
    }

    const Q: &str = "Where did fortune cookies originate?";

    #[test]
    fn llm_pick_accepted() {
        let llm = scripted("fortune");
        let k = select_keyword(Q, &LexiconTagger, Some(llm.as_ref())).unwrap();
        assert_eq!(k.word, "fortune");
        assert_eq!(k.source, KeywordSource::Llm);
    }

    #[test]
    fn function_word_reply_falls_back() {
        let llm = scripted("did");
        let k = select_keyword(Q, &LexiconTagger, Some(llm.as_ref())).unwrap();
        assert_eq!(k.word, "cookies");
        assert_eq!(k.source, KeywordSource::Fallback);
    }

    #[test]
    fn multiword_or_absent_reply_falls_back() {
        for reply in ["fortune cookies", "pizza", ""] {
            let llm = scripted(reply);
            let k = select_keyword(Q, &LexiconTagger, Some(llm.as_ref())).unwrap();
            assert_eq!(k.word, "cookies", "{reply:?}");
        }
    }

    #[test]
    fn reply_decorations_are_tolerated() {
        let llm = scripted("Word: \"Fortune\".\nBecause...");
        let k = select_keyword(Q, &LexiconTagger, Some(llm.as_ref())).unwrap();
        assert_eq!(k.word, "fortune");
    }

    #[test]
    fn only_function_words() {
        assert_eq!(
            select_keyword("Are you what you are?", &LexiconTagger, None),
            Err(GuessError::NoKeyword)
        );
    }

    #[test]
    fn repeated_words_are_skipped() {
        let k = select_keyword("Is a dog a dog or a wolf?", &LexiconTagger, None).unwrap();
        assert_eq!(k.word, "wolf");
    }

    #[test]
    fn prompt_is_five_shot() {
        let p = keyword_prompt(Q);
        assert_eq!(p.matches("Word:").count(), 6);
        assert!(p.trim_end().ends_with("Word:"));
    }
}
