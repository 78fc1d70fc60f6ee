//! A small lexicon and suffix tagger.
//!
//! Only the coarse classes matter here: whether a word can be a keyword
//! (noun, adjective, verb) or not. Anything heavier plugs in through
//! [`PosTagger`].

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosTag {
    Noun,
    Adjective,
    Verb,
    Function,
    Other,
}

impl PosTag {
    /// NN, JJ or VB class.
    pub fn is_content(self) -> bool {
        matches!(self, PosTag::Noun | PosTag::Adjective | PosTag::Verb)
    }
}

pub trait PosTagger: Send + Sync {
    /// One tag per word; `words` are surface forms in sentence order.
    fn tag(&self, words: &[&str]) -> Vec<PosTag>;
}

const FUNCTION_WORDS: &[&str] = &[
    "a",
    "about",
    "above",
    "across",
    "after",
    "again",
    "against",
    "all",
    "also",
    "always",
    "am",
    "among",
    "an",
    "and",
    "another",
    "any",
    "are",
    "around",
    "as",
    "at",
    "be",
    "been",
    "before",
    "being",
    "below",
    "between",
    "both",
    "but",
    "by",
    "can",
    "cannot",
    "could",
    "did",
    "do",
    "does",
    "doing",
    "done",
    "down",
    "during",
    "each",
    "either",
    "else",
    "ever",
    "every",
    "few",
    "for",
    "from",
    "had",
    "has",
    "have",
    "having",
    "he",
    "her",
    "here",
    "hers",
    "herself",
    "him",
    "himself",
    "his",
    "how",
    "i",
    "if",
    "in",
    "into",
    "is",
    "it",
    "its",
    "itself",
    "just",
    "least",
    "less",
    "may",
    "me",
    "might",
    "more",
    "most",
    "much",
    "must",
    "my",
    "myself",
    "neither",
    "never",
    "no",
    "nor",
    "not",
    "now",
    "of",
    "off",
    "often",
    "on",
    "once",
    "only",
    "or",
    "other",
    "our",
    "ours",
    "ourselves",
    "out",
    "over",
    "own",
    "same",
    "shall",
    "she",
    "should",
    "so",
    "some",
    "such",
    "than",
    "that",
    "the",
    "their",
    "theirs",
    "them",
    "themselves",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "through",
    "to",
    "too",
    "under",
    "until",
    "up",
    "upon",
    "us",
    "very",
    "was",
    "we",
    "were",
    "what",
    "when",
    "where",
    "whether",
    "which",
    "while",
    "who",
    "whom",
    "whose",
    "why",
    "will",
    "with",
    "within",
    "without",
    "would",
    "yes",
    "yet",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
    "s",
    "t",
    "d",
    "ll",
    "re",
    "ve",
    "m",
    "many",
    "still",
    "really",
    "since",
    "though",
    "although",
    "because",
    "unless",
    "whatever",
    "whoever",
    "whichever",
    "however",
    "anyone",
    "anything",
    "everyone",
    "everything",
    "someone",
    "something",
    "nobody",
    "nothing",
    "none",
];

const VERBS: &[&str] = &[
    "allow",
    "appear",
    "ask",
    "become",
    "begin",
    "believe",
    "break",
    "bring",
    "build",
    "buy",
    "call",
    "cause",
    "change",
    "choose",
    "come",
    "contain",
    "create",
    "exist",
    "explain",
    "follow",
    "include",
    "crack",
    "cut",
    "die",
    "discover",
    "draw",
    "drink",
    "drive",
    "eat",
    "fall",
    "feel",
    "find",
    "fly",
    "get",
    "give",
    "go",
    "grow",
    "happen",
    "hear",
    "help",
    "hold",
    "invent",
    "keep",
    "kill",
    "know",
    "lead",
    "learn",
    "leave",
    "let",
    "lie",
    "like",
    "live",
    "look",
    "lose",
    "make",
    "mean",
    "meet",
    "move",
    "need",
    "pay",
    "play",
    "prevent",
    "produce",
    "protect",
    "provide",
    "put",
    "reach",
    "read",
    "remain",
    "rise",
    "run",
    "say",
    "see",
    "seem",
    "sell",
    "send",
    "show",
    "sing",
    "sit",
    "sleep",
    "speak",
    "spend",
    "stand",
    "start",
    "stay",
    "swallow",
    "swim",
    "take",
    "teach",
    "tell",
    "think",
    "touch",
    "try",
    "turn",
    "understand",
    "use",
    "walk",
    "want",
    "wear",
    "win",
    "work",
    "write",
    // irregular past forms
    "ate",
    "became",
    "began",
    "bought",
    "brought",
    "built",
    "came",
    "chose",
    "drank",
    "drew",
    "drove",
    "fell",
    "felt",
    "flew",
    "found",
    "gave",
    "went",
    "gone",
    "got",
    "grew",
    "heard",
    "held",
    "kept",
    "knew",
    "led",
    "left",
    "lost",
    "made",
    "meant",
    "met",
    "paid",
    "ran",
    "rose",
    "said",
    "sang",
    "sat",
    "saw",
    "seen",
    "sent",
    "sold",
    "spent",
    "spoke",
    "stood",
    "swam",
    "taught",
    "thought",
    "told",
    "took",
    "understood",
    "won",
    "wore",
    "wrote",
    "written",
];

const ADJECTIVES: &[&str] = &[
    "bad",
    "best",
    "better",
    "big",
    "black",
    "blue",
    "brown",
    "cheap",
    "clean",
    "cold",
    "common",
    "dark",
    "dead",
    "deep",
    "difficult",
    "dry",
    "early",
    "easy",
    "empty",
    "fair",
    "false",
    "fast",
    "favorite",
    "favourite",
    "fine",
    "free",
    "full",
    "good",
    "great",
    "green",
    "happy",
    "hard",
    "healthy",
    "heavy",
    "high",
    "hot",
    "huge",
    "illegal",
    "important",
    "large",
    "late",
    "legal",
    "little",
    "long",
    "loud",
    "low",
    "main",
    "modern",
    "new",
    "nice",
    "old",
    "orange",
    "poor",
    "possible",
    "pretty",
    "purple",
    "quick",
    "quiet",
    "rare",
    "real",
    "red",
    "rich",
    "right",
    "round",
    "safe",
    "short",
    "sick",
    "slow",
    "small",
    "smart",
    "soft",
    "strong",
    "sure",
    "sweet",
    "tall",
    "true",
    "ugly",
    "warm",
    "weak",
    "wet",
    "white",
    "whole",
    "wide",
    "wild",
    "worst",
    "wrong",
    "yellow",
    "young",
];

const NOUNS: &[&str] = &[
    "animal",
    "capital",
    "chocolate",
    "climate",
    "festival",
    "hospital",
    "individual",
    "journal",
    "metal",
    "minute",
    "plate",
    "senate",
    "signal",
    "state",
    "water",
    "weather",
    "thing",
    "king",
    "ring",
    "spring",
    "morning",
    "evening",
    "building",
    "ceiling",
    "feeling",
    "painting",
    "wedding",
    "clothing",
    "pudding",
    "seed",
    "bed",
    "red",
    "need",
    "bread",
    "head",
];

const ADJ_SUFFIXES: &[&str] = &[
    "ous", "ful", "ive", "able", "ible", "ical", "ic", "less", "ish", "ial", "ese",
];
const VERB_SUFFIXES: &[&str] = &["ate", "ize", "ise", "ify", "ed", "ing"];
const NOUN_SUFFIXES: &[&str] = &[
    "tion", "sion", "ness", "ment", "ity", "ance", "ence", "ism", "ist", "ship", "hood", "dom",
    "er", "or", "ure", "age",
];

#[derive(Debug, Clone, Default)]
pub struct LexiconTagger;

fn inflection_stems(word: &str) -> Vec<String> {
    let mut stems = Vec::new();
    for (suffix, repl) in [
        ("ies", "y"),
        ("es", ""),
        ("s", ""),
        ("ied", "y"),
        ("ed", ""),
        ("ed", "e"),
        ("ing", ""),
        ("ing", "e"),
    ] {
        if let Some(stem) = word.strip_suffix(suffix) {
            if stem.len() >= 2 {
                stems.push(format!("{stem}{repl}"));
            }
        }
    }
    stems
}

impl LexiconTagger {
    fn lexical(&self, word: &str) -> PosTag {
        let lower = word.to_lowercase();
        let w = lower.as_str();
        if w.chars().all(|c| c.is_numeric()) {
            return PosTag::Other;
        }
        if FUNCTION_WORDS.contains(&w) {
            return PosTag::Function;
        }
        if NOUNS.contains(&w) {
            return PosTag::Noun;
        }
        if ADJECTIVES.contains(&w) {
            return PosTag::Adjective;
        }
        if VERBS.contains(&w) {
            return PosTag::Verb;
        }
        let stems = inflection_stems(w);
        if stems.iter().any(|s| NOUNS.contains(&s.as_str())) {
            return PosTag::Noun;
        }
        if stems.iter().any(|s| VERBS.contains(&s.as_str())) {
            return PosTag::Verb;
        }
        if w.chars().count() < 2 {
            return PosTag::Other;
        }
        if w.len() > 4 && w.ends_with("ly") {
            return PosTag::Other;
        }
        let ends = |list: &[&str]| list.iter().any(|s| w.len() > s.len() + 1 && w.ends_with(s));
        if ends(NOUN_SUFFIXES) {
            return PosTag::Noun;
        }
        if ends(ADJ_SUFFIXES) {
            return PosTag::Adjective;
        }
        if ends(VERB_SUFFIXES) {
            return PosTag::Verb;
        }
        PosTag::Noun
    }
}

impl PosTagger for LexiconTagger {
    fn tag(&self, words: &[&str]) -> Vec<PosTag> {
        let mut tags: Vec<PosTag> = words.iter().map(|w| self.lexical(w)).collect();
        // attributive nouns ("fortune cookies") modify the head noun that follows
        for i in 0..tags.len().saturating_sub(1) {
            if tags[i] == PosTag::Noun && tags[i + 1] == PosTag::Noun {
                tags[i] = PosTag::Adjective;
            }
        }
        tags
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(s: &str) -> Vec<PosTag> {
        let words: Vec<&str> = s.split_whitespace().collect();
        LexiconTagger.tag(&words)
    }

    #[test]
    fn fortune_cookie_question() {
        use PosTag::*;
        assert_eq!(
            tags("Where did fortune cookies originate"),
            [Function, Function, Adjective, Noun, Verb]
        );
    }

    #[test]
    fn classes() {
        use PosTag::*;
        assert_eq!(tags("happens"), [Verb]);
        assert_eq!(tags("dangerous"), [Adjective]);
        assert_eq!(tags("information"), [Noun]);
        assert_eq!(tags("quickly"), [Other]);
        assert_eq!(tags("1999"), [Other]);
        assert_eq!(tags("Are you"), [Function, Function]);
        assert_eq!(tags("the red car"), [Function, Adjective, Noun]);
    }
}
