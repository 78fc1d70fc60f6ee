//! Testset slot guessing: hide a keyword or a wrong option, ask a model to
//! fill the gap, and score the reply against the hidden text.

mod keyword;
mod mask;
mod pos;
mod prompt;
mod protocol;
mod score;

pub use keyword::{keyword_prompt, select_keyword, KeywordChoice, KeywordSource, KEYWORD_TEMPLATE};
pub use mask::{
    contains_words, mask_question, mask_wrong_option, option_label, render_options, GuessMode,
    Hint, MaskedInstance, MASK,
};
pub use pos::{LexiconTagger, PosTag, PosTagger};
pub use prompt::{
    build_multichoice_prompt, build_question_prompt, template, template_hash, MULTICHOICE_TEMPLATE,
    PROMPT_VERSION, QUESTION_TEMPLATE,
};
pub use protocol::{
    instance_seed, memorized_client, prepare, run_prepared, run_protocol, Entry, GuessResult,
    PreparedItem, ProtocolConfig, ProtocolOutcome, SkipStage, SkippedItem,
};
pub use score::{normalize, parse_guess, score_guess};

use crate::model::ModelError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GuessError {
    #[error("no maskable keyword")]
    NoKeyword,
    #[error("keyword {0:?} does not occur as a whole word")]
    KeywordAbsent(String),
    #[error("instance {0}: no wrong option to mask")]
    NoWrongOption(String),
    #[error("{0} options exceed the A-Z labels")]
    TooManyOptions(usize),
    #[error("hint field {0:?} missing from metadata")]
    MissingHintField(String),
    #[error("masking invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
