use sha2::{Digest, Sha256};

use super::mask::{GuessMode, MaskedInstance};
use super::GuessError;
use crate::bench::Metadata;

pub const PROMPT_VERSION: &str = "1";
pub const QUESTION_TEMPLATE: &str = include_str!("../../prompts/question_guess.txt");
pub const MULTICHOICE_TEMPLATE: &str = include_str!("../../prompts/multichoice_guess.txt");

pub fn template(mode: GuessMode) -> &'static str {
    match mode {
        GuessMode::QuestionBased => QUESTION_TEMPLATE,
        GuessMode::QuestionMultichoice => MULTICHOICE_TEMPLATE,
    }
}

/// sha256 hex of the template used for `mode`.
pub fn template_hash(mode: GuessMode) -> String {
    hex::encode(Sha256::digest(template(mode).as_bytes()))
}

pub fn build_question_prompt(
    masked: &MaskedInstance,
    metadata: &Metadata,
) -> Result<String, GuessError> {
    let hint_line = match masked.hint.field() {
        None => None,
        Some(field) => {
            let value = metadata
                .field(field)
                .filter(|v| !v.trim().is_empty())
                .ok_or_else(|| GuessError::MissingHintField(field.to_string()))?;
            Some(format!("Hint — {field}: {}", value.trim()))
        }
    };
    let filled = QUESTION_TEMPLATE.replace("{masked}", masked.masked_text.trim());
    Ok(match hint_line {
        Some(line) => filled.replace("{hint}", &line),
        None => filled.replace("{hint}\n", ""),
    })
}

pub fn build_multichoice_prompt(masked: &MaskedInstance) -> String {
    MULTICHOICE_TEMPLATE.replace("{masked}", masked.masked_text.trim())
}
