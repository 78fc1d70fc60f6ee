use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GuessError;
use crate::bench::BenchmarkInstance;
use crate::index::{tokenize, word_spans};

pub const MASK: &str = "[MASK]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuessMode {
    QuestionBased,
    QuestionMultichoice,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hint {
    #[default]
    None,
    Type,
    Category,
    Url,
}

impl Hint {
    /// Metadata field the hint reads, if any.
    pub fn field(self) -> Option<&'static str> {
        match self {
            Hint::None => None,
            Hint::Type => Some("type"),
            Hint::Category => Some("category"),
            Hint::Url => Some("url"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedInstance {
    pub instance_id: String,
    pub mode: GuessMode,
    pub masked_text: String,
    pub gold: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masked_option_index: Option<usize>,
    #[serde(default)]
    pub hint: Hint,
}

/// True when the token sequence of `needle` occurs contiguously in `haystack`.
pub fn contains_words(haystack: &str, needle: &str) -> bool {
    let hay = tokenize(haystack);
    let pin = tokenize(needle);
    !pin.is_empty() && hay.windows(pin.len()).any(|w| w == pin.as_slice())
}

impl MaskedInstance {
    /// Checks the masking invariants. `correct_index` applies to multichoice.
    pub fn validate(&self, correct_index: Option<usize>) -> Result<(), GuessError> {
        let fail = |m: String| Err(GuessError::Invariant(format!("{}: {m}", self.instance_id)));
        let masks = self.masked_text.matches(MASK).count();
        if masks != 1 {
            return fail(format!("{masks} mask tokens"));
        }
        if self.gold.trim().is_empty() {
            return fail("empty gold".into());
        }
        if contains_words(&self.masked_text, &self.gold) {
            return fail("gold is visible in the masked text".into());
        }
        match (self.mode, self.masked_option_index, correct_index) {
            (GuessMode::QuestionMultichoice, None, _) => fail("no masked option index".into()),
            (GuessMode::QuestionMultichoice, Some(m), Some(c)) if m == c => {
                fail("correct option masked".into())
            }
            (GuessMode::QuestionBased, Some(_), _) => fail("option index in question mode".into()),
            _ => Ok(()),
        }
    }
}

/// Replaces the first whole-word, case-insensitive occurrence of `keyword`.
pub fn mask_question(question: &str, keyword: &str) -> Result<String, GuessError> {
    let key = keyword.trim().to_lowercase();
    let span = word_spans(question)
        .find(|r| question[r.clone()].to_lowercase() == key)
        .ok_or_else(|| GuessError::KeywordAbsent(keyword.to_string()))?;
    Ok(format!(
        "{}{MASK}{}",
        &question[..span.start],
        &question[span.end..]
    ))
}

pub fn option_label(i: usize) -> Result<char, GuessError> {
    u8::try_from(i)
        .ok()
        .filter(|&i| i < 26)
        .map(|i| char::from(b'A' + i))
        .ok_or(GuessError::TooManyOptions(i + 1))
}

/// Question followed by labelled options, one per line.
pub fn render_options(question: &str, options: &[&str]) -> Result<String, GuessError> {
    let mut out = question.trim().to_string();
    for (i, opt) in options.iter().enumerate() {
        out.push('\n');
        out.push(option_label(i)?);
        out.push_str(". ");
        out.push_str(opt.trim());
    }
    Ok(out)
}

/// Hides one wrong option, drawn uniformly with `rng_seed`.
pub fn mask_wrong_option(
    inst: &BenchmarkInstance,
    rng_seed: u64,
) -> Result<MaskedInstance, GuessError> {
    let wrong: Vec<usize> = (0..inst.options.len())
        .filter(|&i| i != inst.correct_index)
        .collect();
    if wrong.is_empty() || inst.correct_index >= inst.options.len() {
        return Err(GuessError::NoWrongOption(inst.instance_id.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let idx = wrong[rng.random_range(0..wrong.len())];
    let shown: Vec<&str> = inst
        .options
        .iter()
        .enumerate()
        .map(|(i, o)| if i == idx { MASK } else { o.as_str() })
        .collect();
    let masked = MaskedInstance {
        instance_id: inst.instance_id.clone(),
        mode: GuessMode::QuestionMultichoice,
        masked_text: render_options(&inst.question, &shown)?,
        gold: inst.options[idx].trim().to_string(),
        masked_option_index: Some(idx),
        hint: Hint::None,
    };
    masked.validate(Some(inst.correct_index))?;
    Ok(masked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(options: &[&str], correct: usize) -> BenchmarkInstance {
        BenchmarkInstance {
            instance_id: "t1".into(),
            benchmark: "mmlu".into(),
            question: "Who is most likely to be arrested?".into(),
            options: options.iter().map(|s| s.to_string()).collect(),
            correct_index: correct,
            metadata: Default::default(),
            split: "test".into(),
        }
    }

    #[test]
    fn masks_first_whole_word() {
        assert_eq!(
            mask_question("Where did fortune cookies originate?", "fortune").unwrap(),
            "Where did [MASK] cookies originate?"
        );
        assert_eq!(
            mask_question("Fortune favours the bold. fortune!", "FORTUNE").unwrap(),
            "[MASK] favours the bold. fortune!"
        );
        assert_eq!(
            mask_question("Where did fortune cookies originate?", "Where").unwrap(),
            "[MASK] did fortune cookies originate?"
        );
        assert!(mask_question("concatenate strings", "cat").is_err());
    }

    #[test]
    fn two_options_force_the_choice() {
        let i = inst(&["Police", "Drug traffickers"], 0);
        for seed in 0..50 {
            let m = mask_wrong_option(&i, seed).unwrap();
            assert_eq!(m.masked_option_index, Some(1));
            assert_eq!(m.gold, "Drug traffickers");
            assert_eq!(
                m.masked_text,
                "Who is most likely to be arrested?\nA. Police\nB. [MASK]"
            );
        }
    }

    #[test]
    fn seeded_and_never_correct() {
        let i = inst(&["w", "x", "right", "z"], 2);
        assert_eq!(mask_wrong_option(&i, 7), mask_wrong_option(&i, 7));
        let mut seen = [0usize; 4];
        for seed in 0..2000 {
            seen[mask_wrong_option(&i, seed)
                .unwrap()
                .masked_option_index
                .unwrap()] += 1;
        }
        assert_eq!(seen[2], 0);
        assert!(seen[0] > 500 && seen[1] > 500 && seen[3] > 500, "{seen:?}");
    }

    #[test]
    fn single_option_errors() {
        assert!(matches!(
            mask_wrong_option(&inst(&["only"], 0), 1),
            Err(GuessError::NoWrongOption(_))
        ));
    }

    #[test]
    fn duplicated_option_text_is_rejected() {
        let i = inst(&["Same", "Same"], 0);
        assert!(matches!(
            mask_wrong_option(&i, 0),
            Err(GuessError::Invariant(_))
        ));
    }
}
