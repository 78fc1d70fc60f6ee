use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::keyword::{select_keyword, KeywordSource};
use super::mask::{mask_question, mask_wrong_option, GuessMode, Hint, MaskedInstance};
use super::pos::PosTagger;
use super::prompt::{build_multichoice_prompt, build_question_prompt};
use super::score::{parse_guess, score_guess};
use crate::bench::BenchmarkInstance;
use crate::model::{make_mock, prompt_hash, MockData, MockKind, ModelClient, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessResult {
    pub instance_id: String,
    pub raw_reply: String,
    pub parsed_guess: String,
    pub exact_match: u8,
    pub rouge_l_f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipStage {
    /// The benchmark record itself could not be read.
    Load,
    Masking,
    Model,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedItem {
    pub instance_id: String,
    pub stage: SkipStage,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Entry {
    Guess(GuessResult),
    Skipped(SkippedItem),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub mode: GuessMode,
    pub hint: Hint,
    pub seed: u64,
    pub strict_em: bool,
    /// Parallel model calls; order-sensitive clients always run with 1.
    pub jobs: usize,
    /// Consecutive exhausted calls after which the model counts as unreachable.
    pub max_consecutive_failures: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            mode: GuessMode::QuestionBased,
            hint: Hint::None,
            seed: 0,
            strict_em: false,
            jobs: 1,
            max_consecutive_failures: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedItem {
    pub masked: MaskedInstance,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyword_source: Option<KeywordSource>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProtocolOutcome {
    /// One entry per input instance, in input order.
    pub entries: Vec<Entry>,
    pub aborted: Option<String>,
}

impl ProtocolOutcome {
    pub fn results(&self) -> impl Iterator<Item = &GuessResult> {
        self.entries.iter().filter_map(|e| match e {
            Entry::Guess(g) => Some(g),
            Entry::Skipped(_) => None,
        })
    }

    pub fn skipped(&self) -> impl Iterator<Item = &SkippedItem> {
        self.entries.iter().filter_map(|e| match e {
            Entry::Skipped(s) => Some(s),
            Entry::Guess(_) => None,
        })
    }

    /// Exact-match rate over scored results; `None` when nothing was scored.
    pub fn em_rate(&self) -> Option<f64> {
        let (n, hits) = self.results().fold((0usize, 0usize), |(n, h), g| {
            (n + 1, h + usize::from(g.exact_match))
        });
        (n > 0).then(|| hits as f64 / n as f64)
    }
}

/// Per-instance seed: the run seed mixed with the instance id, so reordering
/// or subsetting the input does not change any single draw.
pub fn instance_seed(seed: u64, instance_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(instance_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn prepare_one(
    inst: &BenchmarkInstance,
    cfg: &ProtocolConfig,
    tagger: &dyn PosTagger,
    keyword_llm: Option<&dyn ModelClient>,
) -> Result<PreparedItem, super::GuessError> {
    match cfg.mode {
        GuessMode::QuestionBased => {
            let choice = select_keyword(&inst.question, tagger, keyword_llm)?;
            let masked = MaskedInstance {
                instance_id: inst.instance_id.clone(),
                mode: cfg.mode,
                masked_text: mask_question(&inst.question, &choice.word)?,
                gold: choice.word,
                masked_option_index: None,
                hint: cfg.hint,
            };
            masked.validate(None)?;
            let prompt = build_question_prompt(&masked, &inst.metadata)?;
            Ok(PreparedItem {
                masked,
                prompt,
                keyword_source: Some(choice.source),
            })
        }
        GuessMode::QuestionMultichoice => {
            let masked = mask_wrong_option(inst, instance_seed(cfg.seed, &inst.instance_id))?;
            let prompt = build_multichoice_prompt(&masked);
            Ok(PreparedItem {
                masked,
                prompt,
                keyword_source: None,
            })
        }
    }
}

/// Masks every instance and builds its prompt. Failures become skip records.
pub fn prepare(
    instances: &[BenchmarkInstance],
    cfg: &ProtocolConfig,
    tagger: &dyn PosTagger,
    keyword_llm: Option<&dyn ModelClient>,
) -> Vec<Result<PreparedItem, SkippedItem>> {
    instances
        .iter()
        .map(|inst| {
            prepare_one(inst, cfg, tagger, keyword_llm).map_err(|e| SkippedItem {
                instance_id: inst.instance_id.clone(),
                stage: SkipStage::Masking,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// A client that answers every prepared prompt with its gold text.
pub fn memorized_client(prepared: &[Result<PreparedItem, SkippedItem>]) -> Box<dyn ModelClient> {
    let memory: BTreeMap<String, String> = prepared
        .iter()
        .flatten()
        .map(|p| (prompt_hash(&p.prompt), p.masked.gold.clone()))
        .collect();
    make_mock(
        MockKind::Memorized,
        &MockData {
            memory,
            ..MockData::default()
        },
    )
}

enum Step {
    Done(Entry),
    Abort(Entry, String),
}

fn ask(
    item: &PreparedItem,
    cfg: &ProtocolConfig,
    model: &dyn ModelClient,
) -> Result<GuessResult, ModelError> {
    let exchange = model.complete(&item.prompt)?;
    let parsed = parse_guess(&exchange.reply, cfg.mode);
    let (em, rouge) = score_guess(&parsed, &item.masked.gold, cfg.strict_em);
    Ok(GuessResult {
        instance_id: item.masked.instance_id.clone(),
        raw_reply: exchange.reply,
        parsed_guess: parsed,
        exact_match: em,
        rouge_l_f1: rouge,
    })
}

fn step(
    item: &Result<PreparedItem, SkippedItem>,
    cfg: &ProtocolConfig,
    model: &dyn ModelClient,
    consecutive: &AtomicUsize,
) -> Step {
    let item = match item {
        Ok(item) => item,
        Err(skip) => return Step::Done(Entry::Skipped(skip.clone())),
    };
    match ask(item, cfg, model) {
        Ok(g) => {
            consecutive.store(0, Ordering::SeqCst);
            Step::Done(Entry::Guess(g))
        }
        Err(e) => {
            let skipped = Entry::Skipped(SkippedItem {
                instance_id: item.masked.instance_id.clone(),
                stage: SkipStage::Model,
                reason: e.to_string(),
            });
            let fatal = !matches!(e, ModelError::Exhausted { .. })
                || consecutive.fetch_add(1, Ordering::SeqCst) + 1
                    >= cfg.max_consecutive_failures.max(1);
            if fatal {
                Step::Abort(skipped, format!("model unreachable: {e}"))
            } else {
                Step::Done(skipped)
            }
        }
    }
}

/// Sends the prepared prompts to `model` and scores the replies.
pub fn run_prepared(
    prepared: &[Result<PreparedItem, SkippedItem>],
    cfg: &ProtocolConfig,
    model: &dyn ModelClient,
) -> ProtocolOutcome {
    let jobs = if model.order_sensitive() {
        1
    } else {
        cfg.jobs.max(1)
    };
    let consecutive = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Entry>>> = Mutex::new(vec![None; prepared.len()]);
    let abort: Mutex<Option<String>> = Mutex::new(None);
    let stop = AtomicBool::new(false);
    let next = AtomicUsize::new(0);

    let work = || loop {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(item) = prepared.get(i) else { break };
        let entry = match step(item, cfg, model, &consecutive) {
            Step::Done(e) => e,
            Step::Abort(e, why) => {
                stop.store(true, Ordering::SeqCst);
                abort.lock().unwrap().get_or_insert(why);
                e
            }
        };
        slots.lock().unwrap()[i] = Some(entry);
    };

    if jobs == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..jobs {
                s.spawn(work);
            }
        });
    }

    let entries = slots
        .into_inner()
        .unwrap()
        .into_iter()
        .zip(prepared)
        .map(|(slot, item)| {
            slot.unwrap_or_else(|| {
                let instance_id = match item {
                    Ok(p) => p.masked.instance_id.clone(),
                    Err(s) => s.instance_id.clone(),
                };
                Entry::Skipped(SkippedItem {
                    instance_id,
                    stage: SkipStage::Model,
                    reason: "not attempted: run aborted".into(),
                })
            })
        })
        .collect();
    ProtocolOutcome {
        entries,
        aborted: abort.into_inner().unwrap(),
    }
}

/// Mask, prompt, ask, parse and score every instance.
pub fn run_protocol(
    instances: &[BenchmarkInstance],
    cfg: &ProtocolConfig,
    model: &dyn ModelClient,
    tagger: &dyn PosTagger,
    keyword_llm: Option<&dyn ModelClient>,
) -> ProtocolOutcome {
    run_prepared(&prepare(instances, cfg, tagger, keyword_llm), cfg, model)
}
