//! Published reference numbers, printed next to local results for context.
//! They come from proprietary models and are never used as test oracles.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceValue {
    pub model: &'static str,
    pub benchmark: &'static str,
    /// `None` for the multichoice table, else the hint setting.
    pub hint: Option<&'static str>,
    pub metric: &'static str,
    pub value: f64,
}

impl ReferenceValue {
    pub fn line(&self) -> String {
        match self.hint {
            None => format!(
                "{} {} {} {:.2} (paper)",
                self.model, self.benchmark, self.metric, self.value
            ),
            Some(h) => format!(
                "{} {} {} {} {:.2} (paper)",
                self.model, self.benchmark, h, self.metric, self.value
            ),
        }
    }
}

const HINTS: [&str; 4] = ["no-hint", "type-hint", "category-hint", "url-hint"];

const QUESTION_BASED: &[(&str, [f64; 4])] = &[
    ("LLaMa 2-7B", [0.01, 0.01, 0.00, 0.01]),
    ("LLaMa 2-13B", [0.02, 0.01, 0.01, 0.01]),
    ("Mistral-7B", [0.09, 0.06, 0.07, 0.11]),
    ("GPT-4", [0.17, 0.19, 0.15, 0.29]),
    ("ChatGPT", [0.16, 0.17, 0.19, 0.25]),
    ("Claude-2", [0.23, 0.25, 0.25, 0.37]),
    ("Claude-instant-1", [0.22, 0.23, 0.21, 0.42]),
];

const MC_MODELS: [&str; 4] = ["ChatGPT", "GPT-4", "LLaMa 2-13B", "Mistral-7B"];

// (EM, Rouge-L) per model, in MC_MODELS order
const MULTICHOICE: &[(&str, [(f64, f64); 4])] = &[
    (
        "PIQA",
        [(0.00, 0.18), (0.00, 0.17), (0.00, 0.06), (0.00, 0.15)],
    ),
    (
        "HellaSwag",
        [(0.00, 0.13), (0.02, 0.12), (0.00, 0.04), (0.00, 0.09)],
    ),
    (
        "OpenbookQA",
        [(0.01, 0.13), (0.01, 0.13), (0.04, 0.08), (0.10, 0.19)],
    ),
    (
        "WinoGrande",
        [(0.09, 0.10), (0.12, 0.13), (0.01, 0.01), (0.03, 0.01)],
    ),
    (
        "TruthfulQA",
        [(0.12, 0.46), (0.10, 0.43), (0.02, 0.14), (0.15, 0.61)],
    ),
    (
        "MMLU",
        [(0.52, 0.69), (0.57, 0.67), (0.00, 0.06), (0.01, 0.12)],
    ),
];

/// Question-based EM on TruthfulQA, one entry per model and hint setting.
pub fn question_based_reference() -> Vec<ReferenceValue> {
    QUESTION_BASED
        .iter()
        .flat_map(|(model, row)| {
            row.iter()
                .zip(HINTS)
                .map(move |(&value, hint)| ReferenceValue {
                    model,
                    benchmark: "TruthfulQA",
                    hint: Some(hint),
                    metric: "EM",
                    value,
                })
        })
        .collect()
}

/// Multichoice EM and Rouge-L per benchmark and model.
pub fn multichoice_reference() -> Vec<ReferenceValue> {
    let mut out = Vec::new();
    for (benchmark, row) in MULTICHOICE {
        for (model, &(em, rouge)) in MC_MODELS.iter().zip(row) {
            for (metric, value) in [("EM", em), ("Rouge-L", rouge)] {
                out.push(ReferenceValue {
                    model,
                    benchmark,
                    hint: None,
                    metric,
                    value,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines() {
        let mc: Vec<String> = multichoice_reference()
            .iter()
            .map(ReferenceValue::line)
            .collect();
        assert!(mc.contains(&"ChatGPT MMLU EM 0.52 (paper)".to_string()));
        assert!(mc.contains(&"GPT-4 MMLU EM 0.57 (paper)".to_string()));
        let qb: Vec<String> = question_based_reference()
            .iter()
            .map(ReferenceValue::line)
            .collect();
        assert!(qb.contains(&"Claude-instant-1 TruthfulQA url-hint EM 0.42 (paper)".to_string()));
        assert_eq!(qb.len(), 28);
        assert_eq!(mc.len(), 48);
    }
}
