#![allow(dead_code)]

use std::path::PathBuf;

use leakprobe::bench::{load_benchmark, Schema};
use leakprobe::BenchmarkInstance;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn geo_instances() -> Vec<BenchmarkInstance> {
    load_benchmark(&fixture("benchmark.jsonl"), Schema::Multichoice, "geo")
        .unwrap()
        .instances
}

pub fn truthfulqa_instances() -> Vec<BenchmarkInstance> {
    load_benchmark(
        &fixture("truthfulqa.jsonl"),
        Schema::GenericQa,
        "truthfulqa",
    )
    .unwrap()
    .instances
}

/// Lowercased alphanumeric runs, written without the library tokenizer.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}
