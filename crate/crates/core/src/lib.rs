//! Contamination probes for LLM evaluation benchmarks.
//!
//! Two complementary checks:
//!
//! * **Overlap retrieval**: index a corpus with BM25, query it with benchmark
//!   instances and score the retrieved text in 13-token windows
//!   ([`overlap::detect`]).
//! * **Testset slot guessing**: hide a keyword or a wrong option in each
//!   instance and see whether a model reproduces it exactly
//!   ([`guessing::run_protocol`]).

pub mod bench;
pub mod cli;
pub mod corpus;
pub mod guessing;
pub mod index;
pub mod model;
pub mod overlap;
pub mod report;

pub use bench::{BenchmarkInstance, FilterDecision};
pub use corpus::Document;
pub use index::{Index, RetrievalHit};
pub use overlap::OverlapReport;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
