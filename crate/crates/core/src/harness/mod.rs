//! Configuration, seeded study runners and CSV output.

pub mod bench;
pub mod config;
pub mod studies;

pub use bench::{run_tpsa_bench, BenchConfig, BenchRow, Scheme};
pub use config::{derive_seeds, streams, CompareConfig, EvaluateConfig, ExperimentConfig, NnConfig, PolicyKind};
pub use studies::{compare, evaluate, load_agent, summarize, tpsa_bench, train, CompareRow};
