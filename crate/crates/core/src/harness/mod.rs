//! Benchmark loading, evaluation and reporting.

pub mod bench;
pub mod dataset;
pub mod eval;
pub mod overlay;
pub mod source;

pub use bench::{load_bench, parse_bench, write_bench, BenchError, BenchItem};
pub use dataset::{write_synth_set, DatasetError, BENCH_FILE};
pub use eval::{evaluate, summarize, EvalMode, EvalOptions, EvalReport, ItemResult, ItemRunner, PipelineRunner};
pub use overlay::render_overlay;
pub use source::{load_spec, ExpertsSource, ExpertsSpec, EXPERT_URL_ENV};
