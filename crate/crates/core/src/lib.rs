//! Training-free visual grounding: find small evidence regions bottom-up,
//! pick the best view of them, and answer from both.

pub mod config;
pub mod experts;
pub mod harness;
pub mod imaging;
pub mod par;
pub mod reasoning;
pub mod refocusing;
pub mod scanning;
pub mod synth;

pub use config::{PipelineConfig, RefocusConfig, ScanConfig, TopK};
pub use experts::{ExpertBundle, ExpertError, ExpertSession, Question};
pub use imaging::{BBox, BitMask, GrayMap, Point, RasterImage};
pub use reasoning::{run_pipeline, RunFailure, RunOutput, RunTrace};
