//! Expert interfaces: the seam between the algorithmic core and the models.
//!
//! Three roles are pluggable:
//!
//! - a *search expert* producing a question-conditioned attention map for a patch,
//! - a *visual expert* offering point-prompt segmentation and text-conditioned detection,
//! - an *LVLM* completing text prompts over one or more images.
//!
//! Every call carries an [`ImageRef`]: the pixels plus the region of the
//! source image they were cut from. Remote backends only transmit the pixels;
//! ground-truth oracles use the region to relate crops back to the scene.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::imaging::{BBox, BitMask, GrayMap, ImagingError, Point, RasterImage};

pub mod conformance;
pub mod prompts;
pub mod remote;
pub mod replay;
mod session;
#[cfg(feature = "stub-server")]
pub mod stub;
pub mod wire;

pub use prompts::JudgeVerdict;
pub use session::{CallCounts, ExpertSession};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExpertError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("backend rejected request ({status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no recorded response for {endpoint} request {key}")]
    MissingFixture { endpoint: String, key: String },
}

impl From<ImagingError> for ExpertError {
    fn from(e: ImagingError) -> Self {
        ExpertError::Protocol(e.to_string())
    }
}

/// Pixels plus their placement in the source image.
#[derive(Clone, Copy, Debug)]
pub struct ImageRef<'a> {
    pub image: &'a RasterImage,
    /// Region of the source image the pixels cover; same size as `image`.
    pub region: BBox,
}

impl<'a> ImageRef<'a> {
    /// An image standing for itself (region = its own bounds).
    pub fn whole(image: &'a RasterImage) -> Self {
        Self {
            image,
            region: image.bounds(),
        }
    }

    pub fn at(image: &'a RasterImage, region: BBox) -> Self {
        debug_assert_eq!(
            (image.width(), image.height()),
            (region.width(), region.height())
        );
        Self { image, region }
    }
}

/// What an LVLM call is for. Not part of the wire format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Decompose,
    Judge,
    Answer,
}

#[derive(Clone, Debug)]
pub struct Completion<'a> {
    pub images: Vec<ImageRef<'a>>,
    pub prompt: String,
    pub system: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub seed: u64,
    pub purpose: Purpose,
}

pub trait SearchExpert: Send + Sync {
    /// Attention map over the patch, same height and width as the patch.
    fn search(&self, patch: ImageRef<'_>, question: &str) -> Result<GrayMap, ExpertError>;
}

pub trait VisualExpert: Send + Sync {
    /// Mask of the object under `point` (image coordinates of `image.image`).
    fn segment(&self, image: ImageRef<'_>, point: Point) -> Result<BitMask, ExpertError>;

    /// Boxes in the view's local coordinates.
    fn detect(&self, view: ImageRef<'_>, query: &str) -> Result<Vec<BBox>, ExpertError>;
}

pub trait LvlmClient: Send + Sync {
    fn complete(&self, request: &Completion<'_>) -> Result<String, ExpertError>;
}

/// The three experts one pipeline run talks to.
#[derive(Clone)]
pub struct ExpertBundle {
    pub search: Arc<dyn SearchExpert>,
    pub visual: Arc<dyn VisualExpert>,
    pub lvlm: Arc<dyn LvlmClient>,
}

impl ExpertBundle {
    pub fn new(
        search: Arc<dyn SearchExpert>,
        visual: Arc<dyn VisualExpert>,
        lvlm: Arc<dyn LvlmClient>,
    ) -> Self {
        Self {
            search,
            visual,
            lvlm,
        }
    }

    /// One backend object serving all three roles.
    pub fn from_shared<T>(backend: Arc<T>) -> Self
    where
        T: SearchExpert + VisualExpert + LvlmClient + 'static,
    {
        Self {
            search: backend.clone(),
            visual: backend.clone(),
            lvlm: backend,
        }
    }

    /// Replace the LVLM, keeping the other experts.
    pub fn with_lvlm(mut self, lvlm: Arc<dyn LvlmClient>) -> Self {
        self.lvlm = lvlm;
        self
    }
}

/// Decoding settings for LVLM calls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSettings {
    pub temperature: f64,
    pub seed: u64,
    /// Budget for decomposition and yes/no judgments.
    pub short_max_tokens: u32,
    /// Budget for the final answer.
    pub answer_max_tokens: u32,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            seed: 13,
            short_max_tokens: 50,
            answer_max_tokens: 1024,
        }
    }
}

/// A question with optional multiple-choice options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    /// Object list from decomposition, once computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposed_targets: Option<Vec<String>>,
}

impl Question {
    pub fn new(text: impl Into<String>) -> Result<Self, ExpertError> {
        Self::with_options(text, Vec::new())
    }

    pub fn with_options(text: impl Into<String>, options: Vec<String>) -> Result<Self, ExpertError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ExpertError::InvalidInput("question text is empty".into()));
        }
        if options.len() > 4 {
            return Err(ExpertError::InvalidInput(format!(
                "at most 4 options are supported, got {}",
                options.len()
            )));
        }
        Ok(Self {
            text,
            options,
            decomposed_targets: None,
        })
    }

    /// Question text followed by lettered options, one per line.
    pub fn with_option_lines(&self) -> String {
        let mut out = self.text.clone();
        for (i, opt) in self.options.iter().enumerate() {
            out.push_str(&format!("\n({}) {}", option_letter(i), opt));
        }
        out
    }

    /// Targets for completeness checks: decomposed objects, or the raw text.
    pub fn targets(&self) -> Vec<String> {
        match &self.decomposed_targets {
            Some(t) if !t.is_empty() => t.clone(),
            _ => vec![self.text.clone()],
        }
    }
}

pub fn option_letter(index: usize) -> char {
    (b'A' + index as u8) as char
}
