use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::prompts::{self, JudgeVerdict};
use super::{
    Completion, ExpertBundle, ExpertError, GenerationSettings, ImageRef, Purpose, Question,
};
use crate::imaging::{BBox, BitMask, GrayMap, Point};

/// Per-operation call counts for one pipeline run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounts {
    pub search: u64,
    pub segment: u64,
    pub detect: u64,
    pub decompose: u64,
    pub judge: u64,
    pub answer: u64,
}

#[derive(Default)]
struct Counters {
    search: AtomicU64,
    segment: AtomicU64,
    detect: AtomicU64,
    decompose: AtomicU64,
    judge: AtomicU64,
    answer: AtomicU64,
}

/// The experts of one run, with output validation, prompt assembly and call
/// accounting. Cheap to create; share by reference across worker threads.
pub struct ExpertSession {
    experts: ExpertBundle,
    settings: GenerationSettings,
    counters: Counters,
}

impl ExpertSession {
    pub fn new(experts: ExpertBundle, settings: GenerationSettings) -> Self {
        Self {
            experts,
            settings,
            counters: Counters::default(),
        }
    }

    pub fn counts(&self) -> CallCounts {
        let c = &self.counters;
        CallCounts {
            search: c.search.load(Ordering::Relaxed),
            segment: c.segment.load(Ordering::Relaxed),
            detect: c.detect.load(Ordering::Relaxed),
            decompose: c.decompose.load(Ordering::Relaxed),
            judge: c.judge.load(Ordering::Relaxed),
            answer: c.answer.load(Ordering::Relaxed),
        }
    }

    pub fn settings(&self) -> &GenerationSettings {
        &self.settings
    }

    pub fn search(&self, patch: ImageRef<'_>, question: &str) -> Result<GrayMap, ExpertError> {
        self.counters.search.fetch_add(1, Ordering::Relaxed);
        let map = self.experts.search.search(patch, question)?;
        if (map.width(), map.height()) != (patch.image.width(), patch.image.height()) {
            return Err(ExpertError::Protocol(format!(
                "search map is {}x{}, patch is {}x{}",
                map.width(),
                map.height(),
                patch.image.width(),
                patch.image.height()
            )));
        }
        if map.data().iter().any(|v| *v < 0.0) {
            return Err(ExpertError::Protocol("search map has negative values".into()));
        }
        Ok(map)
    }

    pub fn segment(&self, image: ImageRef<'_>, point: Point) -> Result<BitMask, ExpertError> {
        if !image.image.bounds().contains_point(point.x, point.y) {
            return Err(ExpertError::InvalidInput(format!(
                "point ({}, {}) outside {}x{} image",
                point.x,
                point.y,
                image.image.width(),
                image.image.height()
            )));
        }
        self.counters.segment.fetch_add(1, Ordering::Relaxed);
        let mask = self.experts.visual.segment(image, point)?;
        if (mask.width(), mask.height()) != (image.image.width(), image.image.height()) {
            return Err(ExpertError::Protocol(format!(
                "segment mask is {}x{}, image is {}x{}",
                mask.width(),
                mask.height(),
                image.image.width(),
                image.image.height()
            )));
        }
        Ok(mask)
    }

    /// Detections clipped to the view; boxes entirely outside are dropped.
    pub fn detect(&self, view: ImageRef<'_>, query: &str) -> Result<Vec<BBox>, ExpertError> {
        self.counters.detect.fetch_add(1, Ordering::Relaxed);
        let bounds = view.image.bounds();
        Ok(self
            .experts
            .visual
            .detect(view, query)?
            .iter()
            .filter_map(|b| bounds.intersect(b))
            .collect())
    }

    /// Object list for the question; falls back to `[q.text]` when the reply
    /// has no parsable list.
    pub fn decompose(&self, q: &Question) -> Result<Vec<String>, ExpertError> {
        self.counters.decompose.fetch_add(1, Ordering::Relaxed);
        let req = Completion {
            images: Vec::new(),
            prompt: prompts::decomposition_prompt(&q.text),
            system: prompts::SYSTEM_PROMPT.to_string(),
            max_tokens: self.settings.short_max_tokens,
            temperature: self.settings.temperature,
            seed: self.settings.seed,
            purpose: Purpose::Decompose,
        };
        let reply = self.experts.lvlm.complete(&req)?;
        Ok(prompts::parse_object_list(&reply).unwrap_or_else(|| {
            log::debug!("decomposition reply not a list, using question text: {reply:?}");
            vec![q.text.clone()]
        }))
    }

    pub fn judge(&self, image: ImageRef<'_>, prompt: String) -> Result<JudgeVerdict, ExpertError> {
        self.counters.judge.fetch_add(1, Ordering::Relaxed);
        let req = Completion {
            images: vec![image],
            prompt,
            system: prompts::SYSTEM_PROMPT.to_string(),
            max_tokens: self.settings.short_max_tokens,
            temperature: self.settings.temperature,
            seed: self.settings.seed,
            purpose: Purpose::Judge,
        };
        let verdict = prompts::parse_verdict(&self.experts.lvlm.complete(&req)?);
        if verdict.malformed {
            log::debug!("judge reply has no yes/no verdict: {:?}", verdict.rationale);
        }
        Ok(verdict)
    }

    pub fn answer(&self, images: &[ImageRef<'_>], q: &Question) -> Result<String, ExpertError> {
        if images.is_empty() {
            return Err(ExpertError::InvalidInput("answer needs at least one image".into()));
        }
        if q.text.trim().is_empty() {
            return Err(ExpertError::InvalidInput("question text is empty".into()));
        }
        self.counters.answer.fetch_add(1, Ordering::Relaxed);
        let req = Completion {
            images: images.to_vec(),
            prompt: prompts::reasoning_prompt(&q.with_option_lines()),
            system: prompts::SYSTEM_PROMPT.to_string(),
            max_tokens: self.settings.answer_max_tokens,
            temperature: self.settings.temperature,
            seed: self.settings.seed,
            purpose: Purpose::Answer,
        };
        self.experts.lvlm.complete(&req)
    }
}
