//! Evidence-enhanced reasoning and the end-to-end pipeline.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::experts::prompts::extract_option_letter;
use crate::experts::{CallCounts, ExpertBundle, ExpertError, ExpertSession, ImageRef, Question};
use crate::imaging::{union_bbox, BBox, RasterImage};
use crate::refocusing::{refocus, RefocusTrace, View};
use crate::scanning::{hierarchical_scan, EvidenceItem, ScanTrace};

/// Fine-grained evidence crops followed by one coarse view.
pub struct HybridMemory {
    /// Evidence crops in discovery order, with their image boxes.
    pub fine: Vec<(RasterImage, BBox)>,
    pub coarse: (RasterImage, BBox),
    pub coarse_tag: String,
}

impl HybridMemory {
    /// Images in prompt order: fine crops, then the coarse view.
    pub fn images(&self) -> Vec<ImageRef<'_>> {
        self.fine
            .iter()
            .chain(std::iter::once(&self.coarse))
            .map(|(img, b)| ImageRef::at(img, *b))
            .collect()
    }

    pub fn provenance(&self) -> MemoryTrace {
        MemoryTrace {
            fine: self.fine.iter().map(|(_, b)| *b).collect(),
            coarse: self.coarse.1,
            coarse_tag: self.coarse_tag.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryTrace {
    pub fine: Vec<BBox>,
    pub coarse: BBox,
    pub coarse_tag: String,
}

/// Memory from affirmed evidence and the chosen view. With no evidence the
/// memory is just the full image.
pub fn build_memory(evidence: &[EvidenceItem], v_star: Option<&View>, image: &RasterImage) -> HybridMemory {
    let mut ordered: Vec<&EvidenceItem> = evidence.iter().collect();
    ordered.sort_by_key(|e| e.discovery);
    match v_star {
        Some(v) if !evidence.is_empty() => HybridMemory {
            fine: ordered.iter().map(|e| (e.crop.clone(), e.bbox)).collect(),
            coarse: (v.crop.clone(), v.bbox),
            coarse_tag: v.tag.clone(),
        },
        _ => HybridMemory {
            fine: Vec::new(),
            coarse: (image.clone(), image.bounds()),
            coarse_tag: "full_image".into(),
        },
    }
}

pub fn reason(session: &ExpertSession, memory: &HybridMemory, q: &Question) -> Result<String, ExpertError> {
    session.answer(&memory.images(), q)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub scan_ms: f64,
    pub refocus_ms: f64,
    pub reason_ms: f64,
}

/// Everything a run did. Field order is fixed, so the JSON rendering is
/// stable.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub question: String,
    pub options: Vec<String>,
    pub scan: ScanTrace,
    /// Absent when scanning found no evidence.
    pub refocus: Option<RefocusTrace>,
    pub fallback: bool,
    pub memory: Option<MemoryTrace>,
    /// Tight box around the affirmed evidence objects.
    pub grounding: Option<BBox>,
    /// Union of affirmed evidence boxes and the chosen view.
    pub context_region: Option<BBox>,
    pub answer: Option<String>,
    pub answer_letter: Option<char>,
    pub calls: CallCounts,
    pub timings: Option<StageTimings>,
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub answer: String,
    pub trace: RunTrace,
}

/// A failed run keeps the partial trace.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct RunFailure {
    pub error: ExpertError,
    pub trace: Box<RunTrace>,
}

/// Scan, refocus (when evidence exists), build memory, answer.
pub fn run_pipeline(
    image: &RasterImage,
    question: &Question,
    experts: &ExpertBundle,
    cfg: &PipelineConfig,
) -> Result<RunOutput, RunFailure> {
    let session = ExpertSession::new(experts.clone(), cfg.generation.clone());
    let mut trace = RunTrace {
        question: question.text.clone(),
        options: question.options.clone(),
        ..RunTrace::default()
    };
    let mut timings = StageTimings::default();
    let result = run_stages(image, question, &session, cfg, &mut trace, &mut timings);
    trace.calls = session.counts();
    if cfg.record_timings {
        trace.timings = Some(timings);
    }
    match result {
        Ok(answer) => Ok(RunOutput { answer, trace }),
        Err(error) => {
            trace.error = Some(error.to_string());
            Err(RunFailure {
                error,
                trace: Box::new(trace),
            })
        }
    }
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}

fn run_stages(
    image: &RasterImage,
    question: &Question,
    session: &ExpertSession,
    cfg: &PipelineConfig,
    trace: &mut RunTrace,
    timings: &mut StageTimings,
) -> Result<String, ExpertError> {
    let mut q = question.clone();
    let t = Instant::now();
    let scan = hierarchical_scan(session, image, &mut q, &cfg.scan, cfg.exec);
    timings.scan_ms = elapsed_ms(t);
    let scan = scan?;
    trace.scan = scan.trace.clone();
    let evidence = scan.evidence;

    let t = Instant::now();
    let v_star = if evidence.is_empty() {
        trace.fallback = true;
        None
    } else {
        let out = refocus(session, image, &q.text, &q.targets(), &evidence, &cfg.refocus)?;
        trace.refocus = Some(out.trace);
        Some(out.chosen)
    };
    timings.refocus_ms = elapsed_ms(t);

    if !evidence.is_empty() {
        let objects: Vec<BBox> = evidence.iter().map(|e| e.object_bbox).collect();
        trace.grounding = Some(union_bbox(&objects)?);
        let mut context: Vec<BBox> = evidence.iter().map(|e| e.bbox).collect();
        context.extend(v_star.as_ref().map(|v| v.bbox));
        trace.context_region = Some(union_bbox(&context)?);
    }

    let memory = build_memory(&evidence, v_star.as_ref(), image);
    trace.memory = Some(memory.provenance());
    let t = Instant::now();
    let answer = reason(session, &memory, &q);
    timings.reason_ms = elapsed_ms(t);
    let answer = answer?;
    trace.answer = Some(answer.clone());
    trace.answer_letter = extract_option_letter(&answer);
    Ok(answer)
}
