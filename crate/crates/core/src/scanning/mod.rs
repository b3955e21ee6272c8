//! Hierarchical scanning: bottom-up localization of fine-grained evidence.
//!
//! The image is tiled into patches; each patch's attention map is thresholded
//! into cues, and each cue contributes one interior proxy point. Proxies are
//! segmented greedily in score order over a visited mask, de-duplicated by
//! IoU, and the smallest candidates are judged by the LVLM.

use serde::{Deserialize, Serialize};

use crate::config::{ScanConfig, ScanParadigm};
use crate::experts::prompts::evidence_judgment_prompt;
use crate::experts::{ExpertError, ExpertSession, ImageRef, Question};
use crate::imaging::{BBox, Point, RasterImage};
use crate::par::{self, ExecPolicy};

mod cues;
mod extract;

pub use cues::{cues_from_map, partition, partition_boxes, CueStats};
pub use extract::{
    extract_evidence, grow_mask, order_proxies, take_k_smallest, Extraction, ExtractionStep,
};

/// A tile of the input image.
#[derive(Clone, Debug)]
pub struct Patch {
    pub pixels: RasterImage,
    /// Placement in image coordinates.
    pub bounds: BBox,
}

impl Patch {
    pub fn offset(&self) -> (u32, u32) {
        (self.bounds.x0, self.bounds.y0)
    }
}

/// A cue's representative point, in image coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proxy {
    pub point: Point,
    pub score: f64,
    pub source_patch: usize,
}

/// A candidate evidence region.
#[derive(Clone, Debug)]
pub struct EvidenceItem {
    /// Box of the grown mask; the crop covers exactly this box.
    pub bbox: BBox,
    /// Tight box of the raw segmentation mask.
    pub object_bbox: BBox,
    /// Pixels of the original (unmasked) image under `bbox`.
    pub crop: RasterImage,
    /// Set pixels in the raw segmentation mask.
    pub mask_area: u64,
    pub affirmed: bool,
    /// Position in extraction order.
    pub discovery: usize,
    pub proxy: Proxy,
}

impl EvidenceItem {
    pub fn image_ref(&self) -> ImageRef<'_> {
        ImageRef::at(&self.crop, self.bbox)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchTrace {
    pub bbox: BBox,
    #[serde(flatten)]
    pub stats: CueStats,
    pub proxies: Vec<Proxy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateTrace {
    pub discovery: usize,
    pub bbox: BBox,
    pub object_bbox: BBox,
    pub mask_area: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgeTrace {
    pub discovery: usize,
    pub affirmed: bool,
    pub malformed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanTrace {
    pub targets: Vec<String>,
    pub patch_size: u32,
    pub patches: Vec<PatchTrace>,
    pub extraction: Vec<ExtractionStep>,
    pub candidates: Vec<CandidateTrace>,
    pub judgments: Vec<JudgeTrace>,
}

pub struct ScanOutcome {
    /// Affirmed evidence in judged order.
    pub evidence: Vec<EvidenceItem>,
    /// Every extracted candidate, discovery order.
    pub candidates: Vec<EvidenceItem>,
    pub trace: ScanTrace,
}

/// Decompose the question (caching the targets on it) and pick the tile size.
pub fn select_patch_size(
    session: &ExpertSession,
    q: &mut Question,
    cfg: &ScanConfig,
) -> Result<u32, ExpertError> {
    let targets = match &q.decomposed_targets {
        Some(t) => t.clone(),
        None => {
            let t = session.decompose(q)?;
            q.decomposed_targets = Some(t.clone());
            t
        }
    };
    Ok(if targets.len() == 1 {
        cfg.patch_single
    } else {
        cfg.patch_multi
    })
}

/// Attention, Otsu split, and one proxy per large-enough cue.
pub fn explore_cues(
    session: &ExpertSession,
    patch: &Patch,
    patch_index: usize,
    q: &Question,
    cfg: &ScanConfig,
) -> Result<(Vec<Proxy>, CueStats), ExpertError> {
    let map = session.search(ImageRef::at(&patch.pixels, patch.bounds), &q.text)?;
    Ok(cues_from_map(&map, patch.offset(), patch_index, cfg)?)
}

/// The full scan. `q` gets its decomposed targets filled in.
pub fn hierarchical_scan(
    session: &ExpertSession,
    image: &RasterImage,
    q: &mut Question,
    cfg: &ScanConfig,
    exec: ExecPolicy,
) -> Result<ScanOutcome, ExpertError> {
    let patch_size = select_patch_size(session, q, cfg)?;
    let patches = match cfg.paradigm {
        ScanParadigm::Hierarchical => partition(image, patch_size, cfg.min_tile),
        ScanParadigm::OneShot => vec![Patch {
            pixels: image.clone(),
            bounds: image.bounds(),
        }],
    };
    let q_ref: &Question = q;
    let indexed: Vec<(usize, &Patch)> = patches.iter().enumerate().collect();
    let explored = par::try_map(exec, &indexed, |&(i, p)| explore_cues(session, p, i, q_ref, cfg))?;

    let mut trace = ScanTrace {
        targets: q.targets(),
        patch_size,
        ..ScanTrace::default()
    };
    let mut proxies = Vec::new();
    for (patch, (found, stats)) in patches.iter().zip(explored) {
        trace.patches.push(PatchTrace {
            bbox: patch.bounds,
            stats,
            proxies: found.clone(),
        });
        proxies.extend(found);
    }

    let Extraction {
        candidates, steps, ..
    } = extract_evidence(session, image, proxies, cfg)?;
    trace.extraction = steps;
    trace.candidates = candidates
        .iter()
        .map(|c| CandidateTrace {
            discovery: c.discovery,
            bbox: c.bbox,
            object_bbox: c.object_bbox,
            mask_area: c.mask_area,
        })
        .collect();

    let shortlisted = take_k_smallest(candidates.clone(), cfg.k);
    let prompt = evidence_judgment_prompt(&q.text);
    let policy = if cfg.concurrent_judges {
        ExecPolicy::Parallel
    } else {
        ExecPolicy::Sequential
    };
    let verdicts = par::try_map(policy, &shortlisted, |c| {
        session.judge(c.image_ref(), prompt.clone())
    })?;

    let mut evidence = Vec::new();
    for (mut item, verdict) in shortlisted.into_iter().zip(verdicts) {
        trace.judgments.push(JudgeTrace {
            discovery: item.discovery,
            affirmed: verdict.affirmed,
            malformed: verdict.malformed,
        });
        if verdict.affirmed {
            item.affirmed = true;
            evidence.push(item);
        }
    }
    Ok(ScanOutcome {
        evidence,
        candidates,
        trace,
    })
}
