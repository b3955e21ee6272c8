//! Refocusing: choose the evidence view to show the LVLM.
//!
//! Starting from the box enclosing all evidence (V1), a small lattice of
//! views is built with two moves: zoom-in (crop to the padded union of
//! detections) and zoom-out (scale about the center). Each view earns
//! `H·W / (h·w)` if the LVLM confirms it fully contains every target, else
//! zero. The pruned search visits V1, In(V1), Out(V1), In(Out(V1)).

use serde::{Deserialize, Serialize};

use crate::config::RefocusConfig;
use crate::experts::prompts::view_completeness_prompt;
use crate::experts::{ExpertError, ExpertSession, ImageRef};
use crate::imaging::{crop, pad_bbox, scale_bbox, scale_fits, union_bbox, BBox, RasterImage};
use crate::par::{self, ExecPolicy};
use crate::scanning::EvidenceItem;

/// The box a chain of zoom-outs started from, and their accumulated scale.
/// Re-scaling the origin box keeps chained zoom-outs free of compounding
/// rounding, so `Out(Out(V, a), b)` equals `Out(V, a·b)` when nothing clips.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub base: BBox,
    pub scale: f64,
}

#[derive(Clone, Debug)]
pub struct View {
    pub bbox: BBox,
    pub crop: RasterImage,
    /// `V1`..`V4` in the pruned search; a move path such as `Out(In(V1))` in
    /// the exhaustive one.
    pub tag: String,
    pub reward: f64,
    pub extent: Extent,
}

impl View {
    pub fn from_box(image: &RasterImage, bbox: BBox, tag: impl Into<String>) -> Result<Self, ExpertError> {
        Ok(Self {
            crop: crop(image, &bbox)?,
            bbox,
            tag: tag.into(),
            reward: 0.0,
            extent: Extent {
                base: bbox,
                scale: 1.0,
            },
        })
    }

    pub fn image_ref(&self) -> ImageRef<'_> {
        ImageRef::at(&self.crop, self.bbox)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewTrace {
    pub tag: String,
    pub bbox: BBox,
    pub affirmed: bool,
    pub malformed: bool,
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefocusTrace {
    pub views: Vec<ViewTrace>,
    pub chosen: String,
    /// 1-based position of the chosen view in evaluation order.
    pub search_length: usize,
}

pub struct RefocusOutcome {
    pub chosen: View,
    pub views: Vec<View>,
    pub trace: RefocusTrace,
}

/// V1: the box enclosing every evidence item.
pub fn init_view(evidence: &[EvidenceItem], image: &RasterImage) -> Result<View, ExpertError> {
    let boxes: Vec<BBox> = evidence.iter().map(|e| e.bbox).collect();
    let b = union_bbox(&boxes)
        .map_err(|_| ExpertError::InvalidInput("refocusing needs at least one evidence item".into()))?;
    View::from_box(image, b, "V1")
}

/// Crop to the padded union of detections inside the view. No detections
/// leaves the view as is.
pub fn zoom_in(
    session: &ExpertSession,
    image: &RasterImage,
    view: &View,
    query: &str,
    cfg: &RefocusConfig,
    tag: impl Into<String>,
) -> Result<View, ExpertError> {
    let tag = tag.into();
    let boxes = session.detect(view.image_ref(), query)?;
    if boxes.is_empty() {
        return Ok(View {
            tag,
            reward: 0.0,
            ..view.clone()
        });
    }
    let local_bounds = view.crop.bounds();
    let local = pad_bbox(&union_bbox(&boxes)?, cfg.detect_pad, &local_bounds)?;
    View::from_box(image, local.offset(view.bbox.x0, view.bbox.y0), tag)
}

/// Scale the view about its center by `s`, clipped to the image.
pub fn zoom_out(view: &View, s: f64, image: &RasterImage, tag: impl Into<String>) -> Result<View, ExpertError> {
    if !(s > 1.0) {
        return Err(ExpertError::InvalidInput(format!("zoom-out scale must exceed 1, got {s}")));
    }
    let bounds = image.bounds();
    let total = view.extent.scale * s;
    let from_base = scale_fits(&view.extent.base, total, &bounds)
        && scale_bbox(&view.extent.base, view.extent.scale, &bounds)? == view.bbox;
    let (bbox, extent) = if from_base {
        let b = scale_bbox(&view.extent.base, total, &bounds)?;
        (
            b,
            Extent {
                base: view.extent.base,
                scale: total,
            },
        )
    } else {
        let b = scale_bbox(&view.bbox, s, &bounds)?;
        let extent = if scale_fits(&view.bbox, s, &bounds) {
            Extent {
                base: view.bbox,
                scale: s,
            }
        } else {
            Extent { base: b, scale: 1.0 }
        };
        (b, extent)
    };
    Ok(View {
        extent,
        ..View::from_box(image, bbox, tag)?
    })
}

/// `H·W / (h·w)` if affirmed, else 0.
pub fn area_reward(affirmed: bool, view: &BBox, image: &RasterImage) -> f64 {
    if affirmed {
        image.bounds().area() as f64 / view.area() as f64
    } else {
        0.0
    }
}

fn score_views(
    session: &ExpertSession,
    image: &RasterImage,
    views: &mut [View],
    targets: &[String],
    concurrent: bool,
) -> Result<Vec<ViewTrace>, ExpertError> {
    let prompt = view_completeness_prompt(targets);
    let policy = if concurrent {
        ExecPolicy::Parallel
    } else {
        ExecPolicy::Sequential
    };
    let verdicts = par::try_map(policy, views, |v| session.judge(v.image_ref(), prompt.clone()))?;
    Ok(views
        .iter_mut()
        .zip(verdicts)
        .map(|(v, verdict)| {
            v.reward = area_reward(verdict.affirmed, &v.bbox, image);
            ViewTrace {
                tag: v.tag.clone(),
                bbox: v.bbox,
                affirmed: verdict.affirmed,
                malformed: verdict.malformed,
                reward: v.reward,
            }
        })
        .collect())
}

/// Index of the first maximum reward.
fn first_max(views: &[View]) -> usize {
    let mut best = 0;
    for (i, v) in views.iter().enumerate() {
        if v.reward > views[best].reward {
            best = i;
        }
    }
    best
}

fn finish(mut views: Vec<View>, traces: Vec<ViewTrace>) -> RefocusOutcome {
    let best = first_max(&views);
    let chosen = views[best].clone();
    let trace = RefocusTrace {
        views: traces,
        chosen: chosen.tag.clone(),
        search_length: best + 1,
    };
    views.shrink_to_fit();
    RefocusOutcome {
        chosen,
        views,
        trace,
    }
}

/// The pruned four-view search. Ties resolve to the earliest view; all-zero
/// rewards return V1.
pub fn refocus(
    session: &ExpertSession,
    image: &RasterImage,
    query: &str,
    targets: &[String],
    evidence: &[EvidenceItem],
    cfg: &RefocusConfig,
) -> Result<RefocusOutcome, ExpertError> {
    let v1 = init_view(evidence, image)?;
    let v2 = zoom_in(session, image, &v1, query, cfg, "V2")?;
    let v3 = zoom_out(&v1, cfg.scale_s, image, "V3")?;
    let v4 = zoom_in(session, image, &v3, query, cfg, "V4")?;
    let mut views = vec![v1, v2, v3, v4];
    let traces = score_views(session, image, &mut views, targets, cfg.concurrent_judges)?;
    Ok(finish(views, traces))
}

/// Every state reachable in at most two moves, breadth-first:
/// V1, In(V1), Out(V1), In(In(V1)), Out(In(V1)), In(Out(V1)), Out(Out(V1)).
pub fn exhaustive_depth2(
    session: &ExpertSession,
    image: &RasterImage,
    query: &str,
    targets: &[String],
    evidence: &[EvidenceItem],
    cfg: &RefocusConfig,
) -> Result<RefocusOutcome, ExpertError> {
    let s = cfg.scale_s;
    let v1 = init_view(evidence, image)?;
    let i1 = zoom_in(session, image, &v1, query, cfg, "In(V1)")?;
    let o1 = zoom_out(&v1, s, image, "Out(V1)")?;
    let ii = zoom_in(session, image, &i1, query, cfg, "In(In(V1))")?;
    let oi = zoom_out(&i1, s, image, "Out(In(V1))")?;
    let io = zoom_in(session, image, &o1, query, cfg, "In(Out(V1))")?;
    let oo = zoom_out(&o1, s, image, "Out(Out(V1))")?;
    let mut views = vec![v1, i1, o1, ii, oi, io, oo];
    let traces = score_views(session, image, &mut views, targets, cfg.concurrent_judges)?;
    Ok(finish(views, traces))
}
