//! Ground-truth expert backends for synthetic scenes.
//!
//! Each oracle is a pure function of the scene spec and its inputs. Inputs
//! carry their placement in the canvas ([`ImageRef::region`]), which is how
//! the oracles relate crops back to ground truth.

use std::sync::Arc;

use super::scene::{tokens, SceneObject, SceneSpec};
use crate::experts::prompts::{format_object_list, parse_object_list};
use crate::experts::{
    Completion, ExpertBundle, ExpertError, ImageRef, LvlmClient, SearchExpert,
    VisualExpert,
};
use crate::imaging::{BBox, BitMask, GrayMap, Point};

/// Share of a target's mask that must be inside a region to count as fully
/// contained.
pub const CONTAINMENT: f64 = 0.99;
/// A target smaller than this share of an image is too small to read off it.
pub const MIN_RESOLVABLE: f64 = 0.001;

pub struct OracleExperts {
    spec: Arc<SceneSpec>,
}

impl OracleExperts {
    pub fn new(spec: SceneSpec) -> Self {
        Self {
            spec: Arc::new(spec),
        }
    }

    pub fn bundle(spec: SceneSpec) -> ExpertBundle {
        ExpertBundle::from_shared(Arc::new(Self::new(spec)))
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    fn matching<'a>(&'a self, query: &str) -> impl Iterator<Item = &'a SceneObject> {
        let q = tokens(query);
        self.spec
            .objects
            .iter()
            .filter(move |o| o.tokens().iter().any(|t| q.contains(t)))
    }

    /// Objects named in `text`, in order of first mention.
    fn named_in(&self, text: &str) -> Vec<&SceneObject> {
        let lower = text.to_lowercase();
        let mut found: Vec<(usize, &SceneObject)> = self
            .spec
            .objects
            .iter()
            .filter_map(|o| lower.find(&o.label.to_lowercase()).map(|i| (i, o)))
            .collect();
        found.sort_by_key(|(i, _)| *i);
        found.into_iter().map(|(_, o)| o).collect()
    }

    fn targets(&self) -> Vec<&SceneObject> {
        self.spec.target_objects()
    }
}

/// True when at least [`CONTAINMENT`] of the object's mask lies in `region`.
pub fn contained(o: &SceneObject, region: &BBox) -> bool {
    let total = o.mask_area();
    total > 0 && o.area_inside(region) as f64 >= CONTAINMENT * total as f64
}

impl SearchExpert for OracleExperts {
    /// Clipped Gaussian bump per matching object: σ is half the object's
    /// radius, support twice the radius, overlapping bumps take the max.
    fn search(&self, patch: ImageRef<'_>, question: &str) -> Result<GrayMap, ExpertError> {
        let r = patch.region;
        let whole = r == self.spec.canvas();
        let mut map = GrayMap::zeros(r.width(), r.height())?;
        for o in self.matching(question) {
            let gain = if whole { o.global_saliency } else { o.saliency };
            let radius = o.bbox.width().max(o.bbox.height()) as f64 / 2.0;
            let sigma = radius / 2.0;
            let support = 2.0 * radius;
            let cx = (o.bbox.x0 + o.bbox.x1) as f64 / 2.0;
            let cy = (o.bbox.y0 + o.bbox.y1) as f64 / 2.0;
            let reach = BBox::from_signed_clipped(
                (cx - support).floor() as i64,
                (cy - support).floor() as i64,
                (cx + support).ceil() as i64 + 1,
                (cy + support).ceil() as i64 + 1,
                &r,
            );
            let Some(reach) = reach else { continue };
            for y in reach.y0..reach.y1 {
                for x in reach.x0..reach.x1 {
                    let dx = x as f64 + 0.5 - cx;
                    let dy = y as f64 + 0.5 - cy;
                    let d2 = dx * dx + dy * dy;
                    if d2 > support * support {
                        continue;
                    }
                    let v = gain * (-d2 / (2.0 * sigma * sigma)).exp();
                    let (lx, ly) = (x - r.x0, y - r.y0);
                    if v > map.get(lx, ly) {
                        map.set(lx, ly, v);
                    }
                }
            }
        }
        Ok(map)
    }
}

impl VisualExpert for OracleExperts {
    /// Ground-truth mask of the object under the point, else empty.
    fn segment(&self, image: ImageRef<'_>, point: Point) -> Result<BitMask, ExpertError> {
        let r = image.region;
        let mut mask = BitMask::empty(r.width(), r.height())?;
        let (gx, gy) = (point.x + r.x0, point.y + r.y0);
        if let Some(o) = self.spec.object_at(gx, gy) {
            if let Some(inside) = o.bbox.intersect(&r) {
                for y in inside.y0..inside.y1 {
                    for x in inside.x0..inside.x1 {
                        if o.covers(x, y) {
                            mask.set(x - r.x0, y - r.y0, true);
                        }
                    }
                }
            }
        }
        Ok(mask)
    }

    /// Ground-truth boxes of matching objects, cut to the view.
    fn detect(&self, view: ImageRef<'_>, query: &str) -> Result<Vec<BBox>, ExpertError> {
        let r = view.region;
        Ok(self
            .matching(query)
            .filter_map(|o| o.bbox.intersect(&r))
            .map(|b| b.relative_to(&r))
            .collect())
    }
}

/// `(A) red` lines of a multiple-choice prompt, in order.
fn parse_options(prompt: &str) -> Vec<(char, String)> {
    prompt
        .lines()
        .filter_map(|line| {
            let line = line.trim();
            let rest = line.strip_prefix('(')?;
            let mut chars = rest.chars();
            let letter = chars.next()?;
            let rest = chars.as_str().strip_prefix(") ")?;
            letter.is_ascii_uppercase().then(|| (letter, rest.to_string()))
        })
        .collect()
}

impl OracleExperts {
    fn decompose(&self, prompt: &str) -> String {
        let question = prompt
            .split("Input text: ")
            .nth(1)
            .and_then(|s| s.lines().next())
            .unwrap_or(prompt);
        let labels: Vec<String> = self.named_in(question).iter().map(|o| o.label.clone()).collect();
        if labels.is_empty() {
            "I could not find any objects.".into()
        } else {
            format_object_list(&labels)
        }
    }

    /// Completeness check: every listed object fully inside the region.
    fn judge_complete(&self, prompt: &str, region: &BBox) -> String {
        // The template mentions a bbox in brackets later on, so cut the list
        // at its own closing bracket.
        let listed = prompt
            .split("in the list ")
            .nth(1)
            .and_then(|rest| rest.find(']').map(|end| &rest[..=end]))
            .and_then(parse_object_list)
            .unwrap_or_default();
        let mut named: Vec<&SceneObject> = listed.iter().flat_map(|t| self.named_in(t)).collect();
        if named.is_empty() {
            named = self.targets();
        }
        if named.iter().all(|o| contained(o, region)) {
            "Yes. Every listed object is entirely within the frame.".into()
        } else {
            "No. At least one listed object is missing or truncated.".into()
        }
    }

    /// Clue check: some target fully inside the region.
    fn judge_clues(&self, region: &BBox) -> String {
        if self.targets().iter().any(|o| contained(o, region)) {
            "Yes, the image contains the object the question asks about.".into()
        } else {
            "No, the image does not show the relevant object.".into()
        }
    }

    /// The right option is found by its text, so rotated options still get
    /// the right letter.
    fn answer(&self, request: &Completion<'_>) -> String {
        let options = parse_options(&request.prompt);
        let q = &self.spec.question;
        let truth_text = &q.options[(q.answer as u8 - b'A') as usize];
        let truth = options
            .iter()
            .find(|(_, t)| t == truth_text)
            .map_or(q.answer, |(l, _)| *l);
        let readable = |o: &SceneObject| {
            request.images.iter().any(|img| {
                let area = img.region.area() as f64;
                contained(o, &img.region) && o.mask_area() as f64 / area >= MIN_RESOLVABLE
            })
        };
        let letter = if self.targets().iter().all(|o| readable(o)) {
            truth
        } else {
            options
                .iter()
                .map(|(l, _)| *l)
                .find(|l| *l != truth)
                .unwrap_or(if truth == 'A' { 'B' } else { 'A' })
        };
        match options.iter().find(|(l, _)| *l == letter) {
            Some((l, text)) => format!("({l}) {text}"),
            None => format!("({letter})"),
        }
    }
}

impl LvlmClient for OracleExperts {
    fn complete(&self, request: &Completion<'_>) -> Result<String, ExpertError> {
        let p = &request.prompt;
        let region = request.images.first().map(|i| i.region);
        let text = if p.contains("List objects mentioned in text") {
            self.decompose(p)
        } else if p.contains("fully contain every object") {
            self.judge_complete(p, &region.ok_or_else(no_image)?)
        } else if p.contains("contains the clues for answering") {
            self.judge_clues(&region.ok_or_else(no_image)?)
        } else if p.contains("Answer with the option letter") {
            if request.images.is_empty() {
                return Err(no_image());
            }
            self.answer(request)
        } else {
            return Err(ExpertError::InvalidInput("oracle does not recognise the prompt".into()));
        };
        Ok(text)
    }
}

fn no_image() -> ExpertError {
    ExpertError::InvalidInput("prompt needs an image".into())
}

/// Answers every multiple-choice prompt with a fixed letter and denies
/// every judgment.
pub struct ConstantAnswerer(pub char);

impl LvlmClient for ConstantAnswerer {
    fn complete(&self, request: &Completion<'_>) -> Result<String, ExpertError> {
        if request.prompt.contains("Answer with the option letter") {
            Ok(self.0.to_string())
        } else {
            Ok("No.".into())
        }
    }
}
