//! Seeded synthetic scenes: small flat-coloured shapes on textured noise,
//! with a templated multiple-choice question and ground truth.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::imaging::{union_bbox, BBox, BitMask, RasterImage};

/// Named object colours; distinct hues so option text is unambiguous.
pub const PALETTE: [(&str, [u8; 3]); 8] = [
    ("red", [220, 40, 40]),
    ("green", [40, 180, 60]),
    ("blue", [40, 80, 220]),
    ("yellow", [230, 200, 30]),
    ("purple", [150, 60, 200]),
    ("orange", [240, 140, 20]),
    ("cyan", [30, 200, 210]),
    ("pink", [240, 110, 180]),
];

const NOUNS: [&str; 10] = [
    "kite", "coin", "badge", "lamp", "flag", "shell", "token", "button", "bell", "leaf",
];
const TARGET_ADJECTIVES: [&str; 3] = ["small", "tiny", "little"];
const DISTRACTOR_ADJECTIVES: [&str; 5] = ["large", "big", "giant", "huge", "wide"];

/// Minimum empty space between object boxes.
pub const OBJECT_GAP: u32 = 48;
/// Minimum distance from objects to the canvas edge.
pub const CANVAS_MARGIN: u32 = 32;
const PLACEMENT_TRIES: usize = 2000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scene parameters: {0}")]
    InvalidParams(String),
    #[error("could not place {what} after {tries} attempts")]
    Placement { what: String, tries: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Rect,
    /// Disk inscribed in a square box.
    Disk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Target,
    Distractor,
    Decoy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub label: String,
    pub shape: Shape,
    pub color: [u8; 3],
    pub color_name: String,
    pub bbox: BBox,
    pub role: Role,
    /// Peak of the oracle attention bump inside a patch.
    pub saliency: f64,
    /// Peak when the whole canvas is searched at once.
    pub global_saliency: f64,
}

impl SceneObject {
    /// Ground-truth mask membership, in canvas coordinates.
    pub fn covers(&self, x: u32, y: u32) -> bool {
        if !self.bbox.contains_point(x, y) {
            return false;
        }
        match self.shape {
            Shape::Rect => true,
            Shape::Disk => {
                // Doubled coordinates: pixel centres at 2x+1, box centre at x0+x1.
                let dx = (2 * x + 1) as i64 - (self.bbox.x0 + self.bbox.x1) as i64;
                let dy = (2 * y + 1) as i64 - (self.bbox.y0 + self.bbox.y1) as i64;
                let d = self.bbox.width() as i64;
                dx * dx + dy * dy <= d * d
            }
        }
    }

    pub fn mask_area(&self) -> u64 {
        let mut n = 0;
        for y in self.bbox.y0..self.bbox.y1 {
            for x in self.bbox.x0..self.bbox.x1 {
                n += self.covers(x, y) as u64;
            }
        }
        n
    }

    /// Mask pixels inside `region`.
    pub fn area_inside(&self, region: &BBox) -> u64 {
        let Some(r) = self.bbox.intersect(region) else {
            return 0;
        };
        let mut n = 0;
        for y in r.y0..r.y1 {
            for x in r.x0..r.x1 {
                n += self.covers(x, y) as u64;
            }
        }
        n
    }

    /// Full-canvas mask.
    pub fn mask(&self, width: u32, height: u32) -> BitMask {
        let mut m = BitMask::empty(width, height).expect("canvas has positive size");
        for y in self.bbox.y0..self.bbox.y1.min(height) {
            for x in self.bbox.x0..self.bbox.x1.min(width) {
                if self.covers(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    pub fn tokens(&self) -> Vec<String> {
        tokens(&self.label)
    }
}

/// Lower-case alphanumeric words.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    /// "What color is the {label}?"
    Attribute,
    /// "Is the {a} left or right of the {b}?"
    Spatial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneQuestion {
    pub text: String,
    pub options: Vec<String>,
    /// Correct option letter.
    pub answer: char,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub seed: u64,
    /// Base grey level and per-channel tint.
    pub base: u8,
    pub tint: [i8; 3],
    /// Per-pixel noise amplitude.
    pub amplitude: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub background: Background,
    pub objects: Vec<SceneObject>,
    pub kind: QuestionKind,
    pub question: SceneQuestion,
    /// Labels of the objects the question is about.
    pub targets: Vec<String>,
}

impl SceneSpec {
    pub fn canvas(&self) -> BBox {
        BBox {
            x0: 0,
            y0: 0,
            x1: self.width,
            y1: self.height,
        }
    }

    pub fn target_objects(&self) -> Vec<&SceneObject> {
        self.objects.iter().filter(|o| o.role == Role::Target).collect()
    }

    /// Box around every target: the grounding ground truth.
    pub fn gt_bbox(&self) -> BBox {
        let boxes: Vec<BBox> = self.target_objects().iter().map(|o| o.bbox).collect();
        union_bbox(&boxes).expect("scenes have at least one target")
    }

    pub fn object_at(&self, x: u32, y: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.covers(x, y))
    }
}

/// Adjacent look-alike competing with the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoyParams {
    /// Horizontal gap between decoy and target boxes.
    pub gap: u32,
    /// Decoy side relative to the target side.
    pub size_factor: f64,
    /// Decoy attention peak when the whole canvas is searched (target = 1).
    pub global_gain: f64,
}

impl Default for DecoyParams {
    fn default() -> Self {
        Self {
            gap: 6,
            size_factor: 1.6,
            global_gain: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub width: u32,
    pub height: u32,
    pub n_distractors: usize,
    /// Target box area over canvas area.
    pub target_area_ratio: f64,
    pub kind: QuestionKind,
    pub decoy: Option<DecoyParams>,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            width: 1024,
            height: 1024,
            n_distractors: 4,
            target_area_ratio: 0.0005,
            kind: QuestionKind::Attribute,
            decoy: None,
        }
    }
}

/// Side of the square target box for the given area ratio.
pub fn target_side(params: &SceneParams) -> u32 {
    let area = params.target_area_ratio * params.width as f64 * params.height as f64;
    (area.sqrt().round() as u32).max(4)
}

fn decoy_side(side: u32, decoy: &DecoyParams) -> u32 {
    ((side as f64 * decoy.size_factor).round() as u32).max(side)
}

fn gap_between(a: &BBox, b: &BBox) -> i64 {
    [
        b.x0 as i64 - a.x1 as i64,
        a.x0 as i64 - b.x1 as i64,
        b.y0 as i64 - a.y1 as i64,
        a.y0 as i64 - b.y1 as i64,
    ]
    .into_iter()
    .max()
    .expect("four entries")
}

fn random_box(rng: &mut ChaCha8Rng, side: u32, params: &SceneParams) -> Option<BBox> {
    let hi_x = params.width.checked_sub(CANVAS_MARGIN + side)?;
    let hi_y = params.height.checked_sub(CANVAS_MARGIN + side)?;
    if hi_x < CANVAS_MARGIN || hi_y < CANVAS_MARGIN {
        return None;
    }
    let x0 = rng.random_range(CANVAS_MARGIN..=hi_x);
    let y0 = rng.random_range(CANVAS_MARGIN..=hi_y);
    Some(BBox {
        x0,
        y0,
        x1: x0 + side,
        y1: y0 + side,
    })
}

fn place(
    rng: &mut ChaCha8Rng,
    side: u32,
    params: &SceneParams,
    placed: &[BBox],
    extra_ok: impl Fn(&BBox) -> bool,
    what: &str,
) -> Result<BBox, SynthError> {
    for _ in 0..PLACEMENT_TRIES {
        let Some(b) = random_box(rng, side, params) else {
            break;
        };
        if placed.iter().all(|p| gap_between(p, &b) >= OBJECT_GAP as i64) && extra_ok(&b) {
            return Ok(b);
        }
    }
    Err(SynthError::Placement {
        what: what.to_string(),
        tries: PLACEMENT_TRIES,
    })
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

fn random_color(rng: &mut ChaCha8Rng) -> (String, [u8; 3]) {
    let (name, rgb) = *pick(rng, &PALETTE);
    (name.to_string(), rgb)
}

fn random_shape(rng: &mut ChaCha8Rng) -> Shape {
    if rng.random_bool(0.5) {
        Shape::Disk
    } else {
        Shape::Rect
    }
}

/// Deterministic scene for `seed`.
pub fn generate_scene(seed: u64, params: &SceneParams) -> Result<(RasterImage, SceneSpec), SynthError> {
    if !(params.target_area_ratio > 0.0 && params.target_area_ratio <= 0.25) {
        return Err(SynthError::InvalidParams(format!(
            "target_area_ratio must lie in (0, 0.25], got {}",
            params.target_area_ratio
        )));
    }
    if params.width == 0 || params.height == 0 {
        return Err(SynthError::InvalidParams("canvas must be non-empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = target_side(params);
    let n_targets = match params.kind {
        QuestionKind::Attribute => 1,
        QuestionKind::Spatial => 2,
    };

    let mut nouns = NOUNS.to_vec();
    nouns.shuffle(&mut rng);
    let mut objects: Vec<SceneObject> = Vec::new();
    let mut placed: Vec<BBox> = Vec::new();

    for t in 0..n_targets {
        let noun = nouns[t];
        let adjective = TARGET_ADJECTIVES[t % TARGET_ADJECTIVES.len()];
        let bbox = match (t, placed.first()) {
            (1, Some(first)) => {
                // Horizontal separation keeps "left or right" unambiguous.
                let first = *first;
                place(&mut rng, side, params, &placed, |b| {
                    b.x0 >= first.x1 + OBJECT_GAP || b.x1 + OBJECT_GAP <= first.x0
                }, "second target")?
            }
            _ => {
                // Leave room for an adjacent decoy on either side.
                let room = params
                    .decoy
                    .as_ref()
                    .map_or(0, |d| d.gap + decoy_side(side, d) + OBJECT_GAP);
                place(&mut rng, side, params, &placed, |b| {
                    b.x0 >= CANVAS_MARGIN + room && b.x1 + room + CANVAS_MARGIN <= params.width
                }, "target")?
            }
        };
        let (color_name, color) = random_color(&mut rng);
        objects.push(SceneObject {
            label: format!("{adjective} {noun}"),
            shape: random_shape(&mut rng),
            color,
            color_name,
            bbox,
            role: Role::Target,
            saliency: 1.0,
            global_saliency: 1.0,
        });
        placed.push(bbox);
    }

    let mut used_adjectives: Vec<&str> = Vec::new();
    if let Some(decoy) = &params.decoy {
        let target = objects[0].bbox;
        let dside = decoy_side(side, decoy);
        let left = rng.random_bool(0.5);
        // Vertically centred on the target, with a little jitter.
        let jitter = rng.random_range(-3i64..=3);
        let cy2 = (target.y0 + target.y1) as i64 + 2 * jitter;
        let y0 = (cy2 - dside as i64) / 2;
        let x0 = if left {
            target.x0 as i64 - decoy.gap as i64 - dside as i64
        } else {
            target.x1 as i64 + decoy.gap as i64
        };
        let b = BBox::from_signed_clipped(x0, y0, x0 + dside as i64, y0 + dside as i64, &BBox {
            x0: 0,
            y0: 0,
            x1: params.width,
            y1: params.height,
        })
        .filter(|b| b.width() == dside && b.height() == dside)
        .filter(|b| placed[1..].iter().all(|p| gap_between(p, b) >= OBJECT_GAP as i64))
        .ok_or_else(|| SynthError::Placement {
            what: "decoy".into(),
            tries: 1,
        })?;
        let noun = objects[0].label.split(' ').next_back().unwrap_or("object").to_string();
        let adjective = DISTRACTOR_ADJECTIVES[0];
        used_adjectives.push(adjective);
        let (color_name, color) = random_color(&mut rng);
        objects.push(SceneObject {
            label: format!("{adjective} {noun}"),
            shape: random_shape(&mut rng),
            color,
            color_name,
            bbox: b,
            role: Role::Decoy,
            saliency: 1.0,
            global_saliency: decoy.global_gain,
        });
        placed.push(b);
    }

    for d in 0..params.n_distractors {
        // Every distractor shares a noun with some target, so it draws
        // attention from the query.
        let target_label = objects[d % n_targets].label.clone();
        let noun = target_label.split(' ').next_back().unwrap_or("object").to_string();
        let factor = rng.random_range(16u32..=24);
        let dside = (side * factor).div_ceil(10);
        let b = place(&mut rng, dside, params, &placed, |_| true, "distractor")?;
        let adjective = DISTRACTOR_ADJECTIVES[(d + used_adjectives.len()) % DISTRACTOR_ADJECTIVES.len()];
        let (color_name, color) = random_color(&mut rng);
        objects.push(SceneObject {
            label: format!("{adjective} {noun}"),
            shape: random_shape(&mut rng),
            color,
            color_name,
            bbox: b,
            role: Role::Distractor,
            saliency: 1.0,
            global_saliency: 1.0,
        });
        placed.push(b);
    }

    let targets: Vec<String> = objects[..n_targets].iter().map(|o| o.label.clone()).collect();
    let question = match params.kind {
        QuestionKind::Attribute => {
            let t = &objects[0];
            let mut names: Vec<&str> = PALETTE
                .iter()
                .map(|(n, _)| *n)
                .filter(|n| *n != t.color_name)
                .collect();
            names.shuffle(&mut rng);
            let mut options: Vec<String> = names[..3].iter().map(|s| s.to_string()).collect();
            let at = rng.random_range(0..=3usize);
            options.insert(at, t.color_name.clone());
            SceneQuestion {
                text: format!("What color is the {}?", t.label),
                options,
                answer: (b'A' + at as u8) as char,
            }
        }
        QuestionKind::Spatial => {
            let (a, b) = (&objects[0], &objects[1]);
            let a_left = a.bbox.x0 + a.bbox.x1 < b.bbox.x0 + b.bbox.x1;
            SceneQuestion {
                text: format!("Is the {} left or right of the {}?", a.label, b.label),
                options: vec!["left".into(), "right".into()],
                answer: if a_left { 'A' } else { 'B' },
            }
        }
    };

    let background = Background {
        seed: rng.random(),
        base: rng.random_range(90..=150),
        tint: [
            rng.random_range(-12..=12),
            rng.random_range(-12..=12),
            rng.random_range(-12..=12),
        ],
        amplitude: 24,
    };
    let spec = SceneSpec {
        seed,
        width: params.width,
        height: params.height,
        background,
        objects,
        kind: params.kind,
        question,
        targets,
    };
    Ok((render(&spec), spec))
}

/// Integer-only rendering of a spec.
pub fn render(spec: &SceneSpec) -> RasterImage {
    let bg = &spec.background;
    let mut rng = ChaCha8Rng::seed_from_u64(bg.seed);
    let amp = bg.amplitude as i32;
    let mut data = Vec::with_capacity(spec.width as usize * spec.height as usize * 3);
    for _ in 0..spec.width as usize * spec.height as usize {
        let n = rng.random_range(-amp..=amp);
        for c in 0..3 {
            let v = bg.base as i32 + bg.tint[c] as i32 + n;
            data.push(v.clamp(0, 255) as u8);
        }
    }
    let mut img = RasterImage::new(spec.width, spec.height, data).expect("buffer sized to canvas");
    for o in &spec.objects {
        for y in o.bbox.y0..o.bbox.y1.min(spec.height) {
            for x in o.bbox.x0..o.bbox.x1.min(spec.width) {
                if o.covers(x, y) {
                    img.set_pixel(x, y, o.color);
                }
            }
        }
    }
    img
}
