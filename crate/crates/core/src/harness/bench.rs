//! Benchmark JSONL: one multiple-choice item per line.
//!
//! ```json
//! {"image_path": "scene_0001.png", "question": "What color is the small kite?",
//!  "options": ["red", "blue", "green", "pink"], "answer": "B",
//!  "gt_bbox": {"x0": 10, "y0": 20, "x1": 33, "y1": 43}, "subset": "attribute"}
//! ```
//!
//! `id`, `gt_bbox` and `subset` are optional. Relative image paths resolve
//! against the file's directory.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::experts::{option_letter, Question};
use crate::imaging::BBox;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Schema {
        path: String,
        line: usize,
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawItem {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    image_path: PathBuf,
    question: String,
    options: Vec<String>,
    answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt_bbox: Option<BBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subset: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchItem {
    pub id: Option<String>,
    pub image_path: PathBuf,
    pub question: String,
    pub options: Vec<String>,
    /// Index of the correct option.
    pub answer: usize,
    pub gt_bbox: Option<BBox>,
    pub subset: Option<String>,
}

impl BenchItem {
    pub fn answer_letter(&self) -> char {
        option_letter(self.answer)
    }

    pub fn to_question(&self) -> Question {
        Question {
            text: self.question.clone(),
            options: self.options.clone(),
            decomposed_targets: None,
        }
    }

    /// Options rotated left by `r`, with the answer index remapped.
    pub fn rotated(&self, r: usize) -> (Vec<String>, usize) {
        let n = self.options.len();
        let options = (0..n).map(|i| self.options[(i + r) % n].clone()).collect();
        (options, (self.answer + n - r % n) % n)
    }

    fn validate(raw: RawItem, base: &Path) -> Result<Self, String> {
        if raw.question.trim().is_empty() {
            return Err("question is empty".into());
        }
        if !(2..=4).contains(&raw.options.len()) {
            return Err(format!("expected 2 to 4 options, got {}", raw.options.len()));
        }
        let letter = raw.answer.trim();
        let answer = match letter.as_bytes() {
            [c] if c.is_ascii_uppercase() && ((c - b'A') as usize) < raw.options.len() => (c - b'A') as usize,
            _ => {
                return Err(format!(
                    "answer {letter:?} is not one of the {} option letters",
                    raw.options.len()
                ))
            }
        };
        let image_path = if raw.image_path.is_absolute() {
            raw.image_path
        } else {
            base.join(raw.image_path)
        };
        Ok(Self {
            id: raw.id,
            image_path,
            question: raw.question,
            options: raw.options,
            answer,
            gt_bbox: raw.gt_bbox,
            subset: raw.subset,
        })
    }
}

pub fn parse_bench(text: &str, base: &Path, path_label: &str) -> Result<Vec<BenchItem>, BenchError> {
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| BenchError::Schema {
            path: path_label.to_string(),
            line: i + 1,
            message,
        };
        let raw: RawItem = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
        items.push(BenchItem::validate(raw, base).map_err(schema)?);
    }
    Ok(items)
}

pub fn load_bench(path: &Path) -> Result<Vec<BenchItem>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_bench(&text, base, &path.display().to_string())
}

/// Write items as JSONL; image paths are written as given.
pub fn write_bench(path: &Path, items: &[BenchItem]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for it in items {
        let raw = RawItem {
            id: it.id.clone(),
            image_path: it.image_path.clone(),
            question: it.question.clone(),
            options: it.options.clone(),
            answer: it.answer_letter().to_string(),
            gt_bbox: it.gt_bbox,
            subset: it.subset.clone(),
        };
        serde_json::to_writer(&mut out, &raw)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str = r#"{"image_path": "a.png", "question": "q?", "options": ["x", "y", "z"], "answer": "C"}"#;

    #[test]
    fn parses_and_resolves_paths() {
        let items = parse_bench(&format!("{LINE}\n\n{LINE}\n"), Path::new("/data"), "b.jsonl").unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].image_path, PathBuf::from("/data/a.png"));
        assert_eq!(items[0].answer, 2);
        assert!(parse_bench("", Path::new("."), "e").unwrap().is_empty());
    }

    #[test]
    fn schema_errors_carry_line_numbers() {
        let missing = r#"{"image_path": "a.png", "question": "q?", "options": ["x", "y"]}"#;
        let err = parse_bench(&format!("{LINE}\n{missing}"), Path::new("."), "b.jsonl").unwrap_err();
        assert!(matches!(err, BenchError::Schema { line: 2, .. }), "{err}");
        let bad_letter = LINE.replace("\"C\"", "\"D\"");
        assert!(parse_bench(&bad_letter, Path::new("."), "b").is_err());
        let one_option = r#"{"image_path": "a.png", "question": "q?", "options": ["x"], "answer": "A"}"#;
        assert!(parse_bench(one_option, Path::new("."), "b").is_err());
        let extra = LINE.replace("}", ", \"extra\": 1}");
        assert!(parse_bench(&extra, Path::new("."), "b").is_err());
    }

    #[test]
    fn rotation_remaps_answer() {
        let item = &parse_bench(LINE, Path::new("."), "b").unwrap()[0];
        for r in 0..3 {
            let (opts, a) = item.rotated(r);
            assert_eq!(opts[a], "z");
        }
        assert_eq!(item.rotated(1).0, vec!["y", "z", "x"]);
    }
}
