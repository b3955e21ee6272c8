//! Synthetic benchmark sets on disk: `scene_NNNN.png`, `scene_NNNN.json`
//! (the [`SceneSpec`]) and a `bench.jsonl` indexing them.

use std::path::{Path, PathBuf};

use super::bench::{write_bench, BenchItem};
use crate::imaging::io::write_png;
use crate::par::{self, ExecPolicy};
use crate::synth::{generate_scene, QuestionKind, SceneParams, SynthError};

pub const BENCH_FILE: &str = "bench.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> DatasetError {
    DatasetError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Scene `i` uses seed `seed + i`.
pub fn write_synth_set(dir: &Path, seed: u64, count: usize, params: &SceneParams) -> Result<Vec<BenchItem>, DatasetError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let idx: Vec<usize> = (0..count).collect();
    let items = par::try_map(ExecPolicy::Parallel, &idx, |&i| {
        let (image, spec) = generate_scene(seed.wrapping_add(i as u64), params)?;
        let stem = format!("scene_{i:04}");
        let png = dir.join(format!("{stem}.png"));
        write_png(&image, &png).map_err(|e| io_err(&png, e))?;
        let json = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(&spec).expect("specs serialize");
        std::fs::write(&json, text).map_err(|e| io_err(&json, e))?;
        let subset = match spec.kind {
            QuestionKind::Attribute => "attribute",
            QuestionKind::Spatial => "spatial",
        };
        Ok::<_, DatasetError>(BenchItem {
            id: Some(stem.clone()),
            image_path: format!("{stem}.png").into(),
            question: spec.question.text.clone(),
            options: spec.question.options.clone(),
            answer: (spec.question.answer as u8 - b'A') as usize,
            gt_bbox: Some(spec.gt_bbox()),
            subset: Some(subset.into()),
        })
    })?;
    let bench = dir.join(BENCH_FILE);
    write_bench(&bench, &items).map_err(|e| io_err(&bench, e))?;
    Ok(items)
}
