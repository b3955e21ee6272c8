//! Recorded expert fixtures.
//!
//! Every request is reduced to a key: the SHA-256 of a canonical JSON
//! rendering of the endpoint and request fields, with each image replaced by
//! the SHA-256 of its dimensions and raw RGB bytes. A fixture directory holds
//! one `<key>.json` per request, `{"endpoint": ..., "response": ...}`, where
//! `response` is the wire response body.
//!
//! [`ReplayExperts`] serves a directory; [`RecordingExperts`] wraps any
//! bundle and writes fixtures for the calls that pass through it.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::wire::{self, *};
use super::{
    Completion, ExpertBundle, ExpertError, ImageRef, LvlmClient, SearchExpert, VisualExpert,
};
use crate::imaging::{BBox, BitMask, GrayMap, Point, RasterImage};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub endpoint: String,
    pub response: Value,
}

pub fn image_digest(img: &RasterImage) -> String {
    let mut h = Sha256::new();
    h.update(img.width().to_le_bytes());
    h.update(img.height().to_le_bytes());
    h.update(img.data());
    hex::encode(h.finalize())
}

/// Fixture key for a request. `fields` must not contain image payloads;
/// pass images separately.
pub fn request_key(endpoint: &str, images: &[&RasterImage], fields: Value) -> String {
    let canonical = json!({
        "endpoint": endpoint,
        "images": images.iter().map(|i| image_digest(i)).collect::<Vec<_>>(),
        "fields": fields,
    });
    // serde_json maps are ordered by key, so this rendering is canonical.
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

fn search_key(patch: &RasterImage, question: &str) -> String {
    request_key(wire::SEARCH, &[patch], json!({ "question": question }))
}

fn segment_key(image: &RasterImage, point: Point) -> String {
    request_key(wire::SEGMENT, &[image], json!({ "point": { "x": point.x, "y": point.y } }))
}

fn detect_key(view: &RasterImage, query: &str) -> String {
    request_key(wire::DETECT, &[view], json!({ "query": query }))
}

fn complete_key(req: &Completion<'_>) -> String {
    let images: Vec<&RasterImage> = req.images.iter().map(|r| r.image).collect();
    request_key(
        wire::COMPLETE,
        &images,
        json!({
            "prompt": req.prompt,
            "system": req.system,
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
            "seed": req.seed,
        }),
    )
}

/// Serves responses from a fixture directory; unknown requests fail with
/// [`ExpertError::MissingFixture`].
pub struct ReplayExperts {
    dir: PathBuf,
}

impl ReplayExperts {
    pub fn open(dir: &Path) -> Result<Self, ExpertError> {
        if !dir.is_dir() {
            return Err(ExpertError::InvalidInput(format!(
                "fixture directory {} does not exist",
                dir.display()
            )));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    fn load<T: DeserializeOwned>(&self, endpoint: &str, key: &str) -> Result<T, ExpertError> {
        let path = self.dir.join(format!("{key}.json"));
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ExpertError::MissingFixture {
                    endpoint: endpoint.to_string(),
                    key: key.to_string(),
                })
            }
            Err(e) => return Err(ExpertError::Transport(format!("{}: {e}", path.display()))),
        };
        let fixture: Fixture = serde_json::from_str(&text)
            .map_err(|e| ExpertError::Protocol(format!("{}: {e}", path.display())))?;
        if fixture.endpoint != endpoint {
            return Err(ExpertError::Protocol(format!(
                "{}: fixture is for {}, requested {endpoint}",
                path.display(),
                fixture.endpoint
            )));
        }
        serde_json::from_value(fixture.response)
            .map_err(|e| ExpertError::Protocol(format!("{}: {e}", path.display())))
    }
}

impl SearchExpert for ReplayExperts {
    fn search(&self, patch: ImageRef<'_>, question: &str) -> Result<GrayMap, ExpertError> {
        let resp: SearchResponse = self.load(wire::SEARCH, &search_key(patch.image, question))?;
        resp.into_map(patch.image.width(), patch.image.height())
    }
}

impl VisualExpert for ReplayExperts {
    fn segment(&self, image: ImageRef<'_>, point: Point) -> Result<BitMask, ExpertError> {
        let resp: SegmentResponse = self.load(wire::SEGMENT, &segment_key(image.image, point))?;
        resp.into_mask(image.image.width(), image.image.height())
    }

    fn detect(&self, view: ImageRef<'_>, query: &str) -> Result<Vec<BBox>, ExpertError> {
        let resp: DetectResponse = self.load(wire::DETECT, &detect_key(view.image, query))?;
        resp.into_boxes(view.image.width(), view.image.height())
    }
}

impl LvlmClient for ReplayExperts {
    fn complete(&self, request: &Completion<'_>) -> Result<String, ExpertError> {
        let resp: CompleteResponse = self.load(wire::COMPLETE, &complete_key(request))?;
        Ok(resp.text)
    }
}

/// Pass-through wrapper that stores every successful response as a fixture.
pub struct RecordingExperts {
    inner: ExpertBundle,
    dir: PathBuf,
}

impl RecordingExperts {
    pub fn new(inner: ExpertBundle, dir: &Path) -> Result<Self, ExpertError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| ExpertError::Transport(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            inner,
            dir: dir.to_path_buf(),
        })
    }

    fn store<T: Serialize>(&self, endpoint: &str, key: &str, response: &T) -> Result<(), ExpertError> {
        let fixture = Fixture {
            endpoint: endpoint.to_string(),
            response: serde_json::to_value(response)
                .map_err(|e| ExpertError::Protocol(e.to_string()))?,
        };
        let path = self.dir.join(format!("{key}.json"));
        let tmp = self.dir.join(format!("{key}.json.tmp{}", std::process::id()));
        let body = serde_json::to_vec(&fixture).map_err(|e| ExpertError::Protocol(e.to_string()))?;
        std::fs::write(&tmp, body)
            .and_then(|_| std::fs::rename(&tmp, &path))
            .map_err(|e| ExpertError::Transport(format!("{}: {e}", path.display())))
    }
}

impl SearchExpert for RecordingExperts {
    fn search(&self, patch: ImageRef<'_>, question: &str) -> Result<GrayMap, ExpertError> {
        let map = self.inner.search.search(patch, question)?;
        self.store(
            wire::SEARCH,
            &search_key(patch.image, question),
            &SearchResponse::from_map(&map),
        )?;
        Ok(map)
    }
}

impl VisualExpert for RecordingExperts {
    fn segment(&self, image: ImageRef<'_>, point: Point) -> Result<BitMask, ExpertError> {
        let mask = self.inner.visual.segment(image, point)?;
        self.store(
            wire::SEGMENT,
            &segment_key(image.image, point),
            &SegmentResponse::from_mask(&mask),
        )?;
        Ok(mask)
    }

    fn detect(&self, view: ImageRef<'_>, query: &str) -> Result<Vec<BBox>, ExpertError> {
        let boxes = self.inner.visual.detect(view, query)?;
        self.store(
            wire::DETECT,
            &detect_key(view.image, query),
            &DetectResponse::from_boxes(&boxes),
        )?;
        Ok(boxes)
    }
}

impl LvlmClient for RecordingExperts {
    fn complete(&self, request: &Completion<'_>) -> Result<String, ExpertError> {
        let text = self.inner.lvlm.complete(request)?;
        self.store(
            wire::COMPLETE,
            &complete_key(request),
            &CompleteResponse { text: text.clone() },
        )?;
        Ok(text)
    }
}
