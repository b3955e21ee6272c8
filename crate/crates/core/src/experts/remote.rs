//! HTTP client for an expert server speaking the wire protocol.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::wire::{self, *};
use super::{Completion, ExpertError, ImageRef, LvlmClient, SearchExpert, VisualExpert};
use crate::imaging::{BBox, BitMask, GrayMap, Point};

/// Responses carry full-resolution float maps; 256 MiB covers 4K images.
const BODY_LIMIT: u64 = 256 << 20;

/// Blocking client; one instance is safe to share across threads and keeps a
/// connection pool.
pub struct RemoteExperts {
    base: String,
    agent: ureq::Agent,
}

impl RemoteExperts {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            base: base_url.trim_end_matches('/').to_string(),
            agent,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    pub fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        endpoint: &str,
        body: &Req,
    ) -> Result<Resp, ExpertError> {
        let url = format!("{}{endpoint}", self.base);
        let resp = self
            .agent
            .post(&url)
            .send_json(body)
            .map_err(|e| ExpertError::Transport(format!("{url}: {e}")))?;
        read_response(resp, &url)
    }

    pub fn get<Resp: DeserializeOwned>(&self, endpoint: &str) -> Result<Resp, ExpertError> {
        let url = format!("{}{endpoint}", self.base);
        let resp = self
            .agent
            .get(&url)
            .call()
            .map_err(|e| ExpertError::Transport(format!("{url}: {e}")))?;
        read_response(resp, &url)
    }

    /// Raw exchange for probes that need to see status codes of bad requests.
    pub fn post_raw(&self, endpoint: &str, body: &str) -> Result<(u16, String), ExpertError> {
        let url = format!("{}{endpoint}", self.base);
        let mut resp = self
            .agent
            .post(&url)
            .header("Content-Type", "application/json")
            .send(body)
            .map_err(|e| ExpertError::Transport(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .with_config()
            .limit(BODY_LIMIT)
            .read_to_string()
            .map_err(|e| ExpertError::Transport(format!("{url}: {e}")))?;
        Ok((status, text))
    }
}

fn read_response<T: DeserializeOwned>(
    mut resp: ureq::http::Response<ureq::Body>,
    url: &str,
) -> Result<T, ExpertError> {
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .with_config()
        .limit(BODY_LIMIT)
        .read_to_string()
        .map_err(|e| ExpertError::Transport(format!("{url}: {e}")))?;
    if !(200..300).contains(&status) {
        let message = serde_json::from_str::<ErrorBody>(&text)
            .map(|b| b.error)
            .unwrap_or(text);
        return Err(ExpertError::Rejected { status, message });
    }
    serde_json::from_str(&text).map_err(|e| ExpertError::Protocol(format!("{url}: {e}")))
}

impl SearchExpert for RemoteExperts {
    fn search(&self, patch: ImageRef<'_>, question: &str) -> Result<GrayMap, ExpertError> {
        let req = SearchRequest {
            image: encode_image(patch.image)?,
            question: question.to_string(),
        };
        let resp: SearchResponse = self.post(wire::SEARCH, &req)?;
        resp.into_map(patch.image.width(), patch.image.height())
    }
}

impl VisualExpert for RemoteExperts {
    fn segment(&self, image: ImageRef<'_>, point: Point) -> Result<BitMask, ExpertError> {
        let req = SegmentRequest {
            image: encode_image(image.image)?,
            point: point.into(),
        };
        let resp: SegmentResponse = self.post(wire::SEGMENT, &req)?;
        resp.into_mask(image.image.width(), image.image.height())
    }

    fn detect(&self, view: ImageRef<'_>, query: &str) -> Result<Vec<BBox>, ExpertError> {
        let req = DetectRequest {
            image: encode_image(view.image)?,
            query: query.to_string(),
        };
        let resp: DetectResponse = self.post(wire::DETECT, &req)?;
        resp.into_boxes(view.image.width(), view.image.height())
    }
}

impl LvlmClient for RemoteExperts {
    fn complete(&self, request: &Completion<'_>) -> Result<String, ExpertError> {
        let resp: CompleteResponse = self.post(wire::COMPLETE, &complete_request(request)?)?;
        Ok(resp.text)
    }
}

pub fn complete_request(request: &Completion<'_>) -> Result<CompleteRequest, ExpertError> {
    Ok(CompleteRequest {
        images: request
            .images
            .iter()
            .map(|r| encode_image(r.image))
            .collect::<Result<_, _>>()?,
        prompt: request.prompt.clone(),
        system: request.system.clone(),
        max_tokens: request.max_tokens,
        temperature: request.temperature,
        seed: request.seed,
    })
}
