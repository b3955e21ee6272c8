//! Wire-protocol conformance probe run by `deepscan serve-check`.

use serde::Serialize;
use serde_json::{json, Value};

use super::remote::RemoteExperts;
use super::wire::{self, *};
use super::ExpertError;
use crate::imaging::RasterImage;

const PROBE_SIDE: u32 = 64;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConformanceReport {
    pub checks: Vec<CheckResult>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    fn record(&mut self, name: &str, outcome: Result<String, String>) {
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        self.checks.push(CheckResult {
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

/// A 64×64 test card: a saturated red square on a grey ground.
pub fn probe_image() -> RasterImage {
    let mut img = RasterImage::filled(PROBE_SIDE, PROBE_SIDE, [128, 128, 128]).expect("valid size");
    for y in 20..44 {
        for x in 20..44 {
            img.set_pixel(x, y, [220, 30, 30]);
        }
    }
    img
}

pub fn run_conformance(client: &RemoteExperts) -> ConformanceReport {
    let mut report = ConformanceReport::default();
    let img = probe_image();
    let encoded = match encode_image(&img) {
        Ok(e) => e,
        Err(e) => {
            report.record("encode probe image", Err(e.to_string()));
            return report;
        }
    };
    let n = (PROBE_SIDE * PROBE_SIDE) as usize;

    report.record(
        "health",
        client
            .get::<Value>(wire::HEALTH)
            .map(|v| format!("ok: {v}"))
            .map_err(|e| e.to_string()),
    );

    let search = client
        .post::<_, SearchResponse>(
            wire::SEARCH,
            &SearchRequest {
                image: encoded.clone(),
                question: "what color is the red square?".into(),
            },
        )
        .map_err(|e| e.to_string())
        .and_then(|r| {
            if (r.width, r.height) != (PROBE_SIDE, PROBE_SIDE) {
                return Err(format!("dimensions {}x{} do not echo 64x64", r.width, r.height));
            }
            if r.values.len() != n {
                return Err(format!("{} values, expected {n}", r.values.len()));
            }
            if r.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err("values must be finite and non-negative".into());
            }
            Ok(format!("{n} values"))
        });
    report.record("search", search);

    let segment = client
        .post::<_, SegmentResponse>(
            wire::SEGMENT,
            &SegmentRequest {
                image: encoded.clone(),
                point: WirePoint { x: 32, y: 32 },
            },
        )
        .map_err(|e| e.to_string())
        .and_then(|r| {
            if (r.width, r.height) != (PROBE_SIDE, PROBE_SIDE) {
                return Err(format!("dimensions {}x{} do not echo 64x64", r.width, r.height));
            }
            let sum: u64 = r.rle.iter().sum();
            let mask = r.into_mask(PROBE_SIDE, PROBE_SIDE).map_err(|e| e.to_string())?;
            Ok(format!("RLE sums to {sum}, {} pixels set", mask.count()))
        });
    report.record("segment", segment);

    let detect = client
        .post::<_, DetectResponse>(
            wire::DETECT,
            &DetectRequest {
                image: encoded.clone(),
                query: "red square".into(),
            },
        )
        .map_err(|e| e.to_string())
        .and_then(|r| {
            let boxes = r.into_boxes(PROBE_SIDE, PROBE_SIDE).map_err(|e| e.to_string())?;
            Ok(format!("{} boxes", boxes.len()))
        });
    report.record("detect", detect);

    let complete = client
        .post::<_, CompleteResponse>(
            wire::COMPLETE,
            &CompleteRequest {
                images: vec![encoded.clone()],
                prompt: "Is there a red square? Answer Yes or No.".into(),
                system: super::prompts::SYSTEM_PROMPT.into(),
                max_tokens: 50,
                temperature: 0.0,
                seed: 13,
            },
        )
        .map(|r| format!("{} chars", r.text.len()))
        .map_err(|e| e.to_string());
    report.record("complete", complete);

    let malformed = [
        (wire::SEARCH, json!({ "image": "not-base64!", "question": "q" })),
        (wire::SEGMENT, json!({ "image": encoded, "point": { "x": 9999, "y": 0 } })),
        (wire::DETECT, json!({ "query": "missing image" })),
        (wire::COMPLETE, json!({ "images": "not a list" })),
    ];
    for (endpoint, body) in malformed {
        let outcome = client
            .post_raw(endpoint, &body.to_string())
            .map_err(|e: ExpertError| e.to_string())
            .and_then(|(status, text)| check_error_shape(status, &text));
        report.record(&format!("malformed {endpoint}"), outcome);
    }
    report
}

fn check_error_shape(status: u16, body: &str) -> Result<String, String> {
    if !(400..500).contains(&status) {
        return Err(format!("expected a 4xx status, got {status}"));
    }
    match serde_json::from_str::<ErrorBody>(body) {
        Ok(b) => Ok(format!("{status}: {}", b.error)),
        Err(_) => Err(format!("{status} without an {{\"error\": string}} body: {body:?}")),
    }
}
