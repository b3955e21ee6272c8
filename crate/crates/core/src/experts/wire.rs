//! JSON wire format shared by the remote client, the replay store, the
//! conformance probe and the stub server.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::ExpertError;
use crate::imaging::{io, BBox, BitMask, GrayMap, Point, RasterImage};

pub const HEALTH: &str = "/v1/health";
pub const SEARCH: &str = "/v1/search";
pub const SEGMENT: &str = "/v1/segment";
pub const DETECT: &str = "/v1/detect";
pub const COMPLETE: &str = "/v1/complete";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    pub image: String,
    pub question: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WirePoint {
    pub x: u32,
    pub y: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRequest {
    pub image: String,
    pub point: WirePoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentResponse {
    pub width: u32,
    pub height: u32,
    pub rle: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectRequest {
    pub image: String,
    pub query: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectResponse {
    pub boxes: Vec<WireBox>,
}

/// Box as sent on the wire; signed so invalid backend output can be reported
/// instead of failing to parse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireBox {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompleteRequest {
    pub images: Vec<String>,
    pub prompt: String,
    pub system: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompleteResponse {
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

pub fn encode_image(img: &RasterImage) -> Result<String, ExpertError> {
    Ok(STANDARD.encode(io::encode_png(img)?))
}

pub fn decode_image(b64: &str) -> Result<RasterImage, ExpertError> {
    let bytes = STANDARD
        .decode(b64)
        .map_err(|e| ExpertError::InvalidInput(format!("image is not base64: {e}")))?;
    io::decode_png(&bytes).map_err(|e| ExpertError::InvalidInput(e.to_string()))
}

/// Alternating run lengths over the row-major bits, starting with a run of
/// zeros (possibly empty).
pub fn rle_encode(mask: &BitMask) -> Vec<u64> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0u64;
    for &b in mask.bits() {
        if b == current {
            len += 1;
        } else {
            runs.push(len);
            current = b;
            len = 1;
        }
    }
    runs.push(len);
    runs
}

pub fn rle_decode(width: u32, height: u32, rle: &[u64]) -> Result<BitMask, ExpertError> {
    let total = width as u64 * height as u64;
    let sum = rle.iter().try_fold(0u64, |acc, &r| acc.checked_add(r));
    if sum != Some(total) {
        return Err(ExpertError::Protocol(format!(
            "RLE runs sum to {sum:?}, expected {total} for {width}x{height}"
        )));
    }
    let mut bits = Vec::with_capacity(total as usize);
    for (i, &run) in rle.iter().enumerate() {
        bits.extend(std::iter::repeat_n(i % 2 == 1, run as usize));
    }
    Ok(BitMask::new(width, height, bits)?)
}

impl SearchResponse {
    pub fn into_map(self, expect_w: u32, expect_h: u32) -> Result<GrayMap, ExpertError> {
        if (self.width, self.height) != (expect_w, expect_h) {
            return Err(ExpertError::Protocol(format!(
                "search map is {}x{}, patch is {expect_w}x{expect_h}",
                self.width, self.height
            )));
        }
        if self.values.len() as u64 != self.width as u64 * self.height as u64 {
            return Err(ExpertError::Protocol(format!(
                "search map has {} values for {}x{}",
                self.values.len(),
                self.width,
                self.height
            )));
        }
        if self.values.iter().any(|v| *v < 0.0) {
            return Err(ExpertError::Protocol("search map has negative values".into()));
        }
        Ok(GrayMap::new(self.width, self.height, self.values)?)
    }

    pub fn from_map(map: &GrayMap) -> Self {
        Self {
            width: map.width(),
            height: map.height(),
            values: map.data().to_vec(),
        }
    }
}

impl SegmentResponse {
    pub fn into_mask(self, expect_w: u32, expect_h: u32) -> Result<BitMask, ExpertError> {
        if (self.width, self.height) != (expect_w, expect_h) {
            return Err(ExpertError::Protocol(format!(
                "segment mask is {}x{}, image is {expect_w}x{expect_h}",
                self.width, self.height
            )));
        }
        rle_decode(self.width, self.height, &self.rle)
    }

    pub fn from_mask(mask: &BitMask) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            rle: rle_encode(mask),
        }
    }
}

impl DetectResponse {
    /// Validate every box against the view; any degenerate or out-of-range
    /// box is a protocol error.
    pub fn into_boxes(self, view_w: u32, view_h: u32) -> Result<Vec<BBox>, ExpertError> {
        self.boxes
            .into_iter()
            .map(|b| {
                let ok = 0 <= b.x0
                    && b.x0 < b.x1
                    && 0 <= b.y0
                    && b.y0 < b.y1
                    && b.x1 <= view_w as i64
                    && b.y1 <= view_h as i64;
                if !ok {
                    return Err(ExpertError::Protocol(format!(
                        "detect box ({}, {}, {}, {}) invalid for {view_w}x{view_h} view",
                        b.x0, b.y0, b.x1, b.y1
                    )));
                }
                Ok(BBox {
                    x0: b.x0 as u32,
                    y0: b.y0 as u32,
                    x1: b.x1 as u32,
                    y1: b.y1 as u32,
                })
            })
            .collect()
    }

    pub fn from_boxes(boxes: &[BBox]) -> Self {
        Self {
            boxes: boxes
                .iter()
                .map(|b| WireBox {
                    x0: b.x0 as i64,
                    y0: b.y0 as i64,
                    x1: b.x1 as i64,
                    y1: b.y1 as i64,
                })
                .collect(),
        }
    }
}

impl From<Point> for WirePoint {
    fn from(p: Point) -> Self {
        Self { x: p.x, y: p.y }
    }
}

impl From<WirePoint> for Point {
    fn from(p: WirePoint) -> Self {
        Point::new(p.x, p.y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rle_starts_with_zero_run() {
        let mut m = BitMask::empty(4, 2).unwrap();
        assert_eq!(rle_encode(&m), vec![8]);
        m.set(0, 0, true);
        m.set(1, 0, true);
        m.set(3, 1, true);
        assert_eq!(rle_encode(&m), vec![0, 2, 5, 1]);
        assert_eq!(rle_decode(4, 2, &[0, 2, 5, 1]).unwrap(), m);
    }

    #[test]
    fn rle_sum_is_checked() {
        assert!(rle_decode(4, 2, &[0, 2, 5]).is_err());
        assert!(rle_decode(4, 2, &[u64::MAX, 9]).is_err());
    }

    #[test]
    fn response_dimension_checks() {
        let r = SearchResponse {
            width: 2,
            height: 2,
            values: vec![0.0; 4],
        };
        assert!(r.clone().into_map(2, 3).is_err());
        assert!(r.into_map(2, 2).is_ok());
        let d = DetectResponse {
            boxes: vec![WireBox {
                x0: 0,
                y0: 0,
                x1: 5,
                y1: 3,
            }],
        };
        assert!(d.clone().into_boxes(4, 4).is_err());
        assert_eq!(d.into_boxes(5, 3).unwrap(), vec![BBox::new(0, 0, 5, 3).unwrap()]);
    }

    #[test]
    fn image_round_trip() {
        let img = RasterImage::filled(3, 2, [1, 2, 3]).unwrap();
        assert_eq!(decode_image(&encode_image(&img).unwrap()).unwrap(), img);
        assert!(decode_image("!!").is_err());
    }
}
