//! In-process HTTP server speaking the wire protocol, for tests and local
//! smoke runs. Serves any [`ExpertBundle`]; [`ColorStubExperts`] is a tiny
//! model-free backend for it.

use std::io::Read;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::de::DeserializeOwned;
use serde::Serialize;
use tiny_http::{Header, Method, Request, Response, Server};

use super::wire::{self, *};
use super::{
    Completion, ExpertBundle, ExpertError, ImageRef, LvlmClient, Purpose, SearchExpert,
    VisualExpert,
};
use crate::imaging::{connected_components, BBox, BitMask, GrayMap, Point, RasterImage};

pub struct StubServer {
    server: Arc<Server>,
    addr: SocketAddr,
    workers: Vec<JoinHandle<()>>,
}

impl StubServer {
    /// Bind to an ephemeral localhost port and serve `experts` until dropped.
    /// Request bodies above `max_body_bytes` get 413.
    pub fn spawn(experts: ExpertBundle, max_body_bytes: usize) -> std::io::Result<Self> {
        let server = Server::http("127.0.0.1:0").map_err(std::io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("not an IP listener"))?;
        let server = Arc::new(server);
        let workers = (0..4)
            .map(|_| {
                let server = Arc::clone(&server);
                let experts = experts.clone();
                std::thread::spawn(move || {
                    while let Ok(req) = server.recv() {
                        handle(req, &experts, max_body_bytes);
                    }
                })
            })
            .collect();
        Ok(Self {
            server,
            addr,
            workers,
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn json_header() -> Header {
    Header::from_bytes("Content-Type", "application/json").expect("static header")
}

fn reply<T: Serialize>(req: Request, status: u16, body: &T) {
    let text = serde_json::to_string(body).unwrap_or_else(|_| "{}".into());
    let resp = Response::from_string(text)
        .with_status_code(status)
        .with_header(json_header());
    if let Err(e) = req.respond(resp) {
        log::debug!("stub server failed to respond: {e}");
    }
}

fn error(req: Request, status: u16, message: impl Into<String>) {
    reply(req, status, &ErrorBody {
        error: message.into(),
    });
}

fn handle(mut req: Request, experts: &ExpertBundle, max_body: usize) {
    let path = req.url().split('?').next().unwrap_or("").to_string();
    if *req.method() == Method::Get {
        if path == wire::HEALTH {
            reply(req, 200, &serde_json::json!({ "status": "ok" }));
        } else {
            error(req, 404, format!("no route {path}"));
        }
        return;
    }
    if *req.method() != Method::Post {
        error(req, 405, "method not allowed");
        return;
    }
    if req.body_length().is_some_and(|n| n > max_body) {
        error(req, 413, format!("request body exceeds {max_body} bytes"));
        return;
    }
    let mut body = Vec::new();
    let read = req.as_reader().take(max_body as u64 + 1).read_to_end(&mut body);
    if let Err(e) = read {
        error(req, 400, format!("cannot read body: {e}"));
        return;
    }
    if body.len() > max_body {
        error(req, 413, format!("request body exceeds {max_body} bytes"));
        return;
    }
    let result = match path.as_str() {
        wire::SEARCH => route(&body, |r: SearchRequest| {
            let img = decode_image(&r.image)?;
            let map = experts.search.search(ImageRef::whole(&img), &r.question)?;
            Ok(SearchResponse::from_map(&map))
        }),
        wire::SEGMENT => route(&body, |r: SegmentRequest| {
            let img = decode_image(&r.image)?;
            if !img.bounds().contains_point(r.point.x, r.point.y) {
                return Err(ExpertError::InvalidInput(format!(
                    "point ({}, {}) outside {}x{} image",
                    r.point.x,
                    r.point.y,
                    img.width(),
                    img.height()
                )));
            }
            let mask = experts.visual.segment(ImageRef::whole(&img), r.point.into())?;
            Ok(SegmentResponse::from_mask(&mask))
        }),
        wire::DETECT => route(&body, |r: DetectRequest| {
            let img = decode_image(&r.image)?;
            let boxes = experts.visual.detect(ImageRef::whole(&img), &r.query)?;
            Ok(DetectResponse::from_boxes(&boxes))
        }),
        wire::COMPLETE => route(&body, |r: CompleteRequest| {
            let imgs = r
                .images
                .iter()
                .map(|s| decode_image(s))
                .collect::<Result<Vec<_>, _>>()?;
            let completion = Completion {
                images: imgs.iter().map(ImageRef::whole).collect(),
                prompt: r.prompt,
                system: r.system,
                max_tokens: r.max_tokens,
                temperature: r.temperature,
                seed: r.seed,
                purpose: guess_purpose(&r.images),
            };
            Ok(CompleteResponse {
                text: experts.lvlm.complete(&completion)?,
            })
        }),
        _ => {
            error(req, 404, format!("no route {path}"));
            return;
        }
    };
    match result {
        Ok(v) => reply(req, 200, &v),
        Err((status, msg)) => error(req, status, msg),
    }
}

/// The wire format does not carry the call purpose; the stub backends only
/// look at the prompt text anyway.
fn guess_purpose(images: &[String]) -> Purpose {
    if images.is_empty() {
        Purpose::Decompose
    } else {
        Purpose::Judge
    }
}

fn route<Req: DeserializeOwned, Resp: Serialize>(
    body: &[u8],
    f: impl FnOnce(Req) -> Result<Resp, ExpertError>,
) -> Result<serde_json::Value, (u16, String)> {
    let req: Req = serde_json::from_slice(body).map_err(|e| (400, format!("malformed request: {e}")))?;
    let resp = f(req).map_err(|e| match e {
        ExpertError::InvalidInput(m) => (400, m),
        other => (500, other.to_string()),
    })?;
    serde_json::to_value(resp).map_err(|e| (500, e.to_string()))
}

/// Model-free backend driven by colour saturation: attention is per-pixel
/// saturation, segmentation floods the same exact colour, detection boxes
/// every saturated blob. The LVLM affirms everything, lists one object and
/// answers "A".
pub struct ColorStubExperts;

fn saturation(rgb: [u8; 3]) -> f64 {
    let max = rgb.iter().max().copied().unwrap_or(0);
    let min = rgb.iter().min().copied().unwrap_or(0);
    (max - min) as f64 / 255.0
}

impl SearchExpert for ColorStubExperts {
    fn search(&self, patch: ImageRef<'_>, _question: &str) -> Result<GrayMap, ExpertError> {
        let img = patch.image;
        let mut values = Vec::with_capacity((img.width() * img.height()) as usize);
        for y in 0..img.height() {
            for x in 0..img.width() {
                values.push(saturation(img.pixel(x, y)));
            }
        }
        Ok(GrayMap::new(img.width(), img.height(), values)?)
    }
}

impl VisualExpert for ColorStubExperts {
    fn segment(&self, image: ImageRef<'_>, point: Point) -> Result<BitMask, ExpertError> {
        let img = image.image;
        let mut mask = BitMask::empty(img.width(), img.height())?;
        let seed = img.pixel(point.x, point.y);
        if saturation(seed) < 0.25 {
            return Ok(mask);
        }
        let mut stack = vec![point];
        mask.set(point.x, point.y, true);
        while let Some(p) = stack.pop() {
            let neighbours = [
                (p.x.wrapping_sub(1), p.y),
                (p.x + 1, p.y),
                (p.x, p.y.wrapping_sub(1)),
                (p.x, p.y + 1),
            ];
            for (x, y) in neighbours {
                if x < img.width() && y < img.height() && !mask.get(x, y) && img.pixel(x, y) == seed {
                    mask.set(x, y, true);
                    stack.push(Point::new(x, y));
                }
            }
        }
        Ok(mask)
    }

    fn detect(&self, view: ImageRef<'_>, _query: &str) -> Result<Vec<BBox>, ExpertError> {
        let img = view.image;
        let bits = (0..img.height())
            .flat_map(|y| (0..img.width()).map(move |x| (x, y)))
            .map(|(x, y)| saturation(img.pixel(x, y)) >= 0.25)
            .collect();
        let mask = BitMask::new(img.width(), img.height(), bits)?;
        Ok(connected_components(&mask).iter().map(|c| c.bbox()).collect())
    }
}

impl LvlmClient for ColorStubExperts {
    fn complete(&self, request: &Completion<'_>) -> Result<String, ExpertError> {
        let text = if request.prompt.contains("List objects mentioned") {
            "[\"object\"]"
        } else if request.prompt.contains("Answer with the option letter") {
            "A"
        } else {
            "Yes"
        };
        Ok(text.to_string())
    }
}

/// A stub image for quick runs: grey canvas with one red square.
pub fn stub_scene(width: u32, height: u32) -> RasterImage {
    let mut img = RasterImage::filled(width, height, [120, 120, 120]).expect("non-zero size");
    let (cx, cy) = (width / 2, height / 2);
    let r = (width.min(height) / 16).max(4);
    for y in cy.saturating_sub(r)..(cy + r).min(height) {
        for x in cx.saturating_sub(r)..(cx + r).min(width) {
            img.set_pixel(x, y, [220, 30, 30]);
        }
    }
    img
}
