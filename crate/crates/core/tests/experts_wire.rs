use std::sync::Arc;
use std::time::Duration;

use deepscan::experts::conformance::run_conformance;
use deepscan::experts::remote::RemoteExperts;
use deepscan::experts::replay::{RecordingExperts, ReplayExperts};
use deepscan::experts::stub::{stub_scene, ColorStubExperts, StubServer};
use deepscan::experts::wire::{self, rle_decode, rle_encode};
use deepscan::experts::{ExpertBundle, ExpertError, ImageRef, SearchExpert, VisualExpert};
use deepscan::imaging::{BitMask, Point};
use deepscan::synth::{generate_scene, OracleExperts, SceneParams};
use deepscan::{run_pipeline, PipelineConfig, Question};
use proptest::prelude::*;

proptest! {
    #[test]
    fn rle_round_trips(w in 1u32..40, h in 1u32..40, bits in prop::collection::vec(any::<bool>(), 1600)) {
        let mask = BitMask::new(w, h, bits[..(w * h) as usize].to_vec()).unwrap();
        let rle = rle_encode(&mask);
        prop_assert_eq!(rle.iter().sum::<u64>(), (w * h) as u64);
        prop_assert!(rle[1..].iter().all(|&r| r > 0));
        prop_assert_eq!(rle_decode(w, h, &rle).unwrap(), mask);
    }

    #[test]
    fn rle_rejects_bad_sums(w in 1u32..20, h in 1u32..20, extra in 1u64..5) {
        let rle = vec![(w * h) as u64 + extra];
        prop_assert!(rle_decode(w, h, &rle).is_err());
    }
}

fn stub() -> StubServer {
    StubServer::spawn(ExpertBundle::from_shared(Arc::new(ColorStubExperts)), 8 << 20).unwrap()
}

#[test]
fn stub_passes_conformance() {
    let server = stub();
    let report = run_conformance(&RemoteExperts::new(&server.url(), Duration::from_secs(30)));
    for c in &report.checks {
        assert!(c.passed, "{}: {}", c.name, c.detail);
    }
    assert!(report.checks.len() >= 9);
}

#[test]
fn remote_matches_in_process() {
    let server = stub();
    let remote = ExpertBundle::from_shared(Arc::new(RemoteExperts::new(&server.url(), Duration::from_secs(30))));
    let local = ExpertBundle::from_shared(Arc::new(ColorStubExperts));
    let img = stub_scene(320, 240);
    let q = Question::with_options("What color is the square?", vec!["red".into(), "blue".into()]).unwrap();
    let cfg = PipelineConfig::default();
    let a = run_pipeline(&img, &q, &remote, &cfg).unwrap();
    let b = run_pipeline(&img, &q, &local, &cfg).unwrap();
    assert_eq!(a.answer, "A");
    assert_eq!(serde_json::to_string(&a.trace).unwrap(), serde_json::to_string(&b.trace).unwrap());
    assert!(!a.trace.fallback);
}

#[test]
fn server_errors_surface_as_rejections() {
    let server = StubServer::spawn(ExpertBundle::from_shared(Arc::new(ColorStubExperts)), 4096).unwrap();
    let client = RemoteExperts::new(&server.url(), Duration::from_secs(30));
    let (status, body) = client.post_raw(wire::SEARCH, "{\"image\": 3}").unwrap();
    assert_eq!(status, 400);
    assert!(body.contains("error"));
    // Noise does not compress, so this is far over the 4 KiB limit.
    let noise: Vec<u8> = (0..64 * 64 * 3u32).map(|i| (i.wrapping_mul(2654435761) >> 13) as u8).collect();
    let img = deepscan::RasterImage::new(64, 64, noise).unwrap();
    match client.search(ImageRef::whole(&img), "q") {
        Err(ExpertError::Rejected { status: 413, .. }) => {}
        other => panic!("expected 413, got {other:?}"),
    }
    let dead = RemoteExperts::new("http://127.0.0.1:9", Duration::from_secs(2));
    assert!(matches!(dead.segment(ImageRef::whole(&img), Point::new(1, 1)), Err(ExpertError::Transport(_))));
}

#[test]
fn replay_reproduces_a_recorded_run() {
    let dir = tempfile::tempdir().unwrap();
    let (img, spec) = generate_scene(4, &SceneParams::default()).unwrap();
    let q = Question::with_options(spec.question.text.clone(), spec.question.options.clone()).unwrap();
    let cfg = PipelineConfig::default();
    let recorder = RecordingExperts::new(OracleExperts::bundle(spec.clone()), dir.path()).unwrap();
    let recorded = run_pipeline(&img, &q, &ExpertBundle::from_shared(Arc::new(recorder)), &cfg).unwrap();
    let replay = ExpertBundle::from_shared(Arc::new(ReplayExperts::open(dir.path()).unwrap()));
    let replayed = run_pipeline(&img, &q, &replay, &cfg).unwrap();
    assert_eq!(recorded.trace, replayed.trace);
    assert_eq!(replayed.trace.answer_letter, Some(spec.question.answer));

    // A different question has no fixtures.
    let other = Question::with_options("What color is the large lamp?", spec.question.options.clone()).unwrap();
    let err = run_pipeline(&img, &other, &replay, &cfg).unwrap_err();
    assert!(matches!(err.error, ExpertError::MissingFixture { .. }), "{}", err.error);
    assert!(err.trace.error.is_some());
}

#[test]
fn session_rejects_bad_expert_output() {
    struct Wrong;
    impl SearchExpert for Wrong {
        fn search(&self, _: ImageRef<'_>, _: &str) -> Result<deepscan::GrayMap, ExpertError> {
            Ok(deepscan::GrayMap::zeros(3, 3).unwrap())
        }
    }
    let stub = Arc::new(ColorStubExperts);
    let bundle = ExpertBundle::new(Arc::new(Wrong), stub.clone(), stub);
    let img = stub_scene(64, 64);
    let q = Question::new("anything?").unwrap();
    let err = run_pipeline(&img, &q, &bundle, &PipelineConfig::default()).unwrap_err();
    assert!(err.to_string().contains("3"), "{err}");
}
