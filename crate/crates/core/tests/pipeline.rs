use std::sync::Arc;

use deepscan::config::{ScanParadigm, TopK};
use deepscan::experts::{ExpertSession, GenerationSettings};
use deepscan::imaging::{iou, BBox, RasterImage};
use deepscan::par::ExecPolicy;
use deepscan::refocusing::{init_view, refocus, zoom_in, zoom_out, View};
use deepscan::scanning::{hierarchical_scan, ExtractionStep};
use deepscan::synth::*;
use deepscan::{run_pipeline, PipelineConfig, Question};
use proptest::prelude::*;

fn small_params() -> SceneParams {
    SceneParams {
        width: 512,
        height: 512,
        n_distractors: 3,
        target_area_ratio: 0.002,
        ..SceneParams::default()
    }
}

fn question(spec: &SceneSpec) -> Question {
    Question::with_options(spec.question.text.clone(), spec.question.options.clone()).unwrap()
}

fn session(spec: &SceneSpec) -> ExpertSession {
    ExpertSession::new(OracleExperts::bundle(spec.clone()), GenerationSettings::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn extraction_invariants(seed in 0u64..10_000, spatial in any::<bool>()) {
        let params = SceneParams {
            kind: if spatial { QuestionKind::Spatial } else { QuestionKind::Attribute },
            ..small_params()
        };
        let (img, spec) = generate_scene(seed, &params).unwrap();
        let cfg = PipelineConfig::default();
        let mut q = question(&spec);
        let out = hierarchical_scan(&session(&spec), &img, &mut q, &cfg.scan, ExecPolicy::Sequential).unwrap();
        let c = &out.candidates;
        for (i, a) in c.iter().enumerate() {
            prop_assert_eq!(a.discovery, i);
            prop_assert!(a.bbox.contains(&a.object_bbox));
            prop_assert!(img.bounds().contains(&a.bbox));
            prop_assert_eq!((a.crop.width(), a.crop.height()), (a.bbox.width(), a.bbox.height()));
            for b in &c[i + 1..] {
                prop_assert!(iou(&a.bbox, &b.bbox) <= cfg.scan.theta_iou);
            }
        }
        let n_proxies: usize = out.trace.patches.iter().map(|p| p.proxies.len()).sum();
        prop_assert_eq!(out.trace.extraction.len(), n_proxies);
        let kept = out.trace.extraction.iter().filter(|s| matches!(s, ExtractionStep::Kept { .. })).count();
        prop_assert_eq!(kept, c.len());
        // The judge sees at most k candidates, and they are the smallest.
        let k = cfg.scan.k.limit(c.len());
        prop_assert_eq!(out.trace.judgments.len(), k);
        let judged: Vec<usize> = out.trace.judgments.iter().map(|j| j.discovery).collect();
        for cand in c {
            if !judged.contains(&cand.discovery) {
                prop_assert!(judged.iter().all(|&j| c[j].bbox.area() <= cand.bbox.area()));
            }
        }
        prop_assert!(out.evidence.iter().all(|e| e.affirmed));
    }

    #[test]
    fn zoom_out_composes(x in 0u32..900, y in 0u32..900, w in 1u32..100, h in 1u32..100,
                         a in 1.01f64..2.0, b in 1.01f64..2.0) {
        let img = RasterImage::filled(1000, 1000, [0, 0, 0]).unwrap();
        let bounds = img.bounds();
        let v = View::from_box(&img, BBox::new(x, y, (x + w).min(1000), (y + h).min(1000)).unwrap(), "V").unwrap();
        let ab = a * b;
        prop_assume!(deepscan::imaging::scale_fits(&v.bbox, ab, &bounds)
            && deepscan::imaging::scale_fits(&v.bbox, a, &bounds));
        let twice = zoom_out(&zoom_out(&v, a, &img, "a").unwrap(), b, &img, "b").unwrap();
        let once = zoom_out(&v, ab, &img, "c").unwrap();
        prop_assert_eq!(twice.bbox, once.bbox);
        prop_assert!(once.bbox.contains(&v.bbox));
    }

    #[test]
    fn oracle_judge_is_monotone(seed in 0u64..500, x0 in 0u32..512, y0 in 0u32..512, grow in 0u32..200) {
        let (_, spec) = generate_scene(seed, &small_params()).unwrap();
        let a = BBox::from_signed_clipped(x0 as i64, y0 as i64, x0 as i64 + 60, y0 as i64 + 60, &spec.canvas()).unwrap();
        let b = BBox::from_signed_clipped(
            a.x0 as i64 - grow as i64, a.y0 as i64 - grow as i64,
            a.x1 as i64 + grow as i64, a.y1 as i64 + grow as i64, &spec.canvas()).unwrap();
        for o in &spec.objects {
            if contained(o, &a) {
                prop_assert!(contained(o, &b));
            }
        }
    }

    #[test]
    fn scenes_are_well_formed(seed in 0u64..10_000, spatial in any::<bool>(), decoy in any::<bool>()) {
        let params = SceneParams {
            kind: if spatial { QuestionKind::Spatial } else { QuestionKind::Attribute },
            decoy: (decoy && !spatial).then(DecoyParams::default),
            ..SceneParams::default()
        };
        let (img, spec) = generate_scene(seed, &params).unwrap();
        prop_assert_eq!(img.bounds(), spec.canvas());
        let targets = spec.target_objects();
        prop_assert_eq!(targets.len(), if spatial { 2 } else { 1 });
        prop_assert_eq!(spec.targets.len(), targets.len());
        for o in &spec.objects {
            prop_assert!(spec.canvas().contains(&o.bbox));
            prop_assert!(o.mask_area() > 0);
        }
        for (i, a) in spec.objects.iter().enumerate() {
            for b in &spec.objects[i + 1..] {
                prop_assert!(a.bbox.intersect(&b.bbox).is_none());
            }
        }
        let letters: Vec<char> = (0..spec.question.options.len()).map(|i| (b'A' + i as u8) as char).collect();
        prop_assert!(letters.contains(&spec.question.answer));
    }
}

#[test]
fn zoom_in_is_idempotent_under_the_oracle() {
    let cfg = PipelineConfig::default();
    for seed in 0..20 {
        let (img, spec) = generate_scene(seed, &SceneParams::default()).unwrap();
        let s = session(&spec);
        let mut q = question(&spec);
        let scan = hierarchical_scan(&s, &img, &mut q, &cfg.scan, ExecPolicy::Sequential).unwrap();
        let v1 = init_view(&scan.evidence, &img).unwrap();
        let once = zoom_in(&s, &img, &v1, &q.text, &cfg.refocus, "V2").unwrap();
        let twice = zoom_in(&s, &img, &once, &q.text, &cfg.refocus, "V2'").unwrap();
        assert_eq!(once.bbox, twice.bbox, "seed {seed}");
    }
}

#[test]
fn refocus_judges_four_views() {
    let cfg = PipelineConfig::default();
    let (img, spec) = generate_scene(3, &SceneParams::default()).unwrap();
    let s = session(&spec);
    let mut q = question(&spec);
    let scan = hierarchical_scan(&s, &img, &mut q, &cfg.scan, ExecPolicy::Sequential).unwrap();
    let before = s.counts().judge;
    let out = refocus(&s, &img, &q.text, &q.targets(), &scan.evidence, &cfg.refocus).unwrap();
    assert_eq!(s.counts().judge - before, 4);
    let tags: Vec<&str> = out.trace.views.iter().map(|v| v.tag.as_str()).collect();
    assert_eq!(tags, ["V1", "V2", "V3", "V4"]);
    assert!(out.chosen.reward > 0.0);
    assert!(out.trace.views.iter().all(|v| v.reward <= out.chosen.reward));
}

#[test]
fn oracle_pipeline_grounds_and_answers() {
    let cfg = PipelineConfig::default();
    for (seed, kind) in [(1, QuestionKind::Attribute), (2, QuestionKind::Spatial), (13, QuestionKind::Attribute)] {
        let (img, spec) = generate_scene(seed, &SceneParams { kind, ..SceneParams::default() }).unwrap();
        let out = run_pipeline(&img, &question(&spec), &OracleExperts::bundle(spec.clone()), &cfg).unwrap();
        assert_eq!(out.trace.answer_letter, Some(spec.question.answer), "seed {seed}");
        assert!(iou(&out.trace.grounding.unwrap(), &spec.gt_bbox()) >= 0.5);
        let refocus = out.trace.refocus.as_ref().unwrap();
        assert_eq!(out.trace.calls.judge as usize, out.trace.scan.judgments.len() + 4);
        assert!(refocus.search_length >= 1 && refocus.search_length <= 4);
    }
}

#[test]
fn traces_do_not_depend_on_scheduling() {
    let (img, spec) = generate_scene(21, &SceneParams { kind: QuestionKind::Spatial, ..SceneParams::default() }).unwrap();
    let b = OracleExperts::bundle(spec.clone());
    let q = question(&spec);
    let render = |cfg: &PipelineConfig| serde_json::to_string(&run_pipeline(&img, &q, &b, cfg).unwrap().trace).unwrap();
    let base = PipelineConfig::default();
    let mut seq = base.clone();
    seq.exec = ExecPolicy::Sequential;
    let mut concurrent = base.clone();
    concurrent.scan.concurrent_judges = true;
    concurrent.refocus.concurrent_judges = true;
    let reference = render(&base);
    assert_eq!(reference, render(&base));
    assert_eq!(reference, render(&seq));
    assert_eq!(reference, render(&concurrent));
    assert!(!reference.contains("scan_ms"));
}

#[test]
fn one_shot_loses_the_target_next_to_a_decoy() {
    let params = SceneParams {
        decoy: Some(DecoyParams::default()),
        ..SceneParams::default()
    };
    let mut one = PipelineConfig::default();
    one.scan.paradigm = ScanParadigm::OneShot;
    for seed in 0..10 {
        let (img, spec) = generate_scene(seed, &params).unwrap();
        let out = run_pipeline(&img, &question(&spec), &OracleExperts::bundle(spec.clone()), &one).unwrap();
        let hit = out.trace.grounding.is_some_and(|g| iou(&g, &spec.gt_bbox()) >= 0.5);
        assert!(!hit, "seed {seed}");
    }
}

#[test]
fn no_evidence_falls_back_to_the_full_image() {
    let (img, spec) = generate_scene(5, &SceneParams::default()).unwrap();
    let b = OracleExperts::bundle(spec.clone()).with_lvlm(Arc::new(ConstantAnswerer('C')));
    let out = run_pipeline(&img, &question(&spec), &b, &PipelineConfig::default()).unwrap();
    assert!(out.trace.fallback);
    assert!(out.trace.refocus.is_none() && out.trace.grounding.is_none());
    assert_eq!(out.trace.memory.as_ref().unwrap().coarse, img.bounds());
    assert_eq!(out.trace.answer_letter, Some('C'));
}

#[test]
fn judge_budget_follows_k() {
    let (img, spec) = generate_scene(8, &SceneParams::default()).unwrap();
    for k in [Some(1), Some(2), None] {
        let mut cfg = PipelineConfig::default();
        cfg.scan.k = TopK(k);
        let out = run_pipeline(&img, &question(&spec), &OracleExperts::bundle(spec.clone()), &cfg).unwrap();
        let n = out.trace.scan.candidates.len();
        assert_eq!(out.trace.scan.judgments.len(), k.map_or(n, |k| k.min(n)));
    }
}
