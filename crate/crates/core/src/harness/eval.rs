//! Benchmark sweeps and their report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::bench::BenchItem;
use super::source::ExpertsSource;
use crate::config::PipelineConfig;
use crate::experts::{option_letter, Question};
use crate::imaging::io::read_png;
use crate::imaging::iou;
use crate::par::{self, ExecPolicy};
use crate::reasoning::{run_pipeline, RunTrace};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// One run per item.
    #[default]
    Plain,
    /// One run per option rotation; the item counts only if every rotation
    /// is right.
    Cyclic,
    /// One run per rotation; the item scores the share of right rotations.
    CyclicMean,
}

impl FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "plain" => Ok(Self::Plain),
            "cyclic" => Ok(Self::Cyclic),
            "cyclic-mean" => Ok(Self::CyclicMean),
            _ => Err(format!("unknown mode {s:?} (plain, cyclic, cyclic-mean)")),
        }
    }
}

/// Produces a run trace for one question about one item. Failures are
/// reported through `RunTrace::error`.
pub trait ItemRunner: Sync {
    fn run(&self, item: &BenchItem, question: &Question) -> RunTrace;
}

pub struct PipelineRunner {
    pub source: ExpertsSource,
    pub config: PipelineConfig,
}

impl ItemRunner for PipelineRunner {
    fn run(&self, item: &BenchItem, question: &Question) -> RunTrace {
        let failed = |error: String| RunTrace {
            question: question.text.clone(),
            options: question.options.clone(),
            error: Some(error),
            ..RunTrace::default()
        };
        let image = match read_png(&item.image_path) {
            Ok(i) => i,
            Err(e) => return failed(format!("{}: {e}", item.image_path.display())),
        };
        let experts = match self.source.bundle_for(&item.image_path) {
            Ok(b) => b,
            Err(e) => return failed(e.to_string()),
        };
        match run_pipeline(&image, question, &experts, &self.config) {
            Ok(out) => out.trace,
            Err(f) => *f.trace,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct EvalOptions {
    pub mode: EvalMode,
    /// Items evaluated at once; 1 runs them in order on this thread.
    pub jobs: usize,
    /// Write each run's trace here, one file per run.
    pub traces: Option<PathBuf>,
    /// Reuse traces already in `traces` instead of re-running.
    pub resume: bool,
    /// Put the sweep's wall time in the report. Off keeps reports
    /// byte-reproducible.
    pub record_wall_time: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subset: Option<String>,
    /// 1 or 0, or the share of right rotations under `cyclic-mean`.
    pub score: f64,
    /// Expected and extracted letters, one pair per run.
    pub expected: Vec<char>,
    pub predicted: Vec<Option<char>>,
    /// IoU of the grounding box with `gt_bbox`, from the first run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iou: Option<f64>,
    /// Same for the evidence-plus-view region.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context_iou: Option<f64>,
    /// Judge calls averaged over runs.
    pub judge_calls: f64,
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub n: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub mode: EvalMode,
    pub accuracy: f64,
    pub subsets: BTreeMap<String, SubsetReport>,
    /// Items with a `gt_bbox`.
    pub n_grounded: usize,
    pub miou: Option<f64>,
    pub hit_at_05: Option<f64>,
    pub context_miou: Option<f64>,
    pub context_hit_at_05: Option<f64>,
    pub mean_judge_calls: f64,
    /// Runs that ended in an error (scored as wrong).
    pub failed_runs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
    pub items: Vec<ItemResult>,
}

fn trace_stem(item: &BenchItem, index: usize) -> String {
    match &item.id {
        Some(id) => {
            let clean: String = id
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
                .collect();
            format!("{index:05}_{clean}")
        }
        None => format!("{index:05}"),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

fn load_trace(path: &Path) -> Option<RunTrace> {
    let text = std::fs::read_to_string(path).ok()?;
    match serde_json::from_str(&text) {
        Ok(t) => Some(t),
        Err(e) => {
            log::warn!("ignoring unreadable trace {}: {e}", path.display());
            None
        }
    }
}

fn run_item(runner: &dyn ItemRunner, item: &BenchItem, index: usize, opts: &EvalOptions) -> ItemResult {
    let rotations = match opts.mode {
        EvalMode::Plain => 1,
        EvalMode::Cyclic | EvalMode::CyclicMean => item.options.len(),
    };
    let mut expected = Vec::with_capacity(rotations);
    let mut traces = Vec::with_capacity(rotations);
    for r in 0..rotations {
        let (options, answer) = item.rotated(r);
        expected.push(option_letter(answer));
        let path = opts.traces.as_ref().map(|dir| {
            let stem = trace_stem(item, index);
            match opts.mode {
                EvalMode::Plain => dir.join(format!("{stem}.json")),
                _ => dir.join(format!("{stem}.r{r}.json")),
            }
        });
        let reused = match (&path, opts.resume) {
            (Some(p), true) => load_trace(p),
            _ => None,
        };
        let trace = reused.unwrap_or_else(|| {
            let q = Question {
                text: item.question.clone(),
                options,
                decomposed_targets: None,
            };
            let t = runner.run(item, &q);
            if let Some(err) = &t.error {
                log::warn!("item {index} rotation {r}: {err}");
            }
            if let Some(p) = &path {
                let bytes = serde_json::to_vec_pretty(&t).expect("traces serialize");
                if let Err(e) = write_atomic(p, &bytes) {
                    log::warn!("cannot write trace {}: {e}", p.display());
                }
            }
            t
        });
        traces.push(trace);
    }

    let predicted: Vec<Option<char>> = traces.iter().map(|t| t.answer_letter).collect();
    let right = expected.iter().zip(&predicted).filter(|(e, p)| Some(**e) == **p).count();
    let score = match opts.mode {
        EvalMode::Plain | EvalMode::Cyclic => f64::from(u8::from(right == rotations)),
        EvalMode::CyclicMean => right as f64 / rotations as f64,
    };
    let first = &traces[0];
    let iou_of = |region: Option<crate::imaging::BBox>| {
        item.gt_bbox.map(|gt| region.map_or(0.0, |g| iou(&g, &gt)))
    };
    ItemResult {
        index,
        id: item.id.clone(),
        subset: item.subset.clone(),
        score,
        expected,
        predicted,
        iou: iou_of(first.grounding),
        context_iou: iou_of(first.context_region),
        judge_calls: traces.iter().map(|t| t.calls.judge as f64).sum::<f64>() / rotations as f64,
        errors: traces.iter().filter_map(|t| t.error.clone()).collect(),
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Reduce per-item results, already in item order.
pub fn summarize(mode: EvalMode, items: Vec<ItemResult>) -> EvalReport {
    let n = items.len();
    let mut subsets: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for it in &items {
        if let Some(s) = &it.subset {
            let e = subsets.entry(s.clone()).or_default();
            e.0 += 1;
            e.1 += it.score;
        }
    }
    let ious = || items.iter().filter_map(|i| i.iou);
    let ctx = || items.iter().filter_map(|i| i.context_iou);
    EvalReport {
        n,
        mode,
        accuracy: mean(items.iter().map(|i| i.score)).unwrap_or(0.0),
        subsets: subsets
            .into_iter()
            .map(|(k, (n, s))| (k, SubsetReport { n, accuracy: s / n as f64 }))
            .collect(),
        n_grounded: ious().count(),
        miou: mean(ious()),
        hit_at_05: mean(ious().map(|v| f64::from(u8::from(v >= 0.5)))),
        context_miou: mean(ctx()),
        context_hit_at_05: mean(ctx().map(|v| f64::from(u8::from(v >= 0.5)))),
        mean_judge_calls: mean(items.iter().map(|i| i.judge_calls)).unwrap_or(0.0),
        failed_runs: items.iter().map(|i| i.errors.len()).sum(),
        wall_time_s: None,
        items,
    }
}

/// Run every item and reduce. Errors never abort the sweep: they score the
/// item as wrong and are kept in the report.
pub fn evaluate(items: &[BenchItem], runner: &dyn ItemRunner, opts: &EvalOptions) -> std::io::Result<EvalReport> {
    if let Some(dir) = &opts.traces {
        std::fs::create_dir_all(dir)?;
    }
    let start = Instant::now();
    let indexed: Vec<(usize, &BenchItem)> = items.iter().enumerate().collect();
    let results = par::with_threads(opts.jobs.max(1), || {
        let policy = if opts.jobs > 1 {
            ExecPolicy::Parallel
        } else {
            ExecPolicy::Sequential
        };
        par::map(policy, &indexed, |(i, item)| run_item(runner, item, *i, opts))
    });
    let mut report = summarize(opts.mode, results);
    if opts.record_wall_time {
        report.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::BBox;

    struct Fixed(char);

    impl ItemRunner for Fixed {
        fn run(&self, _: &BenchItem, q: &Question) -> RunTrace {
            RunTrace {
                options: q.options.clone(),
                answer_letter: Some(self.0),
                grounding: BBox::new(0, 0, 10, 10).ok(),
                ..RunTrace::default()
            }
        }
    }

    fn item(answer: usize, n: usize) -> BenchItem {
        BenchItem {
            id: None,
            image_path: "x.png".into(),
            question: "q?".into(),
            options: (0..n).map(|i| format!("o{i}")).collect(),
            answer,
            gt_bbox: BBox::new(0, 0, 10, 10).ok(),
            subset: Some("s".into()),
        }
    }

    #[test]
    fn constant_answerer_fails_cyclic() {
        let items: Vec<BenchItem> = (0..4).map(|a| item(a, 4)).collect();
        let opts = |mode| EvalOptions {
            mode,
            jobs: 1,
            ..EvalOptions::default()
        };
        let plain = evaluate(&items, &Fixed('A'), &opts(EvalMode::Plain)).unwrap();
        assert_eq!(plain.accuracy, 0.25);
        assert_eq!(plain.miou, Some(1.0));
        assert_eq!(plain.subsets["s"].n, 4);
        let cyclic = evaluate(&items, &Fixed('A'), &opts(EvalMode::Cyclic)).unwrap();
        assert_eq!(cyclic.accuracy, 0.0);
        let cmean = evaluate(&items, &Fixed('A'), &opts(EvalMode::CyclicMean)).unwrap();
        assert_eq!(cmean.accuracy, 0.25);
    }

    #[test]
    fn mode_names() {
        assert_eq!("cyclic-mean".parse(), Ok(EvalMode::CyclicMean));
        assert!("cyc".parse::<EvalMode>().is_err());
    }
}
