use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use deepscan::config::TopK;
use deepscan::experts::conformance::run_conformance;
use deepscan::experts::remote::RemoteExperts;
use deepscan::harness::{
    evaluate, load_bench, render_overlay, write_synth_set, EvalMode, EvalOptions, ExpertsSource, ExpertsSpec,
    PipelineRunner, EXPERT_URL_ENV,
};
use deepscan::imaging::io::{read_png, write_png};
use deepscan::par::ExecPolicy;
use deepscan::synth::{DecoyParams, QuestionKind, SceneParams};
use deepscan::{run_pipeline, PipelineConfig, Question};

#[derive(Parser)]
#[command(name = "deepscan", version, about = "Find small visual evidence and answer questions about it")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    /// TOML config; unset keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Evidence items sent to the judge: a number or "inf".
    #[arg(long)]
    k: Option<TopK>,
    /// Zoom-out scale.
    #[arg(long)]
    scale_s: Option<f64>,
    /// Explore patches one at a time.
    #[arg(long)]
    sequential: bool,
}

impl PipelineArgs {
    fn load(&self) -> Result<PipelineConfig, deepscan::config::ConfigError> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(k) = self.k {
            cfg.scan.k = k;
        }
        if let Some(s) = self.scale_s {
            cfg.refocus.scale_s = s;
        }
        if self.sequential {
            cfg.exec = ExecPolicy::Sequential;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Answer one question about one image.
    Run {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        question: String,
        /// Answer option, repeat for each (2 to 4).
        #[arg(long = "option")]
        options: Vec<String>,
        /// oracle:<spec path or dir> | remote:<url> | replay:<fixture dir>
        #[arg(long)]
        experts: ExpertsSpec,
        /// Trace output; defaults to <image stem>.trace.json beside the image.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Also write the image with evidence, view and grounding boxes drawn.
        #[arg(long)]
        overlay: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Evaluate a benchmark file and write a report.
    Eval {
        #[arg(long)]
        bench: PathBuf,
        #[arg(long, default_value = "plain")]
        mode: EvalMode,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Report path; stdout when unset.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for per-run traces.
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Skip runs whose trace already exists.
        #[arg(long, requires = "traces")]
        resume: bool,
        /// Defaults to oracle specs beside the bench file.
        #[arg(long)]
        experts: Option<ExpertsSpec>,
        /// Include wall time in the report.
        #[arg(long)]
        timings: bool,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Synthetic scenes.
    Synth {
        #[command(subcommand)]
        command: SynthCommand,
    },
    /// Probe an expert server for wire-protocol conformance.
    ServeCheck {
        #[arg(long, env = EXPERT_URL_ENV)]
        url: String,
        #[arg(long, default_value_t = 60)]
        timeout_s: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Attribute,
    Spatial,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Write scene PNGs, their spec JSON and a bench.jsonl.
    Generate {
        #[arg(long, default_value_t = 13)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "attribute")]
        kind: KindArg,
        #[arg(long, default_value_t = 1024)]
        size: u32,
        #[arg(long, default_value_t = 4)]
        distractors: usize,
        /// Target box area over canvas area.
        #[arg(long, default_value_t = 0.0005)]
        ratio: f64,
        /// Put a larger look-alike right next to the target.
        #[arg(long)]
        decoy: bool,
    },
}

/// Bad configuration; reported like a usage error.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn config(args: &PipelineArgs) -> Result<PipelineConfig> {
    args.load().map_err(|e| UsageError(e.to_string()).into())
}

fn trace_path(image: &Path) -> PathBuf {
    let stem = image.file_stem().unwrap_or_default().to_string_lossy();
    image.with_file_name(format!("{stem}.trace.json"))
}

fn cmd_run(
    image_path: &Path,
    question: String,
    options: Vec<String>,
    experts: &ExpertsSpec,
    trace: Option<PathBuf>,
    overlay: Option<PathBuf>,
    pipeline: &PipelineArgs,
) -> Result<()> {
    let cfg = config(pipeline)?;
    let q = if options.is_empty() {
        Question::new(question)
    } else {
        Question::with_options(question, options)
    }
    .map_err(|e| UsageError(e.to_string()))?;
    let image = read_png(image_path).with_context(|| format!("reading {}", image_path.display()))?;
    let bundle = ExpertsSource::open(experts)?.bundle_for(image_path)?;
    let trace_out = trace.unwrap_or_else(|| trace_path(image_path));
    let (answer, run_trace, err) = match run_pipeline(&image, &q, &bundle, &cfg) {
        Ok(out) => (Some(out.answer), out.trace, None),
        Err(f) => (None, *f.trace, Some(f.error)),
    };
    std::fs::write(&trace_out, serde_json::to_vec_pretty(&run_trace)?)
        .with_context(|| format!("writing {}", trace_out.display()))?;
    if let Some(p) = overlay {
        write_png(&render_overlay(&image, &run_trace), &p).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(e) = err {
        bail!("pipeline failed: {e} (partial trace in {})", trace_out.display());
    }
    println!("{}", answer.unwrap_or_default());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    bench: &Path,
    mode: EvalMode,
    jobs: usize,
    out: Option<PathBuf>,
    traces: Option<PathBuf>,
    resume: bool,
    experts: Option<ExpertsSpec>,
    timings: bool,
    pipeline: &PipelineArgs,
) -> Result<()> {
    let cfg = config(pipeline)?;
    if jobs == 0 {
        return Err(UsageError("--jobs must be at least 1".into()).into());
    }
    let items = load_bench(bench)?;
    let experts = experts.unwrap_or_else(|| ExpertsSpec::Oracle(bench.parent().unwrap_or(Path::new(".")).to_path_buf()));
    let runner = PipelineRunner {
        source: ExpertsSource::open(&experts)?,
        config: cfg,
    };
    let opts = EvalOptions {
        mode,
        jobs,
        traces,
        resume,
        record_wall_time: timings,
    };
    let start = Instant::now();
    let report = evaluate(&items, &runner, &opts)?;
    log::info!("evaluated {} items in {:.2?}", report.n, start.elapsed());
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    match out {
        Some(p) => std::fs::write(&p, json).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{json}"),
    }
    eprintln!(
        "accuracy {:.4} over {} items ({} failed runs)",
        report.accuracy, report.n, report.failed_runs
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            image,
            question,
            options,
            experts,
            trace,
            overlay,
            pipeline,
        } => cmd_run(&image, question, options, &experts, trace, overlay, &pipeline),
        Command::Eval {
            bench,
            mode,
            jobs,
            out,
            traces,
            resume,
            experts,
            timings,
            pipeline,
        } => cmd_eval(&bench, mode, jobs, out, traces, resume, experts, timings, &pipeline),
        Command::Synth {
            command:
                SynthCommand::Generate {
                    seed,
                    count,
                    out,
                    kind,
                    size,
                    distractors,
                    ratio,
                    decoy,
                },
        } => {
            let params = SceneParams {
                width: size,
                height: size,
                n_distractors: distractors,
                target_area_ratio: ratio,
                kind: match kind {
                    KindArg::Attribute => QuestionKind::Attribute,
                    KindArg::Spatial => QuestionKind::Spatial,
                },
                decoy: decoy.then(DecoyParams::default),
            };
            let items = write_synth_set(&out, seed, count, &params)?;
            eprintln!("wrote {} scenes to {}", items.len(), out.display());
            Ok(())
        }
        Command::ServeCheck { url, timeout_s } => {
            let client = RemoteExperts::new(&url, std::time::Duration::from_secs(timeout_s));
            let report = run_conformance(&client);
            for c in &report.checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if !report.passed() {
                bail!("{url} failed conformance");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
