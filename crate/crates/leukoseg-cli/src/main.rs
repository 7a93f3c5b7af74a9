//! Batch command-line frontend for the white-blood-cell segmentation
//! pipeline.
//!
//! Subcommands: `segment` (run the pipeline and write artifacts per
//! image), `synth` (generate a synthetic corpus with ground truth), `eval`
//! (score predictions against truth), `corpus` (pipeline + evaluation over
//! a whole corpus), and `dump-stages` (write every intermediate of one
//! image). Exit codes are stable: 0 all-success, 1 partial or failed
//! processing, 2 usage/config errors. Set `LEUKOSEG_LOG=debug` (or
//! `info`, `trace`) for verbose logging.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;

use leukoseg::error::Error;
use leukoseg::eval::{evaluate_label_maps, run_corpus_from_dir, run_corpus_from_spec, PerImageEval};
use leukoseg::pipeline::{
    dump_stages, render_outputs, run_pipeline_traced, EmitKind, PipelineConfig,
};
use leukoseg::raster;
use leukoseg::synth::{generate_slide, CorpusSpec};

const EXIT_OK: u8 = 0;
const EXIT_PROCESSING: u8 = 1;
const EXIT_USAGE: u8 = 2;

/// Unsupervised instance segmentation of white blood cells in stained
/// microscopy images.
#[derive(Parser)]
#[command(name = "leukoseg", version, about, after_help = "Environment:\n  LEUKOSEG_LOG   log filter (error, warn, info, debug, trace); default warn")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment slide images and write the selected artifacts per image.
    Segment(SegmentArgs),
    /// Generate a synthetic corpus: images plus exact ground-truth files.
    Synth(SynthArgs),
    /// Score predicted instance label maps against ground-truth label maps.
    Eval(EvalArgs),
    /// Run the pipeline over a corpus and aggregate IoU statistics.
    Corpus(CorpusArgs),
    /// Write every pipeline intermediate of one image as numbered PNGs.
    DumpStages(DumpStagesArgs),
}

#[derive(Args)]
struct SegmentArgs {
    /// Pipeline config JSON; command-line flags override file values,
    /// file values override built-in defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Worker threads for the per-image fan-out (default: logical cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Comma-separated artifacts to write: labelmap, overlay, contours,
    /// crops, masks, metrics-json.
    #[arg(long, value_name = "LIST", value_delimiter = ',', value_parser = parse_emit_kind)]
    emit: Option<Vec<EmitKind>>,
    /// Re-process inputs whose outputs already exist.
    #[arg(long)]
    force: bool,
    /// Record per-stage wall-clock times in the metrics JSON.
    #[arg(long)]
    timings: bool,
    /// Input images (PNG, PPM, or PGM).
    #[arg(required = true, value_name = "INPUTS")]
    inputs: Vec<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Corpus spec JSON ({} for the default 50-slide corpus).
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    /// Output directory for images and truth files.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted label map: a PNG file, or a directory of `{id}_labels.png`.
    #[arg(long, value_name = "PATH")]
    pred: PathBuf,
    /// Ground-truth label map: a PNG file, or a directory of
    /// `{id}_instances.png`.
    #[arg(long, value_name = "PATH")]
    truth: PathBuf,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["spec", "dir"])))]
struct CorpusArgs {
    /// Generate the corpus in memory from this spec JSON.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// Evaluate a corpus stored on disk (images + truth files).
    #[arg(long, value_name = "DIR")]
    dir: Option<PathBuf>,
    /// Pipeline config JSON.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory for per-slide reports and summary.json.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Worker threads for the per-slide fan-out (default: logical cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Re-evaluate slides whose report files already exist.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct DumpStagesArgs {
    /// Input image.
    #[arg(value_name = "IMG")]
    image: PathBuf,
    /// Pipeline config JSON.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

fn parse_emit_kind(s: &str) -> Result<EmitKind, String> {
    s.parse::<EmitKind>().map_err(|e| e.to_string())
}

/// Usage/config errors exit 2; everything else is a processing failure.
fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidSpec(_) | Error::InvalidPercentiles { .. } => {
            EXIT_USAGE
        }
        _ => EXIT_PROCESSING,
    }
}

fn fail(e: &Error) -> u8 {
    eprintln!("leukoseg: {e}");
    exit_code_for(e)
}

#[cfg(feature = "parallel")]
fn configure_jobs(jobs: Option<usize>) {
    if let Some(n) = jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized, --jobs ignored: {e}");
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_jobs(jobs: Option<usize>) {
    if jobs.is_some() {
        log::warn!("built without the `parallel` feature; --jobs has no effect");
    }
}

#[cfg(feature = "parallel")]
fn map_inputs<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_inputs<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    items.iter().map(f).collect()
}

fn load_pipeline_config(path: Option<&Path>) -> leukoseg::Result<PipelineConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))
        }
        None => Ok(PipelineConfig::default()),
    }
}

fn create_dir(path: &Path) -> leukoseg::Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn source_id_of(input: &Path) -> String {
    input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "slide".to_string())
}

fn print_json<T: Serialize>(value: &T) {
    match serde_json::to_string_pretty(value) {
        Ok(text) => println!("{text}"),
        Err(e) => log::error!("could not serialize report: {e}"),
    }
}

// ---------------------------------------------------------------------------
// segment
// ---------------------------------------------------------------------------

fn cmd_segment(args: SegmentArgs) -> u8 {
    configure_jobs(args.jobs);
    let mut cfg = match load_pipeline_config(args.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    if let Some(kinds) = &args.emit {
        cfg.emit = kinds.iter().copied().collect();
    }
    if let Err(e) = cfg.validate() {
        return fail(&e);
    }
    if let Err(e) = create_dir(&args.out) {
        return fail(&e);
    }

    let process = |input: &PathBuf| -> Result<(), String> {
        let id = source_id_of(input);
        let marker = args.out.join(format!("{id}_metrics.json"));
        if !args.force && marker.is_file() {
            log::info!("{id}: outputs already exist, skipping (--force to redo)");
            return Ok(());
        }
        let run = || -> leukoseg::Result<()> {
            let img = raster::load_image(input)?;
            let trace = run_pipeline_traced(&img, &id, &cfg)?;
            let timings = args.timings.then(|| trace.timings_ms.clone());
            let written = render_outputs(&img, &trace.instances, &args.out, &cfg, timings)?;
            log::info!(
                "{id}: {} instance(s), {} file(s) written",
                trace.instances.instances.len(),
                written.len()
            );
            Ok(())
        };
        run().map_err(|e| e.to_string())
    };

    let results = map_inputs(&args.inputs, process);
    let mut failed = 0usize;
    for (input, outcome) in args.inputs.iter().zip(results) {
        if let Err(message) = outcome {
            eprintln!("leukoseg: {}: {message}", input.display());
            failed += 1;
        }
    }
    if failed > 0 {
        eprintln!(
            "leukoseg: {failed} of {} input(s) failed",
            args.inputs.len()
        );
        EXIT_PROCESSING
    } else {
        EXIT_OK
    }
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

fn cmd_synth(args: SynthArgs) -> u8 {
    let spec: CorpusSpec = match fs::read_to_string(&args.spec) {
        Ok(text) => match serde_json::from_str(&text) {
            Ok(spec) => spec,
            Err(e) => {
                return fail(&Error::InvalidSpec(format!(
                    "{}: {e}",
                    args.spec.display()
                )))
            }
        },
        Err(e) => {
            return fail(&Error::Io {
                path: args.spec.clone(),
                source: e,
            })
        }
    };
    let slides = match spec.slides() {
        Ok(slides) => slides,
        Err(e) => return fail(&e),
    };
    if let Err(e) = create_dir(&args.out) {
        return fail(&e);
    }
    let mut failed = 0usize;
    for (id, slide_cfg) in &slides {
        let write = || -> leukoseg::Result<()> {
            let (img, truth) = generate_slide(slide_cfg)?;
            raster::save_image(&args.out.join(format!("{id}.png")), &img)?;
            truth.save(&args.out, id)?;
            Ok(())
        };
        if let Err(e) = write() {
            eprintln!("leukoseg: {id}: {e}");
            failed += 1;
        }
    }
    println!(
        "wrote {} of {} slide(s) to {}",
        slides.len() - failed,
        slides.len(),
        args.out.display()
    );
    if failed > 0 {
        EXIT_PROCESSING
    } else {
        EXIT_OK
    }
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

/// Aggregate printed by directory-mode `eval`.
#[derive(Serialize)]
struct EvalAggregate {
    n_images: usize,
    mean_semantic_iou: f64,
    mean_instance_iou: f64,
    images: Vec<PerImageEval>,
}

fn eval_pair(pred: &Path, truth: &Path) -> leukoseg::Result<leukoseg::eval::EvalReport> {
    let pred_map = raster::load_label_map(pred)?;
    let truth_map = raster::load_label_map(truth)?;
    evaluate_label_maps(&pred_map, &truth_map)
}

fn cmd_eval(args: EvalArgs) -> u8 {
    if args.pred.is_file() && args.truth.is_file() {
        return match eval_pair(&args.pred, &args.truth) {
            Ok(report) => {
                print_json(&report);
                EXIT_OK
            }
            Err(e) => fail(&e),
        };
    }
    if !(args.pred.is_dir() && args.truth.is_dir()) {
        eprintln!(
            "leukoseg: --pred and --truth must both be files or both be directories"
        );
        return EXIT_USAGE;
    }

    let entries = match fs::read_dir(&args.truth) {
        Ok(entries) => entries,
        Err(e) => {
            return fail(&Error::Io {
                path: args.truth.clone(),
                source: e,
            })
        }
    };
    let mut ids: Vec<String> = entries
        .filter_map(|entry| {
            let name = entry.ok()?.file_name();
            let name = name.to_string_lossy();
            name.strip_suffix("_instances.png").map(str::to_string)
        })
        .collect();
    ids.sort();
    if ids.is_empty() {
        eprintln!(
            "leukoseg: no `*_instances.png` truth files in {}",
            args.truth.display()
        );
        return EXIT_PROCESSING;
    }

    let mut images = Vec::new();
    let mut failed = 0usize;
    for id in ids {
        let pred = args.pred.join(format!("{id}_labels.png"));
        let truth = args.truth.join(format!("{id}_instances.png"));
        match eval_pair(&pred, &truth) {
            Ok(report) => images.push(PerImageEval {
                source_id: id,
                report,
            }),
            Err(e) => {
                eprintln!("leukoseg: {id}: {e}");
                failed += 1;
            }
        }
    }
    let mean = |f: &dyn Fn(&PerImageEval) -> f64| {
        if images.is_empty() {
            0.0
        } else {
            images.iter().map(|i| f(i)).sum::<f64>() / images.len() as f64
        }
    };
    print_json(&EvalAggregate {
        n_images: images.len(),
        mean_semantic_iou: mean(&|i| i.report.semantic_iou),
        mean_instance_iou: mean(&|i| i.report.mean_matched_instance_iou),
        images,
    });
    if failed > 0 {
        EXIT_PROCESSING
    } else {
        EXIT_OK
    }
}

// ---------------------------------------------------------------------------
// corpus
// ---------------------------------------------------------------------------

fn cmd_corpus(args: CorpusArgs) -> u8 {
    configure_jobs(args.jobs);
    let cfg = match load_pipeline_config(args.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    let summary = if let Some(spec_path) = &args.spec {
        let spec: CorpusSpec = match fs::read_to_string(spec_path) {
            Ok(text) => match serde_json::from_str(&text) {
                Ok(spec) => spec,
                Err(e) => {
                    return fail(&Error::InvalidSpec(format!(
                        "{}: {e}",
                        spec_path.display()
                    )))
                }
            },
            Err(e) => {
                return fail(&Error::Io {
                    path: spec_path.clone(),
                    source: e,
                })
            }
        };
        run_corpus_from_spec(&spec, &cfg, &args.out, args.force)
    } else {
        let dir = args.dir.as_deref().expect("clap group guarantees a source");
        run_corpus_from_dir(dir, &cfg, &args.out, args.force)
    };
    match summary {
        Ok(summary) => {
            print_json(&summary);
            if summary.failures.is_empty() {
                EXIT_OK
            } else {
                EXIT_PROCESSING
            }
        }
        Err(e) => fail(&e),
    }
}

// ---------------------------------------------------------------------------
// dump-stages
// ---------------------------------------------------------------------------

fn cmd_dump_stages(args: DumpStagesArgs) -> u8 {
    let cfg = match load_pipeline_config(args.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    if let Err(e) = cfg.validate() {
        return fail(&e);
    }
    if let Err(e) = create_dir(&args.out) {
        return fail(&e);
    }
    let run = || -> leukoseg::Result<usize> {
        let img = raster::load_image(&args.image)?;
        let id = source_id_of(&args.image);
        let (_, written) = dump_stages(&img, &id, &cfg, &args.out)?;
        Ok(written.len())
    };
    match run() {
        Ok(n) => {
            println!("wrote {n} stage image(s) to {}", args.out.display());
            EXIT_OK
        }
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new()
            .filter_or("LEUKOSEG_LOG", "warn")
            .write_style("LEUKOSEG_LOG_STYLE"),
    )
    .format_timestamp(None)
    .init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Segment(args) => cmd_segment(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Corpus(args) => cmd_corpus(args),
        Command::DumpStages(args) => cmd_dump_stages(args),
    };
    ExitCode::from(code)
}
