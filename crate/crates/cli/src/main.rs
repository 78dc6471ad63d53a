//! `lgmd`: offline detection, stimulus generation, closed-loop simulation
//! and throughput measurement.
//!
//! Exit codes: 0 success (or destination reached), 1 runtime failure,
//! 2 collision confirmed by `detect`, 3 collided in `sim`, 4 timeout or out
//! of bounds in `sim`, 64 usage or configuration error.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use lgmd_core::arena::{check_trajectory, run_episodes, EpisodeTrace, Outcome};
use lgmd_core::decision::replay_scheduler;
use lgmd_core::io::{read_frames, write_frames, write_trace, Config, FrameFormat, TraceRow};
use lgmd_core::pipeline::{pipeline_step_with, run_sequence_with};
use lgmd_core::stimulus::StimulusKind;
use lgmd_core::{Exec, FrameResult, LayerState};

const EXIT_FAILURE: u8 = 1;
const EXIT_COLLISION: u8 = 2;
const EXIT_COLLIDED: u8 = 3;
const EXIT_INCOMPLETE: u8 = 4;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "lgmd", version, about = "LGMD looming detector toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the detector over recorded frames and write a trace.
    Detect(DetectArgs),
    /// Generate a synthetic stimulus as numbered PGM frames.
    Stim(StimArgs),
    /// Fly closed-loop episodes in the arena.
    Sim(SimArgs),
    /// Measure pipeline throughput on synthetic frames.
    Bench(BenchArgs),
}

#[derive(Args)]
struct DetectArgs {
    /// Frame directory or single frame file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "pgm")]
    format: FrameFormat,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace CSV output.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct StimArgs {
    #[arg(long)]
    kind: StimulusKind,
    #[arg(long)]
    frames: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimArgs {
    /// Arena description (same key = value format as --config).
    #[arg(long)]
    arena: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace CSV output; batch runs insert the seed before the extension.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Directory for rendered frames; batch runs use one subdirectory per seed.
    #[arg(long)]
    frames_out: Option<PathBuf>,
    /// Run N episodes with seeds seed, seed+1, ...
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    episodes: Option<u64>,
    /// Ignore detector output (negative control).
    #[arg(long)]
    no_detect: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    frames: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Force the single-threaded layer path.
    #[arg(long)]
    sequential: bool,
}

/// Failure carrying its exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: anyhow::Error) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error,
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure {
            code: EXIT_FAILURE,
            error,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Detect(a) => detect(a),
        Command::Stim(a) => stim(a),
        Command::Sim(a) => sim(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("lgmd: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

/// Defaults, then each file in order, then validation.
fn load(files: &[Option<&Path>]) -> Result<Config, Failure> {
    let mut config = Config::default();
    for path in files.iter().flatten() {
        config
            .apply_file(path)
            .context("loading config")
            .map_err(usage)?;
    }
    config.validate().map_err(|e| usage(e.into()))?;
    Ok(config)
}

fn detect(a: DetectArgs) -> Result<u8, Failure> {
    let config = load(&[a.config.as_deref()])?;
    let frames =
        read_frames(&a.input, a.format, config.width, config.height).context("reading frames")?;
    let results =
        run_sequence_with(Exec::default(), &frames, &config.params).context("running detector")?;
    let tasks = replay_scheduler(&results, &config.sim.scheduler, config.sim.fps);

    if let Some(path) = &a.trace {
        let rows: Vec<TraceRow> = results
            .iter()
            .zip(&tasks)
            .enumerate()
            .map(|(i, (r, (ts, _)))| TraceRow::new(i as u64, r, ts.task, None))
            .collect();
        write_trace(path, &rows).context("writing trace")?;
    }

    let first = |pred: fn(&FrameResult) -> bool| {
        results
            .iter()
            .position(pred)
            .map_or_else(|| "none".to_string(), |i| i.to_string())
    };
    let spikes = results.iter().filter(|r| r.spike).count();
    println!("frames: {}", results.len());
    println!("spikes: {spikes}");
    println!("first c_lgmd frame: {}", first(|r| r.c_lgmd));
    println!("first c_ffi frame: {}", first(|r| r.c_ffi));
    if results.iter().any(|r| r.c_lgmd) {
        println!("collision confirmed");
        Ok(EXIT_COLLISION)
    } else {
        println!("no collision detected");
        Ok(0)
    }
}

fn stim(a: StimArgs) -> Result<u8, Failure> {
    let config = load(&[a.config.as_deref()])?;
    let mut spec = config.stimulus_spec(a.kind);
    if let Some(n) = a.frames {
        spec.frames = n;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let frames = spec.generate().map_err(|e| usage(e.into()))?;
    let manifest = format!("# stimulus: {}\n{}", spec.kind, spec_manifest(&spec));
    write_frames(&a.out, &frames, Some(&manifest))
        .with_context(|| format!("writing frames to {}", a.out.display()))?;
    println!("wrote {} frames to {}", frames.len(), a.out.display());
    Ok(0)
}

/// Stimulus settings in config syntax.
fn spec_manifest(s: &lgmd_core::stimulus::StimulusSpec) -> String {
    format!(
        "width = {}\nheight = {}\nstim_frames = {}\nstim_object = {}\nstim_background = {}\n\
         stim_start_size = {}\nstim_end_size = {}\nstim_object_size = {}\nstim_speed = {}\n\
         stim_period = {}\nstim_drift = {}\nstim_pan = {}\nstim_block = {}\nstim_lead_in = {}\n\
         stim_seed = {}\n",
        s.width,
        s.height,
        s.frames,
        s.object_luminance,
        s.background_luminance,
        s.start_size,
        s.end_size,
        s.object_size,
        s.speed,
        s.period,
        s.drift,
        s.pan,
        s.block,
        s.lead_in,
        s.seed
    )
}

fn with_seed(path: &Path, seed: u64) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_seed{seed}.{ext}"),
        None => format!("{stem}_seed{seed}"),
    };
    path.with_file_name(name)
}

fn sim(a: SimArgs) -> Result<u8, Failure> {
    let config = load(&[a.arena.as_deref(), a.config.as_deref()])?;
    let mut sim = config.sim;
    sim.detect &= !a.no_detect;
    sim.keep_frames = a.frames_out.is_some();
    let batch = a.episodes.is_some();
    let seeds: Vec<u64> = (0..a.episodes.unwrap_or(1)).map(|i| a.seed + i).collect();
    let traces = run_episodes(Exec::default(), &config.arena, &config.params, &sim, &seeds);

    let mut worst = 0;
    for trace in traces {
        let trace = trace.context("running episode")?;
        let report = check_trajectory(&trace, &config.arena, sim.fps);
        if let Some(path) = &a.trace {
            let path = if batch {
                with_seed(path, trace.seed)
            } else {
                path.clone()
            };
            write_trace(&path, &episode_rows(&trace)).context("writing trace")?;
            let report_path = path.with_extension("report.txt");
            std::fs::write(&report_path, format!("seed = {}\n{report}\n", trace.seed))
                .with_context(|| format!("writing {}", report_path.display()))?;
        }
        if let Some(dir) = &a.frames_out {
            let dir = if batch {
                dir.join(format!("seed_{}", trace.seed))
            } else {
                dir.clone()
            };
            write_frames(&dir, &trace.frames, None).context("writing frames")?;
        }
        println!("seed = {}", trace.seed);
        println!("start_offset = {:.4}", trace.start_offset);
        println!("{report}");
        let code = match trace.outcome {
            Outcome::Reached => 0,
            Outcome::Collided => EXIT_COLLIDED,
            Outcome::Timeout | Outcome::OutOfBounds => EXIT_INCOMPLETE,
        };
        // collisions dominate incomplete runs
        worst = match (worst, code) {
            (EXIT_COLLIDED, _) | (_, EXIT_COLLIDED) => EXIT_COLLIDED,
            (w, c) => w.max(c),
        };
    }
    Ok(worst)
}

fn episode_rows(trace: &EpisodeTrace) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let p = r.pose.position;
            TraceRow::new(i as u64, &r.result, r.task.task, Some((p.x, p.y)))
        })
        .collect()
}

fn bench(a: BenchArgs) -> Result<u8, Failure> {
    let config = load(&[a.config.as_deref()])?;
    let exec = if a.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    let source = config
        .stimulus_spec(StimulusKind::Looming)
        .generate()
        .map_err(|e| usage(e.into()))?;
    let n = a.frames as usize;
    let mut state = LayerState::for_params(&config.params, config.width, config.height);
    let mut hasher = DefaultHasher::new();

    let start = Instant::now();
    for i in 0..n {
        let r = pipeline_step_with(exec, &mut state, &source[i % source.len()], &config.params)
            .context("pipeline step")?;
        (r.k_raw.to_bits(), r.kappa.to_bits(), r.ffi.to_bits()).hash(&mut hasher);
        (r.spike, r.c_lgmd, r.c_ffi).hash(&mut hasher);
    }
    let elapsed = start.elapsed().as_secs_f64();

    println!("frames: {n}");
    println!("size: {}x{}", config.width, config.height);
    println!(
        "exec: {}",
        if exec.is_parallel() {
            "parallel"
        } else {
            "sequential"
        }
    );
    println!("elapsed_s: {elapsed:.6}");
    println!("fps: {:.1}", n as f64 / elapsed);
    println!("us_per_frame: {:.2}", elapsed * 1e6 / n as f64);
    println!("digest: {:016x}", hasher.finish());
    Ok(0)
}
