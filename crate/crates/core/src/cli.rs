//! The `pds` experiment runner.
//!
//! Exit status: 0 success, 2 bad input (config, missing file, bad
//! parameter), 3 a sampler diverged.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_shape, ExperimentConfig, SamplerSpec, ScheduleSpec};
use crate::error::{PdsError, Result};
use crate::filters::{
    build_parametric_r, build_space_a, build_statistical_r, ParametricFilterSpec, StatisticalFilterSpec,
};
use crate::grid::{load_grid, read_grid_header, save_grid, Field, GRID_MAGIC};
use crate::metrics::{empirical_moments, gaussian_w2, mean_error, spectral_error, Covariance, MetricMode, Moments};
use crate::sampler::Ensemble;
use crate::targets::{AnalyticTarget, Target};

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "pds", version, about = "Preconditioned Langevin sampling experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every configured sampler and write per-checkpoint metrics.
    Sample(RunArgs),
    /// Build a filter file.
    #[command(subcommand)]
    BuildFilter(FilterCommand),
    /// Find the iterations each sampler needs to reach a spectral-error threshold.
    Benchmark(RunArgs),
    /// Print the header of a grid file.
    Info {
        file: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `out_dir` from the config.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum FilterCommand {
    /// Two-level low-pass frequency filter.
    Parametric {
        #[arg(long, default_value_t = 1)]
        channels: usize,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "r_parametric.pdsgrid")]
        name: String,
    },
    /// Frequency filter from the mean spectrum of sample grids.
    Statistical {
        #[arg(long)]
        samples_dir: PathBuf,
        #[arg(long, default_value_t = 5.0)]
        alpha: f64,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "r_statistical.pdsgrid")]
        name: String,
    },
    /// Space filter from the mean of nonnegative sample grids.
    Space {
        #[arg(long)]
        samples_dir: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "a_space.pdsgrid")]
        name: String,
    },
}

/// Parse `std::env::args`, run, and map errors to exit codes.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match with_thread_cap(|| execute(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn exit_code(e: &PdsError) -> u8 {
    match e {
        PdsError::Diverged { .. } | PdsError::NonFiniteScore { .. } => EXIT_DIVERGED,
        _ => EXIT_INPUT,
    }
}

/// Runs `f` on a pool capped at `PDS_THREADS` threads when that is set and
/// nonzero.
fn with_thread_cap<T: Send>(f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let cap = match std::env::var("PDS_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| PdsError::InvalidParameter(format!("PDS_THREADS must be an integer, got `{v}`")))?,
        Err(_) => 0,
    };
    if cap == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cap)
        .build()
        .map_err(|e| PdsError::InvalidParameter(format!("thread pool: {e}")))?
        .install(f)
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Sample(args) => cmd_sample(&args.config, args.out_dir.as_deref()),
        Command::Benchmark(args) => cmd_benchmark(&args.config, args.out_dir.as_deref()),
        Command::BuildFilter(f) => cmd_build_filter(f).map(|line| println!("{line}")),
        Command::Info { file } => {
            let shape = read_grid_header(fs::File::open(file)?)?;
            println!(
                "{}: {} {} ({} values)",
                file.display(),
                String::from_utf8_lossy(GRID_MAGIC).trim_end(),
                shape,
                shape.len()
            );
            Ok(())
        }
    }
}

fn out_dir(config: &ExperimentConfig, flag: Option<&Path>) -> Result<PathBuf> {
    let dir = flag
        .map(Path::to_path_buf)
        .or_else(|| config.out_dir.clone())
        .ok_or_else(|| PdsError::Config {
            line: 0,
            message: "no output directory: set `out_dir` or pass --out-dir".into(),
        })?;
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Sampler names become directory names.
fn check_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '+'));
    if ok {
        Ok(())
    } else {
        Err(PdsError::Config {
            line: 0,
            message: format!("sampler name `{name}` may only use [A-Za-z0-9_+-]"),
        })
    }
}

fn in_sampler<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        PdsError::Diverged { iteration, sup_norm } => {
            eprintln!("sampler `{name}` diverged at iteration {iteration}");
            PdsError::Diverged { iteration, sup_norm }
        }
        PdsError::NonFiniteScore { iteration } => {
            eprintln!("sampler `{name}` produced a non-finite score");
            PdsError::NonFiniteScore { iteration }
        }
        other => other,
    })
}

/// Reference moments of the target in the requested mode.
fn reference_moments(target: &Target, mode: MetricMode) -> Result<Moments> {
    let exact = target.exact_moments();
    Ok(match (target, mode, &exact.covariance) {
        (Target::Grf(g), MetricMode::Dense, _) => Moments {
            mean: exact.mean,
            covariance: Covariance::Dense(g.dense_covariance()?),
        },
        (_, MetricMode::Spectral, Covariance::Dense(_)) => {
            return Err(PdsError::Config {
                line: 0,
                message: format!("metric_mode = spectral needs a grf target, not {}", target.kind()),
            })
        }
        _ => exact,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Checkpoint iterations: every `stride`, plus the last.
fn checkpoints(iterations: usize, stride: usize) -> Vec<usize> {
    let mut out: Vec<usize> = if stride == 0 {
        Vec::new()
    } else {
        (1..=iterations / stride).map(|k| k * stride).collect()
    };
    if out.last() != Some(&iterations) {
        out.push(iterations);
    }
    out
}

pub fn cmd_sample(config_path: &Path, out_flag: Option<&Path>) -> Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    for s in &config.samplers {
        check_name(&s.name)?;
    }
    let target = config.target.build()?;
    let mode = config.metric_mode();
    let reference = reference_moments(&target, mode)?;
    let grf = match &target {
        Target::Grf(g) => Some(g),
        _ => None,
    };
    let built = config
        .samplers
        .iter()
        .map(|s| Ok((s, s.build(&target, config.seed, config.checkpoint_stride)?)))
        .collect::<Result<Vec<_>>>()?;
    let dir = out_dir(&config, out_flag)?;

    let mut metrics = String::from("sampler,iteration,w2,spectral_error,mean_err\n");
    let mut timing = String::from("sampler,iteration,wall_time_s\n");
    for (spec, sampler) in &built {
        let start = Instant::now();
        let mut ensemble = Ensemble::new(&target, sampler, config.chains)?;
        for t in checkpoints(spec.iterations, config.checkpoint_stride) {
            in_sampler(&spec.name, ensemble.advance_to(t))?;
            let states = ensemble.states();
            let summary = empirical_moments(&states, mode)?;
            let w2 = gaussian_w2(&summary.moments(), &reference)?;
            let se = grf.map(|g| spectral_error(&states, g)).transpose()?;
            let me = mean_error(&states, &reference.mean)?;
            writeln!(metrics, "{},{t},{w2},{},{me}", spec.name, fmt_opt(se)).unwrap();
            writeln!(timing, "{},{t},{}", spec.name, start.elapsed().as_secs_f64()).unwrap();
        }
        let sub = dir.join(&spec.name);
        fs::create_dir_all(&sub)?;
        for (i, x) in ensemble.states().iter().enumerate() {
            save_grid(sub.join(format!("final_{i:04}.pdsgrid")), x)?;
        }
    }
    fs::write(dir.join("metrics.csv"), metrics)?;
    fs::write(dir.join("timing.csv"), timing)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub sampler: String,
    pub t_needed: Option<usize>,
    pub speedup: Option<f64>,
}

/// Smallest scanned `T` at which the ensemble spectral error is at or below
/// the threshold, plus the error trace.
fn scan(
    spec: &SamplerSpec,
    config: &ExperimentConfig,
    target: &Target,
) -> Result<(Option<usize>, Vec<(usize, f64)>)> {
    let Target::Grf(grf) = target else {
        return Err(PdsError::Config {
            line: 0,
            message: format!("benchmark needs a grf target, not {}", target.kind()),
        });
    };
    let bench = config.benchmark.as_ref().expect("checked by caller");
    if spec.schedule != ScheduleSpec::Constant || spec.denoise_final {
        return Err(PdsError::Config {
            line: 0,
            message: format!(
                "benchmark sampler `{}` must use a constant schedule without final denoising",
                spec.name
            ),
        });
    }
    // With a constant schedule a run of T steps is the T-step prefix of a
    // longer run, so one ensemble serves every scanned T.
    let mut long = spec.clone();
    long.iterations = bench.max_iterations;
    let sampler = long.build(target, config.seed, 0)?;
    let mut ensemble = Ensemble::new(target, &sampler, config.chains)?;
    let mut trace = Vec::new();
    let mut t = 0;
    while t + bench.stride <= bench.max_iterations {
        t += bench.stride;
        in_sampler(&spec.name, ensemble.advance_to(t))?;
        let err = spectral_error(&ensemble.states(), grf)?;
        trace.push((t, err));
        if err <= bench.threshold {
            return Ok((Some(t), trace));
        }
    }
    Ok((None, trace))
}

pub fn run_benchmark(config: &ExperimentConfig) -> Result<(Vec<BenchmarkRow>, Vec<(String, usize, f64)>)> {
    let bench = config.benchmark.as_ref().ok_or_else(|| PdsError::Config {
        line: 0,
        message: "benchmark.threshold and benchmark.max_iterations are required".into(),
    })?;
    let target = config.target.build()?;
    let mut needed = Vec::new();
    let mut trace = Vec::new();
    for spec in &config.samplers {
        check_name(&spec.name)?;
        let (t, tr) = scan(spec, config, &target)?;
        trace.extend(tr.into_iter().map(|(i, e)| (spec.name.clone(), i, e)));
        needed.push((spec.name.clone(), t));
    }
    let base = needed
        .iter()
        .find(|(n, _)| *n == bench.baseline)
        .and_then(|(_, t)| *t);
    let rows = needed
        .into_iter()
        .map(|(sampler, t_needed)| BenchmarkRow {
            speedup: match (base, t_needed) {
                (Some(b), Some(t)) => Some(b as f64 / t as f64),
                _ => None,
            },
            sampler,
            t_needed,
        })
        .collect();
    Ok((rows, trace))
}

pub fn cmd_benchmark(config_path: &Path, out_flag: Option<&Path>) -> Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    let (rows, trace) = run_benchmark(&config)?;
    let dir = out_dir(&config, out_flag)?;
    let mut summary = String::from("sampler,T_needed,speedup_vs_vanilla\n");
    for r in &rows {
        let t = r.t_needed.map(|t| t.to_string()).unwrap_or_else(|| "not reached".into());
        writeln!(summary, "{},{t},{}", r.sampler, fmt_opt(r.speedup)).unwrap();
    }
    let mut tr = String::from("sampler,iteration,spectral_error\n");
    for (s, i, e) in &trace {
        writeln!(tr, "{s},{i},{e}").unwrap();
    }
    fs::write(dir.join("benchmark.csv"), &summary)?;
    fs::write(dir.join("benchmark_trace.csv"), tr)?;
    print!("{summary}");
    Ok(())
}

/// `*.pdsgrid` files of a directory in name order, at most `limit`.
pub fn load_samples(dir: &Path, limit: Option<usize>) -> Result<Vec<Field>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "pdsgrid"));
    paths.sort();
    if let Some(n) = limit {
        paths.truncate(n);
    }
    if paths.is_empty() {
        return Err(PdsError::EmptySamples);
    }
    paths.iter().map(load_grid).collect()
}

fn write_filter(dir: &Path, name: &str, f: &Field) -> Result<String> {
    if name.contains(['/', '\\']) || name.starts_with('.') {
        return Err(PdsError::InvalidParameter(format!("output name `{name}` must be a plain file name")));
    }
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    save_grid(&path, f)?;
    Ok(format!(
        "wrote {}: shape {} min {} max {}",
        path.display(),
        f.shape(),
        f.min(),
        f.max()
    ))
}

/// Builds and writes the filter; returns the summary line.
pub fn cmd_build_filter(cmd: &FilterCommand) -> Result<String> {
    match cmd {
        FilterCommand::Parametric {
            channels,
            height,
            width,
            r,
            lambda,
            out_dir,
            name,
        } => {
            let shape = parse_shape(&format!("{channels}x{height}x{width}")).ok_or_else(|| {
                PdsError::InvalidShape {
                    channels: *channels,
                    height: *height,
                    width: *width,
                }
            })?;
            let f = build_parametric_r(shape, &ParametricFilterSpec::new(*r, *lambda)?);
            write_filter(out_dir, name, &f)
        }
        FilterCommand::Statistical {
            samples_dir,
            alpha,
            count,
            out_dir,
            name,
        } => {
            if *count == 0 {
                return Err(PdsError::InvalidParameter("count must be >= 1".into()));
            }
            let samples = load_samples(samples_dir, Some(*count))?;
            let f = build_statistical_r(&samples, &StatisticalFilterSpec::new(*alpha)?)?;
            write_filter(out_dir, name, &f)
        }
        FilterCommand::Space {
            samples_dir,
            out_dir,
            name,
        } => {
            let samples = load_samples(samples_dir, None)?;
            write_filter(out_dir, name, &build_space_a(&samples)?)
        }
    }
}
