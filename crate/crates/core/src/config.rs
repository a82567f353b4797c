//! Experiment configs: one `key = value` per line, dotted keys, `#` comments.
//!
//! ```text
//! seed = 7
//! chains = 256
//! target.kind = grf
//! target.shape = 1x32x32
//! target.condition = 1000
//! sampler.vanilla.kind = vanilla
//! sampler.vanilla.epsilon = 0.03
//! sampler.pds.kind = pds
//! sampler.pds.r = statistical
//! ```
//!
//! Samplers run in the order they first appear. Relative file paths resolve
//! against the config file's directory. Unknown or repeated keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{PdsError, Result};
use crate::filters::{
    build_parametric_r, build_statistical_r, uniform_a, ParametricFilterSpec, StatisticalFilterSpec,
};
use crate::grid::{load_grid, Field, GridShape};
use crate::metrics::MetricMode;
use crate::precondition::{Preconditioner, SkewOperator, Solenoidal};
use crate::sampler::{DriftMode, SamplerConfig, StepSchedule};
use crate::targets::{AnalyticTarget, GaussianTarget, GrfTarget, MixtureTarget, ScoreTarget, Target};

/// RNG stream reserved for target draws that feed statistical filters.
pub const FILTER_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq)]
pub enum GaussianCovariance {
    Standard,
    Isotropic(f64),
    Random { eig_min: f64, eig_max: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Gaussian {
        shape: GridShape,
        mean: f64,
        covariance: GaussianCovariance,
    },
    Grf {
        shape: GridShape,
        condition: f64,
        decay: f64,
    },
    /// `½ N(+m·1, σ² I) + ½ N(−m·1, σ² I)`.
    Mixture {
        shape: GridShape,
        offset: f64,
        variance: f64,
    },
}

impl TargetSpec {
    pub fn shape(&self) -> GridShape {
        match self {
            TargetSpec::Gaussian { shape, .. }
            | TargetSpec::Grf { shape, .. }
            | TargetSpec::Mixture { shape, .. } => *shape,
        }
    }

    pub fn build(&self) -> Result<Target> {
        Ok(match self {
            TargetSpec::Gaussian {
                shape,
                mean,
                covariance,
            } => {
                let mean = Field::filled(*shape, *mean);
                Target::Gaussian(match covariance {
                    GaussianCovariance::Standard => GaussianTarget::isotropic(mean, 1.0)?,
                    GaussianCovariance::Isotropic(v) => GaussianTarget::isotropic(mean, *v)?,
                    GaussianCovariance::Random {
                        eig_min,
                        eig_max,
                        seed,
                    } => GaussianTarget::random(mean, *eig_min, *eig_max, *seed)?,
                })
            }
            TargetSpec::Grf {
                shape,
                condition,
                decay,
            } => Target::Grf(GrfTarget::power_law(*shape, *condition, *decay)?),
            TargetSpec::Mixture {
                shape,
                offset,
                variance,
            } => Target::Mixture(MixtureTarget::symmetric_pair(
                Field::filled(*shape, *offset),
                *variance,
            )?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrequencyFilterSpec {
    Uniform,
    Parametric { radius: f64, lambda: f64 },
    /// Built from `count` exact target draws.
    Statistical { alpha: f64, count: usize },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpaceFilterSpec {
    Uniform,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Vanilla,
    Pds,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSpec {
    Constant,
    Annealed {
        sigma_max: f64,
        sigma_min: f64,
        levels: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSpec {
    pub name: String,
    pub kind: SamplerKind,
    pub iterations: usize,
    pub epsilon: f64,
    pub schedule: ScheduleSpec,
    pub r: FrequencyFilterSpec,
    pub a: SpaceFilterSpec,
    pub skew: Option<SkewOperator>,
    pub omega: f64,
    pub drift: DriftMode,
    pub denoise_final: bool,
}

impl SamplerSpec {
    pub fn schedule(&self) -> Result<StepSchedule> {
        match &self.schedule {
            ScheduleSpec::Constant => StepSchedule::constant(self.iterations, self.epsilon),
            ScheduleSpec::Annealed {
                sigma_max,
                sigma_min,
                levels,
            } => StepSchedule::annealed(
                self.iterations,
                StepSchedule::geometric_sigmas(*sigma_max, *sigma_min, *levels)?,
                self.epsilon,
            ),
        }
    }

    pub fn preconditioner(&self, target: &Target, seed: u64) -> Result<Option<Preconditioner>> {
        if self.kind == SamplerKind::Vanilla {
            return Ok(None);
        }
        let shape = target.shape();
        let r = match &self.r {
            FrequencyFilterSpec::Uniform => Field::ones(shape),
            FrequencyFilterSpec::Parametric { radius, lambda } => {
                build_parametric_r(shape, &ParametricFilterSpec::new(*radius, *lambda)?)
            }
            FrequencyFilterSpec::Statistical { alpha, count } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(FILTER_STREAM);
                let draws: Vec<Field> = (0..*count).map(|_| target.sample_exact(&mut rng)).collect();
                build_statistical_r(&draws, &StatisticalFilterSpec::new(*alpha)?)?
            }
            FrequencyFilterSpec::File(p) => load_grid(p)?,
        };
        let a = match &self.a {
            SpaceFilterSpec::Uniform => uniform_a(shape),
            SpaceFilterSpec::File(p) => load_grid(p)?,
        };
        r.ensure_shape(shape)?;
        a.ensure_shape(shape)?;
        Preconditioner::new(a, r).map(Some)
    }

    pub fn build(&self, target: &Target, seed: u64, checkpoint_stride: usize) -> Result<SamplerConfig> {
        let solenoidal = match self.skew {
            Some(op) => Some(Solenoidal::new(op, self.omega)?),
            None => None,
        };
        Ok(SamplerConfig {
            schedule: self.schedule()?,
            preconditioner: self.preconditioner(target, seed)?,
            solenoidal,
            drift_mode: self.drift,
            rng_seed: seed,
            denoise_final: self.denoise_final,
            checkpoint_stride,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub threshold: f64,
    pub max_iterations: usize,
    /// Scan granularity in iterations.
    pub stride: usize,
    pub baseline: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub chains: usize,
    /// Metrics every this many iterations; 0 means final state only.
    pub checkpoint_stride: usize,
    pub out_dir: Option<PathBuf>,
    /// `None` picks by grid size.
    pub metric_mode: Option<MetricMode>,
    pub target: TargetSpec,
    pub samplers: Vec<SamplerSpec>,
    pub benchmark: Option<BenchmarkSpec>,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut keys = Keys::parse(text)?;
        let seed = keys.parse_or("seed", 0u64)?;
        let chains = keys.parse_or("chains", 64usize)?;
        if chains < 2 {
            return Err(keys.error_at("chains", "need at least 2 chains for moment estimates"));
        }
        let checkpoint_stride = keys.parse_or("checkpoint_stride", 1usize)?;
        let out_dir = keys.take("out_dir").map(|(v, _)| base_dir.join(v));
        let metric_mode = match keys.take("metric_mode") {
            None => None,
            Some((v, line)) => match v.as_str() {
                "auto" => None,
                "dense" => Some(MetricMode::Dense),
                "spectral" => Some(MetricMode::Spectral),
                other => return Err(config_error(line, format!("unknown metric_mode `{other}`"))),
            },
        };
        let target = parse_target(&mut keys)?;
        let names = keys.sampler_names();
        if names.is_empty() {
            return Err(config_error(0, "at least one `sampler.<name>.*` section is required"));
        }
        let samplers = names
            .iter()
            .map(|n| parse_sampler(&mut keys, n, base_dir))
            .collect::<Result<Vec<_>>>()?;
        let benchmark = if keys.has_prefix("benchmark.") {
            let threshold: f64 = keys.parse_required("benchmark.threshold")?;
            let max_iterations: usize = keys.parse_required("benchmark.max_iterations")?;
            let stride = keys.parse_or("benchmark.stride", 10usize)?;
            if !(threshold > 0.0) || stride == 0 {
                return Err(config_error(0, "benchmark threshold and stride must be positive"));
            }
            let baseline = keys
                .take("benchmark.baseline")
                .map(|(v, _)| v)
                .unwrap_or_else(|| "vanilla".into());
            if !samplers.iter().any(|s| s.name == baseline) {
                return Err(config_error(0, format!("benchmark baseline `{baseline}` is not a sampler")));
            }
            Some(BenchmarkSpec {
                threshold,
                max_iterations,
                stride,
                baseline,
            })
        } else {
            None
        };
        keys.finish()?;
        Ok(Self {
            seed,
            chains,
            checkpoint_stride,
            out_dir,
            metric_mode,
            target,
            samplers,
            benchmark,
        })
    }

    pub fn metric_mode(&self) -> MetricMode {
        self.metric_mode
            .unwrap_or_else(|| MetricMode::default_for(self.target.shape()))
    }
}

fn config_error(line: usize, message: impl Into<String>) -> PdsError {
    PdsError::Config {
        line,
        message: message.into(),
    }
}

pub fn parse_shape(s: &str) -> Option<GridShape> {
    let dims: Vec<usize> = s
        .split('x')
        .map(|d| d.trim().parse().ok())
        .collect::<Option<_>>()?;
    match dims.as_slice() {
        [c, h, w] => GridShape::new(*c, *h, *w).ok(),
        [h, w] => GridShape::new(1, *h, *w).ok(),
        _ => None,
    }
}

fn parse_target(keys: &mut Keys) -> Result<TargetSpec> {
    let (kind, kind_line) = keys.required("target.kind")?;
    let (shape, line) = keys.required("target.shape")?;
    let shape = parse_shape(&shape)
        .ok_or_else(|| config_error(line, format!("bad shape `{shape}`; expected CxHxW")))?;
    match kind.as_str() {
        "gaussian" => {
            let mean = keys.parse_or("target.mean", 0.0)?;
            let covariance = match keys.take("target.covariance") {
                None => GaussianCovariance::Standard,
                Some((v, line)) => match v.as_str() {
                    "standard" => GaussianCovariance::Standard,
                    "isotropic" => GaussianCovariance::Isotropic(keys.parse_required("target.variance")?),
                    "random" => GaussianCovariance::Random {
                        eig_min: keys.parse_required("target.eig_min")?,
                        eig_max: keys.parse_required("target.eig_max")?,
                        seed: keys.parse_or("target.seed", 0)?,
                    },
                    other => return Err(config_error(line, format!("unknown covariance `{other}`"))),
                },
            };
            Ok(TargetSpec::Gaussian {
                shape,
                mean,
                covariance,
            })
        }
        "grf" => Ok(TargetSpec::Grf {
            shape,
            condition: keys.parse_required("target.condition")?,
            decay: keys.parse_or("target.decay", 1.0)?,
        }),
        "mixture" => Ok(TargetSpec::Mixture {
            shape,
            offset: keys.parse_required("target.offset")?,
            variance: keys.parse_or("target.variance", 1.0)?,
        }),
        other => Err(config_error(kind_line, format!("unknown target kind `{other}`"))),
    }
}

fn parse_skew(v: &str) -> Option<SkewOperator> {
    let v = v.trim_start_matches(['s', 'S']);
    match v {
        "transpose" | "pose" => Some(SkewOperator::SpectralTransposeDiff),
        _ => SkewOperator::numbered(v.parse().ok()?).ok(),
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn parse_sampler(keys: &mut Keys, name: &str, base_dir: &Path) -> Result<SamplerSpec> {
    let key = |k: &str| format!("sampler.{name}.{k}");
    let (kind, line) = keys.required(&key("kind"))?;
    let kind = match kind.as_str() {
        "vanilla" => SamplerKind::Vanilla,
        "pds" => SamplerKind::Pds,
        other => return Err(config_error(line, format!("unknown sampler kind `{other}`"))),
    };
    let iterations = keys.parse_required(&key("iterations"))?;
    let epsilon = keys.parse_required(&key("epsilon"))?;
    let schedule = match keys.take(&key("schedule")) {
        None => ScheduleSpec::Constant,
        Some((v, line)) => match v.as_str() {
            "constant" => ScheduleSpec::Constant,
            "annealed" => ScheduleSpec::Annealed {
                sigma_max: keys.parse_required(&key("sigma_max"))?,
                sigma_min: keys.parse_required(&key("sigma_min"))?,
                levels: keys.parse_required(&key("levels"))?,
            },
            other => return Err(config_error(line, format!("unknown schedule `{other}`"))),
        },
    };
    let r_line = keys.line_of(&key("r"));
    let r = match keys.take(&key("r")) {
        None => FrequencyFilterSpec::Uniform,
        Some((v, line)) => match v.as_str() {
            "uniform" => FrequencyFilterSpec::Uniform,
            "parametric" => FrequencyFilterSpec::Parametric {
                radius: keys.parse_required(&key("r_radius"))?,
                lambda: keys.parse_required(&key("r_lambda"))?,
            },
            "statistical" => FrequencyFilterSpec::Statistical {
                alpha: keys.parse_or(&key("r_alpha"), 5.0)?,
                count: keys.parse_or(&key("r_count"), 200usize)?,
            },
            "file" => FrequencyFilterSpec::File(base_dir.join(keys.required(&key("r_file"))?.0)),
            other => return Err(config_error(line, format!("unknown frequency filter `{other}`"))),
        },
    };
    let a_line = keys.line_of(&key("a"));
    let a = match keys.take(&key("a")) {
        None => SpaceFilterSpec::Uniform,
        Some((v, line)) => match v.as_str() {
            "uniform" => SpaceFilterSpec::Uniform,
            "file" => SpaceFilterSpec::File(base_dir.join(keys.required(&key("a_file"))?.0)),
            other => return Err(config_error(line, format!("unknown space filter `{other}`"))),
        },
    };
    let skew = match keys.take(&key("skew")) {
        None => None,
        Some((v, _)) if v == "none" => None,
        Some((v, line)) => Some(
            parse_skew(&v).ok_or_else(|| config_error(line, format!("unknown skew operator `{v}`")))?,
        ),
    };
    let omega_line = keys.line_of(&key("omega"));
    let omega: f64 = keys.parse_or(&key("omega"), 0.0)?;
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(config_error(omega_line, "omega must be >= 0"));
    }
    if omega > 0.0 && skew.is_none() {
        return Err(config_error(omega_line, "omega requires a skew operator"));
    }
    let drift = match keys.take(&key("drift")) {
        None => DriftMode::ScoreIncrement,
        Some((v, line)) => match v.as_str() {
            "score" => DriftMode::ScoreIncrement,
            "full" => DriftMode::FullDrift,
            other => return Err(config_error(line, format!("unknown drift mode `{other}`"))),
        },
    };
    let denoise_line = keys.line_of(&key("denoise_final"));
    let denoise_final = match keys.take(&key("denoise_final")) {
        None => false,
        Some((v, _)) => parse_bool(&v)
            .ok_or_else(|| config_error(denoise_line, format!("expected true/false, got `{v}`")))?,
    };
    if kind == SamplerKind::Vanilla {
        let extra = [
            (r != FrequencyFilterSpec::Uniform, r_line),
            (a != SpaceFilterSpec::Uniform, a_line),
            (skew.is_some(), keys.line_of(&key("skew"))),
        ];
        if let Some((_, line)) = extra.iter().find(|(bad, _)| *bad) {
            return Err(config_error(*line, format!("vanilla sampler `{name}` takes no filters or skew")));
        }
    }
    Ok(SamplerSpec {
        name: name.to_string(),
        kind,
        iterations,
        epsilon,
        schedule,
        r,
        a,
        skew,
        omega,
        drift,
        denoise_final,
    })
}

/// Raw `key -> (value, line)` with first-appearance order of sampler names.
struct Keys {
    map: BTreeMap<String, (String, usize)>,
    consumed: BTreeMap<String, usize>,
    order: Vec<String>,
}

impl Keys {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut order = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| config_error(line, format!("expected `key = value`, got `{content}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() || k.contains(char::is_whitespace) {
                return Err(config_error(line, format!("malformed entry `{content}`")));
            }
            if let Some(rest) = k.strip_prefix("sampler.") {
                let name = rest
                    .split_once('.')
                    .map(|(n, _)| n)
                    .filter(|n| !n.is_empty())
                    .ok_or_else(|| config_error(line, format!("expected `sampler.<name>.<key>`, got `{k}`")))?;
                if !order.iter().any(|o| o == name) {
                    order.push(name.to_string());
                }
            }
            if let Some((_, first)) = map.insert(k.to_string(), (v.to_string(), line)) {
                return Err(config_error(line, format!("`{k}` already set on line {first}")));
            }
        }
        Ok(Self {
            map,
            consumed: BTreeMap::new(),
            order,
        })
    }

    fn sampler_names(&self) -> Vec<String> {
        self.order.clone()
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.map.keys().any(|k| k.starts_with(prefix))
    }

    fn line_of(&self, key: &str) -> usize {
        self.map
            .get(key)
            .map(|(_, l)| *l)
            .or_else(|| self.consumed.get(key).copied())
            .unwrap_or(0)
    }

    fn error_at(&self, key: &str, message: &str) -> PdsError {
        config_error(self.line_of(key), format!("`{key}`: {message}"))
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        let entry = self.map.remove(key)?;
        self.consumed.insert(key.to_string(), entry.1);
        Some(entry)
    }

    fn required(&mut self, key: &str) -> Result<(String, usize)> {
        self.take(key)
            .ok_or_else(|| config_error(0, format!("missing required key `{key}`")))
    }

    fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
        value
            .parse()
            .map_err(|_| config_error(line, format!("`{key}`: cannot parse `{value}`")))
    }

    fn parse_required<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (v, line) = self.required(key)?;
        Self::parse_value(key, &v, line)
    }

    fn parse_or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => Self::parse_value(key, &v, line),
        }
    }

    fn finish(self) -> Result<()> {
        match self.map.iter().min_by_key(|(_, (_, line))| *line) {
            Some((k, (_, line))) => Err(config_error(*line, format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }
}
