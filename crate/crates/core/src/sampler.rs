//! Langevin samplers: vanilla, annealed and preconditioned (with an optional
//! solenoidal drift).
//!
//! One step is `x + h·[K s + ω S s] + ε M⁻¹ z` with `h = ε²/2`, `s` the score
//! at `x`, `K = M⁻¹M⁻ᵀ` and `z` standard normal. Only the score increment is
//! preconditioned; the carried-over state is not, so the fixed point of the
//! dynamics is the target for any `M` (see [`DriftMode`]).

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{PdsError, Result};
use crate::grid::{Field, GridShape};
use crate::precondition::{Preconditioner, Solenoidal};
use crate::targets::ScoreTarget;

/// Sup-norm beyond which a chain is declared diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleMode {
    Constant(f64),
    /// Decreasing noise ladder; each level runs an equal share of the
    /// iterations with step `ε_base · σ_i / σ_L` (so `ε_i² ∝ σ_i²`) against the
    /// score of the target smoothed by `N(0, σ_i² I)`.
    Annealed { sigmas: Vec<f64>, epsilon_base: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepSchedule {
    iterations: usize,
    mode: ScheduleMode,
}

fn check_step(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(PdsError::InvalidParameter(format!("step size must be > 0, got {eps}")))
    }
}

impl StepSchedule {
    pub fn constant(iterations: usize, epsilon: f64) -> Result<Self> {
        check_step(epsilon)?;
        Ok(Self {
            iterations,
            mode: ScheduleMode::Constant(epsilon),
        })
    }

    pub fn annealed(iterations: usize, sigmas: Vec<f64>, epsilon_base: f64) -> Result<Self> {
        check_step(epsilon_base)?;
        if sigmas.is_empty() || sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(PdsError::InvalidParameter("noise levels must be positive".into()));
        }
        if sigmas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(PdsError::InvalidParameter(
                "noise levels must be strictly decreasing".into(),
            ));
        }
        Ok(Self {
            iterations,
            mode: ScheduleMode::Annealed {
                sigmas,
                epsilon_base,
            },
        })
    }

    /// `levels` noise scales spaced geometrically from `first` down to `last`.
    pub fn geometric_sigmas(first: f64, last: f64, levels: usize) -> Result<Vec<f64>> {
        if !(first > last && last > 0.0) || levels < 2 {
            return Err(PdsError::InvalidParameter(format!(
                "need first > last > 0 and at least 2 levels, got {first}, {last}, {levels}"
            )));
        }
        let ratio = (last / first).powf(1.0 / (levels - 1) as f64);
        let mut sigmas: Vec<f64> = (0..levels).map(|i| first * ratio.powi(i as i32)).collect();
        sigmas[levels - 1] = last;
        Ok(sigmas)
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn mode(&self) -> &ScheduleMode {
        &self.mode
    }

    pub fn with_iterations(&self, iterations: usize) -> Self {
        Self {
            iterations,
            mode: self.mode.clone(),
        }
    }

    fn level(&self, t: usize, levels: usize) -> usize {
        (t * levels / self.iterations.max(1)).min(levels - 1)
    }

    /// Step size at zero-based iteration `t`.
    pub fn epsilon(&self, t: usize) -> f64 {
        match &self.mode {
            ScheduleMode::Constant(eps) => *eps,
            ScheduleMode::Annealed {
                sigmas,
                epsilon_base,
            } => {
                let last = sigmas[sigmas.len() - 1];
                epsilon_base * sigmas[self.level(t, sigmas.len())] / last
            }
        }
    }

    /// Smoothing noise level at iteration `t`, if annealed.
    pub fn sigma(&self, t: usize) -> Option<f64> {
        match &self.mode {
            ScheduleMode::Constant(_) => None,
            ScheduleMode::Annealed { sigmas, .. } => Some(sigmas[self.level(t, sigmas.len())]),
        }
    }
}

/// What the preconditioner multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftMode {
    /// `x + h·K s`: only the score increment is preconditioned.
    #[default]
    ScoreIncrement,
    /// `K (x + h s)`: the whole Langevin drift is preconditioned, as a literal
    /// reading of the update would suggest. This moves the fixed point unless
    /// `K = I`; kept for comparison only.
    FullDrift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub schedule: StepSchedule,
    pub preconditioner: Option<Preconditioner>,
    pub solenoidal: Option<Solenoidal>,
    pub drift_mode: DriftMode,
    pub rng_seed: u64,
    /// Drop the noise term on the last update.
    pub denoise_final: bool,
    /// Record the state every this many iterations; 0 records nothing.
    pub checkpoint_stride: usize,
}

impl SamplerConfig {
    pub fn vanilla(schedule: StepSchedule, rng_seed: u64) -> Self {
        Self {
            schedule,
            preconditioner: None,
            solenoidal: None,
            drift_mode: DriftMode::default(),
            rng_seed,
            denoise_final: false,
            checkpoint_stride: 0,
        }
    }

    pub fn pds(
        schedule: StepSchedule,
        preconditioner: Preconditioner,
        solenoidal: Option<Solenoidal>,
        rng_seed: u64,
    ) -> Self {
        Self {
            preconditioner: Some(preconditioner),
            solenoidal,
            ..Self::vanilla(schedule, rng_seed)
        }
    }

    fn check(&self, shape: GridShape) -> Result<()> {
        if let Some(p) = &self.preconditioner {
            if p.shape() != shape {
                return Err(PdsError::ShapeMismatch {
                    expected: shape,
                    found: p.shape(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub iteration: usize,
    pub state: Field,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub checkpoints: Vec<Checkpoint>,
    pub final_state: Field,
    pub iterations_run: usize,
    pub wall_time: f64,
}

/// Supplies the `z` of each update.
pub trait NoiseSource {
    fn draw(&mut self, shape: GridShape) -> Field;
}

/// Standard normal draws in storage order.
#[derive(Debug, Clone)]
pub struct GaussianNoise<R>(pub R);

impl<R: rand::RngCore> NoiseSource for GaussianNoise<R> {
    fn draw(&mut self, shape: GridShape) -> Field {
        let rng = &mut self.0;
        Field::from_fn(shape, |_, _, _| StandardNormal.sample(rng))
    }
}

/// `z ≡ 0`: turns the sampler into deterministic score ascent.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn draw(&mut self, shape: GridShape) -> Field {
        Field::zeros(shape)
    }
}

/// The RNG of chain `index`: one ChaCha stream per chain under the master
/// seed, so a chain's draws do not depend on how many chains run.
pub fn chain_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn finite_score(s: Field) -> Result<Field> {
    if s.is_finite() {
        Ok(s)
    } else {
        Err(PdsError::NonFiniteScore { iteration: None })
    }
}

/// `x + h·incr + ε·noise`, elementwise.
fn combine(x: &Field, h: f64, incr: &Field, eps: f64, noise: Option<&Field>) -> Field {
    let mut out = x.clone();
    match noise {
        Some(z) => {
            for ((o, d), zi) in out.as_mut_slice().iter_mut().zip(incr.as_slice()).zip(z.as_slice()) {
                *o = *o + h * d + eps * zi;
            }
        }
        None => {
            for (o, d) in out.as_mut_slice().iter_mut().zip(incr.as_slice()) {
                *o = *o + h * d;
            }
        }
    }
    out
}

/// `x + (ε²/2)·∇log p(x) + ε·z`.
pub fn vanilla_step(
    x: &Field,
    target: &dyn ScoreTarget,
    eps: f64,
    noise: &mut dyn NoiseSource,
) -> Result<Field> {
    let s = finite_score(target.score(x)?)?;
    let z = noise.draw(x.shape());
    Ok(combine(x, 0.5 * eps * eps, &s, eps, Some(&z)))
}

/// `x + (ε²/2)·[M⁻¹M⁻ᵀ s + ω S s] + ε·M⁻¹ z`.
pub fn pds_step(
    x: &Field,
    target: &dyn ScoreTarget,
    eps: f64,
    p: &Preconditioner,
    sol: Option<&Solenoidal>,
    noise: &mut dyn NoiseSource,
) -> Result<Field> {
    let s = finite_score(target.score(x)?)?;
    let z = noise.draw(x.shape());
    let parts = StepParts {
        preconditioner: Some(p),
        solenoidal: sol,
        drift_mode: DriftMode::ScoreIncrement,
    };
    parts.apply(x, &s, eps, Some(&z))
}

#[derive(Clone, Copy)]
struct StepParts<'a> {
    preconditioner: Option<&'a Preconditioner>,
    solenoidal: Option<&'a Solenoidal>,
    drift_mode: DriftMode,
}

impl StepParts<'_> {
    fn of(config: &SamplerConfig) -> StepParts<'_> {
        StepParts {
            preconditioner: config.preconditioner.as_ref(),
            solenoidal: config.solenoidal.as_ref(),
            drift_mode: config.drift_mode,
        }
    }

    fn apply(&self, x: &Field, s: &Field, eps: f64, z: Option<&Field>) -> Result<Field> {
        let h = 0.5 * eps * eps;
        let skew = match self.solenoidal {
            Some(sol) if sol.omega() != 0.0 => Some(sol.operator().apply(s).scale(sol.omega())),
            _ => None,
        };
        let noise = match (self.preconditioner, z) {
            (Some(p), Some(z)) => Some(p.apply_m_inverse(z)?),
            (None, Some(z)) => Some(z.clone()),
            (_, None) => None,
        };
        match self.drift_mode {
            DriftMode::ScoreIncrement => {
                let mut incr = match self.preconditioner {
                    Some(p) => p.apply_drift_precondition(s)?,
                    None => s.clone(),
                };
                if let Some(k) = &skew {
                    incr = incr.add(k)?;
                }
                Ok(combine(x, h, &incr, eps, noise.as_ref()))
            }
            DriftMode::FullDrift => {
                let d = combine(x, h, s, 0.0, None);
                let base = match self.preconditioner {
                    Some(p) => p.apply_drift_precondition(&d)?,
                    None => d,
                };
                let incr = skew.unwrap_or_else(|| Field::zeros(x.shape()));
                Ok(combine(&base, h, &incr, eps, noise.as_ref()))
            }
        }
    }
}

/// A single chain's state and private RNG.
#[derive(Debug, Clone)]
pub struct Chain {
    state: Field,
    noise: GaussianNoise<ChaCha8Rng>,
    iteration: usize,
}

impl Chain {
    /// Chain `index`; draws `x0 ~ N(0, I)` from its stream unless given.
    pub fn new(shape: GridShape, seed: u64, index: u64, x0: Option<Field>) -> Result<Self> {
        let mut noise = GaussianNoise(chain_rng(seed, index));
        let state = match x0 {
            Some(x) => {
                x.ensure_shape(shape)?;
                x
            }
            None => noise.draw(shape),
        };
        Ok(Self {
            state,
            noise,
            iteration: 0,
        })
    }

    pub fn state(&self) -> &Field {
        &self.state
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Advance one iteration of `config`'s schedule.
    pub fn step(&mut self, target: &dyn ScoreTarget, config: &SamplerConfig) -> Result<()> {
        let t = self.iteration;
        self.state = advance(&self.state, t, target, config, &mut self.noise)?;
        self.iteration += 1;
        Ok(())
    }
}

fn advance(
    x: &Field,
    t: usize,
    target: &dyn ScoreTarget,
    config: &SamplerConfig,
    noise: &mut dyn NoiseSource,
) -> Result<Field> {
    let with_context = |e: PdsError| match e {
        PdsError::NonFiniteScore { iteration: None } => PdsError::NonFiniteScore { iteration: Some(t) },
        other => other,
    };
    let schedule = &config.schedule;
    let eps = schedule.epsilon(t);
    let s = match schedule.sigma(t) {
        Some(sigma) => target.smoothed_score(x, sigma * sigma),
        None => target.score(x),
    }
    .and_then(finite_score)
    .map_err(with_context)?;
    let last = t + 1 == schedule.iterations();
    let z = if config.denoise_final && last {
        None
    } else {
        Some(noise.draw(x.shape()))
    };
    let next = StepParts::of(config).apply(x, &s, eps, z.as_ref())?;
    let sup = next.max_abs();
    if !next.is_finite() || sup > DIVERGENCE_LIMIT {
        return Err(PdsError::Diverged {
            iteration: t,
            sup_norm: if sup.is_nan() { f64::INFINITY } else { sup },
        });
    }
    Ok(next)
}

/// Run the schedule with an explicit noise source; `x0` is required.
pub fn run_with_noise(
    target: &dyn ScoreTarget,
    config: &SamplerConfig,
    x0: Field,
    noise: &mut dyn NoiseSource,
) -> Result<Trajectory> {
    x0.ensure_shape(target.shape())?;
    config.check(target.shape())?;
    let start = Instant::now();
    let mut x = x0;
    let mut checkpoints = Vec::new();
    for t in 0..config.schedule.iterations() {
        x = advance(&x, t, target, config, noise)?;
        let done = t + 1;
        if config.checkpoint_stride > 0 && done % config.checkpoint_stride == 0 {
            checkpoints.push(Checkpoint {
                iteration: done,
                state: x.clone(),
            });
        }
    }
    Ok(Trajectory {
        checkpoints,
        final_state: x,
        iterations_run: config.schedule.iterations(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn run_chain(
    target: &dyn ScoreTarget,
    config: &SamplerConfig,
    index: u64,
    x0: Option<Field>,
) -> Result<Trajectory> {
    let chain = Chain::new(target.shape(), config.rng_seed, index, x0)?;
    let mut noise = chain.noise;
    run_with_noise(target, config, chain.state, &mut noise)
}

/// Chain 0 of `config`; `x0` defaults to a standard normal draw.
pub fn run(target: &dyn ScoreTarget, config: &SamplerConfig, x0: Option<Field>) -> Result<Trajectory> {
    run_chain(target, config, 0, x0)
}

/// Chains `0..chains`, run in parallel and returned in order. Chain `i` is
/// identical to what a sequential run of the same index would produce.
pub fn run_batch(
    target: &dyn ScoreTarget,
    config: &SamplerConfig,
    chains: usize,
) -> Result<Vec<Trajectory>> {
    if chains == 0 {
        return Err(PdsError::InvalidParameter("chains must be >= 1".into()));
    }
    (0..chains as u64)
        .into_par_iter()
        .map(|i| run_chain(target, config, i, None))
        .collect()
}

/// Chains advanced in lockstep, so population statistics can be read at any
/// iteration without storing trajectories.
pub struct Ensemble<'a> {
    target: &'a dyn ScoreTarget,
    config: &'a SamplerConfig,
    chains: Vec<Chain>,
}

impl<'a> Ensemble<'a> {
    pub fn new(target: &'a dyn ScoreTarget, config: &'a SamplerConfig, chains: usize) -> Result<Self> {
        if chains == 0 {
            return Err(PdsError::InvalidParameter("chains must be >= 1".into()));
        }
        config.check(target.shape())?;
        let chains = (0..chains as u64)
            .map(|i| Chain::new(target.shape(), config.rng_seed, i, None))
            .collect::<Result<_>>()?;
        Ok(Self {
            target,
            config,
            chains,
        })
    }

    pub fn iteration(&self) -> usize {
        self.chains[0].iteration
    }

    pub fn states(&self) -> Vec<Field> {
        self.chains.iter().map(|c| c.state.clone()).collect()
    }

    /// Step every chain until `iteration` (capped at the schedule length).
    pub fn advance_to(&mut self, iteration: usize) -> Result<()> {
        let end = iteration.min(self.config.schedule.iterations());
        let (t, c) = (self.target, self.config);
        self.chains.par_iter_mut().try_for_each(|chain| {
            while chain.iteration < end {
                chain.step(t, c)?;
            }
            Ok(())
        })
    }
}
