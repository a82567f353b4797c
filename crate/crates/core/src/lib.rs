//! Preconditioned Langevin diffusion sampling over C×H×W grids.
//!
//! The sampler update is `x + (ε²/2)·[M⁻¹M⁻ᵀ ∇log p(x) + ω S ∇log p(x)] + ε M⁻¹ z`
//! where `M[x] = A ⊙ F⁻¹[R ⊙ F[x]]` combines a per-pixel space filter `A`
//! with a per-frequency filter `R`, and `S` is skew-symmetric. With `A ≡ R ≡ 1`
//! and `ω = 0` it reduces bit-for-bit to plain Langevin dynamics.

pub mod cli;
pub mod config;
pub mod error;
pub mod filters;
pub mod grid;
pub mod metrics;
pub mod precondition;
pub mod sampler;
pub mod spectral;
pub mod targets;

pub use error::{PdsError, Result};
pub use nalgebra::DMatrix;
pub use grid::{Field, GridShape, SpectralField};
pub use metrics::{Covariance, MetricMode, MomentSummary, Moments};
pub use precondition::{Preconditioner, SkewOperator, Solenoidal};
pub use sampler::{run, run_batch, Ensemble, SamplerConfig, StepSchedule, Trajectory};
pub use targets::{AnalyticTarget, GaussianTarget, GrfTarget, MixtureTarget, ScoreTarget, Target};
