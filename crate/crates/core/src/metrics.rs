//! Moment estimates and distances between Gaussians.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{PdsError, Result};
use crate::grid::{Field, GridShape};
use crate::spectral::{fft2, fftshift};
use crate::targets::{GrfTarget, Target};

/// Largest dimension accepted by dense moment estimates.
pub const MAX_DENSE_MOMENT_DIM: usize = 4096;

/// Negative eigenvalues down to `-PSD_TOLERANCE · max(1, |Σ|)` are clamped to
/// zero; anything lower is rejected.
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricMode {
    Dense,
    Spectral,
}

impl MetricMode {
    /// Spectral above 16×16 planes.
    pub fn default_for(shape: GridShape) -> Self {
        if shape.plane() > 16 * 16 {
            MetricMode::Spectral
        } else {
            MetricMode::Dense
        }
    }
}

/// Dense covariance over the flattened grid, or a per-frequency power
/// spectrum in centered order (white noise has power 1).
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Dense(DMatrix<f64>),
    Spectral(Field),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Field,
    pub covariance: Covariance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSummary {
    pub mean: Field,
    pub covariance: Covariance,
    pub n_samples: usize,
}

impl MomentSummary {
    pub fn moments(&self) -> Moments {
        Moments {
            mean: self.mean.clone(),
            covariance: self.covariance.clone(),
        }
    }
}

impl From<MomentSummary> for Moments {
    fn from(s: MomentSummary) -> Self {
        Moments {
            mean: s.mean,
            covariance: s.covariance,
        }
    }
}

fn check_samples(samples: &[Field]) -> Result<GridShape> {
    if samples.len() < 2 {
        return Err(PdsError::InsufficientSamples {
            needed: 2,
            found: samples.len(),
        });
    }
    let shape = samples[0].shape();
    for s in samples {
        s.ensure_shape(shape)?;
    }
    Ok(shape)
}

fn sample_mean(samples: &[Field], shape: GridShape) -> Field {
    let mut mean = vec![0.0; shape.len()];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s.as_slice()) {
            *m += v;
        }
    }
    let n = samples.len() as f64;
    Field::new(shape, mean.into_iter().map(|m| m / n).collect()).expect("finite samples")
}

/// Unbiased mean and covariance; spectral mode returns the per-frequency
/// power of the centered samples.
pub fn empirical_moments(samples: &[Field], mode: MetricMode) -> Result<MomentSummary> {
    let shape = check_samples(samples)?;
    let mean = sample_mean(samples, shape);
    let denom = (samples.len() - 1) as f64;
    let covariance = match mode {
        MetricMode::Dense => {
            let n = shape.len();
            if n > MAX_DENSE_MOMENT_DIM {
                return Err(PdsError::Unsupported(format!(
                    "dense moments for {n} dims (max {MAX_DENSE_MOMENT_DIM})"
                )));
            }
            let mut centered = DMatrix::zeros(n, samples.len());
            for (j, s) in samples.iter().enumerate() {
                for (i, (v, m)) in s.as_slice().iter().zip(mean.as_slice()).enumerate() {
                    centered[(i, j)] = v - m;
                }
            }
            let cov = &centered * centered.transpose() / denom;
            Covariance::Dense((&cov + cov.transpose()) * 0.5)
        }
        MetricMode::Spectral => {
            let plane = shape.plane() as f64;
            let mut power = vec![0.0; shape.len()];
            for s in samples {
                let spec = fft2(&s.sub(&mean)?);
                for (p, z) in power.iter_mut().zip(spec.as_slice()) {
                    *p += z.norm_sqr();
                }
            }
            let power = Field::new(shape, power.into_iter().map(|p| p / (plane * denom)).collect())?;
            Covariance::Spectral(fftshift(&power))
        }
    };
    Ok(MomentSummary {
        mean,
        covariance,
        n_samples: samples.len(),
    })
}

/// Eigendecomposition of a symmetric PSD matrix with small negative
/// eigenvalues clamped to zero.
fn psd_eigen(m: &DMatrix<f64>, what: &str) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let scale = m.amax().max(1.0);
    let mut eig = SymmetricEigen::new(m.clone());
    for v in eig.eigenvalues.iter_mut() {
        if *v < -PSD_TOLERANCE * scale {
            return Err(PdsError::NotPositiveDefinite(format!(
                "{what} has eigenvalue {v:e}"
            )));
        }
        *v = v.max(0.0);
    }
    Ok(eig)
}

fn psd_sqrt(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let mut eig = psd_eigen(m, what)?;
    eig.eigenvalues.apply(|v| *v = v.sqrt());
    Ok(eig.recompose())
}

/// 2-Wasserstein (Bures) distance between two Gaussians.
pub fn gaussian_w2(m1: &Moments, m2: &Moments) -> Result<f64> {
    m2.mean.ensure_shape(m1.mean.shape())?;
    let mean_term: f64 = m1
        .mean
        .as_slice()
        .iter()
        .zip(m2.mean.as_slice())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let cov_term = match (&m1.covariance, &m2.covariance) {
        (Covariance::Dense(s1), Covariance::Dense(s2)) => {
            let n = m1.mean.len();
            if s1.nrows() != n || s2.nrows() != n {
                return Err(PdsError::DimensionMismatch {
                    expected: n,
                    found: if s1.nrows() != n { s1.nrows() } else { s2.nrows() },
                });
            }
            psd_eigen(s1, "first covariance")?;
            let r2 = psd_sqrt(s2, "second covariance")?;
            let inner = &r2 * s1 * &r2;
            let inner = (&inner + inner.transpose()) * 0.5;
            let cross = psd_sqrt(&inner, "cross term")?;
            s1.trace() + s2.trace() - 2.0 * cross.trace()
        }
        (Covariance::Spectral(p1), Covariance::Spectral(p2)) => {
            p2.ensure_shape(p1.shape())?;
            let mut total = 0.0;
            for (i, (&a, &b)) in p1.as_slice().iter().zip(p2.as_slice()).enumerate() {
                for v in [a, b] {
                    if v < 0.0 {
                        return Err(PdsError::NotPositiveDefinite(format!(
                            "negative power {v:e} at bin {i}"
                        )));
                    }
                }
                total += (a.sqrt() - b.sqrt()).powi(2);
            }
            total
        }
        _ => {
            return Err(PdsError::Unsupported(
                "W2 between dense and spectral covariances".into(),
            ))
        }
    };
    Ok((mean_term + cov_term).max(0.0).sqrt())
}

/// `λ_max / λ_min` of the target covariance.
pub fn condition_number(target: &Target) -> Result<f64> {
    match target {
        Target::Gaussian(g) => {
            let eig = g.eigenvalues();
            Ok(eig[eig.len() - 1] / eig[0])
        }
        Target::Grf(g) => Ok(g.power().max() / g.power().min()),
        Target::Mixture(_) => Err(PdsError::Unsupported(
            "condition number of a mixture".into(),
        )),
    }
}

/// Raw per-frequency mean power `mean |F x|² / (H·W)` in centered order.
pub fn mean_power(samples: &[Field]) -> Result<Field> {
    let shape = check_samples(samples)?;
    let plane = shape.plane() as f64;
    let n = samples.len() as f64;
    let mut power = vec![0.0; shape.len()];
    for s in samples {
        for (p, z) in power.iter_mut().zip(fft2(s).as_slice()) {
            *p += z.norm_sqr();
        }
    }
    let power = Field::new(shape, power.into_iter().map(|p| p / (plane * n)).collect())?;
    Ok(fftshift(&power))
}

/// `‖P̂ − P‖₂ / ‖P‖₂` with `P̂` the raw mean power of the samples.
pub fn spectral_error(samples: &[Field], target: &GrfTarget) -> Result<f64> {
    check_samples(samples)?;
    samples[0].ensure_shape(target.power().shape())?;
    let estimate = mean_power(samples)?;
    let p = target.power();
    Ok(estimate.sub(p)?.norm() / p.norm())
}

/// `‖mean(samples) − μ‖₂`.
pub fn mean_error(samples: &[Field], mean: &Field) -> Result<f64> {
    if samples.is_empty() {
        return Err(PdsError::EmptySamples);
    }
    let shape = mean.shape();
    for s in samples {
        s.ensure_shape(shape)?;
    }
    Ok(sample_mean(samples, shape).sub(mean)?.norm())
}
