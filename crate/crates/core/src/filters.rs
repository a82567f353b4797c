//! Construction of the frequency filter `R` and the space filter `A`.
//!
//! Every `R` returned here is laid out in centered frequency order (DC at
//! `(H/2, W/2)`), see [`crate::spectral::fftshift`]. `A` lives in pixel space.

use crate::error::{PdsError, Result};
use crate::grid::{Field, GridShape};
use crate::spectral::{fft2, fftshift};

/// Floor applied to space-filter entries after normalization.
pub const SPACE_FILTER_FLOOR: f64 = 1e-6;

/// Radius and out-of-band gain of the circular frequency mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParametricFilterSpec {
    radius: f64,
    lambda: f64,
}

impl ParametricFilterSpec {
    pub fn new(radius: f64, lambda: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(PdsError::InvalidParameter(format!("radius must be > 0, got {radius}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(PdsError::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
        }
        Ok(Self { radius, lambda })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatisticalFilterSpec {
    alpha: f64,
}

impl StatisticalFilterSpec {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha >= 1.0 && alpha.is_finite()) {
            return Err(PdsError::InvalidParameter(format!("alpha must be >= 1, got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Circular mask: 1 inside `(h - H/2)² + (w - W/2)² <= 2r²`, `λ` outside.
/// Identical across channels.
pub fn build_parametric_r(shape: GridShape, spec: &ParametricFilterSpec) -> Field {
    let ch = 0.5 * shape.height() as f64;
    let cw = 0.5 * shape.width() as f64;
    let bound = 2.0 * spec.radius * spec.radius;
    Field::from_fn(shape, |_, h, w| {
        let dh = h as f64 - ch;
        let dw = w as f64 - cw;
        if dh * dh + dw * dw <= bound {
            1.0
        } else {
            spec.lambda
        }
    })
}

fn check_samples(samples: &[Field]) -> Result<GridShape> {
    let first = samples.first().ok_or(PdsError::EmptySamples)?;
    let shape = first.shape();
    for s in &samples[1..] {
        s.ensure_shape(shape)?;
    }
    Ok(shape)
}

/// Frequency filter from sample statistics.
///
/// `raw = log(mean |F[x]|² + 1)` per bin, then
/// `R = (raw / max(raw) + α - 1) / α`, which lies in `[(α-1)/α, 1]` and
/// equals 1 exactly at the strongest bin.
pub fn build_statistical_r(samples: &[Field], spec: &StatisticalFilterSpec) -> Result<Field> {
    let shape = check_samples(samples)?;
    let mut power = vec![0.0; shape.len()];
    for x in samples {
        for (acc, v) in power.iter_mut().zip(fft2(x).as_slice()) {
            *acc += v.norm_sqr();
        }
    }
    let count = samples.len() as f64;
    let raw: Vec<f64> = power.iter().map(|p| (p / count + 1.0).ln()).collect();
    let peak = raw.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(PdsError::DegenerateStatistics(
            "all samples have zero spectral power".into(),
        ));
    }
    let alpha = spec.alpha;
    // (r + α - 1) / α written so the argmax lands on exactly 1.0.
    let r = raw.iter().map(|v| (v / peak - 1.0) / alpha + 1.0).collect();
    Ok(fftshift(&Field::new(shape, r)?))
}

/// Space filter from nonnegative samples: `A = log(mean x + 1)`, divided by
/// its maximum, with entries below [`SPACE_FILTER_FLOOR`] raised to it.
pub fn build_space_a(samples: &[Field]) -> Result<Field> {
    let shape = check_samples(samples)?;
    let mut mean = vec![0.0; shape.len()];
    for (k, x) in samples.iter().enumerate() {
        for (i, (acc, &v)) in mean.iter_mut().zip(x.as_slice()).enumerate() {
            if v < 0.0 {
                return Err(PdsError::NegativeSample {
                    sample: k,
                    index: i,
                    value: v,
                });
            }
            *acc += v;
        }
    }
    let count = samples.len() as f64;
    let a: Vec<f64> = mean.iter().map(|m| (m / count + 1.0).ln()).collect();
    let peak = a.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(PdsError::DegenerateStatistics(
            "all samples are zero; space filter undefined".into(),
        ));
    }
    let a = a.iter().map(|v| (v / peak).max(SPACE_FILTER_FLOOR)).collect();
    Field::new(shape, a)
}

/// All-ones space filter (no space preconditioning).
pub fn uniform_a(shape: GridShape) -> Field {
    Field::ones(shape)
}
