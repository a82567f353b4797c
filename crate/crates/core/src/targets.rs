//! Target distributions with closed-form scores, exact samplers and moments.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{PdsError, Result};
use crate::grid::{real_part, Field, GridShape};
use crate::metrics::{Covariance, Moments};
use crate::spectral::{fft2, ifft2, ifftshift, is_mirror_symmetric, random_orthogonal};

/// Largest flattened dimension for which dense covariances are built.
pub const MAX_DENSE_DIM: usize = 1024;

/// Anything that can drive a Langevin sampler.
pub trait ScoreTarget: Send + Sync {
    fn shape(&self) -> GridShape;

    /// `∇ log p(x)`.
    fn score(&self, x: &Field) -> Result<Field>;

    /// Score of `p` convolved with `N(0, noise_var · I)`; used by annealed
    /// schedules.
    fn smoothed_score(&self, _x: &Field, _noise_var: f64) -> Result<Field> {
        Err(PdsError::Unsupported(
            "this target has no noise-conditioned score".into(),
        ))
    }
}

/// Targets whose density, exact draws and moments are known in closed form.
pub trait AnalyticTarget: ScoreTarget {
    /// `log p(x)` up to an additive constant.
    fn log_density(&self, x: &Field) -> Result<f64>;
    fn sample_exact(&self, rng: &mut dyn RngCore) -> Field;
    fn exact_moments(&self) -> Moments;
}

pub fn standard_normal_field(shape: GridShape, rng: &mut dyn RngCore) -> Field {
    Field::from_fn(shape, |_, _, _| rng.sample(StandardNormal))
}

fn to_vector(x: &Field) -> DVector<f64> {
    DVector::from_column_slice(x.as_slice())
}

fn to_field(shape: GridShape, v: &DVector<f64>) -> Field {
    Field::new(shape, v.as_slice().to_vec()).expect("finite linear algebra")
}

fn check_dense_dim(shape: GridShape) -> Result<()> {
    if shape.len() > MAX_DENSE_DIM {
        return Err(PdsError::Unsupported(format!(
            "dense covariance for {shape} ({} > {MAX_DENSE_DIM} dims)",
            shape.len()
        )));
    }
    Ok(())
}

/// `N(μ, Σ)` with a dense covariance over the flattened grid.
#[derive(Debug, Clone)]
pub struct GaussianTarget {
    mean: Field,
    covariance: DMatrix<f64>,
    cholesky: Cholesky<f64, Dyn>,
    precision: DMatrix<f64>,
    eigen: OnceLock<SymmetricEigen<f64, Dyn>>,
}

impl GaussianTarget {
    pub fn new(mean: Field, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        check_dense_dim(mean.shape())?;
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(PdsError::DimensionMismatch {
                expected: n,
                found: covariance.nrows(),
            });
        }
        let scale = covariance.amax().max(1.0);
        let asym = (&covariance - covariance.transpose()).amax();
        if !(asym <= 1e-12 * scale) {
            return Err(PdsError::NotPositiveDefinite(format!(
                "asymmetry {asym:e} exceeds tolerance"
            )));
        }
        let cholesky = Cholesky::new(covariance.clone())
            .ok_or_else(|| PdsError::NotPositiveDefinite("Cholesky factorization failed".into()))?;
        let precision = cholesky.inverse();
        Ok(Self {
            mean,
            covariance,
            cholesky,
            precision,
            eigen: OnceLock::new(),
        })
    }

    pub fn standard(shape: GridShape) -> Self {
        let n = shape.len();
        Self::new(Field::zeros(shape), DMatrix::identity(n, n)).expect("identity is SPD")
    }

    pub fn isotropic(mean: Field, variance: f64) -> Result<Self> {
        let n = mean.len();
        if !(variance > 0.0) {
            return Err(PdsError::InvalidParameter(format!("variance must be > 0, got {variance}")));
        }
        Self::new(mean, DMatrix::identity(n, n) * variance)
    }

    pub fn diagonal(mean: Field, variances: &Field) -> Result<Self> {
        variances.ensure_shape(mean.shape())?;
        let d = DVector::from_column_slice(variances.as_slice());
        Self::new(mean, DMatrix::from_diagonal(&d))
    }

    /// `Q diag(λ) Qᵀ` with `λ` evenly spaced in `[eig_min, eig_max]` and `Q`
    /// a seeded random rotation.
    pub fn random(mean: Field, eig_min: f64, eig_max: f64, seed: u64) -> Result<Self> {
        if !(eig_min > 0.0 && eig_max >= eig_min) {
            return Err(PdsError::InvalidParameter(format!(
                "need 0 < eig_min <= eig_max, got [{eig_min}, {eig_max}]"
            )));
        }
        let n = mean.len();
        check_dense_dim(mean.shape())?;
        let q = random_orthogonal(n, seed)?;
        let eigs = DVector::from_fn(n, |i, _| {
            if n == 1 {
                eig_min
            } else {
                eig_min + (eig_max - eig_min) * i as f64 / (n - 1) as f64
            }
        });
        let q = q.matrix();
        let cov = q * DMatrix::from_diagonal(&eigs) * q.transpose();
        let cov = (&cov + cov.transpose()) * 0.5;
        Self::new(mean, cov)
    }

    pub fn mean(&self) -> &Field {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    fn eigen(&self) -> &SymmetricEigen<f64, Dyn> {
        self.eigen
            .get_or_init(|| SymmetricEigen::new(self.covariance.clone()))
    }

    /// Eigenvalues of `Σ`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.eigen().eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    fn centered(&self, x: &Field) -> Result<DVector<f64>> {
        x.ensure_shape(self.mean.shape())?;
        Ok(to_vector(&x.sub(&self.mean)?))
    }
}

impl ScoreTarget for GaussianTarget {
    fn shape(&self) -> GridShape {
        self.mean.shape()
    }

    fn score(&self, x: &Field) -> Result<Field> {
        let d = self.centered(x)?;
        Ok(to_field(self.shape(), &(-(&self.precision * d))))
    }

    fn smoothed_score(&self, x: &Field, noise_var: f64) -> Result<Field> {
        let d = self.centered(x)?;
        let eig = self.eigen();
        let q = &eig.eigenvectors;
        let mut coeffs = q.transpose() * d;
        for (c, lambda) in coeffs.iter_mut().zip(eig.eigenvalues.iter()) {
            *c /= lambda + noise_var;
        }
        Ok(to_field(self.shape(), &(-(q * coeffs))))
    }
}

impl AnalyticTarget for GaussianTarget {
    fn log_density(&self, x: &Field) -> Result<f64> {
        let d = self.centered(x)?;
        Ok(-0.5 * d.dot(&(&self.precision * &d)))
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Field {
        let z = DVector::from_fn(self.mean.len(), |_, _| rng.sample(StandardNormal));
        let v = to_vector(&self.mean) + self.cholesky.l() * z;
        to_field(self.shape(), &v)
    }

    fn exact_moments(&self) -> Moments {
        Moments {
            mean: self.mean.clone(),
            covariance: Covariance::Dense(self.covariance.clone()),
        }
    }
}

/// Zero-mean Gaussian random field whose covariance is diagonal in the DFT
/// basis: `E|F[x](k)|² = H·W·P(k)`, so white noise has `P ≡ 1`.
#[derive(Debug, Clone)]
pub struct GrfTarget {
    power: Field,
    inv_power: Field,
    sqrt_power: Field,
    power_natural: Field,
}

impl GrfTarget {
    /// `power` in centered frequency order; must be positive and
    /// mirror-symmetric so draws are real.
    pub fn new(power: Field) -> Result<Self> {
        if let Some(index) = power.as_slice().iter().position(|&v| !(v > 0.0)) {
            return Err(PdsError::NonPositiveFilter {
                which: "P",
                index,
                value: power.as_slice()[index],
            });
        }
        let natural = ifftshift(&power);
        if !is_mirror_symmetric(&natural, 1e-12) {
            return Err(PdsError::InvalidParameter(
                "power spectrum must satisfy P(k) = P(-k)".into(),
            ));
        }
        Ok(Self {
            inv_power: natural.map(|v| 1.0 / v),
            sqrt_power: natural.map(f64::sqrt),
            power_natural: natural,
            power,
        })
    }

    /// `P(k) = 1 / (1 + κ|k|²)^decay` with `κ` chosen so that the highest
    /// frequency reaches `1 / condition`; `|k|` is the signed frequency.
    pub fn power_law(shape: GridShape, condition: f64, decay: f64) -> Result<Self> {
        if !(condition >= 1.0 && decay > 0.0) {
            return Err(PdsError::InvalidParameter(format!(
                "need condition >= 1 and decay > 0, got {condition}, {decay}"
            )));
        }
        let (h, w) = (shape.height(), shape.width());
        let freq = |k: usize, n: usize| (k.min(n - k)) as f64;
        let max_d2 = freq(h / 2, h).powi(2) + freq(w / 2, w).powi(2);
        let kappa = if max_d2 > 0.0 {
            (condition.powf(1.0 / decay) - 1.0) / max_d2
        } else {
            0.0
        };
        let natural = Field::from_fn(shape, |_, i, j| {
            let d2 = freq(i, h).powi(2) + freq(j, w).powi(2);
            (1.0 + kappa * d2).powf(-decay)
        });
        Self::new(crate::spectral::fftshift(&natural))
    }

    /// Power spectrum in centered order.
    pub fn power(&self) -> &Field {
        &self.power
    }

    pub fn power_natural(&self) -> &Field {
        &self.power_natural
    }

    /// Dense covariance `F⁻¹ diag(P) F`, built column by column.
    pub fn dense_covariance(&self) -> Result<DMatrix<f64>> {
        let shape = self.power.shape();
        check_dense_dim(shape)?;
        let n = shape.len();
        let mut cov = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = Field::zeros(shape);
            e.as_mut_slice()[j] = 1.0;
            let col = self.filter(&e, &self.power_natural);
            for (i, v) in col.as_slice().iter().enumerate() {
                cov[(i, j)] = *v;
            }
        }
        Ok((&cov + cov.transpose()) * 0.5)
    }

    fn filter(&self, x: &Field, gains: &Field) -> Field {
        let mut s = fft2(x);
        for (z, &g) in s.as_mut_slice().iter_mut().zip(gains.as_slice()) {
            *z *= g;
        }
        real_part(&ifft2(&s))
    }
}

impl ScoreTarget for GrfTarget {
    fn shape(&self) -> GridShape {
        self.power.shape()
    }

    fn score(&self, x: &Field) -> Result<Field> {
        x.ensure_shape(self.shape())?;
        Ok(self.filter(x, &self.inv_power).scale(-1.0))
    }

    fn smoothed_score(&self, x: &Field, noise_var: f64) -> Result<Field> {
        x.ensure_shape(self.shape())?;
        let gains = self.power_natural.map(|p| 1.0 / (p + noise_var));
        Ok(self.filter(x, &gains).scale(-1.0))
    }
}

impl AnalyticTarget for GrfTarget {
    fn log_density(&self, x: &Field) -> Result<f64> {
        x.ensure_shape(self.shape())?;
        let n = self.shape().plane() as f64;
        let s = fft2(x);
        let quad: f64 = s
            .as_slice()
            .iter()
            .zip(self.inv_power.as_slice())
            .map(|(z, ip)| z.norm_sqr() * ip)
            .sum();
        Ok(-0.5 * quad / n)
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Field {
        let white = standard_normal_field(self.shape(), rng);
        self.filter(&white, &self.sqrt_power)
    }

    fn exact_moments(&self) -> Moments {
        Moments {
            mean: Field::zeros(self.shape()),
            covariance: Covariance::Spectral(self.power.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub mean: Field,
    pub variance: f64,
}

/// Finite mixture of isotropic Gaussians.
#[derive(Debug, Clone)]
pub struct MixtureTarget {
    weights: Vec<f64>,
    components: Vec<MixtureComponent>,
}

impl MixtureTarget {
    pub fn new(weights: Vec<f64>, components: Vec<MixtureComponent>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(PdsError::InvalidParameter(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(PdsError::InvalidParameter("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(PdsError::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        let shape = components[0].mean.shape();
        for c in &components {
            c.mean.ensure_shape(shape)?;
            if !(c.variance > 0.0 && c.variance.is_finite()) {
                return Err(PdsError::InvalidParameter(format!(
                    "component variance must be > 0, got {}",
                    c.variance
                )));
            }
        }
        Ok(Self {
            weights,
            components,
        })
    }

    /// Equal-weight pair `N(±m, σ² I)`.
    pub fn symmetric_pair(offset: Field, variance: f64) -> Result<Self> {
        let neg = offset.scale(-1.0);
        Self::new(
            vec![0.5, 0.5],
            vec![
                MixtureComponent {
                    mean: offset,
                    variance,
                },
                MixtureComponent {
                    mean: neg,
                    variance,
                },
            ],
        )
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    /// Per-component `log w_i + log N(x; μ_i, (σ_i² + extra) I)`; `None` for
    /// zero-weight components.
    fn log_terms(&self, x: &Field, extra_var: f64) -> Result<Vec<Option<f64>>> {
        x.ensure_shape(self.shape())?;
        let n = x.len() as f64;
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(&w, c)| {
                if w == 0.0 {
                    return Ok(None);
                }
                let var = c.variance + extra_var;
                let d2 = x.sub(&c.mean)?.as_slice().iter().map(|v| v * v).sum::<f64>();
                Ok(Some(
                    w.ln() - 0.5 * d2 / var - 0.5 * n * (2.0 * std::f64::consts::PI * var).ln(),
                ))
            })
            .collect()
    }

    fn score_with(&self, x: &Field, extra_var: f64) -> Result<Field> {
        let terms = self.log_terms(x, extra_var)?;
        let peak = terms.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut out = vec![0.0; x.len()];
        let mut total = 0.0;
        for (t, c) in terms.iter().zip(&self.components) {
            let Some(t) = t else { continue };
            let r = (t - peak).exp();
            total += r;
            let var = c.variance + extra_var;
            for ((o, xi), mi) in out.iter_mut().zip(x.as_slice()).zip(c.mean.as_slice()) {
                *o -= r * (xi - mi) / var;
            }
        }
        for o in &mut out {
            *o /= total;
        }
        Field::new(self.shape(), out)
    }
}

impl ScoreTarget for MixtureTarget {
    fn shape(&self) -> GridShape {
        self.components[0].mean.shape()
    }

    fn score(&self, x: &Field) -> Result<Field> {
        self.score_with(x, 0.0)
    }

    fn smoothed_score(&self, x: &Field, noise_var: f64) -> Result<Field> {
        self.score_with(x, noise_var)
    }
}

impl AnalyticTarget for MixtureTarget {
    fn log_density(&self, x: &Field) -> Result<f64> {
        let terms = self.log_terms(x, 0.0)?;
        let peak = terms.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = terms.iter().flatten().map(|t| (t - peak).exp()).sum();
        Ok(peak + sum.ln())
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Field {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            acc += w;
            chosen = Some(i);
            if u < acc {
                break;
            }
        }
        let c = &self.components[chosen.expect("some weight is positive")];
        let z = standard_normal_field(self.shape(), rng);
        c.mean.add(&z.scale(c.variance.sqrt())).expect("same shape")
    }

    fn exact_moments(&self) -> Moments {
        let shape = self.shape();
        let n = shape.len();
        let mut mean = DVector::zeros(n);
        for (w, c) in self.weights.iter().zip(&self.components) {
            mean += to_vector(&c.mean) * *w;
        }
        let mut second = DMatrix::zeros(n, n);
        for (w, c) in self.weights.iter().zip(&self.components) {
            let m = to_vector(&c.mean);
            second += (DMatrix::identity(n, n) * c.variance + &m * m.transpose()) * *w;
        }
        let cov = second - &mean * mean.transpose();
        Moments {
            mean: to_field(shape, &mean),
            covariance: Covariance::Dense((&cov + cov.transpose()) * 0.5),
        }
    }
}

/// Closed set of analytic targets, as named in experiment configs.
#[derive(Debug, Clone)]
pub enum Target {
    Gaussian(GaussianTarget),
    Grf(GrfTarget),
    Mixture(MixtureTarget),
}

impl Target {
    pub fn kind(&self) -> &'static str {
        match self {
            Target::Gaussian(_) => "gaussian",
            Target::Grf(_) => "grf",
            Target::Mixture(_) => "mixture",
        }
    }

    fn inner(&self) -> &dyn AnalyticTarget {
        match self {
            Target::Gaussian(t) => t,
            Target::Grf(t) => t,
            Target::Mixture(t) => t,
        }
    }
}

impl ScoreTarget for Target {
    fn shape(&self) -> GridShape {
        self.inner().shape()
    }

    fn score(&self, x: &Field) -> Result<Field> {
        self.inner().score(x)
    }

    fn smoothed_score(&self, x: &Field, noise_var: f64) -> Result<Field> {
        self.inner().smoothed_score(x, noise_var)
    }
}

impl AnalyticTarget for Target {
    fn log_density(&self, x: &Field) -> Result<f64> {
        self.inner().log_density(x)
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Field {
        self.inner().sample_exact(rng)
    }

    fn exact_moments(&self) -> Moments {
        self.inner().exact_moments()
    }
}

pub fn score(target: &dyn ScoreTarget, x: &Field) -> Result<Field> {
    target.score(x)
}

pub fn log_density(target: &dyn AnalyticTarget, x: &Field) -> Result<f64> {
    target.log_density(x)
}

pub fn sample_exact(target: &dyn AnalyticTarget, rng: &mut dyn RngCore) -> Field {
    target.sample_exact(rng)
}

pub fn exact_moments(target: &dyn AnalyticTarget) -> Moments {
    target.exact_moments()
}
