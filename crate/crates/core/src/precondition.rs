//! The preconditioning operator `M[x] = A ⊙ F⁻¹[R ⊙ F[x]]`, the inverse and
//! drift compositions the sampler uses, and skew-symmetric solenoidal maps.

use rustfft::num_complex::Complex64;

use crate::error::{PdsError, Result};
use crate::grid::{real_part, Field, GridShape, SpectralField};
use crate::spectral::{fft2, fft2_complex, ifft2, ifftshift, mirror, roll};

/// Space filter `A` and frequency filter `R` with their reciprocals cached.
///
/// `R` is given in centered frequency order and converted once to natural
/// order. When `R` is mirror-symmetric (`R(k) == R(-k)`, true for every
/// filter built in [`crate::filters`]) each composition is a real linear map
/// and `apply_m_inverse` inverts `apply_m` exactly. Filters that are all ones
/// skip their transform pair, so an identity preconditioner is bitwise the
/// identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Preconditioner {
    a: Field,
    r: Field,
    r_natural: Field,
    inv_a: Field,
    inv_a2: Field,
    inv_r: Field,
    a_is_one: bool,
    r_is_one: bool,
}

fn check_positive(which: &'static str, f: &Field) -> Result<()> {
    match f.as_slice().iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        Some(index) => Err(PdsError::NonPositiveFilter {
            which,
            index,
            value: f.as_slice()[index],
        }),
        None => Ok(()),
    }
}

fn mul_real(s: &mut SpectralField, f: &Field) {
    for (z, &k) in s.as_mut_slice().iter_mut().zip(f.as_slice()) {
        *z *= k;
    }
}

impl Preconditioner {
    pub fn new(a: Field, r: Field) -> Result<Self> {
        a.ensure_shape(r.shape())?;
        check_positive("A", &a)?;
        check_positive("R", &r)?;
        let r_natural = ifftshift(&r);
        let inv_a = a.map(|v| 1.0 / v);
        let inv_a2 = a.map(|v| 1.0 / (v * v));
        let inv_r = r_natural.map(|v| 1.0 / v);
        let a_is_one = a.as_slice().iter().all(|&v| v == 1.0);
        let r_is_one = r.as_slice().iter().all(|&v| v == 1.0);
        Ok(Self {
            a,
            r,
            r_natural,
            inv_a,
            inv_a2,
            inv_r,
            a_is_one,
            r_is_one,
        })
    }

    pub fn identity(shape: GridShape) -> Self {
        Self::new(Field::ones(shape), Field::ones(shape)).expect("ones are positive")
    }

    pub fn shape(&self) -> GridShape {
        self.a.shape()
    }

    pub fn space_filter(&self) -> &Field {
        &self.a
    }

    /// `R` in centered order, as passed to [`Preconditioner::new`].
    pub fn frequency_filter(&self) -> &Field {
        &self.r
    }

    pub fn is_identity(&self) -> bool {
        self.a_is_one && self.r_is_one
    }

    /// `A ⊙ Re F⁻¹[R ⊙ F[x]]`.
    pub fn apply_m(&self, x: &Field) -> Result<Field> {
        x.ensure_shape(self.shape())?;
        let mut y = if self.r_is_one {
            x.clone()
        } else {
            let mut s = fft2(x);
            mul_real(&mut s, &self.r_natural);
            real_part(&ifft2(&s))
        };
        if !self.a_is_one {
            for (v, &k) in y.as_mut_slice().iter_mut().zip(self.a.as_slice()) {
                *v *= k;
            }
        }
        Ok(y)
    }

    /// `Re F⁻¹[F[x • A] • R]`, the noise line of the sampler.
    pub fn apply_m_inverse(&self, x: &Field) -> Result<Field> {
        x.ensure_shape(self.shape())?;
        let mut y = x.clone();
        if !self.a_is_one {
            for (v, &k) in y.as_mut_slice().iter_mut().zip(self.inv_a.as_slice()) {
                *v *= k;
            }
        }
        if self.r_is_one {
            return Ok(y);
        }
        let mut s = fft2(&y);
        mul_real(&mut s, &self.inv_r);
        Ok(real_part(&ifft2(&s)))
    }

    /// `Re F⁻¹[F[F⁻¹[F[d] • R] • A²] • R]`, the drift line of the sampler.
    ///
    /// For mirror-symmetric `R` this is exactly `M⁻¹ M⁻ᵀ d`: with
    /// `C = F⁻¹ diag(1/R) F` symmetric, `M⁻¹ = C D_A⁻¹` and
    /// `M⁻¹ M⁻ᵀ = C D_A⁻² C`.
    pub fn apply_drift_precondition(&self, d: &Field) -> Result<Field> {
        d.ensure_shape(self.shape())?;
        if self.r_is_one {
            if self.a_is_one {
                return Ok(d.clone());
            }
            let mut y = d.clone();
            for (v, &k) in y.as_mut_slice().iter_mut().zip(self.inv_a2.as_slice()) {
                *v *= k;
            }
            return Ok(y);
        }
        let mut s = fft2(d);
        mul_real(&mut s, &self.inv_r);
        // Stays complex until the final inverse transform.
        let mut mid = ifft2(&s);
        if !self.a_is_one {
            mul_real(&mut mid, &self.inv_a2);
        }
        let mut s = fft2_complex(&mid);
        mul_real(&mut s, &self.inv_r);
        Ok(real_part(&ifft2(&s)))
    }
}

pub fn apply_m(p: &Preconditioner, x: &Field) -> Result<Field> {
    p.apply_m(x)
}

pub fn apply_m_inverse(p: &Preconditioner, x: &Field) -> Result<Field> {
    p.apply_m_inverse(x)
}

pub fn apply_drift_precondition(p: &Preconditioner, d: &Field) -> Result<Field> {
    p.apply_drift_precondition(d)
}

/// Skew-symmetric linear maps on real fields.
///
/// `P_{m,n}` is [`roll`] by `(m, n)`; its transpose is the opposite roll.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkewOperator {
    /// `P_{m,n} - P_{m,n}ᵀ`.
    ShiftDiff { m: isize, n: isize },
    /// `Re[F (P_{m,n} - P_{m,n}ᵀ) F⁻¹]`. Conjugating the shift by the DFT
    /// gives a diagonal phase `φ`, so this is `Re[(φ - φ̄) ⊙ x]`, which is
    /// zero on real input up to rounding.
    SpectralShiftDiff { m: isize, n: isize },
    /// `Re[F[x] - Fᵀ[x]]` with `Fᵀ[x](k) = F[x](-k)`. For real `x` the two
    /// terms are complex conjugates, so this also vanishes up to rounding.
    SpectralTransposeDiff,
}

impl SkewOperator {
    /// The six shift-based operators `S1..S6`: shifts of 1, 10 and 100 in
    /// both directions, first in pixel space, then DFT-conjugated.
    pub fn numbered(index: usize) -> Result<Self> {
        let k = match index {
            1 | 4 => 1,
            2 | 5 => 10,
            3 | 6 => 100,
            _ => {
                return Err(PdsError::InvalidParameter(format!(
                    "skew operator index must be 1..=6, got {index}"
                )))
            }
        };
        Ok(if index <= 3 {
            SkewOperator::ShiftDiff { m: k, n: k }
        } else {
            SkewOperator::SpectralShiftDiff { m: k, n: k }
        })
    }

    pub fn apply(&self, x: &Field) -> Field {
        match *self {
            SkewOperator::ShiftDiff { m, n } => {
                let fwd = roll(x, m, n);
                let back = roll(x, -m, -n);
                fwd.sub(&back).expect("same shape")
            }
            SkewOperator::SpectralShiftDiff { m, n } => {
                let y = ifft2(&x.to_complex());
                let fwd = roll(&y, m, n);
                let back = roll(&y, -m, -n);
                let mut diff = fwd;
                for (a, b) in diff.as_mut_slice().iter_mut().zip(back.as_slice()) {
                    *a -= *b;
                }
                real_part(&fft2_complex(&diff))
            }
            SkewOperator::SpectralTransposeDiff => {
                let s = fft2(x);
                let shape = s.shape();
                let (h, w) = (shape.height(), shape.width());
                Field::from_fn(shape, |c, i, j| {
                    let d: Complex64 = s.get(c, i, j) - s.get(c, mirror(i, h), mirror(j, w));
                    d.re
                })
            }
        }
    }
}

pub fn apply_skew(s: &SkewOperator, x: &Field) -> Field {
    s.apply(x)
}

/// A skew operator with its scale `ω >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solenoidal {
    operator: SkewOperator,
    omega: f64,
}

impl Solenoidal {
    pub fn new(operator: SkewOperator, omega: f64) -> Result<Self> {
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(PdsError::InvalidParameter(format!("omega must be >= 0, got {omega}")));
        }
        Ok(Self { operator, omega })
    }

    pub fn operator(&self) -> SkewOperator {
        self.operator
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
}
