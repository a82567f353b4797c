//! Per-channel 2D DFT, circular shifts and orthogonal maps.
//!
//! Convention: the forward transform is unnormalized and the inverse carries
//! the `1/(H·W)` factor, so `ifft2(fft2(x)) == x` and frequency-domain filters
//! act multiplicatively with no hidden scale.
//!
//! Frequency-domain filters are stored *centered*: the DC bin sits at
//! `(H/2, W/2)` (integer division). [`fftshift`] maps natural DFT order to
//! centered order and [`ifftshift`] undoes it.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{PdsError, Result};
use crate::grid::{Field, Grid, GridShape, Scalar, SpectralField};

struct Plan2 {
    rows: Arc<dyn Fft<f64>>,
    cols: Arc<dyn Fft<f64>>,
}

thread_local! {
    static PLANNER: RefCell<(FftPlanner<f64>, HashMap<(usize, usize, bool), Arc<Plan2>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(height: usize, width: usize, direction: FftDirection) -> Arc<Plan2> {
    let inverse = direction == FftDirection::Inverse;
    PLANNER.with(|cell| {
        let (planner, cache) = &mut *cell.borrow_mut();
        cache
            .entry((height, width, inverse))
            .or_insert_with(|| {
                Arc::new(Plan2 {
                    rows: planner.plan_fft(width, direction),
                    cols: planner.plan_fft(height, direction),
                })
            })
            .clone()
    })
}

fn transform_in_place(data: &mut [Complex64], shape: GridShape, direction: FftDirection) {
    let (h, w) = (shape.height(), shape.width());
    let p = plan(h, w, direction);
    // Rows are contiguous; rustfft processes each `w`-chunk independently.
    if w > 1 {
        p.rows.process(data);
    }
    if h > 1 {
        let mut column = vec![Complex64::new(0.0, 0.0); h];
        for plane in data.chunks_exact_mut(h * w) {
            for col in 0..w {
                for (row, slot) in column.iter_mut().enumerate() {
                    *slot = plane[row * w + col];
                }
                p.cols.process(&mut column);
                for (row, v) in column.iter().enumerate() {
                    plane[row * w + col] = *v;
                }
            }
        }
    }
}

/// Forward DFT of a real field, per channel.
pub fn fft2(x: &Field) -> SpectralField {
    let mut data: Vec<Complex64> = x.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_in_place(&mut data, x.shape(), FftDirection::Forward);
    Grid::from_raw(x.shape(), data)
}

/// Forward DFT of a complex grid.
pub fn fft2_complex(s: &SpectralField) -> SpectralField {
    let mut data = s.as_slice().to_vec();
    transform_in_place(&mut data, s.shape(), FftDirection::Forward);
    Grid::from_raw(s.shape(), data)
}

/// Inverse DFT including the `1/(H·W)` normalization.
pub fn ifft2(s: &SpectralField) -> SpectralField {
    let shape = s.shape();
    let mut data = s.as_slice().to_vec();
    transform_in_place(&mut data, shape, FftDirection::Inverse);
    let k = 1.0 / shape.plane() as f64;
    for v in &mut data {
        *v *= k;
    }
    Grid::from_raw(shape, data)
}

/// Circular shift: `out[c, h, w] = x[c, (h - m) mod H, (w - n) mod W]`.
pub fn roll<T: Scalar>(x: &Grid<T>, m: isize, n: isize) -> Grid<T> {
    let shape = x.shape();
    let (hh, ww) = (shape.height() as isize, shape.width() as isize);
    let dm = m.rem_euclid(hh) as usize;
    let dn = n.rem_euclid(ww) as usize;
    let (h, w) = (shape.height(), shape.width());
    Grid::from_fn(shape, |c, i, j| x.get(c, (i + h - dm) % h, (j + w - dn) % w))
}

/// Natural DFT order to centered order (DC moves to `(H/2, W/2)`).
pub fn fftshift<T: Scalar>(x: &Grid<T>) -> Grid<T> {
    let s = x.shape();
    roll(x, (s.height() / 2) as isize, (s.width() / 2) as isize)
}

/// Centered order back to natural DFT order.
pub fn ifftshift<T: Scalar>(x: &Grid<T>) -> Grid<T> {
    let s = x.shape();
    roll(x, -((s.height() / 2) as isize), -((s.width() / 2) as isize))
}

/// Index of the frequency `-k` along an axis of length `n`.
#[inline]
pub(crate) fn mirror(k: usize, n: usize) -> usize {
    (n - k) % n
}

/// Whether `x`, read in natural DFT order, satisfies `x(k) == x(-k)` within
/// `tol` relative to its largest entry.
pub(crate) fn is_mirror_symmetric(x: &Field, tol: f64) -> bool {
    let s = x.shape();
    let scale = x.max_abs().max(f64::MIN_POSITIVE);
    (0..s.channels()).all(|c| {
        (0..s.height()).all(|h| {
            (0..s.width()).all(|w| {
                let other = x.get(c, mirror(h, s.height()), mirror(w, s.width()));
                (x.get(c, h, w) - other).abs() <= tol * scale
            })
        })
    })
}

/// Orthogonal `n × n` matrix, validated at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMap {
    matrix: DMatrix<f64>,
}

impl OrthogonalMap {
    pub const TOLERANCE: f64 = 1e-10;

    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(PdsError::InvalidParameter(format!(
                "orthogonal map must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let n = matrix.nrows();
        let deviation = (matrix.transpose() * &matrix - DMatrix::identity(n, n)).norm();
        if !deviation.is_finite() || deviation > Self::TOLERANCE {
            return Err(PdsError::NotOrthogonal { deviation });
        }
        Ok(Self { matrix })
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn transpose(&self) -> OrthogonalMap {
        OrthogonalMap {
            matrix: self.matrix.transpose(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        apply_orthogonal(self, x)
    }
}

/// Matrix-vector product `B x`.
pub fn apply_orthogonal(b: &OrthogonalMap, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != b.dimension() {
        return Err(PdsError::DimensionMismatch {
            expected: b.dimension(),
            found: x.len(),
        });
    }
    let v = &b.matrix * nalgebra::DVector::from_column_slice(x);
    Ok(v.as_slice().to_vec())
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of `R`'s diagonal folded into `Q`.
pub fn random_orthogonal(n: usize, seed: u64) -> Result<OrthogonalMap> {
    if n == 0 {
        return Err(PdsError::InvalidParameter("dimension must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    OrthogonalMap::new(q)
}
