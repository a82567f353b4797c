//! Dense C×H×W grids and their elementwise algebra.
//!
//! Storage is row-major in `(channel, height, width)` order. Real grids
//! ([`Field`]) carry the sampler state and the space filter; complex grids
//! ([`SpectralField`]) carry Fourier coefficients.

use std::fmt;
use std::io::{Read, Write};
use std::ops::{Div, Mul};
use std::path::Path;

use rustfft::num_complex::Complex64;

use crate::error::{PdsError, Result};

/// Divisor entries with modulus at or below this are rejected.
pub const DIVISOR_EPS: f64 = 1e-12;

/// Magic prefix of the binary grid format.
pub const GRID_MAGIC: &[u8; 16] = b"PDSGRID1        ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridShape {
    channels: usize,
    height: usize,
    width: usize,
}

impl GridShape {
    pub fn new(channels: usize, height: usize, width: usize) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(PdsError::InvalidShape {
                channels,
                height,
                width,
            });
        }
        Ok(Self {
            channels,
            height,
            width,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of entries in one channel plane.
    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, c: usize, h: usize, w: usize) -> usize {
        debug_assert!(c < self.channels && h < self.height && w < self.width);
        (c * self.height + h) * self.width + w
    }

    /// Inverse of [`GridShape::index`].
    pub fn coords(&self, index: usize) -> (usize, usize, usize) {
        let w = index % self.width;
        let h = (index / self.width) % self.height;
        let c = index / self.plane();
        (c, h, w)
    }

    fn ensure_same(&self, other: &GridShape) -> Result<()> {
        if self != other {
            return Err(PdsError::ShapeMismatch {
                expected: *self,
                found: *other,
            });
        }
        Ok(())
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// Element type of a [`Grid`].
pub trait Scalar:
    Copy + Send + Sync + PartialEq + fmt::Debug + Mul<Output = Self> + Div<Output = Self>
{
    fn zero() -> Self;
    fn modulus(self) -> f64;
    fn finite(self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }

    fn modulus(self) -> f64 {
        self.abs()
    }

    fn finite(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }

    fn modulus(self) -> f64 {
        self.norm()
    }

    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// A dense C×H×W grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    shape: GridShape,
    data: Vec<T>,
}

/// Real-valued grid.
pub type Field = Grid<f64>;

/// Complex-valued grid, typically Fourier coefficients of a [`Field`].
pub type SpectralField = Grid<Complex64>;

impl<T: Scalar> Grid<T> {
    /// Wraps `data`, rejecting wrong lengths and non-finite entries.
    pub fn new(shape: GridShape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(PdsError::LengthMismatch {
                shape,
                expected: shape.len(),
                found: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.finite()) {
            return Err(PdsError::NonFinite { index });
        }
        Ok(Self { shape, data })
    }

    /// Internal constructor for data produced by trusted arithmetic.
    pub(crate) fn from_raw(shape: GridShape, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), shape.len());
        Self { shape, data }
    }

    pub fn zeros(shape: GridShape) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn filled(shape: GridShape, value: T) -> Self {
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_fn(shape: GridShape, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for c in 0..shape.channels() {
            for h in 0..shape.height() {
                for w in 0..shape.width() {
                    data.push(f(c, h, w));
                }
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, c: usize, h: usize, w: usize) -> T {
        self.data[self.shape.index(c, h, w)]
    }

    pub fn set(&mut self, c: usize, h: usize, w: usize, value: T) {
        let i = self.shape.index(c, h, w);
        self.data[i] = value;
    }

    /// One channel plane, `height * width` entries.
    pub fn channel(&self, c: usize) -> &[T] {
        let p = self.shape.plane();
        &self.data[c * p..(c + 1) * p]
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Grid<U> {
        Grid::from_raw(self.shape, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.finite())
    }

    pub(crate) fn check_finite(self) -> Result<Self> {
        match self.data.iter().position(|v| !v.finite()) {
            Some(index) => Err(PdsError::NonFinite { index }),
            None => Ok(self),
        }
    }

    pub fn ensure_shape(&self, shape: GridShape) -> Result<()> {
        shape.ensure_same(&self.shape)
    }
}

impl Field {
    pub fn ones(shape: GridShape) -> Self {
        Self::filled(shape, 1.0)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sup-norm.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.shape.ensure_same(&other.shape)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, k: f64) -> Field {
        self.map(|v| v * k)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        zip_with(self, other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        zip_with(self, other, |a, b| a - b)
    }

    /// Promotes to a complex grid with zero imaginary parts.
    pub fn to_complex(&self) -> SpectralField {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

fn zip_with<T: Scalar>(a: &Grid<T>, b: &Grid<T>, f: impl Fn(T, T) -> T) -> Result<Grid<T>> {
    a.shape.ensure_same(&b.shape)?;
    let data = a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
    Grid::from_raw(a.shape, data).check_finite()
}

/// `out[i] = a[i] * b[i]`.
pub fn elementwise_mul<T: Scalar>(a: &Grid<T>, b: &Grid<T>) -> Result<Grid<T>> {
    zip_with(a, b, |x, y| x * y)
}

/// `out[i] = a[i] / b[i]`; fails on the first divisor with modulus at or
/// below [`DIVISOR_EPS`].
pub fn elementwise_div<T: Scalar>(a: &Grid<T>, b: &Grid<T>) -> Result<Grid<T>> {
    a.shape.ensure_same(&b.shape)?;
    if let Some(index) = b.data.iter().position(|v| v.modulus() <= DIVISOR_EPS) {
        return Err(PdsError::NearZeroDivisor {
            index,
            value: b.data[index].modulus(),
        });
    }
    zip_with(a, b, |x, y| x / y)
}

/// Drops imaginary parts.
pub fn real_part(s: &SpectralField) -> Field {
    s.map(|v| v.re)
}

/// Writes `field` in the PDSGRID1 format: magic, `C H W` as little-endian
/// u32, then the payload as little-endian f64.
pub fn write_grid<W: Write>(mut out: W, field: &Field) -> Result<()> {
    let shape = field.shape();
    let dims = [shape.channels(), shape.height(), shape.width()];
    let mut buf = Vec::with_capacity(16 + 12 + 8 * field.len());
    buf.extend_from_slice(GRID_MAGIC);
    for d in dims {
        let d = u32::try_from(d)
            .map_err(|_| PdsError::Format(format!("dimension {d} exceeds u32")))?;
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for v in field.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Reads only the PDSGRID1 header.
pub fn read_grid_header<R: Read>(mut input: R) -> Result<GridShape> {
    let mut header = [0u8; 28];
    input
        .read_exact(&mut header)
        .map_err(|e| PdsError::Format(format!("truncated header: {e}")))?;
    if &header[..16] != GRID_MAGIC {
        return Err(PdsError::Format("bad magic".into()));
    }
    let dim = |i: usize| {
        let b = &header[16 + 4 * i..20 + 4 * i];
        u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize
    };
    GridShape::new(dim(0), dim(1), dim(2))
}

pub fn read_grid<R: Read>(mut input: R) -> Result<Field> {
    let shape = read_grid_header(&mut input)?;
    let mut payload = Vec::new();
    input.read_to_end(&mut payload)?;
    if payload.len() != 8 * shape.len() {
        return Err(PdsError::Format(format!(
            "payload has {} bytes, shape {shape} needs {}",
            payload.len(),
            8 * shape.len()
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    Field::new(shape, data)
}

fn with_path(path: &Path) -> impl FnOnce(std::io::Error) -> std::io::Error + '_ {
    move |e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))
}

pub fn save_grid(path: impl AsRef<Path>, field: &Field) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(with_path(path))?;
    write_grid(std::io::BufWriter::new(file), field)
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<Field> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(with_path(path))?;
    read_grid(std::io::BufReader::new(file))
}
