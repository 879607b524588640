//! Row-major 2-D grids and the sampled complex optical field.
//!
//! Every grid in the toolkit shares one centring convention: the optical
//! axis sits on pixel `(rows / 2, cols / 2)` (integer division), which is
//! also where a centred FFT puts zero frequency. Embedding and cropping
//! keep those centre pixels aligned.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense row-major 2-D array.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Real-valued image: phase in radians, intensity in photons or counts.
pub type RealImage = Grid<f64>;
pub type PhaseImage = Grid<f64>;
pub type IntensityImage = Grid<f64>;

impl<T: Clone> Grid<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::GeometryMismatch(format!(
                "{} values cannot fill a {rows}x{cols} grid",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Centres `self` inside a `rows x cols` grid filled with `fill`.
    pub fn embed(&self, rows: usize, cols: usize, fill: T) -> Result<Self> {
        if rows < self.rows || cols < self.cols {
            return Err(Error::GeometryMismatch(format!(
                "cannot embed {}x{} into smaller {rows}x{cols}",
                self.rows, self.cols
            )));
        }
        let (r0, c0) = (rows / 2 - self.rows / 2, cols / 2 - self.cols / 2);
        let mut out = Grid::filled(rows, cols, fill);
        for r in 0..self.rows {
            let dst = (r0 + r) * cols + c0;
            out.data[dst..dst + self.cols].clone_from_slice(self.row(r));
        }
        Ok(out)
    }

    /// Central `rows x cols` window, the inverse of [`Grid::embed`].
    pub fn crop_center(&self, rows: usize, cols: usize) -> Result<Self> {
        if rows > self.rows || cols > self.cols {
            return Err(Error::GeometryMismatch(format!(
                "cannot crop {rows}x{cols} out of {}x{}",
                self.rows, self.cols
            )));
        }
        let (r0, c0) = (self.rows / 2 - rows / 2, self.cols / 2 - cols / 2);
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            data.extend_from_slice(&self.row(r0 + r)[c0..c0 + cols]);
        }
        Ok(Self { rows, cols, data })
    }
}

impl<T> Grid<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
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

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.cols + c]
    }

    pub fn get_mut(&mut self, r: usize, c: usize) -> &mut T {
        &mut self.data[r * self.cols + c]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }
}

impl<T> std::ops::Index<(usize, usize)> for Grid<T> {
    type Output = T;

    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Grid<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

impl Grid<f64> {
    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }
}

/// Signed offset of pixel `i` from the grid centre, in pixels.
#[inline]
pub fn centered_index(i: usize, n: usize) -> f64 {
    i as f64 - (n / 2) as f64
}

/// Sampled scalar optical field on a uniform square-pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    data: Grid<Complex64>,
    pitch: f64,
    wavelength: f64,
}

impl ComplexField {
    pub fn new(data: Grid<Complex64>, pitch: f64, wavelength: f64) -> Result<Self> {
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::GeometryMismatch(format!("pitch must be > 0, got {pitch}")));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::GeometryMismatch(format!(
                "wavelength must be > 0, got {wavelength}"
            )));
        }
        if data.rows() < 2 || data.cols() < 2 {
            return Err(Error::GeometryMismatch(format!(
                "field grid must be at least 2x2, got {}x{}",
                data.rows(),
                data.cols()
            )));
        }
        Ok(Self {
            data,
            pitch,
            wavelength,
        })
    }

    pub fn data(&self) -> &Grid<Complex64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Grid<Complex64> {
        &mut self.data
    }

    pub fn into_data(self) -> Grid<Complex64> {
        self.data
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    /// Total energy, the sum of squared moduli.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Pixelwise squared modulus.
    pub fn intensity(&self) -> IntensityImage {
        self.data.map(|z| z.norm_sqr())
    }

    pub fn phase(&self) -> PhaseImage {
        self.data.map(|z| z.arg())
    }

    pub fn amplitude(&self) -> RealImage {
        self.data.map(|z| z.norm())
    }

    /// Centres the field in a larger grid; the pitch is unchanged.
    pub fn embed(&self, rows: usize, cols: usize, fill: Complex64) -> Result<Self> {
        Ok(Self {
            data: self.data.embed(rows, cols, fill)?,
            ..*self
        })
    }

    pub fn crop_center(&self, rows: usize, cols: usize) -> Result<Self> {
        Ok(Self {
            data: self.data.crop_center(rows, cols)?,
            ..*self
        })
    }

    pub(crate) fn with_data(&self, data: Grid<Complex64>, pitch: f64) -> Self {
        Self {
            data,
            pitch,
            wavelength: self.wavelength,
        }
    }
}

/// Pixelwise squared modulus of a field.
pub fn intensity(field: &ComplexField) -> IntensityImage {
    field.intensity()
}

/// Centres `field` in a square `target_size` grid padded with `fill`.
pub fn embed(field: &ComplexField, target_size: usize, fill: Complex64) -> Result<ComplexField> {
    field.embed(target_size, target_size, fill)
}

/// Wraps an angle into `(-pi, pi]`.
#[inline]
pub fn wrap_phase(phi: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = phi - TAU * ((phi + PI) / TAU).floor();
    // floor maps +pi to -pi; the convention keeps +pi
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}
