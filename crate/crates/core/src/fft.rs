//! Centred, unitary 2-D FFTs on square buffers.

use std::cell::RefCell;
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward and inverse plans for an `n x n` transform.
///
/// Both directions are scaled by `1/n`, so the pair is unitary and
/// exact inverses of each other. Zero frequency (and the zero spatial
/// coordinate) sits on index `n / 2` in both domains.
#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).finish()
    }
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let (forward, inverse) = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            (p.plan_fft_forward(n), p.plan_fft_inverse(n))
        });
        Self {
            n,
            forward,
            inverse,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward, Sparsity::Dense, true);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse, Sparsity::Dense, true);
    }

    /// Forward transform of a buffer whose rows outside `live_rows` are
    /// zero. Skipping those rows in the first pass is exact.
    pub fn forward_sparse_rows(&self, data: &mut [Complex64], live_rows: Range<usize>) {
        self.run(data, &self.forward, Sparsity::InputRows(live_rows), true);
    }

    /// Plain (uncentred, unscaled) DFT with index 0 at the origin. Rows in
    /// `sparsity` are raw buffer rows.
    pub(crate) fn transform_raw(&self, data: &mut [Complex64], inverse: bool, sparsity: Sparsity) {
        let fft = if inverse { &self.inverse } else { &self.forward };
        self.passes(data, fft, sparsity, |r| r);
    }

    fn run(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>, sparsity: Sparsity, scale: bool) {
        let n = self.n;
        assert_eq!(data.len(), n * n, "buffer is not {n}x{n}");
        // ifftshift: the centre pixel moves to index 0
        shift_2d(data, n, n / 2);
        let half = n / 2;
        self.passes(data, fft, sparsity, |r| (r + n - half) % n);
        // fftshift
        shift_2d(data, n, n - n / 2);
        if scale {
            let s = 1.0 / n as f64;
            data.iter_mut().for_each(|z| *z *= s);
        }
    }

    /// Row and column passes; `buffer_row` maps a caller row index to the
    /// buffer row it occupies.
    fn passes(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>, sparsity: Sparsity, buffer_row: impl Fn(usize) -> usize) {
        let n = self.n;
        assert_eq!(data.len(), n * n, "buffer is not {n}x{n}");
        let mapped = |rows: Range<usize>| -> Vec<usize> { rows.map(&buffer_row).collect() };

        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        match sparsity {
            Sparsity::OutputRows(rows) if rows.len() < n => {
                // columns first, then only the wanted rows
                column_pass(data, n, fft, &mut scratch);
                let mut wanted = vec![false; n];
                mapped(rows).into_iter().for_each(|r| wanted[r] = true);
                for (r, row) in data.chunks_exact_mut(n).enumerate() {
                    if wanted[r] {
                        fft.process_with_scratch(row, &mut scratch);
                    } else {
                        row.fill(Complex64::default());
                    }
                }
            }
            Sparsity::InputRows(rows) if rows.len() < n => {
                for r in mapped(rows) {
                    fft.process_with_scratch(&mut data[r * n..(r + 1) * n], &mut scratch);
                }
                column_pass(data, n, fft, &mut scratch);
            }
            _ => {
                fft.process_with_scratch(data, &mut scratch);
                column_pass(data, n, fft, &mut scratch);
            }
        }
    }
}

/// Transforms every column, a strip of columns at a time.
fn column_pass(data: &mut [Complex64], n: usize, fft: &Arc<dyn Fft<f64>>, scratch: &mut [Complex64]) {
    const W: usize = 16;
    let mut strip = vec![Complex64::default(); W * n];
    for c0 in (0..n).step_by(W) {
        let w = W.min(n - c0);
        for r in 0..n {
            let row = &data[r * n + c0..r * n + c0 + w];
            for (j, &z) in row.iter().enumerate() {
                strip[j * n + r] = z;
            }
        }
        fft.process_with_scratch(&mut strip[..w * n], scratch);
        for r in 0..n {
            let row = &mut data[r * n + c0..r * n + c0 + w];
            for (j, z) in row.iter_mut().enumerate() {
                *z = strip[j * n + r];
            }
        }
    }
}

/// Rows of a transform known to be zero on input, or not needed on
/// output (those are returned as zeros).
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Sparsity {
    Dense,
    InputRows(Range<usize>),
    OutputRows(Range<usize>),
}

/// Cyclically rotates rows and columns left by `k`.
fn shift_2d(data: &mut [Complex64], n: usize, k: usize) {
    if k % n == 0 {
        return;
    }
    for row in data.chunks_exact_mut(n) {
        row.rotate_left(k);
    }
    data.rotate_left(k * n);
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn naive_centered_dft(x: &[Complex64], n: usize) -> Vec<Complex64> {
        let c = (n / 2) as f64;
        let mut out = vec![Complex64::default(); n * n];
        for kr in 0..n {
            for kc in 0..n {
                let mut acc = Complex64::default();
                for r in 0..n {
                    for col in 0..n {
                        let arg = -TAU
                            * ((kr as f64 - c) * (r as f64 - c) + (kc as f64 - c) * (col as f64 - c))
                            / n as f64;
                        acc += x[r * n + col] * Complex64::from_polar(1.0, arg);
                    }
                }
                out[kr * n + kc] = acc / n as f64;
            }
        }
        out
    }

    fn sample(n: usize) -> Vec<Complex64> {
        (0..n * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect()
    }

    #[test]
    fn matches_naive_centered_dft_even_and_odd() {
        for n in [6usize, 7, 8] {
            let x = sample(n);
            let mut y = x.clone();
            Fft2::new(n).forward(&mut y);
            let want = naive_centered_dft(&x, n);
            for (a, b) in y.iter().zip(&want) {
                assert!((a - b).norm() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn inverse_round_trip_and_parseval() {
        for n in [5usize, 16, 45] {
            let x = sample(n);
            let mut y = x.clone();
            let f = Fft2::new(n);
            f.forward(&mut y);
            let ex: f64 = x.iter().map(|z| z.norm_sqr()).sum();
            let ey: f64 = y.iter().map(|z| z.norm_sqr()).sum();
            assert!((ex - ey).abs() / ex < 1e-13);
            f.inverse(&mut y);
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sparse_row_forward_is_exact() {
        let n = 37;
        let mut x = sample(n);
        for r in (0..10).chain(30..n) {
            x[r * n..(r + 1) * n].fill(Complex64::default());
        }
        let f = Fft2::new(n);
        let mut dense = x.clone();
        f.forward(&mut dense);
        let mut sparse = x;
        f.forward_sparse_rows(&mut sparse, 10..30);
        assert_eq!(dense, sparse);
    }

    #[test]
    fn pruned_output_rows_match_dense() {
        for n in [36, 37] {
            let x = sample(n);
            let f = Fft2::new(n);
            let mut dense = x.clone();
            f.transform_raw(&mut dense, true, Sparsity::Dense);
            let mut pruned = x;
            f.transform_raw(&mut pruned, true, Sparsity::OutputRows(5..20));
            for r in 0..n {
                for c in 0..n {
                    let got = pruned[r * n + c];
                    if (5..20).contains(&r) {
                        assert!((got - dense[r * n + c]).norm() < 1e-10);
                    } else {
                        assert_eq!(got, Complex64::default());
                    }
                }
            }
        }
    }
}
