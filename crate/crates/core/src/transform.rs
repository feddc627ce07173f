//! Multi-dimensional real FFTs over flat row-major buffers.
//!
//! Convention: the forward transform is unnormalized,
//! `F_k = Σ_x f(x) e^{-i ξ_k·x}`, and the inverse divides by `N^d`.
//! The last axis goes through a real-to-complex transform; the remaining
//! axes are transformed in place, a batch of columns at a time.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec;

struct Plans {
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().unwrap_or_else(|e| e.into_inner());
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut real = RealFftPlanner::<f64>::new();
            let mut complex = FftPlanner::<f64>::new();
            Arc::new(Plans {
                r2c: real.plan_fft_forward(n),
                c2r: real.plan_fft_inverse(n),
                forward: complex.plan_fft_forward(n),
                inverse: complex.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Columns gathered per batch along a leading axis; a batch of 2048-point
/// columns stays in L2.
const BATCH: usize = 16;

#[derive(Default)]
struct Workspace {
    row: Vec<f64>,
    batch: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

thread_local! {
    static WORKSPACE: RefCell<Workspace> = RefCell::new(Workspace::default());
}

fn grow<T: Default + Clone>(v: &mut Vec<T>, len: usize) {
    if v.len() < len {
        v.resize(len, T::default());
    }
}

/// Complex FFT along every axis except the last one of the half layout.
/// Columns are gathered in batches, transformed contiguously and scattered
/// back.
fn transform_leading_axes(grid: &GridSpec, data: &mut [Complex64], fft: &dyn Fft<f64>, work: &mut Workspace) {
    let n = grid.points;
    let d = grid.dim;
    let scratch_len = fft.get_inplace_scratch_len();
    grow(&mut work.scratch, scratch_len);
    grow(&mut work.batch, BATCH * n);
    for axis in 0..d.saturating_sub(1) {
        let inner = n.pow((d - 2 - axis) as u32) * grid.half_points();
        for chunk in data.chunks_exact_mut(n * inner) {
            for c0 in (0..inner).step_by(BATCH) {
                let w = BATCH.min(inner - c0);
                let batch = &mut work.batch[..w * n];
                let mut nonzero = false;
                for r in 0..n {
                    for (k, v) in chunk[r * inner + c0..r * inner + c0 + w].iter().enumerate() {
                        batch[k * n + r] = *v;
                        nonzero |= v.re != 0.0 || v.im != 0.0;
                    }
                }
                // Dealiased spectra have whole columns of zeros.
                if !nonzero {
                    continue;
                }
                fft.process_with_scratch(batch, &mut work.scratch[..scratch_len]);
                for r in 0..n {
                    for (k, v) in chunk[r * inner + c0..r * inner + c0 + w].iter_mut().enumerate() {
                        *v = batch[k * n + r];
                    }
                }
            }
        }
    }
}

/// Unnormalized forward transform of real samples into the half layout.
pub fn forward(grid: &GridSpec, values: &[f64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); grid.spectral_len()];
    forward_into(grid, values, &mut out);
    out
}

/// [`forward`] into a caller-provided buffer of length `spectral_len`.
pub fn forward_into(grid: &GridSpec, values: &[f64], out: &mut [Complex64]) {
    assert_eq!(values.len(), grid.len());
    assert_eq!(out.len(), grid.spectral_len());
    let n = grid.points;
    let h = grid.half_points();
    let p = plans(n);
    WORKSPACE.with(|w| {
        let work = &mut *w.borrow_mut();
        grow(&mut work.row, n);
        let scratch_len = p.r2c.get_scratch_len();
        grow(&mut work.scratch, scratch_len);
        for (src, dst) in values.chunks_exact(n).zip(out.chunks_exact_mut(h)) {
            work.row[..n].copy_from_slice(src);
            p.r2c
                .process_with_scratch(&mut work.row[..n], dst, &mut work.scratch[..scratch_len])
                .expect("r2c buffer sizes are fixed by the grid");
        }
        transform_leading_axes(grid, out, p.forward.as_ref(), work);
    });
}

/// Inverse transform (divided by `N^d`) of a half-layout spectrum.
pub fn inverse(grid: &GridSpec, spectral: &[Complex64]) -> Vec<f64> {
    inverse_owned(grid, spectral.to_vec())
}

/// Like [`inverse`], reusing the spectral buffer as workspace.
pub fn inverse_owned(grid: &GridSpec, mut data: Vec<Complex64>) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    inverse_into(grid, &mut data, &mut out);
    out
}

/// Inverse transform into `out`; `data` is overwritten.
pub fn inverse_into(grid: &GridSpec, data: &mut [Complex64], out: &mut [f64]) {
    assert_eq!(data.len(), grid.spectral_len());
    assert_eq!(out.len(), grid.len());
    let n = grid.points;
    let h = grid.half_points();
    let p = plans(n);
    let scale = 1.0 / grid.len() as f64;
    WORKSPACE.with(|w| {
        let work = &mut *w.borrow_mut();
        transform_leading_axes(grid, data, p.inverse.as_ref(), work);
        let scratch_len = p.c2r.get_scratch_len();
        grow(&mut work.scratch, scratch_len);
        for (src, dst) in data.chunks_exact_mut(h).zip(out.chunks_exact_mut(n)) {
            // DC and Nyquist of a real lane are real; drop round-off residue.
            src[0].im = 0.0;
            src[h - 1].im = 0.0;
            p.c2r
                .process_with_scratch(src, dst, &mut work.scratch[..scratch_len])
                .expect("c2r buffer sizes are fixed by the grid");
            for v in dst.iter_mut() {
                *v *= scale;
            }
        }
    });
}

/// Expands a half-layout spectrum to all `N^d` coefficients using
/// conjugate symmetry. Intended for checks and small grids.
pub fn full_spectrum(grid: &GridSpec, half: &[Complex64]) -> Vec<Complex64> {
    let n = grid.points;
    let d = grid.dim;
    let h = grid.half_points();
    let mut full = vec![Complex64::default(); grid.len()];
    let mut idx = vec![0usize; d];
    for (flat, slot) in full.iter_mut().enumerate() {
        let mut rem = flat;
        for a in (0..d).rev() {
            idx[a] = rem % n;
            rem /= n;
        }
        let last = idx[d - 1];
        let (mirror, conj) = if last < h { (false, false) } else { (true, true) };
        let mut src = 0usize;
        for a in 0..d {
            let i = if mirror { (n - idx[a]) % n } else { idx[a] };
            let dim_len = if a == d - 1 { h } else { n };
            src = src * dim_len + i;
        }
        *slot = if conj { half[src].conj() } else { half[src] };
    }
    full
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_and_constant() {
        let g = GridSpec::new(2, 8, 2.0 * PI).unwrap();
        let z = forward(&g, &vec![0.0; g.len()]);
        assert!(z.iter().all(|c| c.norm() == 0.0));
        let c = forward(&g, &vec![3.0; g.len()]);
        assert!((c[0].re - 3.0 * 64.0).abs() < 1e-12);
        assert!(c[1..].iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn round_trip_3d() {
        let g = GridSpec::new(3, 8, 1.0).unwrap();
        let v: Vec<f64> = (0..g.len()).map(|i| ((i * 37 % 101) as f64).sin()).collect();
        let back = inverse(&g, &forward(&g, &v));
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
