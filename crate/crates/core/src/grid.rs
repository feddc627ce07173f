//! Uniform periodic grids on the box `[0, S)^d` and their frequency lattice.
//!
//! Physical samples are stored row-major with the last axis fastest. The
//! spectral side uses the real-to-complex half layout: every axis keeps all
//! `N` wavenumbers except the last, which keeps indices `0..=N/2`. Index `i`
//! on an axis maps to the signed integer `k = i` for `i < N/2` and
//! `k = i - N` otherwise, and to the physical frequency `2πk/S`. The index
//! `N/2` is therefore the Nyquist mode `k = -N/2`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default dealiasing fraction (the 2/3 rule).
pub const DEFAULT_DEALIAS_FRACTION: f64 = 2.0 / 3.0;

fn default_dealias() -> f64 {
    DEFAULT_DEALIAS_FRACTION
}

/// A uniform periodic grid with `points` samples per axis on `[0, side)^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub points: usize,
    pub side: f64,
    #[serde(default = "default_dealias")]
    pub dealias_fraction: f64,
}

impl GridSpec {
    pub fn new(dim: usize, points: usize, side: f64) -> Result<Self> {
        Self::with_dealias(dim, points, side, DEFAULT_DEALIAS_FRACTION)
    }

    pub fn with_dealias(dim: usize, points: usize, side: f64, dealias_fraction: f64) -> Result<Self> {
        let grid = GridSpec { dim, points, side, dealias_fraction };
        grid.validate()?;
        Ok(grid)
    }

    /// Checks the invariants; needed after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        if self.points < 2 || !self.points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 2, got {}",
                self.points
            )));
        }
        if !(self.side.is_finite() && self.side > 0.0) {
            return Err(Error::InvalidGrid(format!("side length must be positive, got {}", self.side)));
        }
        if !(self.dealias_fraction > 0.0 && self.dealias_fraction <= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "dealias fraction must lie in (0, 1], got {}",
                self.dealias_fraction
            )));
        }
        (self.points as u128)
            .checked_pow(self.dim as u32)
            .filter(|&len| len <= usize::MAX as u128 / 16)
            .ok_or_else(|| Error::InvalidGrid("grid too large".into()))?;
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.side / self.points as f64
    }

    /// Largest resolved frequency `πN/S`.
    pub fn nyquist(&self) -> f64 {
        PI * self.points as f64 / self.side
    }

    /// Per-axis frequency above which modes are removed by [`dealias`](crate::field::Field::dealias).
    pub fn dealias_cutoff(&self) -> f64 {
        self.dealias_fraction * self.nyquist()
    }

    /// Lattice spacing `2π/S` of the frequency grid.
    pub fn frequency_step(&self) -> f64 {
        2.0 * PI / self.side
    }

    /// Number of physical samples, `N^d`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Length of the last spectral axis, `N/2 + 1`.
    pub fn half_points(&self) -> usize {
        self.points / 2 + 1
    }

    /// Number of stored spectral coefficients.
    pub fn spectral_len(&self) -> usize {
        self.points.pow(self.dim as u32 - 1) * self.half_points()
    }

    /// Shape of the spectral array, last axis halved.
    pub fn spectral_shape(&self) -> Vec<usize> {
        let mut shape = vec![self.points; self.dim];
        shape[self.dim - 1] = self.half_points();
        shape
    }

    /// Signed integer wavenumber of axis index `i`.
    pub fn signed_index(&self, i: usize) -> i64 {
        if i < self.points / 2 {
            i as i64
        } else {
            i as i64 - self.points as i64
        }
    }

    /// Physical frequency `2πk/S` of axis index `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        self.frequency_step() * self.signed_index(i) as f64
    }

    pub fn is_nyquist_index(&self, i: usize) -> bool {
        i == self.points / 2
    }

    /// Physical coordinate of axis index `i`.
    pub fn coordinate(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Multiplicity of a half-layout mode in the full spectrum: modes whose
    /// last-axis index is neither 0 nor N/2 stand for a conjugate pair.
    pub fn pair_weight(&self, last_index: usize) -> f64 {
        if last_index == 0 || last_index == self.points / 2 {
            1.0
        } else {
            2.0
        }
    }

    /// Calls `f(flat, indices, frequencies)` for every stored spectral mode,
    /// in storage order.
    pub fn visit_modes(&self, mut f: impl FnMut(usize, &[usize], &[f64])) {
        let shape = self.spectral_shape();
        let mut idx = vec![0usize; self.dim];
        let mut xi: Vec<f64> = vec![0.0; self.dim];
        let total = self.spectral_len();
        for (a, x) in xi.iter_mut().enumerate() {
            *x = self.wavenumber(idx[a]);
        }
        for flat in 0..total {
            f(flat, &idx, &xi);
            // odometer increment, last axis fastest
            for a in (0..self.dim).rev() {
                idx[a] += 1;
                if idx[a] < shape[a] {
                    xi[a] = self.wavenumber(idx[a]);
                    break;
                }
                idx[a] = 0;
                xi[a] = self.wavenumber(0);
            }
        }
    }

    /// Table of `f(ξ)` over the stored spectral modes.
    pub fn mode_table<T>(&self, mut f: impl FnMut(&[f64]) -> T) -> Vec<T> {
        let mut out = Vec::with_capacity(self.spectral_len());
        self.visit_modes(|_, _, xi| out.push(f(xi)));
        out
    }

    /// Calls `f(flat, x)` for every grid point, in storage order.
    pub fn visit_points(&self, mut f: impl FnMut(usize, &[f64])) {
        let mut idx = vec![0usize; self.dim];
        let mut x = vec![0.0; self.dim];
        for flat in 0..self.len() {
            f(flat, &x);
            for a in (0..self.dim).rev() {
                idx[a] += 1;
                if idx[a] < self.points {
                    x[a] = self.coordinate(idx[a]);
                    break;
                }
                idx[a] = 0;
                x[a] = 0.0;
            }
        }
    }

    /// Cell volume `h^d` of the rectangle rule.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Factor converting `Σ_k |F_k|^2` over the full unnormalized spectrum
    /// into `Σ_x |f(x)|^2 h^d`.
    pub fn parseval_factor(&self) -> f64 {
        self.cell_volume() / self.len() as f64
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(0, 8, 1.0).is_err());
        assert!(GridSpec::new(2, 12, 1.0).is_err());
        assert!(GridSpec::new(2, 8, 0.0).is_err());
        assert!(GridSpec::with_dealias(2, 8, 1.0, 0.0).is_err());
        assert!(GridSpec::with_dealias(2, 8, 1.0, 1.5).is_err());
    }

    #[test]
    fn lattice_matches_convention() {
        let g = GridSpec::new(2, 8, 4.0 * PI).unwrap();
        assert_eq!(g.spectral_shape(), vec![8, 5]);
        assert_eq!(g.signed_index(4), -4);
        assert_eq!(g.signed_index(7), -1);
        assert!((g.wavenumber(1) - 0.5).abs() < 1e-15);
        assert!((g.nyquist() - 2.0).abs() < 1e-15);
        assert!((g.wavenumber(4) + g.nyquist()).abs() < 1e-15);
    }

    #[test]
    fn mode_visit_is_storage_order() {
        let g = GridSpec::new(3, 4, 2.0 * PI).unwrap();
        let mut seen = Vec::new();
        g.visit_modes(|flat, idx, xi| {
            let expect = (idx[0] * 4 + idx[1]) * 3 + idx[2];
            assert_eq!(flat, expect);
            for a in 0..3 {
                assert_eq!(xi[a], g.wavenumber(idx[a]));
            }
            seen.push(flat);
        });
        assert_eq!(seen.len(), g.spectral_len());
    }
}
