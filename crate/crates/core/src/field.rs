//! Scalar and vector fields on a periodic grid.
//!
//! A field keeps its physical samples and its spectral coefficients lazily:
//! whichever representation it was built from is stored, the other is
//! computed on first access and cached. Fields are immutable; every
//! operation returns a new field.

use std::sync::OnceLock;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::transform;

#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: GridSpec,
    values: OnceLock<Vec<f64>>,
    spectral: OnceLock<Vec<Complex64>>,
}

fn ensure_finite_real(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn ensure_finite_complex(values: &[Complex64]) -> Result<()> {
    if values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

impl ScalarField {
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!("expected {} samples, got {}", grid.len(), values.len())));
        }
        ensure_finite_real(&values)?;
        Ok(Self { grid, values: OnceLock::from(values), spectral: OnceLock::new() })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let mut values = vec![0.0; grid.len()];
        grid.visit_points(|i, x| values[i] = f(x));
        Self::from_values(grid, values)
    }

    /// Builds a field from half-layout spectral coefficients (see [`crate::grid`]).
    pub fn from_spectral(grid: GridSpec, spectral: Vec<Complex64>) -> Result<Self> {
        if spectral.len() != grid.spectral_len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} spectral coefficients, got {}",
                grid.spectral_len(),
                spectral.len()
            )));
        }
        ensure_finite_complex(&spectral)?;
        Ok(Self::from_spectral_unchecked(grid, spectral))
    }

    pub(crate) fn from_spectral_unchecked(grid: GridSpec, spectral: Vec<Complex64>) -> Self {
        Self { grid, values: OnceLock::new(), spectral: OnceLock::from(spectral) }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        let mut spectral = vec![Complex64::default(); grid.spectral_len()];
        spectral[0] = Complex64::new(c * grid.len() as f64, 0.0);
        Self { grid, values: OnceLock::from(vec![c; grid.len()]), spectral: OnceLock::from(spectral) }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Physical samples, row-major with the last axis fastest.
    pub fn values(&self) -> &[f64] {
        self.values
            .get_or_init(|| transform::inverse(&self.grid, self.spectral.get().expect("field has a representation")))
    }

    /// Unnormalized discrete Fourier coefficients in the half layout.
    pub fn spectral(&self) -> &[Complex64] {
        self.spectral
            .get_or_init(|| transform::forward(&self.grid, self.values.get().expect("field has a representation")))
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values();
        self.values.into_inner().expect("just initialized")
    }

    pub fn into_spectral(self) -> Vec<Complex64> {
        self.spectral();
        self.spectral.into_inner().expect("just initialized")
    }

    fn map_modes(&self, mut f: impl FnMut(usize, Complex64) -> Complex64) -> Self {
        let out: Vec<Complex64> = self.spectral().iter().enumerate().map(|(i, &c)| f(i, c)).collect();
        Self::from_spectral_unchecked(self.grid, out)
    }

    /// Spectral derivative `∂_{x_axis}`; the Nyquist mode of that axis is dropped.
    pub fn partial_derivative(&self, axis: usize) -> Result<Self> {
        if axis >= self.grid.dim {
            return Err(Error::AxisOutOfRange { axis, dim: self.grid.dim });
        }
        let table = derivative_table(&self.grid, axis);
        Ok(self.map_modes(|i, c| Complex64::new(-c.im * table[i], c.re * table[i])))
    }

    /// Multiplies the spectrum by a real table indexed like the half layout.
    /// The table must be even in ξ for the result to stay real.
    pub fn multiply_spectrum(&self, table: &[f64]) -> Self {
        debug_assert_eq!(table.len(), self.grid.spectral_len());
        self.map_modes(|i, c| c * table[i])
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        match (self.values.get(), self.spectral.get()) {
            (_, Some(s)) => Self::from_spectral_unchecked(self.grid, s.iter().map(|c| c * lambda).collect()),
            (Some(v), None) => Self {
                grid: self.grid,
                values: OnceLock::from(v.iter().map(|x| x * lambda).collect::<Vec<_>>()),
                spectral: OnceLock::new(),
            },
            (None, None) => unreachable!("field without representation"),
        }
    }

    /// `a·self + b·other`, computed on whichever representation both share.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        if let (Some(x), Some(y)) = (self.spectral.get(), other.spectral.get()) {
            let out = x.iter().zip(y).map(|(x, y)| x * a + y * b).collect();
            return Ok(Self::from_spectral_unchecked(self.grid, out));
        }
        if let (Some(x), Some(y)) = (self.values.get(), other.values.get()) {
            let out: Vec<f64> = x.iter().zip(y).map(|(x, y)| a * x + b * y).collect();
            return Ok(Self { grid: self.grid, values: OnceLock::from(out), spectral: OnceLock::new() });
        }
        let out = self.spectral().iter().zip(other.spectral()).map(|(x, y)| x * a + y * b).collect();
        Ok(Self::from_spectral_unchecked(self.grid, out))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.linear_combination(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.linear_combination(1.0, other, -1.0)
    }

    /// Pointwise product on the grid, without dealiasing.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let out: Vec<f64> = self.values().iter().zip(other.values()).map(|(a, b)| a * b).collect();
        Ok(Self { grid: self.grid, values: OnceLock::from(out), spectral: OnceLock::new() })
    }

    /// Pointwise product followed by the dealiasing projection.
    pub fn dealiased_product(&self, other: &Self) -> Result<Self> {
        Ok(self.product(other)?.dealias())
    }

    /// `Σ_x |f(x)|^2 h^d` from the spectrum.
    pub fn spectral_energy(&self) -> f64 {
        spectral_energy(&self.grid, self.spectral())
    }
}

/// `Σ_x |f(x)|^2 h^d` evaluated from half-layout coefficients.
pub fn spectral_energy(grid: &GridSpec, spectral: &[Complex64]) -> f64 {
    let h = grid.half_points();
    let sum: f64 = spectral
        .chunks_exact(h)
        .map(|lane| lane.iter().enumerate().map(|(i, c)| grid.pair_weight(i) * c.norm_sqr()).sum::<f64>())
        .sum();
    sum * grid.parseval_factor()
}

/// `ξ_axis` over the half layout, zero on the Nyquist index of that axis.
pub fn derivative_table(grid: &GridSpec, axis: usize) -> Vec<f64> {
    let mut table = vec![0.0; grid.spectral_len()];
    grid.visit_modes(|flat, idx, xi| {
        if !grid.is_nyquist_index(idx[axis]) {
            table[flat] = xi[axis];
        }
    });
    table
}

/// `1/(1+|ξ|^2)` over the half layout.
pub fn helmholtz_inverse_table(grid: &GridSpec) -> Vec<f64> {
    grid.mode_table(|xi| 1.0 / (1.0 + xi.iter().map(|x| x * x).sum::<f64>()))
}

/// `1+|ξ|^2` over the half layout.
pub fn helmholtz_table(grid: &GridSpec) -> Vec<f64> {
    grid.mode_table(|xi| 1.0 + xi.iter().map(|x| x * x).sum::<f64>())
}

/// 1 where every axis frequency satisfies `|ξ_a| ≤ cutoff`, else 0.
pub fn dealias_table(grid: &GridSpec) -> Vec<f64> {
    let cutoff = grid.dealias_cutoff() * (1.0 + 1e-12);
    grid.mode_table(|xi| if xi.iter().all(|x| x.abs() <= cutoff) { 1.0 } else { 0.0 })
}

/// Fraction of spectral energy outside the dealiasing box.
pub fn tail_fraction(grid: &GridSpec, spectral: &[Complex64]) -> f64 {
    let mask = dealias_table(grid);
    let total = spectral_energy(grid, spectral);
    if total == 0.0 {
        return 0.0;
    }
    let tail: Vec<Complex64> = spectral.iter().zip(&mask).map(|(c, m)| c * (1.0 - m)).collect();
    spectral_energy(grid, &tail) / total
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        Err(Error::InvalidArgument(format!("L^p exponent must lie in [1, inf], got {p}")))
    } else {
        Ok(())
    }
}

/// Rectangle-rule `L^p` norm of pointwise magnitudes `|v|`.
pub(crate) fn lp_of_magnitudes(grid: &GridSpec, magnitudes: impl Iterator<Item = f64> + Clone, p: f64) -> f64 {
    let max = magnitudes.clone().fold(0.0f64, f64::max);
    if p.is_infinite() || max == 0.0 {
        return max;
    }
    let vol = grid.cell_volume();
    if p == 2.0 {
        return (magnitudes.map(|m| m * m).sum::<f64>() * vol).sqrt();
    }
    let sum: f64 = magnitudes.map(|m| (m / max).powf(p)).sum();
    max * (sum * vol).powf(1.0 / p)
}

/// Operations shared by scalar and vector fields. Vector fields act
/// componentwise; norms use the pointwise Euclidean magnitude.
pub trait Field: Clone + Sized {
    fn grid(&self) -> &GridSpec;

    fn parts(&self) -> &[ScalarField];

    fn map_parts(&self, f: impl FnMut(&ScalarField) -> ScalarField) -> Self;

    fn zip_parts(&self, other: &Self, f: impl FnMut(&ScalarField, &ScalarField) -> Result<ScalarField>)
        -> Result<Self>;

    /// `(1-Δ)^{-1}`, the multiplier `1/(1+|ξ|^2)`.
    fn helmholtz_inverse(&self) -> Self {
        let table = helmholtz_inverse_table(self.grid());
        self.map_parts(|c| c.multiply_spectrum(&table))
    }

    /// `(1-Δ)`, the multiplier `1+|ξ|^2`.
    fn apply_helmholtz(&self) -> Self {
        let table = helmholtz_table(self.grid());
        self.map_parts(|c| c.multiply_spectrum(&table))
    }

    /// Zeroes every mode with some `|ξ_a|` above the grid's dealias cutoff.
    fn dealias(&self) -> Self {
        let table = dealias_table(self.grid());
        self.map_parts(|c| c.multiply_spectrum(&table))
    }

    /// Applies a real, even spectral multiplier to every component.
    fn multiply_spectrum(&self, table: &[f64]) -> Self {
        self.map_parts(|c| c.multiply_spectrum(table))
    }

    /// Rectangle-rule `(Σ |f(x)|^p h^d)^{1/p}`, `p = ∞` is the grid maximum.
    fn lp_norm(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        let grid = *self.grid();
        let parts = self.parts();
        if parts.len() == 1 {
            let v = parts[0].values();
            return Ok(lp_of_magnitudes(&grid, v.iter().map(|x| x.abs()), p));
        }
        let comps: Vec<&[f64]> = parts.iter().map(|c| c.values()).collect();
        let mags: Vec<f64> = (0..grid.len()).map(|i| comps.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt()).collect();
        Ok(lp_of_magnitudes(&grid, mags.iter().copied(), p))
    }

    /// `L^2` norm computed from the spectrum (Parseval).
    fn l2_norm_spectral(&self) -> f64 {
        self.parts().iter().map(|c| c.spectral_energy()).sum::<f64>().sqrt()
    }

    /// Fraction of spectral energy beyond the dealias cutoff.
    fn tail_fraction(&self) -> f64 {
        let grid = *self.grid();
        let mask = dealias_table(&grid);
        let mut total = 0.0;
        let mut tail = 0.0;
        for part in self.parts() {
            let s = part.spectral();
            total += spectral_energy(&grid, s);
            let outside: Vec<Complex64> = s.iter().zip(&mask).map(|(c, m)| c * (1.0 - m)).collect();
            tail += spectral_energy(&grid, &outside);
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    fn scaled(&self, lambda: f64) -> Self {
        self.map_parts(|c| c.scaled(lambda))
    }

    fn plus(&self, other: &Self) -> Result<Self> {
        self.zip_parts(other, |a, b| a.add(b))
    }

    fn minus(&self, other: &Self) -> Result<Self> {
        self.zip_parts(other, |a, b| a.sub(b))
    }

    fn axpy(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.zip_parts(other, |x, y| x.linear_combination(a, y, b))
    }
}

impl Field for ScalarField {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn parts(&self) -> &[ScalarField] {
        std::slice::from_ref(self)
    }

    fn map_parts(&self, mut f: impl FnMut(&ScalarField) -> ScalarField) -> Self {
        f(self)
    }

    fn zip_parts(
        &self,
        other: &Self,
        mut f: impl FnMut(&ScalarField, &ScalarField) -> Result<ScalarField>,
    ) -> Result<Self> {
        f(self, other)
    }
}

/// A `d`-component field on a shared grid.
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: GridSpec,
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let grid =
            *components.first().ok_or_else(|| Error::InvalidArgument("vector field needs components".into()))?.grid();
        if components.len() != grid.dim {
            return Err(Error::InvalidArgument(format!(
                "vector field on a {}-d grid needs {} components, got {}",
                grid.dim,
                grid.dim,
                components.len()
            )));
        }
        for c in &components[1..] {
            grid.ensure_same(c.grid())?;
        }
        Ok(Self { grid, components })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, components: (0..grid.dim).map(|_| ScalarField::zeros(grid)).collect() }
    }

    /// `(f, 0, ..., 0)`.
    pub fn first_component(f: ScalarField) -> Self {
        let grid = *f.grid();
        let mut components = vec![f];
        components.extend((1..grid.dim).map(|_| ScalarField::zeros(grid)));
        Self { grid, components }
    }

    pub fn from_spectral(grid: GridSpec, spectra: Vec<Vec<Complex64>>) -> Result<Self> {
        let comps = spectra.into_iter().map(|s| ScalarField::from_spectral(grid, s)).collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &ScalarField {
        &self.components[i]
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    pub fn spectra(&self) -> Vec<Vec<Complex64>> {
        self.components.iter().map(|c| c.spectral().to_vec()).collect()
    }
}

impl Field for VectorField {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn parts(&self) -> &[ScalarField] {
        &self.components
    }

    fn map_parts(&self, f: impl FnMut(&ScalarField) -> ScalarField) -> Self {
        Self { grid: self.grid, components: self.components.iter().map(f).collect() }
    }

    fn zip_parts(
        &self,
        other: &Self,
        mut f: impl FnMut(&ScalarField, &ScalarField) -> Result<ScalarField>,
    ) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let components =
            self.components.iter().zip(&other.components).map(|(a, b)| f(a, b)).collect::<Result<Vec<_>>>()?;
        Ok(Self { grid: self.grid, components })
    }
}
