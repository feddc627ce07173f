//! Closed-form smooth data with known Helmholtz image, for solver checks
//! and for the command-line initial conditions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::GridSpec;

/// `a·exp(β Σ_a cos(κ_a x_a + θ_a))` with `κ_a = 2π k_a / S`.
///
/// It is smooth and periodic but not band-limited, so sampling it and
/// sampling `(1-Δ)` of it give two genuinely different discretizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpCosine {
    pub amplitude: f64,
    pub beta: f64,
    pub wavenumbers: Vec<i64>,
    pub phases: Vec<f64>,
}

impl ExpCosine {
    fn check(&self, grid: &GridSpec) -> Result<()> {
        if self.wavenumbers.len() != grid.dim || self.phases.len() != grid.dim {
            return Err(Error::InvalidArgument(format!("exp-cosine term needs {} wavenumbers and phases", grid.dim)));
        }
        Ok(())
    }

    fn kappa(&self, side: f64) -> impl Iterator<Item = f64> + '_ {
        self.wavenumbers.iter().map(move |&k| 2.0 * PI * k as f64 / side)
    }

    pub fn value(&self, side: f64, x: &[f64]) -> f64 {
        let g: f64 = self.kappa(side).zip(&self.phases).zip(x).map(|((k, t), x)| (k * x + t).cos()).sum();
        self.amplitude * (self.beta * g).exp()
    }

    /// `(1-Δ)` of the function, `u (1 - |∇g|^2 - Δg)` with `g` the exponent.
    pub fn helmholtz_value(&self, side: f64, x: &[f64]) -> f64 {
        let mut grad2 = 0.0;
        let mut lap = 0.0;
        for ((k, t), x) in self.kappa(side).zip(&self.phases).zip(x) {
            let arg = k * x + t;
            grad2 += (self.beta * k * arg.sin()).powi(2);
            lap -= self.beta * k * k * arg.cos();
        }
        self.value(side, x) * (1.0 - grad2 - lap)
    }

    pub fn sample(&self, grid: &GridSpec) -> Result<ScalarField> {
        self.check(grid)?;
        ScalarField::from_fn(*grid, |x| self.value(grid.side, x))
    }

    pub fn sample_helmholtz(&self, grid: &GridSpec) -> Result<ScalarField> {
        self.check(grid)?;
        ScalarField::from_fn(*grid, |x| self.helmholtz_value(grid.side, x))
    }
}

/// Velocity and momentum samples of a vector field whose components are
/// single [`ExpCosine`] terms.
pub fn exp_cosine_pair(grid: &GridSpec, components: &[ExpCosine]) -> Result<(VectorField, VectorField)> {
    if components.len() != grid.dim {
        return Err(Error::InvalidArgument(format!("need {} components, got {}", grid.dim, components.len())));
    }
    let u = components.iter().map(|c| c.sample(grid)).collect::<Result<Vec<_>>>()?;
    let m = components.iter().map(|c| c.sample_helmholtz(grid)).collect::<Result<Vec<_>>>()?;
    Ok((VectorField::new(u)?, VectorField::new(m)?))
}

/// `(sin x_1, 0, …, 0)`; the side must be a multiple of `2π`.
pub fn sine_fixture(grid: &GridSpec) -> Result<VectorField> {
    let periods = grid.side / (2.0 * PI);
    if (periods - periods.round()).abs() > 1e-12 * periods.max(1.0) || periods.round() < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "sin x_1 is periodic only when the side is a multiple of 2π, got {}",
            grid.side
        )));
    }
    Ok(VectorField::first_component(ScalarField::from_fn(*grid, |x| x[0].sin())?))
}

/// One Fourier mode `c·cos(ξ·x) + s·sin(ξ·x)` of a given component, `ξ = 2πk/S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub component: usize,
    pub k: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// Sum of Fourier modes.
pub fn modes_field(grid: &GridSpec, modes: &[Mode]) -> Result<VectorField> {
    for m in modes {
        if m.component >= grid.dim || m.k.len() != grid.dim {
            return Err(Error::InvalidArgument(format!("mode {m:?} does not fit a {}-d grid", grid.dim)));
        }
    }
    let step = grid.frequency_step();
    let mut comps = Vec::with_capacity(grid.dim);
    for c in 0..grid.dim {
        let mine: Vec<&Mode> = modes.iter().filter(|m| m.component == c).collect();
        comps.push(ScalarField::from_fn(*grid, |x| {
            mine.iter()
                .map(|m| {
                    let phase: f64 = m.k.iter().zip(x).map(|(k, x)| step * *k as f64 * x).sum();
                    m.cos * phase.cos() + m.sin * phase.sin()
                })
                .sum()
        })?);
    }
    VectorField::new(comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;

    #[test]
    fn helmholtz_image_matches_spectral() {
        let g = GridSpec::new(2, 64, 2.0 * PI).unwrap();
        let f = ExpCosine { amplitude: 0.4, beta: 0.6, wavenumbers: vec![1, 2], phases: vec![0.3, -1.1] };
        let spectral = f.sample(&g).unwrap().apply_helmholtz();
        let exact = f.sample_helmholtz(&g).unwrap();
        let diff = spectral.sub(&exact).unwrap().l2_norm_spectral() / exact.l2_norm_spectral();
        assert!(diff < 1e-11, "{diff}");
    }

    #[test]
    fn sine_needs_commensurate_box() {
        assert!(sine_fixture(&GridSpec::new(2, 8, 4.0 * PI).unwrap()).is_ok());
        assert!(sine_fixture(&GridSpec::new(2, 8, 5.0).unwrap()).is_err());
    }

    #[test]
    fn modes_sum() {
        let g = GridSpec::new(2, 8, 2.0 * PI).unwrap();
        let m = vec![Mode { component: 1, k: vec![0, 1], cos: 0.0, sin: 2.0 }];
        let f = modes_field(&g, &m).unwrap();
        assert_eq!(f.component(0).values().iter().map(|v| v.abs()).sum::<f64>(), 0.0);
        let x = g.coordinate(3);
        assert!((f.component(1).values()[3] - 2.0 * x.sin()).abs() < 1e-15);
        assert!(modes_field(&g, &[Mode { component: 2, k: vec![0, 1], cos: 1.0, sin: 0.0 }]).is_err());
    }
}
