//! The initial-data family of the non-uniform-dependence construction.
//!
//! A one-dimensional bump `φ` is defined through its transform: `φ̂` is 1 on
//! `|ξ| ≤ plateau`, 0 on `|ξ| ≥ ρ`, with the smooth step of
//! [`littlewood_paley`](crate::littlewood_paley) in between. With `ω_n = 17/12·2^n`,
//!
//! ```text
//! f_n(x) = 2^{-ns} φ(x_1) sin(ω_n x_1) φ(x_2)···φ(x_d)
//! g_n(x) = 2^{-n}  φ(x_1) φ(x_2)···φ(x_d)
//! u_0^n = (f_n, 0, …, 0),  v_0^n = (f_n + g_n, 0, …, 0)
//! ```
//!
//! all centered at the middle of the box. Fields are built directly from
//! lattice samples of their continuous transforms, so their spectral support
//! is exact on the grid. The sampled field is the periodization of the
//! continuous one; [`BumpProfile::box_tail`] measures how much that matters.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, ScalarField, VectorField};
use crate::grid::GridSpec;
use crate::littlewood_paley::{smooth_step, BesovParams, DyadicPartition};
use crate::transform;

/// Frequency factor of the oscillation in `f_n`.
pub const OMEGA_FACTOR: f64 = 17.0 / 12.0;

/// `ω_n = 17/12·2^n`.
pub fn omega(n: u32) -> f64 {
    OMEGA_FACTOR * 2f64.powi(n as i32)
}

/// Smallest `n` with `2^n > 12·√d·ρ`, the threshold beyond which `f_n`
/// sits inside a single dyadic block.
pub fn single_block_threshold(dim: usize, rho: f64) -> u32 {
    let bound = 12.0 * (dim as f64).sqrt() * rho;
    let mut n = 0;
    while 2f64.powi(n as i32) <= bound {
        n += 1;
    }
    n
}

/// The bump `φ` through its transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub support_radius: f64,
    pub plateau_radius: f64,
    /// `|φ(S/2)|`: the size of the bump at the box boundary.
    pub box_tail: f64,
}

impl BumpProfile {
    /// `ρ = 2^{-d}`, plateau `4^{-d}`.
    pub fn default_radii(dim: usize) -> (f64, f64) {
        (2f64.powi(-(dim as i32)), 4f64.powi(-(dim as i32)))
    }

    /// `φ̂(ξ)`.
    pub fn hat(&self, xi: f64) -> f64 {
        let r = xi.abs();
        if r <= self.plateau_radius {
            1.0
        } else if r >= self.support_radius {
            0.0
        } else {
            1.0 - smooth_step((r - self.plateau_radius) / (self.support_radius - self.plateau_radius))
        }
    }

    /// `φ(x) = (1/π)∫_0^ρ φ̂(ξ) cos(ξx) dξ` by composite Simpson quadrature.
    pub fn value(&self, x: f64) -> f64 {
        let intervals = 20_000;
        let h = self.support_radius / intervals as f64;
        let f = |xi: f64| self.hat(xi) * (xi * x).cos();
        let mut sum = f(0.0) + f(self.support_radius);
        for i in 1..intervals {
            sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        sum * h / 3.0 / PI
    }

    /// Samples of the periodized, centered bump along one axis of `grid`.
    pub fn axis_samples(&self, grid: &GridSpec) -> Vec<f64> {
        let axis = GridSpec::with_dealias(1, grid.points, grid.side, grid.dealias_fraction)
            .expect("one axis of a valid grid is valid");
        let scale = grid.points as f64 / grid.side;
        let spectrum: Vec<Complex64> = (0..axis.half_points())
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                Complex64::new(sign * scale * self.hat(axis.wavenumber(i)), 0.0)
            })
            .collect();
        transform::inverse(&axis, &spectrum)
    }
}

/// Builds the bump for `grid` and measures `|φ(S/2)|`. With
/// `tail_tolerance` set, a larger boundary value is an error.
pub fn build_profile(rho: f64, plateau: f64, grid: &GridSpec, tail_tolerance: Option<f64>) -> Result<BumpProfile> {
    if !(plateau > 0.0 && plateau < rho && rho < grid.nyquist()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < plateau < rho < Nyquist, got plateau {plateau}, rho {rho}, Nyquist {}",
            grid.nyquist()
        )));
    }
    let mut profile = BumpProfile { support_radius: rho, plateau_radius: plateau, box_tail: 0.0 };
    profile.box_tail = profile.value(grid.side / 2.0).abs();
    if let Some(tolerance) = tail_tolerance {
        if profile.box_tail > tolerance {
            return Err(Error::BoxTooSmall { tail: profile.box_tail, tolerance });
        }
    }
    Ok(profile)
}

/// Everything needed to build the `n`-th members of the family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceParams {
    pub n: u32,
    pub s: f64,
    pub grid: GridSpec,
    pub profile: BumpProfile,
}

impl SequenceParams {
    /// Checks single-block exactness (`n ≥ n₀`) and resolvability
    /// (`ω_n + √d·ρ ≤` dealias cutoff).
    pub fn new(n: u32, s: f64, grid: GridSpec, profile: BumpProfile) -> Result<Self> {
        let params = Self { n, s, grid, profile };
        let n0 = single_block_threshold(grid.dim, profile.support_radius);
        if n < n0 {
            return Err(Error::NotResolvable(format!("n = {n} is below the single-block threshold n0 = {n0}")));
        }
        let reach = params.annulus().1;
        if reach > grid.dealias_cutoff() {
            return Err(Error::NotResolvable(format!(
                "frequency reach {reach:.4} of f_{n} exceeds the dealias cutoff {:.4}",
                grid.dealias_cutoff()
            )));
        }
        Ok(params)
    }

    pub fn omega(&self) -> f64 {
        omega(self.n)
    }

    /// Half-width `√d·ρ` of the annulus around `ω_n`.
    pub fn half_width(&self) -> f64 {
        (self.grid.dim as f64).sqrt() * self.profile.support_radius
    }

    /// `(ω_n - √d·ρ, ω_n + √d·ρ)`.
    pub fn annulus(&self) -> (f64, f64) {
        (self.omega() - self.half_width(), self.omega() + self.half_width())
    }

    fn build(&self, mut hat: impl FnMut(&[f64]) -> Complex64) -> ScalarField {
        let scale = (self.grid.points as f64 / self.grid.side).powi(self.grid.dim as i32);
        let mut spectrum = vec![Complex64::default(); self.grid.spectral_len()];
        self.grid.visit_modes(|flat, idx, xi| {
            let parity: usize = idx.iter().sum();
            let sign = if parity.is_multiple_of(2) { scale } else { -scale };
            spectrum[flat] = hat(xi) * sign;
        });
        ScalarField::from_spectral(self.grid, spectrum).expect("profile values are finite")
    }
}

/// `f_n`.
pub fn make_f_n(params: &SequenceParams) -> ScalarField {
    let p = params.profile;
    let w = params.omega();
    let amp = 2f64.powf(-(params.n as f64) * params.s - 1.0);
    params.build(|xi| {
        let rest: f64 = xi[1..].iter().map(|&x| p.hat(x)).product();
        Complex64::new(0.0, amp * (p.hat(xi[0] + w) - p.hat(xi[0] - w)) * rest)
    })
}

/// `g_n`.
pub fn make_g_n(params: &SequenceParams) -> ScalarField {
    let p = params.profile;
    let amp = 2f64.powi(-(params.n as i32));
    params.build(|xi| Complex64::new(amp * xi.iter().map(|&x| p.hat(x)).product::<f64>(), 0.0))
}

/// `u_0^n = (f_n, 0, …, 0)`.
pub fn make_u0n(params: &SequenceParams) -> VectorField {
    VectorField::first_component(make_f_n(params))
}

/// `v_0^n = (f_n + g_n, 0, …, 0)`.
pub fn make_v0n(params: &SequenceParams) -> VectorField {
    let v = make_f_n(params).add(&make_g_n(params)).expect("same grid");
    VectorField::first_component(v)
}

/// `v_0^n·∇v_0^n` and the four pieces of its first component.
#[derive(Debug, Clone)]
pub struct TransportTerm {
    pub total: VectorField,
    pub f_grad_f: ScalarField,
    pub f_grad_g: ScalarField,
    pub g_grad_f: ScalarField,
    pub g_grad_g: ScalarField,
}

/// Builds `v_0^n·∇v_0^n` from dealiased products. Only the first component
/// is nonzero since `v_0^n` has one nonzero component.
pub fn transport_term(params: &SequenceParams) -> Result<TransportTerm> {
    let f = make_f_n(params);
    let g = make_g_n(params);
    let df = f.partial_derivative(0)?;
    let dg = g.partial_derivative(0)?;
    let f_grad_f = f.dealiased_product(&df)?;
    let f_grad_g = f.dealiased_product(&dg)?;
    let g_grad_f = g.dealiased_product(&df)?;
    let g_grad_g = g.dealiased_product(&dg)?;
    let first = f_grad_f.add(&f_grad_g)?.add(&g_grad_f)?.add(&g_grad_g)?;
    Ok(TransportTerm { total: VectorField::first_component(first), f_grad_f, f_grad_g, g_grad_f, g_grad_g })
}

/// Fraction of spectral energy outside `inner ≤ |ξ| ≤ outer`.
pub fn annulus_leakage(f: &ScalarField, inner: f64, outer: f64) -> f64 {
    let grid = f.grid();
    let h = grid.half_points();
    let spectrum = f.spectral();
    let (mut inside, mut outside) = (0.0, 0.0);
    grid.visit_modes(|flat, _, xi| {
        let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        let e = grid.pair_weight(flat % h) * spectrum[flat].norm_sqr();
        if r >= inner * (1.0 - 1e-12) && r <= outer * (1.0 + 1e-12) {
            inside += e;
        } else {
            outside += e;
        }
    });
    if inside + outside == 0.0 {
        0.0
    } else {
        outside / (inside + outside)
    }
}

/// `Σ_{j≠n} ‖Δ_j f‖_{L^2} / ‖f‖_{L^2}`.
pub fn single_block_residual(f: &ScalarField, n: i32, partition: &DyadicPartition) -> Result<f64> {
    let total = f.l2_norm_spectral();
    if total == 0.0 {
        return Ok(0.0);
    }
    let mut off = 0.0;
    for j in partition.j_min()..=partition.j_max() {
        if j != n {
            off += partition.block_lp_norm(f, j, 2.0)?;
        }
    }
    Ok(off / total)
}

/// `‖φ^2(x_1) cos(ω_n x_1)‖_{L^p} · ‖φ‖_{L^p}^{2(d-1)}` over the box by the
/// rectangle rule on the grid axis.
pub fn gn_gradfn_anchor(params: &SequenceParams, p: f64) -> f64 {
    let grid = &params.grid;
    let phi = params.profile.axis_samples(grid);
    let h = grid.spacing();
    let w = params.omega();
    let c = grid.side / 2.0;
    let lp = |vals: &mut dyn Iterator<Item = f64>| -> f64 {
        let v: Vec<f64> = vals.map(f64::abs).collect();
        let max = v.iter().copied().fold(0.0, f64::max);
        if p.is_infinite() || max == 0.0 {
            max
        } else {
            max * (v.iter().map(|x| (x / max).powf(p)).sum::<f64>() * h).powf(1.0 / p)
        }
    };
    let first = lp(&mut phi.iter().enumerate().map(|(i, f)| f * f * (w * (grid.coordinate(i) - c)).cos()));
    let rest = lp(&mut phi.iter().copied());
    first * rest.powi(2 * (grid.dim as i32 - 1))
}

/// One row of the `sequences verify` table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyRow {
    pub n: u32,
    pub annulus_leakage: f64,
    pub single_block_residual: f64,
    pub besov_s_minus_1: f64,
    pub besov_s: f64,
    pub besov_s_plus_1: f64,
}

impl VerifyRow {
    pub const CSV_HEADER: &'static str =
        "n,annulus_leakage,single_block_residual,besov_s_minus_1,besov_s,besov_s_plus_1";

    pub fn csv(&self) -> String {
        format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.n,
            self.annulus_leakage,
            self.single_block_residual,
            self.besov_s_minus_1,
            self.besov_s,
            self.besov_s_plus_1
        )
    }
}

/// Support and norm checks for `f_n`.
pub fn verify(params: &SequenceParams, besov: &BesovParams, partition: &DyadicPartition) -> Result<VerifyRow> {
    let f = make_f_n(params);
    let (inner, outer) = params.annulus();
    let norm = |s: f64| partition.besov_norm(&f, &besov.with_s(s));
    Ok(VerifyRow {
        n: params.n,
        annulus_leakage: annulus_leakage(&f, inner, outer),
        single_block_residual: single_block_residual(&f, params.n as i32, partition)?,
        besov_s_minus_1: norm(besov.s - 1.0)?,
        besov_s: norm(besov.s)?,
        besov_s_plus_1: norm(besov.s + 1.0)?,
    })
}
