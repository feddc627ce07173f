//! Littlewood–Paley blocks and nonhomogeneous Besov norms on the grid.
//!
//! The radial cutoff is `χ(ξ) = 1 - ρ(3(|ξ| - 1))` with the smooth step
//! `ρ(t) = h(t) / (h(t) + h(1 - t))`, `h(t) = e^{-1/t}` for `t > 0`. It is
//! 1 on `|ξ| ≤ 1` and 0 on `|ξ| ≥ 4/3`, and `φ(ξ) = χ(ξ/2) - χ(ξ)` lives in
//! `1 ≤ |ξ| ≤ 8/3`. Block `j ≥ 0` is the multiplier `φ(2^{-j}ξ)`, block `-1`
//! is `χ(ξ)`.
//!
//! Norms are taken over the periodic box. The block range runs up to the
//! first `j_max` with `2^{j_max+1}` at or beyond the largest lattice
//! frequency `√d·π N/S`, so the blocks sum to one on every lattice point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{lp_of_magnitudes, Field, ScalarField};
use crate::grid::GridSpec;

/// Spectral tail (fraction of energy beyond the dealias cutoff) above which
/// a field is refused by [`DyadicPartition::besov_norm`].
pub const RESOLVED_TAIL_THRESHOLD: f64 = 1e-10;

fn smooth_step_kernel(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth monotone step: 0 for `t ≤ 0`, 1 for `t ≥ 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = smooth_step_kernel(t);
    a / (a + smooth_step_kernel(1.0 - t))
}

/// Radial profile of the low-frequency cutoff χ.
pub fn chi(radius: f64) -> f64 {
    1.0 - smooth_step(3.0 * (radius - 1.0))
}

/// Radial profile of the ring function φ.
pub fn phi(radius: f64) -> f64 {
    chi(radius / 2.0) - chi(radius)
}

/// Multiplier of block `j` at radius `|ξ|`.
pub fn block_multiplier(j: i32, radius: f64) -> f64 {
    match j {
        j if j <= -2 => 0.0,
        -1 => chi(radius),
        j => phi(radius / 2f64.powi(j)),
    }
}

/// Index triple `(s, p, r)` of `B^s_{p,r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesovParams {
    pub s: f64,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub p: f64,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub r: f64,
}

impl BesovParams {
    pub fn new(s: f64, p: f64, r: f64) -> Result<Self> {
        let params = Self { s, p, r };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.s.is_finite() {
            return Err(Error::InvalidArgument(format!("regularity s must be finite, got {}", self.s)));
        }
        for (name, v) in [("p", self.p), ("r", self.r)] {
            if v.is_nan() || v < 1.0 {
                return Err(Error::InvalidArgument(format!("{name} must lie in [1, inf], got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_s(&self, s: f64) -> Self {
        Self { s, ..*self }
    }
}

/// `ℓ^r` norm of nonnegative terms.
pub fn lr_norm(terms: &[f64], r: f64) -> f64 {
    let max = terms.iter().copied().fold(0.0f64, f64::max);
    if r.is_infinite() || max == 0.0 {
        return max;
    }
    max * terms.iter().map(|t| (t / max).powf(r)).sum::<f64>().powf(1.0 / r)
}

#[derive(Debug, Clone)]
struct Block {
    // (spectral index, multiplier value) for the nonzero entries
    entries: Vec<(usize, f64)>,
}

/// The sampled partition of unity on a grid's frequency lattice.
#[derive(Debug, Clone)]
pub struct DyadicPartition {
    grid: GridSpec,
    j_max: i32,
    blocks: Vec<Block>,
}

/// One row of a Besov evaluation: block index, `‖Δ_j u‖_{L^p}` and the
/// weighted term `2^{js}‖Δ_j u‖_{L^p}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockNorm {
    pub j: i32,
    pub lp: f64,
    pub weighted: f64,
}

impl DyadicPartition {
    pub fn new(grid: &GridSpec) -> Self {
        let max_radius = (grid.dim as f64).sqrt() * grid.nyquist();
        let mut j_max = -1;
        while 2f64.powi(j_max + 1) < max_radius {
            j_max += 1;
        }
        let radii = grid.mode_table(|xi| xi.iter().map(|x| x * x).sum::<f64>().sqrt());
        let blocks = (-1..=j_max)
            .map(|j| {
                let entries = radii
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &r)| {
                        let m = block_multiplier(j, r);
                        (m != 0.0).then_some((i, m))
                    })
                    .collect();
                Block { entries }
            })
            .collect();
        Self { grid: *grid, j_max, blocks }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn j_min(&self) -> i32 {
        -1
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    fn block(&self, j: i32) -> Option<&Block> {
        if j < -1 || j > self.j_max {
            None
        } else {
            Some(&self.blocks[(j + 1) as usize])
        }
    }

    /// Dense multiplier table of block `j` over the half layout.
    pub fn multiplier_table(&self, j: i32) -> Vec<f64> {
        let mut table = vec![0.0; self.grid.spectral_len()];
        if let Some(b) = self.block(j) {
            for &(i, m) in &b.entries {
                table[i] = m;
            }
        }
        table
    }

    fn apply_block(&self, part: &ScalarField, j: i32) -> ScalarField {
        let mut out = vec![Default::default(); self.grid.spectral_len()];
        if let Some(b) = self.block(j) {
            let s = part.spectral();
            for &(i, m) in &b.entries {
                out[i] = s[i] * m;
            }
        }
        ScalarField::from_spectral(self.grid, out).expect("finite input stays finite")
    }

    /// `Δ_j u`; zero for `j ≤ -2` and for blocks beyond the lattice.
    pub fn dyadic_block<F: Field>(&self, u: &F, j: i32) -> Result<F> {
        self.grid.ensure_same(u.grid())?;
        Ok(u.map_parts(|c| self.apply_block(c, j)))
    }

    /// `S_j u = Σ_{j' < j} Δ_{j'} u`, the multiplier `χ(2^{-j}ξ)` for `j ≥ 0`.
    pub fn low_freq_cutoff<F: Field>(&self, u: &F, j: i32) -> Result<F> {
        self.grid.ensure_same(u.grid())?;
        let table = if j <= -1 {
            vec![0.0; self.grid.spectral_len()]
        } else {
            let scale = 2f64.powi(-j);
            self.grid.mode_table(|xi| chi(scale * xi.iter().map(|x| x * x).sum::<f64>().sqrt()))
        };
        Ok(u.multiply_spectrum(&table))
    }

    /// `‖Δ_j u‖_{L^p}`. For `p = 2` this is evaluated by Parseval on the
    /// block's nonzero modes; otherwise the block is transformed back and
    /// integrated with the rectangle rule.
    pub fn block_lp_norm<F: Field>(&self, u: &F, j: i32, p: f64) -> Result<f64> {
        self.grid.ensure_same(u.grid())?;
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidArgument(format!("L^p exponent must lie in [1, inf], got {p}")));
        }
        let Some(block) = self.block(j) else {
            return Ok(0.0);
        };
        let h = self.grid.half_points();
        if p == 2.0 {
            let mut energy = 0.0;
            for part in u.parts() {
                let s = part.spectral();
                for &(i, m) in &block.entries {
                    energy += self.grid.pair_weight(i % h) * (s[i] * m).norm_sqr();
                }
            }
            return Ok((energy * self.grid.parseval_factor()).sqrt());
        }
        let parts: Vec<ScalarField> = u.parts().iter().map(|c| self.apply_block(c, j)).collect();
        if parts.len() == 1 {
            return Ok(lp_of_magnitudes(&self.grid, parts[0].values().iter().map(|v| v.abs()), p));
        }
        let values: Vec<&[f64]> = parts.iter().map(|c| c.values()).collect();
        let mags: Vec<f64> =
            (0..self.grid.len()).map(|i| values.iter().map(|v| v[i] * v[i]).sum::<f64>().sqrt()).collect();
        Ok(lp_of_magnitudes(&self.grid, mags.iter().copied(), p))
    }

    /// Per-block terms of the Besov norm for `j = -1..=j_max`.
    pub fn besov_blocks<F: Field>(&self, u: &F, params: &BesovParams) -> Result<Vec<BlockNorm>> {
        params.validate()?;
        self.grid.ensure_same(u.grid())?;
        let tail = u.tail_fraction();
        if tail > RESOLVED_TAIL_THRESHOLD {
            return Err(Error::Unresolved { tail, threshold: RESOLVED_TAIL_THRESHOLD });
        }
        (-1..=self.j_max)
            .map(|j| {
                let lp = self.block_lp_norm(u, j, params.p)?;
                Ok(BlockNorm { j, lp, weighted: 2f64.powf(j as f64 * params.s) * lp })
            })
            .collect()
    }

    /// `‖u‖_{B^s_{p,r}}` as the `ℓ^r` norm of `2^{js}‖Δ_j u‖_{L^p}`.
    pub fn besov_norm<F: Field>(&self, u: &F, params: &BesovParams) -> Result<f64> {
        let terms: Vec<f64> = self.besov_blocks(u, params)?.iter().map(|b| b.weighted).collect();
        Ok(lr_norm(&terms, params.r))
    }

    /// CSV of the radial profiles `(ξ, χ(ξ), φ(ξ))` on `samples` points of `[0, xi_max]`.
    pub fn profile_csv(samples: usize, xi_max: f64) -> String {
        let mut out = String::from("xi,chi,phi\n");
        let steps = samples.max(2) - 1;
        for i in 0..=steps {
            let xi = xi_max * i as f64 / steps as f64;
            out.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", xi, chi(xi), phi(xi)));
        }
        out
    }
}

/// Free-function form of [`DyadicPartition::besov_norm`].
pub fn besov_norm<F: Field>(u: &F, params: &BesovParams, partition: &DyadicPartition) -> Result<f64> {
    partition.besov_norm(u, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::VectorField;
    use std::f64::consts::PI;

    #[test]
    fn profile_support_and_values() {
        assert_eq!(chi(0.0), 1.0);
        assert_eq!(chi(1.0), 1.0);
        assert_eq!(chi(4.0 / 3.0), 0.0);
        assert_eq!(chi(2.0), 0.0);
        for i in 0..=400 {
            let r = i as f64 / 100.0;
            let c = chi(r);
            let f = phi(r);
            assert!((0.0..=1.0).contains(&c));
            assert!((0.0..=1.0).contains(&f));
            if !(1.0..=8.0 / 3.0).contains(&r) {
                assert_eq!(f, 0.0, "phi({r})");
            }
        }
        // plateau of the ring: χ(1) - χ(2)
        assert_eq!(phi(2.0), 1.0);
        assert_eq!(block_multiplier(3, 16.0), 1.0);
        assert_eq!(block_multiplier(-2, 0.0), 0.0);
    }

    #[test]
    fn block_range_covers_lattice() {
        let g = GridSpec::new(2, 2048, 16.0 * PI).unwrap();
        let p = DyadicPartition::new(&g);
        // √2·128 ≈ 181 needs 2^{j_max+1} = 256
        assert_eq!(p.j_max(), 7);
        let g1 = GridSpec::new(1, 64, 2.0 * PI).unwrap();
        assert_eq!(DyadicPartition::new(&g1).j_max(), 4);
    }

    #[test]
    fn constant_goes_to_low_block() {
        let g = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let p = DyadicPartition::new(&g);
        let c = ScalarField::constant(g, 1.75);
        let low = p.dyadic_block(&c, -1).unwrap();
        assert!(low.values().iter().all(|v| (v - 1.75).abs() < 1e-14));
        for j in 0..=p.j_max() {
            let b = p.dyadic_block(&c, j).unwrap();
            assert!(b.values().iter().all(|v| v.abs() < 1e-14));
        }
        assert!(p.dyadic_block(&c, -2).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn low_cutoff_of_ring_mode() {
        let g = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let p = DyadicPartition::new(&g);
        let f = ScalarField::from_fn(g, |x| (2.0 * x[0]).sin()).unwrap();
        let s0 = p.low_freq_cutoff(&f, 0).unwrap();
        assert!(s0.values().iter().all(|v| v.abs() < 1e-14));
        let full = p.low_freq_cutoff(&f, p.j_max() + 2).unwrap();
        for (a, b) in full.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn single_block_norm() {
        let s_len = 2.0 * PI;
        let g = GridSpec::new(2, 16, s_len).unwrap();
        let p = DyadicPartition::new(&g);
        // |ξ| = 2 lies on the plateau of block 0
        let f = ScalarField::from_fn(g, |x| (2.0 * x[0]).sin()).unwrap();
        let params = BesovParams::new(2.5, 2.0, 2.0).unwrap();
        let n = p.besov_norm(&f, &params).unwrap();
        assert!((n - (s_len * s_len / 2.0).sqrt()).abs() < 1e-12);
        assert_eq!(p.besov_norm(&ScalarField::zeros(g), &params).unwrap(), 0.0);
    }

    #[test]
    fn unresolved_field_is_refused() {
        let g = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let p = DyadicPartition::new(&g);
        let f = ScalarField::from_fn(g, |x| (7.0 * x[0]).cos()).unwrap();
        let params = BesovParams::new(1.0, 2.0, 2.0).unwrap();
        assert!(matches!(p.besov_norm(&f, &params), Err(Error::Unresolved { .. })));
    }

    #[test]
    fn params_validation() {
        assert!(BesovParams::new(1.0, 0.5, 2.0).is_err());
        assert!(BesovParams::new(1.0, 2.0, f64::NAN).is_err());
        assert!(BesovParams::new(f64::INFINITY, 2.0, 2.0).is_err());
        assert!(BesovParams::new(-1.0, f64::INFINITY, f64::INFINITY).is_ok());
    }

    #[test]
    fn vector_blocks_use_magnitude() {
        let g = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let p = DyadicPartition::new(&g);
        let a = ScalarField::from_fn(g, |x| (2.0 * x[0]).sin()).unwrap();
        let b = ScalarField::from_fn(g, |x| (2.0 * x[1]).cos()).unwrap();
        let v = VectorField::new(vec![a.clone(), b.clone()]).unwrap();
        for q in [2.0, 3.0] {
            let na = p.block_lp_norm(&a, 0, q).unwrap();
            let nb = p.block_lp_norm(&b, 0, q).unwrap();
            let nv = p.block_lp_norm(&v, 0, q).unwrap();
            if q == 2.0 {
                assert!((nv - (na * na + nb * nb).sqrt()).abs() < 1e-12);
            } else {
                assert!(nv >= na.max(nb) - 1e-12 && nv <= na + nb + 1e-12);
            }
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let csv = DyadicPartition::profile_csv(5, 4.0);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "xi,chi,phi");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("0.00000000000000000e0,1.00000000000000000e0"));
    }
}
