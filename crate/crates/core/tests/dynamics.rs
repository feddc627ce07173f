use std::f64::consts::PI;

use hdch::dynamics::{
    h1_energy, integrate, q_bilinear, r_bilinear, rhs_momentum, rhs_velocity, step_rk4, Formulation, SolverConfig,
};
use hdch::fixtures::{modes_field, sine_fixture, Mode};
use hdch::{Error, Field, GridSpec, ScalarField, VectorField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random field with every wavenumber component below `N/4`, so all
/// quadratic products are alias-free.
fn band_limited(grid: &GridSpec, seed: u64, amplitude: f64) -> VectorField {
    band_limited_to(grid, seed, amplitude, (grid.points / 4 - 1) as i64)
}

fn band_limited_to(grid: &GridSpec, seed: u64, amplitude: f64, kmax: i64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<Mode> = (0..6 * grid.dim)
        .map(|i| Mode {
            component: i % grid.dim,
            k: (0..grid.dim).map(|_| rng.random_range(-kmax..=kmax)).collect(),
            cos: amplitude * rng.random_range(-1.0..1.0),
            sin: amplitude * rng.random_range(-1.0..1.0),
        })
        .collect();
    modes_field(grid, &modes).unwrap()
}

fn rel(a: &VectorField, b: &VectorField) -> f64 {
    a.minus(b).unwrap().l2_norm_spectral() / b.l2_norm_spectral().max(1e-300)
}

/// Shifts every component by `shift` grid points along `axis`.
fn roll(u: &VectorField, axis: usize, shift: usize) -> VectorField {
    let grid = *u.grid();
    let n = grid.points;
    let stride = n.pow((grid.dim - 1 - axis) as u32);
    u.map_parts(|c| {
        let v = c.values();
        let rolled = (0..grid.len())
            .map(|i| {
                let pos = (i / stride) % n;
                v[i - pos * stride + ((pos + n - shift) % n) * stride]
            })
            .collect();
        ScalarField::from_values(grid, rolled).unwrap()
    })
}

#[test]
fn sine_rhs_fixture() {
    let grid = GridSpec::new(2, 32, 2.0 * PI).unwrap();
    let u = sine_fixture(&grid).unwrap();
    let expected = VectorField::first_component(ScalarField::from_fn(grid, |x| -0.6 * (2.0 * x[0]).sin()).unwrap());
    assert!(rel(&rhs_velocity(&u).unwrap(), &expected) < 1e-12);
    let m_rhs = rhs_momentum(&u.apply_helmholtz()).unwrap().helmholtz_inverse();
    assert!(rel(&m_rhs, &expected) < 1e-12);
}

#[test]
fn zero_data_stays_zero() {
    let grid = GridSpec::new(3, 8, 1.0).unwrap();
    let traj = integrate(&VectorField::zeros(grid), &SolverConfig::adaptive(0.5)).unwrap();
    assert_eq!(traj.last().l2_norm_spectral(), 0.0);
}

#[test]
fn blow_up_is_reported() {
    let mut calls = 0;
    let err = step_rk4(&1.0f64, 0.0, 1.0, |y| {
        calls += 1;
        Ok(y * 1e300)
    })
    .unwrap_err();
    assert!(matches!(err, Error::BlowUp { .. }), "{err}");
    assert!(calls <= 4);
}

#[test]
fn one_dimensional_energy_is_nearly_conserved() {
    let grid = GridSpec::new(1, 256, 2.0 * PI).unwrap();
    let u0 = VectorField::first_component(ScalarField::from_fn(grid, |x| 0.5 * (x[0].cos()).exp()).unwrap());
    let traj = integrate(&u0, &SolverConfig::adaptive(0.5).with_samples(vec![0.0, 0.25, 0.5])).unwrap();
    assert!(traj.meta.energy_drift() < 1e-8, "{}", traj.meta.energy_drift());
}

#[test]
fn sampling_lands_on_requested_times() {
    let grid = GridSpec::new(2, 16, 2.0 * PI).unwrap();
    let cfg = SolverConfig::adaptive(0.2).with_samples(vec![0.0, 0.013, 0.2]);
    let traj = integrate(&sine_fixture(&grid).unwrap(), &cfg).unwrap();
    assert_eq!(traj.times(), vec![0.0, 0.013, 0.2]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn q_and_r_are_bilinear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let grid = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let u = band_limited(&grid, seed, 1.0);
        let v = band_limited(&grid, seed.wrapping_add(1), 1.0);
        let w = band_limited(&grid, seed.wrapping_add(2), 1.0);
        let combo = v.axpy(a, &w, b).unwrap();
        for op in [q_bilinear, r_bilinear] {
            let lhs = op(&u, &combo).unwrap();
            let rhs = op(&u, &v).unwrap().axpy(a, &op(&u, &w).unwrap(), b).unwrap();
            prop_assert!(rel(&lhs, &rhs) < 1e-11);
            let lhs = op(&combo, &u).unwrap();
            let rhs = op(&v, &u).unwrap().axpy(a, &op(&w, &u).unwrap(), b).unwrap();
            prop_assert!(rel(&lhs, &rhs) < 1e-11);
        }
    }

    #[test]
    fn formulations_agree_on_band_limited_data(dim in 1usize..=3, seed in any::<u64>()) {
        let grid = GridSpec::new(dim, 16, 2.0 * PI).unwrap();
        let u = band_limited(&grid, seed, 0.5);
        let via_m = rhs_momentum(&u.apply_helmholtz()).unwrap().helmholtz_inverse();
        prop_assert!(rel(&via_m, &rhs_velocity(&u).unwrap()) < 1e-12);
    }

    #[test]
    fn rhs_is_translation_equivariant(seed in any::<u64>(), axis in 0usize..2, shift in 1usize..16) {
        let grid = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let u = band_limited(&grid, seed, 1.0);
        let lhs = rhs_velocity(&roll(&u, axis, shift)).unwrap();
        let rhs = roll(&rhs_velocity(&u).unwrap(), axis, shift);
        prop_assert!(rel(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn rhs_scales_quadratically(seed in any::<u64>(), lambda in -4.0f64..4.0) {
        let grid = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let u = band_limited(&grid, seed, 1.0);
        let lhs = rhs_velocity(&u.scaled(lambda)).unwrap();
        let rhs = rhs_velocity(&u).unwrap().scaled(lambda * lambda);
        prop_assert!(lhs.minus(&rhs).unwrap().l2_norm_spectral() <= 1e-12 * rhs.l2_norm_spectral().max(1e-300));
    }

    #[test]
    fn velocity_and_momentum_runs_agree(seed in any::<u64>()) {
        // Low modes on a finer grid keep the per-step truncation monitor quiet.
        let grid = GridSpec::new(2, 32, 2.0 * PI).unwrap();
        let u = band_limited_to(&grid, seed, 0.2, 3);
        let cfg = SolverConfig::fixed(0.01, 0.05);
        let a = integrate(&u, &cfg).unwrap();
        let b = integrate(&u, &cfg.clone().with_formulation(Formulation::Momentum)).unwrap();
        prop_assert!(rel(b.last(), a.last()) < 1e-12);
        prop_assert!(h1_energy(a.last()) > 0.0);
    }
}
