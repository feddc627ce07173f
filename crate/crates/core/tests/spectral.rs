use std::f64::consts::PI;

use hdch::transform::{forward, full_spectrum, inverse};
use hdch::{Complex64, Field, GridSpec, ScalarField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_values(grid: &GridSpec, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Textbook O(N^{2d}) DFT with the unnormalized `e^{-2πi k·x/N}` kernel.
fn naive_dft(grid: &GridSpec, values: &[f64]) -> Vec<Complex64> {
    let n = grid.points;
    let digits = |mut flat: usize| {
        let mut idx = vec![0usize; grid.dim];
        for a in (0..grid.dim).rev() {
            idx[a] = flat % n;
            flat /= n;
        }
        idx
    };
    (0..grid.len())
        .map(|kf| {
            let k = digits(kf);
            values
                .iter()
                .enumerate()
                .map(|(xf, &v)| {
                    let x = digits(xf);
                    let phase: usize = k.iter().zip(&x).map(|(a, b)| a * b).sum();
                    v * Complex64::from_polar(1.0, -2.0 * PI * (phase % n) as f64 / n as f64)
                })
                .sum()
        })
        .collect()
}

#[test]
fn forward_matches_naive_dft() {
    for dim in 1..=3 {
        let grid = GridSpec::new(dim, 8, 3.0).unwrap();
        let values = random_values(&grid, dim as u64);
        let fast = full_spectrum(&grid, &forward(&grid, &values));
        let slow = naive_dft(&grid, &values);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12, "d = {dim}: {a} vs {b}");
        }
    }
}

/// Eighth-order central difference along `axis`.
fn central_difference(grid: &GridSpec, values: &[f64], axis: usize) -> Vec<f64> {
    const W: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    let n = grid.points;
    let stride = n.pow((grid.dim - 1 - axis) as u32);
    (0..grid.len())
        .map(|i| {
            let pos = (i / stride) % n;
            let at = |shift: isize| {
                let p = (pos as isize + shift).rem_euclid(n as isize) as usize;
                values[i - pos * stride + p * stride]
            };
            W.iter().enumerate().map(|(m, w)| w * (at(m as isize + 1) - at(-(m as isize) - 1))).sum::<f64>()
                / grid.spacing()
        })
        .collect()
}

#[test]
fn derivative_matches_finite_differences() {
    let grid = GridSpec::new(2, 128, 2.0 * PI).unwrap();
    let u = ScalarField::from_fn(grid, |x| (0.7 * x[0].cos() + 0.4 * (2.0 * x[1] + 0.3).sin()).exp()).unwrap();
    for axis in 0..2 {
        let spectral = u.partial_derivative(axis).unwrap();
        let fd = central_difference(&grid, u.values(), axis);
        let err = spectral.values().iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-7, "axis {axis}: {err}");
    }
}

#[test]
fn derivative_rejects_bad_axis() {
    let grid = GridSpec::new(2, 8, 1.0).unwrap();
    assert!(ScalarField::zeros(grid).partial_derivative(2).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn round_trip(dim in 1usize..=3, log_n in 2u32..=5, seed in any::<u64>(), side in 0.5f64..50.0) {
        let grid = GridSpec::new(dim, 1 << log_n, side).unwrap();
        let values = random_values(&grid, seed);
        let back = inverse(&grid, &forward(&grid, &values));
        for (a, b) in values.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn parseval(dim in 1usize..=3, log_n in 2u32..=5, seed in any::<u64>(), side in 0.5f64..50.0) {
        let grid = GridSpec::new(dim, 1 << log_n, side).unwrap();
        let u = ScalarField::from_values(grid, random_values(&grid, seed)).unwrap();
        let physical = u.lp_norm(2.0).unwrap();
        let spectral = u.l2_norm_spectral();
        prop_assert!((physical - spectral).abs() <= 1e-12 * physical);
    }

    #[test]
    fn helmholtz_pair_inverts(dim in 1usize..=3, seed in any::<u64>(), side in 0.5f64..50.0) {
        let grid = GridSpec::new(dim, 8, side).unwrap();
        let u = ScalarField::from_values(grid, random_values(&grid, seed)).unwrap();
        let back = u.helmholtz_inverse().apply_helmholtz();
        let err = back.sub(&u).unwrap().l2_norm_spectral();
        prop_assert!(err <= 1e-12 * u.l2_norm_spectral());
    }

    #[test]
    fn derivative_is_odd_and_kills_constants(seed in any::<u64>(), c in -5.0f64..5.0) {
        let grid = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let u = ScalarField::from_values(grid, random_values(&grid, seed)).unwrap().dealias();
        let du = u.partial_derivative(0).unwrap();
        let shifted = u.add(&ScalarField::constant(grid, c)).unwrap().partial_derivative(0).unwrap();
        prop_assert!(du.sub(&shifted).unwrap().l2_norm_spectral() < 1e-12);
        // (∂u, u) = 0 for periodic u.
        let dot: f64 = du.values().iter().zip(u.values()).map(|(a, b)| a * b).sum();
        prop_assert!(dot.abs() < 1e-10);
    }
}
