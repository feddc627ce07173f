use std::f64::consts::PI;

use hdch::littlewood_paley::{block_multiplier, chi, phi};
use hdch::{BesovParams, DyadicPartition, Error, Field, GridSpec, ScalarField, VectorField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(grid: &GridSpec, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    ScalarField::from_values(*grid, values).unwrap().dealias()
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(2.0), Just(f64::INFINITY), 1.0f64..6.0]
}

#[test]
fn profiles_partition_unity() {
    for i in 0..4000 {
        let r = i as f64 * 0.01;
        let sum: f64 = (-1..30).map(|j| block_multiplier(j, r)).sum();
        assert!((sum - 1.0).abs() < 1e-15, "r = {r}: {sum}");
    }
    assert_eq!(chi(0.9), 1.0);
    assert_eq!(chi(4.0 / 3.0), 0.0);
    assert_eq!(phi(1.5), 1.0);
    assert_eq!(phi(0.99), 0.0);
    assert_eq!(phi(8.0 / 3.0), 0.0);
}

#[test]
fn zero_field_has_zero_norm() {
    let grid = GridSpec::new(2, 32, 2.0 * PI).unwrap();
    let part = DyadicPartition::new(&grid);
    let params = BesovParams::new(3.0, 2.0, 2.0).unwrap();
    assert_eq!(part.besov_norm(&ScalarField::zeros(grid), &params).unwrap(), 0.0);
}

#[test]
fn unresolved_field_is_rejected() {
    let grid = GridSpec::new(1, 32, 2.0 * PI).unwrap();
    let u = ScalarField::from_fn(grid, |x| (15.0 * x[0]).cos()).unwrap();
    let params = BesovParams::new(1.0, 2.0, 2.0).unwrap();
    let err = DyadicPartition::new(&grid).besov_norm(&u, &params).unwrap_err();
    assert!(matches!(err, Error::Unresolved { .. }), "{err}");
}

#[test]
fn invalid_exponents_are_rejected() {
    assert!(BesovParams::new(1.0, 0.5, 2.0).is_err());
    assert!(BesovParams::new(1.0, 2.0, 0.0).is_err());
    assert!(BesovParams::new(f64::NAN, 2.0, 2.0).is_err());
}

#[test]
fn vector_norm_dominates_components() {
    let grid = GridSpec::new(2, 32, 2.0 * PI).unwrap();
    let part = DyadicPartition::new(&grid);
    let params = BesovParams::new(1.0, 2.0, 2.0).unwrap();
    let a = random_field(&grid, 1);
    let b = random_field(&grid, 2);
    let na = part.besov_norm(&a, &params).unwrap();
    let nb = part.besov_norm(&b, &params).unwrap();
    let nv = part.besov_norm(&VectorField::new(vec![a, b]).unwrap(), &params).unwrap();
    assert!(nv >= na.max(nb) && nv <= na + nb);
    // For p = r = 2 the squares add.
    assert!((nv * nv - na * na - nb * nb).abs() < 1e-12 * nv * nv);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn blocks_telescope(dim in 1usize..=3, seed in any::<u64>(), side in 1.0f64..40.0) {
        let grid = GridSpec::new(dim, 16, side).unwrap();
        let part = DyadicPartition::new(&grid);
        let u = random_field(&grid, seed);
        let mut sum = ScalarField::zeros(grid);
        for j in part.j_min()..=part.j_max() {
            let low = part.low_freq_cutoff(&u, j).unwrap();
            prop_assert!(low.sub(&sum).unwrap().l2_norm_spectral() <= 1e-12 * u.l2_norm_spectral());
            sum = sum.add(&part.dyadic_block(&u, j).unwrap()).unwrap();
        }
        prop_assert!(sum.sub(&u).unwrap().l2_norm_spectral() <= 1e-12 * u.l2_norm_spectral());
        prop_assert_eq!(part.dyadic_block(&u, part.j_max() + 1).unwrap().l2_norm_spectral(), 0.0);
        prop_assert_eq!(part.dyadic_block(&u, -2).unwrap().l2_norm_spectral(), 0.0);
    }

    #[test]
    fn homogeneous(seed in any::<u64>(), lambda in -10.0f64..10.0, s in -2.0f64..4.0, p in exponent(), r in exponent()) {
        let grid = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let part = DyadicPartition::new(&grid);
        let params = BesovParams::new(s, p, r).unwrap();
        let u = random_field(&grid, seed);
        let a = part.besov_norm(&u.scaled(lambda), &params).unwrap();
        let b = lambda.abs() * part.besov_norm(&u, &params).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
    }

    #[test]
    fn triangle(seed in any::<u64>(), s in -2.0f64..4.0, p in exponent(), r in exponent()) {
        let grid = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let part = DyadicPartition::new(&grid);
        let params = BesovParams::new(s, p, r).unwrap();
        let u = random_field(&grid, seed);
        let v = random_field(&grid, seed ^ 0x9e37_79b9);
        let lhs = part.besov_norm(&u.add(&v).unwrap(), &params).unwrap();
        let rhs = part.besov_norm(&u, &params).unwrap() + part.besov_norm(&v, &params).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn decreasing_in_r(seed in any::<u64>(), s in -1.0f64..3.0, r1 in 1.0f64..8.0, dr in 0.0f64..8.0) {
        let grid = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let part = DyadicPartition::new(&grid);
        let u = random_field(&grid, seed);
        let small = part.besov_norm(&u, &BesovParams::new(s, 2.0, r1).unwrap()).unwrap();
        let large = part.besov_norm(&u, &BesovParams::new(s, 2.0, r1 + dr).unwrap()).unwrap();
        let sup = part.besov_norm(&u, &BesovParams::new(s, 2.0, f64::INFINITY).unwrap()).unwrap();
        prop_assert!(large <= small * (1.0 + 1e-12));
        prop_assert!(sup <= large * (1.0 + 1e-12));
    }

    #[test]
    fn increasing_in_s_above_low_block(seed in any::<u64>(), s in 0.0f64..3.0, ds in 0.0f64..2.0) {
        // With the j = -1 block removed every weight grows with s.
        let grid = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let part = DyadicPartition::new(&grid);
        let u = random_field(&grid, seed);
        let u = u.sub(&part.dyadic_block(&u, -1).unwrap()).unwrap();
        let a = part.besov_norm(&u, &BesovParams::new(s, 2.0, 2.0).unwrap()).unwrap();
        let b = part.besov_norm(&u, &BesovParams::new(s + ds, 2.0, 2.0).unwrap()).unwrap();
        prop_assert!(a <= b * (1.0 + 1e-12));
    }

    #[test]
    fn block_l2_matches_physical(seed in any::<u64>(), j in -1i32..3) {
        let grid = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let part = DyadicPartition::new(&grid);
        let u = random_field(&grid, seed);
        let parseval = part.block_lp_norm(&u, j, 2.0).unwrap();
        let physical = part.dyadic_block(&u, j).unwrap().lp_norm(2.0).unwrap();
        prop_assert!((parseval - physical).abs() <= 1e-12 * physical.max(1e-300));
    }
}
