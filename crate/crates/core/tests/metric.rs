mod common;

use common::*;
use proptest::prelude::*;
use proxqn::{LowRankMetric, Sign};
use proxqn_oracle::dense::{inverse, sorted_eigenvalues};

#[test]
fn apply_identity_plus_e1() {
    let m = LowRankMetric::rank_one(vec![1.0, 1.0], vec![1.0, 0.0], Sign::Plus).unwrap();
    assert_eq!(m.apply(&[1.0, 1.0]).unwrap(), vec![2.0, 1.0]);
    assert_eq!(m.norm_sq(&[1.0, 0.0]).unwrap(), 2.0);
}

#[test]
fn diagonal_apply_and_inverse() {
    let m = LowRankMetric::diagonal(vec![2.0, 3.0]).unwrap();
    assert_eq!(m.apply(&[1.0, 1.0]).unwrap(), vec![2.0, 3.0]);
    let inv = LowRankMetric::diagonal(vec![2.0, 4.0]).unwrap().invert().unwrap();
    assert_eq!(inv.diag(), &[0.5, 0.25]);
    assert_eq!(inv.rank(), 0);
    assert_eq!(LowRankMetric::diagonal(vec![1.0, 1.0]).unwrap().norm_sq(&[3.0, 4.0]).unwrap(), 25.0);
}

#[test]
fn rank_one_inverse_flips_sign() {
    let m = LowRankMetric::rank_one(vec![1.0, 1.0], vec![1.0, 0.0], Sign::Plus).unwrap();
    let inv = m.invert().unwrap();
    assert_eq!(inv.signs(), &[Sign::Minus]);
    let v = &inv.factors()[0];
    assert!((v[0].abs() - 0.5_f64.sqrt()).abs() < 1e-15 && v[1] == 0.0);
    let prod = dense(&m) * dense(&inv);
    assert!((prod - nalgebra::DMatrix::identity(2, 2)).amax() < 1e-14);
}

#[test]
fn minus_metric_on_the_boundary_is_rejected() {
    assert!(LowRankMetric::rank_one(vec![1.0, 1.0], vec![1.0, 0.0], Sign::Minus).is_err());
    assert!(LowRankMetric::rank_one(vec![1.0, 1.0], vec![0.9, 0.0], Sign::Minus).is_ok());
}

#[test]
fn dimension_mismatch_is_an_error() {
    let m = LowRankMetric::diagonal(vec![1.0; 3]).unwrap();
    assert!(m.apply(&[1.0; 2]).is_err());
    assert!(m.norm_sq(&[1.0; 4]).is_err());
}

#[test]
fn tiny_factors_are_dropped() {
    let m = LowRankMetric::rank_one(vec![1.0; 3], vec![1e-14, 0.0, 0.0], Sign::Plus).unwrap();
    assert_eq!(m.rank(), 0);
}

fn sign_strategy() -> impl Strategy<Value = Sign> {
    prop_oneof![Just(Sign::Plus), Just(Sign::Minus)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn apply_matches_dense_assembly(seed in any::<u64>(), n in 2usize..12, rank in 0usize..3, sign in sign_strategy()) {
        let mut r = rng(seed);
        let m = random_metric(&mut r, n, rank.min(n), sign);
        let x = normal_vec(&mut r, n);
        let dense_vx = dense(&m) * dv(&x);
        prop_assert!(max_abs_diff(&m.apply(&x).unwrap(), dense_vx.as_slice()) < 1e-12);
        let q = dv(&x).dot(&dense_vx);
        prop_assert!((m.norm_sq(&x).unwrap() - q).abs() < 1e-12 * q.abs().max(1.0));
        prop_assert!(sorted_eigenvalues(&dense(&m))[0] > 0.0);
    }

    #[test]
    fn invert_then_apply_is_identity(seed in any::<u64>(), n in 2usize..12, rank in 1usize..3, sign in sign_strategy()) {
        let mut r = rng(seed);
        let m = random_metric(&mut r, n, rank.min(n), sign);
        let inv = m.invert().unwrap();
        prop_assert!(inv.signs().iter().zip(m.signs()).all(|(a, b)| *a == b.flip()));
        for _ in 0..100 {
            let x = normal_vec(&mut r, n);
            let back = inv.apply(&m.apply(&x).unwrap()).unwrap();
            prop_assert!(max_abs_diff(&back, &x) < 1e-10);
        }
        let oracle = inverse(&dense(&m));
        prop_assert!((dense(&inv) - oracle).amax() < 1e-10);
    }
}
