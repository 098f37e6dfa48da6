#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use proxqn::{LowRankMetric, Sign};
use proxqn_oracle::dense::assemble;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn positive_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.5..2.0)).collect()
}

/// `diag ± Σuuᵀ` with `‖D^{-1/2}U‖²` equal to `norm_sq`.
pub fn metric_with(diag: Vec<f64>, factors: Vec<Vec<f64>>, sign: Sign, norm_sq: f64) -> LowRankMetric {
    let n = diag.len();
    let r = factors.len();
    if r == 0 {
        return LowRankMetric::diagonal(diag).unwrap();
    }
    let u = DMatrix::from_fn(n, r, |i, j| factors[j][i] / diag[i].sqrt());
    let scale = (norm_sq / u.singular_values().max().powi(2)).sqrt();
    let factors = factors.into_iter().map(|f| f.into_iter().map(|v| v * scale).collect()).collect();
    LowRankMetric::new(diag, factors, sign).unwrap()
}

pub fn random_metric(rng: &mut ChaCha8Rng, n: usize, rank: usize, sign: Sign) -> LowRankMetric {
    let diag = positive_vec(rng, n);
    let factors = (0..rank).map(|_| normal_vec(rng, n)).collect();
    let norm_sq = match sign {
        Sign::Plus => rng.random_range(0.1..3.0),
        Sign::Minus => rng.random_range(0.05..0.7),
    };
    metric_with(diag, factors, sign, norm_sq)
}

pub fn dense(m: &LowRankMetric) -> DMatrix<f64> {
    let signs: Vec<f64> = m.signs().iter().map(|s| s.value()).collect();
    assemble(m.diag(), m.factors(), &signs)
}

pub fn dv(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
