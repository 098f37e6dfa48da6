use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::recipe::{Family, ProblemRecipe};
use crate::error::Result;
use crate::linalg::{power_iteration, CsrMatrix, DenseMatrix, LinearOperator};
use crate::prox::{Blocks, ProxOperator};
use crate::solver::{LeastSquares, ProblemSpec};

const POWER_STEPS: usize = 50;
const POWER_TOL: f64 = 1e-8;
const NOISE: f64 = 0.1;

/// A generated instance together with its data matrix.
#[derive(Clone)]
pub struct GeneratedProblem {
    pub recipe: ProblemRecipe,
    pub operator: Arc<dyn LinearOperator>,
    pub rhs: Vec<f64>,
    pub spec: ProblemSpec,
}

impl std::fmt::Debug for GeneratedProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneratedProblem").field("recipe", &self.recipe).field("spec", &self.spec).finish()
    }
}

/// Builds the instance described by `recipe`. The result depends only on the recipe.
///
/// The least-squares term carries `L = ‖AᵀA‖₂` estimated by power iteration.
pub fn generate(recipe: &ProblemRecipe) -> Result<GeneratedProblem> {
    recipe.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    let (operator, rhs, h): (Arc<dyn LinearOperator>, Vec<f64>, ProxOperator) = match recipe.family {
        Family::LassoGaussian => {
            let a = gaussian_matrix(&mut rng, recipe.m, recipe.n)?;
            let x_true = sparse_signal(&mut rng, recipe.n, false);
            let b = noisy_rhs(&mut rng, &a, &x_true);
            (Arc::new(a), b, ProxOperator::l1(recipe.lambda)?)
        }
        Family::LassoDiff3d => {
            let d = diff3d_operator(recipe.n)?;
            let x_true = sparse_signal(&mut rng, d.cols(), false);
            let b = noisy_rhs(&mut rng, &d, &x_true);
            (Arc::new(d), b, ProxOperator::l1(recipe.lambda)?)
        }
        Family::GroupLasso => {
            let a = DenseMatrix::from_fn(recipe.m, recipe.n, |_, _| rng.random::<f64>())?;
            let b: Vec<f64> = (0..recipe.m).map(|_| rng.random::<f64>()).collect();
            let sizes = random_block_sizes(&mut rng, recipe.n, recipe.block_cap);
            (Arc::new(a), b, ProxOperator::group_l2(recipe.lambda, Blocks::from_sizes(&sizes)?)?)
        }
        Family::Nnls => {
            let a = gaussian_matrix(&mut rng, recipe.m, recipe.n)?;
            let x_true = sparse_signal(&mut rng, recipe.n, true);
            let b = noisy_rhs(&mut rng, &a, &x_true);
            (Arc::new(a), b, ProxOperator::nonneg())
        }
    };
    let lipschitz = power_iteration(operator.as_ref(), POWER_STEPS, POWER_TOL);
    let f = LeastSquares::new(operator.clone(), rhs.clone())?;
    let spec = ProblemSpec::new(recipe.id(), Arc::new(f), h).with_lipschitz(lipschitz);
    Ok(GeneratedProblem { recipe: recipe.clone(), operator, rhs, spec })
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Result<DenseMatrix> {
    DenseMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Ten percent nonzeros (at least one) with standard normal values, or their magnitudes.
fn sparse_signal(rng: &mut ChaCha8Rng, n: usize, nonneg: bool) -> Vec<f64> {
    let k = (n / 10).max(1);
    let mut x = vec![0.0; n];
    let mut support = sample(rng, n, k).into_vec();
    support.sort_unstable();
    for i in support {
        let v: f64 = rng.sample(StandardNormal);
        x[i] = if nonneg { v.abs() } else { v };
    }
    x
}

/// `b = Ax + 0.1·ξ` with standard normal `ξ`.
fn noisy_rhs(rng: &mut ChaCha8Rng, a: &dyn LinearOperator, x: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; a.rows()];
    a.apply(x, &mut b);
    for bi in &mut b {
        *bi += NOISE * rng.sample::<f64, _>(StandardNormal);
    }
    b
}

/// Sizes drawn uniformly from `1..=cap` until they cover `n`; the last block is truncated.
pub fn random_block_sizes(rng: &mut impl Rng, n: usize, cap: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut left = n;
    while left > 0 {
        let s = rng.random_range(1..=cap).min(left);
        sizes.push(s);
        left -= s;
    }
    sizes
}

/// Stacked forward differences `[Dx; Dy; Dz]` on an `s×s×s` grid.
///
/// Row `(axis, p)` is `x[p + stride] − x[p]` when `p` is not on the last slice along `axis`
/// and zero otherwise (Neumann boundary). Unknown `p = i + s·j + s²·k`.
pub fn diff3d_operator(side: usize) -> Result<CsrMatrix> {
    let n = side.pow(3);
    let mut triplets = Vec::with_capacity(6 * n);
    for axis in 0..3 {
        let stride = side.pow(axis as u32);
        for p in 0..n {
            let coord = (p / stride) % side;
            if coord + 1 < side {
                let row = axis * n + p;
                triplets.push((row, p, -1.0));
                triplets.push((row, p + stride, 1.0));
            }
        }
    }
    CsrMatrix::from_triplets(3 * n, n, &triplets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_bitwise_deterministic() {
        for family in Family::ALL {
            let r = ProblemRecipe { m: 6, n: if family == Family::LassoDiff3d { 3 } else { 5 }, ..ProblemRecipe::desk(family, 7) };
            let a = generate(&r).unwrap();
            let b = generate(&r).unwrap();
            assert_eq!(a.rhs.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.rhs.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            let x: Vec<f64> = (0..r.dim()).map(|i| (i as f64).cos()).collect();
            let (mut ya, mut yb) = (vec![0.0; r.rows()], vec![0.0; r.rows()]);
            a.operator.apply(&x, &mut ya);
            b.operator.apply(&x, &mut yb);
            assert_eq!(ya, yb);
            assert_eq!(a.spec.lipschitz, b.spec.lipschitz);
            let other = generate(&ProblemRecipe { seed: 8, ..r.clone() }).unwrap();
            assert_ne!(other.rhs, a.rhs);
        }
    }

    #[test]
    fn tiny_gaussian_is_reproducible() {
        let r = ProblemRecipe { m: 2, n: 2, ..ProblemRecipe::desk(Family::LassoGaussian, 42) };
        let g1 = generate(&r).unwrap();
        let g2 = generate(&r).unwrap();
        let e = |g: &GeneratedProblem| {
            let mut out = Vec::new();
            for j in 0..2 {
                let mut col = vec![0.0; 2];
                let mut ej = vec![0.0; 2];
                ej[j] = 1.0;
                g.operator.apply(&ej, &mut col);
                out.extend(col.into_iter().map(f64::to_bits));
            }
            out
        };
        assert_eq!(e(&g1), e(&g2));
    }

    #[test]
    fn diff3d_structure() {
        let d = diff3d_operator(3).unwrap();
        assert_eq!(d.cols(), 27);
        assert_eq!(d.rows(), 81);
        let mut nonzero_rows = 0;
        for i in 0..d.rows() {
            let entries: Vec<_> = d.row_entries(i).collect();
            if entries.is_empty() {
                continue;
            }
            nonzero_rows += 1;
            let mut vals: Vec<f64> = entries.iter().map(|e| e.1).collect();
            vals.sort_by(f64::total_cmp);
            assert_eq!(vals, vec![-1.0, 1.0]);
        }
        // 2 of 3 slices per axis carry a difference
        assert_eq!(nonzero_rows, 3 * 18);
        let ones = vec![1.0; 27];
        let mut out = vec![0.0; 81];
        d.apply(&ones, &mut out);
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn group_partition_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let sizes = random_block_sizes(&mut rng, 24, 12);
            assert_eq!(sizes.iter().sum::<usize>(), 24);
            assert!(sizes.iter().all(|s| (1..=12).contains(s)));
        }
    }

    #[test]
    fn lipschitz_estimate_matches_dense_eigenvalue() {
        let r = ProblemRecipe { m: 20, n: 12, ..ProblemRecipe::desk(Family::LassoGaussian, 3) };
        let g = generate(&r).unwrap();
        let mut ata = nalgebra::DMatrix::<f64>::zeros(12, 12);
        for j in 0..12 {
            let mut e = vec![0.0; 12];
            e[j] = 1.0;
            let mut col = vec![0.0; 20];
            g.operator.apply(&e, &mut col);
            let mut back = vec![0.0; 12];
            g.operator.apply_transpose(&col, &mut back);
            for i in 0..12 {
                ata[(i, j)] = back[i];
            }
        }
        let lmax = ata.symmetric_eigen().eigenvalues.max();
        let est = g.spec.lipschitz.unwrap();
        assert!(est <= lmax * (1.0 + 1e-12) && est >= 0.99 * lmax, "{est} vs {lmax}");
    }
}
