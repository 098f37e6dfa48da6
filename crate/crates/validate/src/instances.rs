use nalgebra::{DMatrix, DVector};
use proxqn::harness::random_block_sizes;
use proxqn::{AffineConstraint, Blocks, LowRankMetric, ProxOperator, Sign};
use proxqn_oracle::dense::assemble;
use proxqn_oracle::Func;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// The functions `h` exercised by the prox criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HKind {
    L1,
    Nonneg,
    Box,
    Hinge,
    Simplex,
    L1Ball,
    Group,
    Affine,
}

impl HKind {
    pub const ALL: [HKind; 8] =
        [HKind::L1, HKind::Nonneg, HKind::Box, HKind::Hinge, HKind::Simplex, HKind::L1Ball, HKind::Group, HKind::Affine];

    pub fn as_str(self) -> &'static str {
        match self {
            HKind::L1 => "l1",
            HKind::Nonneg => "nonneg",
            HKind::Box => "box",
            HKind::Hinge => "hinge",
            HKind::Simplex => "simplex",
            HKind::L1Ball => "l1_ball",
            HKind::Group => "group",
            HKind::Affine => "affine",
        }
    }

    /// Separable with a piecewise-affine scalar prox.
    pub fn piecewise_affine(self) -> bool {
        matches!(self, HKind::L1 | HKind::Nonneg | HKind::Box | HKind::Hinge)
    }
}

/// One scaled-prox instance with its oracle-side description.
#[derive(Debug, Clone)]
pub struct Instance {
    pub kind: HKind,
    pub metric: LowRankMetric,
    pub prox: ProxOperator,
    pub func: Func,
    pub x: Vec<f64>,
    pub kappa: f64,
}

impl Instance {
    pub fn dense_metric(&self) -> DMatrix<f64> {
        let signs: Vec<f64> = self.metric.signs().iter().map(|s| s.value()).collect();
        assemble(self.metric.diag(), self.metric.factors(), &signs)
    }

    pub fn x_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x)
    }
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}

/// Diagonal in `[0.5, 2]`, constant on `blocks` when given.
fn random_diag(rng: &mut ChaCha8Rng, n: usize, blocks: Option<&[usize]>) -> Vec<f64> {
    match blocks {
        None => (0..n).map(|_| rng.random_range(0.5..2.0)).collect(),
        Some(sizes) => sizes
            .iter()
            .flat_map(|&len| {
                let d = rng.random_range(0.5..2.0);
                std::iter::repeat_n(d, len)
            })
            .collect(),
    }
}

/// Random `D ± UUᵀ` with `rank` factors of one sign.
///
/// Plus metrics have `‖D^{-1/2}U‖² ∈ [0.1, 4]`; minus metrics have `‖D^{-1/2}U‖² ∈ [0.05, 0.7]`,
/// keeping the monotonicity modulus above `0.3`.
pub fn random_metric(rng: &mut ChaCha8Rng, n: usize, rank: usize, sign: Sign, blocks: Option<&[usize]>) -> LowRankMetric {
    let diag = random_diag(rng, n, blocks);
    loop {
        let factors: Vec<Vec<f64>> = (0..rank).map(|_| normal_vec(rng, n)).collect();
        let u = DMatrix::from_fn(n, rank, |i, j| factors[j][i] / diag[i].sqrt());
        let norm_sq = u.singular_values().max().powi(2);
        if norm_sq == 0.0 {
            continue;
        }
        let target = match sign {
            Sign::Plus => rng.random_range(0.1..4.0),
            Sign::Minus => rng.random_range(0.05..0.7),
        };
        let scale = (target / norm_sq).sqrt();
        let factors = factors.into_iter().map(|f| f.into_iter().map(|v| v * scale).collect()).collect();
        if let Ok(m) = LowRankMetric::new(diag.clone(), factors, sign) {
            if m.rank() == rank {
                return m;
            }
        }
    }
}

pub fn random_prox(rng: &mut ChaCha8Rng, kind: HKind, n: usize, blocks: &[usize]) -> (ProxOperator, Func) {
    match kind {
        HKind::L1 => {
            let lambda = rng.random_range(0.1..1.0);
            (ProxOperator::l1(lambda).unwrap(), Func::L1 { lambda })
        }
        HKind::Nonneg => (ProxOperator::nonneg(), Func::nonneg()),
        HKind::Box => {
            let lo = rng.random_range(-1.0..-0.1);
            let hi = rng.random_range(0.1..1.0);
            (ProxOperator::boxed(lo, hi).unwrap(), Func::Box { lo, hi })
        }
        HKind::Hinge => {
            let lambda = rng.random_range(0.1..1.0);
            (ProxOperator::hinge(lambda).unwrap(), Func::Hinge { lambda })
        }
        HKind::Simplex => {
            let radius = rng.random_range(0.5..2.0);
            (ProxOperator::simplex(radius).unwrap(), Func::Simplex { radius })
        }
        HKind::L1Ball => {
            let radius = rng.random_range(0.5..2.0);
            (ProxOperator::l1_ball(radius).unwrap(), Func::L1Ball { radius })
        }
        HKind::Group => {
            let lambda = rng.random_range(0.1..1.0);
            let b = Blocks::from_sizes(blocks).unwrap();
            (ProxOperator::group_l2(lambda, b).unwrap(), Func::Group { lambda, sizes: blocks.to_vec() })
        }
        HKind::Affine => {
            let m = 2;
            let a = normal_vec(rng, m * n);
            let feasible = normal_vec(rng, n);
            let b: Vec<f64> = (0..m).map(|i| (0..n).map(|j| a[i * n + j] * feasible[j]).sum()).collect();
            let c = AffineConstraint::new(m, n, a.clone(), b.clone()).unwrap();
            let func = Func::Affine { a: DMatrix::from_row_slice(m, n, &a), b: DVector::from_vec(b) };
            (ProxOperator::affine(c), func)
        }
    }
}

/// A random instance of dimension `n` (at least 3).
pub fn random_instance(rng: &mut ChaCha8Rng, kind: HKind, n: usize, rank: usize, sign: Sign) -> Instance {
    let blocks = random_block_sizes(rng, n, 6);
    let metric = random_metric(rng, n, rank, sign, (kind == HKind::Group).then_some(&blocks[..]));
    let (prox, func) = random_prox(rng, kind, n, &blocks);
    let x = normal_vec(rng, n).into_iter().map(|v| 2.0 * v).collect();
    let kappa = rng.random_range(0.5..2.0);
    Instance { kind, metric, prox, func, x, kappa }
}

/// Dimension drawn from `[3, max_n]`.
pub fn random_dim(rng: &mut ChaCha8Rng, max_n: usize) -> usize {
    rng.random_range(3..=max_n.max(3))
}
