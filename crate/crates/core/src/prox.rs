//! Proximal operators in a diagonal metric.
//!
//! Every operator evaluates `prox^D_{κh}(x) = argmin_z κh(z) + ½Σ dᵢ(xᵢ − zᵢ)²` for a positive
//! weight vector `d`. Separable functions whose scalar prox is piecewise affine expose a
//! [`PiecewiseAffineDescriptor`] per coordinate, and every operator can produce an element of
//! the Clarke Jacobian of its prox, which the semi-smooth Newton root finder consumes.

use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use smallvec::{smallvec, SmallVec};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dot, norm2};

/// Relative slack used when evaluating indicator functions.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Breakpoints `t¹ < … < tᵏ` with `k + 1` affine segments `aⱼ z + bⱼ`.
/// Segment `j` covers `(tʲ, tʲ⁺¹]` with `t⁰ = −∞` and `tᵏ⁺¹ = +∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseAffineDescriptor {
    pub breakpoints: SmallVec<[f64; 2]>,
    pub slopes: SmallVec<[f64; 3]>,
    pub intercepts: SmallVec<[f64; 3]>,
}

impl PiecewiseAffineDescriptor {
    fn identity() -> Self {
        Self { breakpoints: smallvec![], slopes: smallvec![1.0], intercepts: smallvec![0.0] }
    }

    /// Index of the segment containing `z`; at a breakpoint the segment on the right.
    pub fn segment(&self, z: f64) -> usize {
        self.breakpoints.iter().take_while(|&&t| t <= z).count()
    }

    pub fn eval(&self, z: f64) -> f64 {
        let j = self.segment(z);
        self.slopes[j] * z + self.intercepts[j]
    }

    /// Largest continuity defect over all breakpoints.
    pub fn continuity_defect(&self) -> f64 {
        self.breakpoints
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                let left = self.slopes[j] * t + self.intercepts[j];
                let right = self.slopes[j + 1] * t + self.intercepts[j + 1];
                (left - right).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Contiguous partition of `0..n` into blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blocks {
    ranges: Vec<Range<usize>>,
}

impl Blocks {
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::InvalidArgument("block sizes must be positive".into()));
        }
        let mut start = 0;
        let ranges = sizes
            .iter()
            .map(|&s| {
                let r = start..start + s;
                start += s;
                r
            })
            .collect();
        Ok(Self { ranges })
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }

    /// Checks that `d` is constant on every block and returns the per-block values.
    pub fn block_values(&self, d: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), d.len())?;
        self.ranges
            .iter()
            .map(|r| {
                let v = d[r.start];
                if d[r.clone()].iter().any(|&w| (w - v).abs() > 1e-12 * v.abs().max(1.0)) {
                    Err(Error::InvalidArgument(format!("weights are not constant on block {r:?}")))
                } else {
                    Ok(v)
                }
            })
            .collect()
    }
}

/// Equality constraint `{z : Az = b}` with `A` of full row rank.
#[derive(Debug, Clone)]
pub struct AffineConstraint {
    a: DMatrix<f64>,
    b: Vec<f64>,
    // Cholesky factor of AAᵀ; reused whenever the weights are uniform.
    gram: Cholesky<f64, Dyn>,
}

impl AffineConstraint {
    /// `a` is row-major `m × n`.
    pub fn new(m: usize, n: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if m == 0 || n == 0 || m > n {
            return Err(Error::RankDeficient(format!("{m}×{n} system cannot have full row rank")));
        }
        check_dim(m * n, a.len())?;
        check_dim(m, b.len())?;
        let a = DMatrix::from_row_slice(m, n, &a);
        let gram = Self::factor(&(&a * a.transpose()))?;
        Ok(Self { a, b, gram })
    }

    fn factor(g: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
        let scale = g.diagonal().max().max(f64::MIN_POSITIVE);
        let chol = Cholesky::new(g.clone()).ok_or_else(|| Error::RankDeficient("A Aᵀ is singular".into()))?;
        let l = chol.l_dirty();
        let min_pivot = (0..g.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot <= 1e-12 * scale {
            return Err(Error::RankDeficient("A does not have full row rank".into()));
        }
        Ok(chol)
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn residual(&self, z: &[f64]) -> Vec<f64> {
        let az = &self.a * DVector::from_column_slice(z);
        az.iter().zip(&self.b).map(|(l, r)| l - r).collect()
    }

    /// Factor of `A D⁻¹ Aᵀ`.
    fn weighted_gram(&self, d: &[f64]) -> Result<Cholesky<f64, Dyn>> {
        let d0 = d[0];
        if d.iter().all(|&v| v == d0) {
            let mut c = self.gram.clone();
            // chol(AAᵀ/d) = chol(AAᵀ)/√d
            let s = 1.0 / d0.sqrt();
            let mut l = c.l_dirty().clone();
            l *= s;
            c = Cholesky::pack_dirty(l);
            return Ok(c);
        }
        let mut ad = self.a.clone();
        for (j, mut col) in ad.column_iter_mut().enumerate() {
            col /= d[j];
        }
        Self::factor(&(&ad * self.a.transpose()))
    }

    fn project(&self, x: &[f64], d: &[f64], out: &mut [f64]) -> Result<()> {
        let chol = self.weighted_gram(d)?;
        let r = DVector::from_vec(self.residual(x));
        let lam = chol.solve(&r);
        let corr = self.a.tr_mul(&lam);
        for i in 0..x.len() {
            out[i] = x[i] - corr[i] / d[i];
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Zero,
    L1 { lambda: f64 },
    Box { lo: f64, hi: f64 },
    Hinge { lambda: f64 },
    Simplex { radius: f64 },
    L1Ball { radius: f64 },
    LinfNorm { lambda: f64 },
    Max { lambda: f64 },
    Group { lambda: f64, blocks: Blocks },
    Affine(Box<AffineConstraint>),
}

/// A closed proper convex function `h` together with its diagonal-metric prox.
#[derive(Debug, Clone)]
pub struct ProxOperator {
    kind: Kind,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!("{name} must be nonnegative and finite, got {v}")))
    }
}

pub(crate) fn check_weights(d: &[f64], kappa: f64) -> Result<()> {
    positive("κ", kappa)?;
    if let Some(bad) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidArgument(format!("weights must be positive, found {bad}")));
    }
    Ok(())
}

impl ProxOperator {
    /// `h ≡ 0`.
    pub fn zero() -> Self {
        Self { kind: Kind::Zero }
    }

    /// `λ‖z‖₁`.
    pub fn l1(lambda: f64) -> Result<Self> {
        Ok(Self { kind: Kind::L1 { lambda: positive("λ", lambda)? } })
    }

    /// Indicator of the nonnegative orthant.
    pub fn nonneg() -> Self {
        Self { kind: Kind::Box { lo: 0.0, hi: f64::INFINITY } }
    }

    /// Indicator of the nonpositive orthant.
    pub fn nonpos() -> Self {
        Self { kind: Kind::Box { lo: f64::NEG_INFINITY, hi: 0.0 } }
    }

    /// Indicator of `[lo, hi]ᴺ`; infinite bounds are allowed.
    pub fn boxed(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(Error::InvalidArgument(format!("invalid box bounds [{lo}, {hi}]")));
        }
        Ok(Self { kind: Kind::Box { lo, hi } })
    }

    /// `λ Σ max(0, zᵢ)`.
    pub fn hinge(lambda: f64) -> Result<Self> {
        Ok(Self { kind: Kind::Hinge { lambda: positive("λ", lambda)? } })
    }

    /// Indicator of `{‖z‖∞ ≤ ρ}`.
    pub fn linf_ball(radius: f64) -> Result<Self> {
        let r = positive("radius", radius)?;
        Ok(Self { kind: Kind::Box { lo: -r, hi: r } })
    }

    /// Indicator of `{z ≥ 0, Σz = ρ}`.
    pub fn simplex(radius: f64) -> Result<Self> {
        Ok(Self { kind: Kind::Simplex { radius: positive("radius", radius)? } })
    }

    /// Indicator of `{‖z‖₁ ≤ ρ}`.
    pub fn l1_ball(radius: f64) -> Result<Self> {
        Ok(Self { kind: Kind::L1Ball { radius: positive("radius", radius)? } })
    }

    /// `λ‖z‖∞`.
    pub fn linf_norm(lambda: f64) -> Result<Self> {
        Ok(Self { kind: Kind::LinfNorm { lambda: nonnegative("λ", lambda)? } })
    }

    /// `λ maxᵢ zᵢ`.
    pub fn max(lambda: f64) -> Result<Self> {
        Ok(Self { kind: Kind::Max { lambda: nonnegative("λ", lambda)? } })
    }

    /// `λ Σ_b ‖z_b‖₂`.
    pub fn group_l2(lambda: f64, blocks: Blocks) -> Result<Self> {
        Ok(Self { kind: Kind::Group { lambda: positive("λ", lambda)?, blocks } })
    }

    /// Indicator of `{z : Az = b}`.
    pub fn affine(constraint: AffineConstraint) -> Self {
        Self { kind: Kind::Affine(Box::new(constraint)) }
    }

    pub fn name(&self) -> &'static str {
        match &self.kind {
            Kind::Zero => "zero",
            Kind::L1 { .. } => "l1",
            Kind::Box { lo, hi } if *lo == 0.0 && *hi == f64::INFINITY => "nonneg",
            Kind::Box { lo, hi } if *lo == f64::NEG_INFINITY && *hi == 0.0 => "nonpos",
            Kind::Box { lo, hi } if *lo == -*hi => "linf_ball",
            Kind::Box { .. } => "box",
            Kind::Hinge { .. } => "hinge",
            Kind::Simplex { .. } => "simplex",
            Kind::L1Ball { .. } => "l1_ball",
            Kind::LinfNorm { .. } => "linf_norm",
            Kind::Max { .. } => "max",
            Kind::Group { .. } => "group_l2",
            Kind::Affine(_) => "affine",
        }
    }

    pub fn is_separable(&self) -> bool {
        matches!(self.kind, Kind::Zero | Kind::L1 { .. } | Kind::Box { .. } | Kind::Hinge { .. })
    }

    pub fn blocks(&self) -> Option<&Blocks> {
        match &self.kind {
            Kind::Group { blocks, .. } => Some(blocks),
            _ => None,
        }
    }

    pub fn affine_constraint(&self) -> Option<&AffineConstraint> {
        match &self.kind {
            Kind::Affine(c) => Some(c),
            _ => None,
        }
    }

    /// `(λ, blocks)` of a group ℓ1–ℓ2 penalty.
    pub fn group_params(&self) -> Option<(f64, &Blocks)> {
        match &self.kind {
            Kind::Group { lambda, blocks } => Some((*lambda, blocks)),
            _ => None,
        }
    }

    /// Whether `0 ∈ argmin h`, in which case `prox^V_h(0) = 0` for every metric `V`.
    pub fn zero_in_argmin(&self) -> bool {
        match &self.kind {
            Kind::Zero | Kind::L1 { .. } | Kind::Hinge { .. } | Kind::L1Ball { .. } => true,
            Kind::LinfNorm { .. } | Kind::Group { .. } => true,
            Kind::Box { lo, hi } => *lo <= 0.0 && 0.0 <= *hi,
            Kind::Simplex { .. } => false,
            Kind::Max { lambda } => *lambda == 0.0,
            Kind::Affine(c) => c.rhs().iter().all(|&v| v == 0.0),
        }
    }

    /// The convex conjugate `h*`, when it belongs to the library.
    pub fn conjugate(&self) -> Option<ProxOperator> {
        let kind = match &self.kind {
            Kind::Zero => Kind::Box { lo: 0.0, hi: 0.0 },
            Kind::L1 { lambda } => Kind::Box { lo: -lambda, hi: *lambda },
            Kind::Box { lo, hi } if *lo == 0.0 && *hi == f64::INFINITY => Kind::Box { lo: f64::NEG_INFINITY, hi: 0.0 },
            Kind::Box { lo, hi } if *lo == f64::NEG_INFINITY && *hi == 0.0 => Kind::Box { lo: 0.0, hi: f64::INFINITY },
            Kind::Box { lo, hi } if *lo == 0.0 && *hi == 0.0 => Kind::Zero,
            Kind::Box { lo, hi } if *lo == -*hi => Kind::L1 { lambda: *hi },
            Kind::Box { lo, hi } if *lo == 0.0 && hi.is_finite() => Kind::Hinge { lambda: *hi },
            Kind::Box { .. } => return None,
            Kind::Hinge { lambda } => Kind::Box { lo: 0.0, hi: *lambda },
            Kind::Simplex { radius } => Kind::Max { lambda: *radius },
            Kind::L1Ball { radius } => Kind::LinfNorm { lambda: *radius },
            Kind::LinfNorm { lambda } if *lambda > 0.0 => Kind::L1Ball { radius: *lambda },
            Kind::Max { lambda } if *lambda > 0.0 => Kind::Simplex { radius: *lambda },
            Kind::LinfNorm { .. } | Kind::Max { .. } | Kind::Group { .. } | Kind::Affine(_) => return None,
        };
        Some(Self { kind })
    }

    /// `h(z)`, `+∞` outside the domain of indicators.
    pub fn eval(&self, z: &[f64]) -> f64 {
        let infeasible = |v: f64, bound: f64| v > bound + FEASIBILITY_TOL * bound.abs().max(1.0);
        match &self.kind {
            Kind::Zero => 0.0,
            Kind::L1 { lambda } => lambda * z.iter().map(|v| v.abs()).sum::<f64>(),
            Kind::Box { lo, hi } => {
                if z.iter().any(|&v| infeasible(v, *hi) || infeasible(-v, -*lo)) {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Kind::Hinge { lambda } => lambda * z.iter().map(|v| v.max(0.0)).sum::<f64>(),
            Kind::Simplex { radius } => {
                let s: f64 = z.iter().sum();
                if z.iter().any(|&v| infeasible(-v, 0.0)) || (s - radius).abs() > FEASIBILITY_TOL * radius.max(1.0) {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Kind::L1Ball { radius } => {
                if infeasible(z.iter().map(|v| v.abs()).sum(), *radius) {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Kind::LinfNorm { lambda } => lambda * z.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
            Kind::Max { lambda } => {
                if *lambda == 0.0 {
                    0.0
                } else {
                    lambda * z.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                }
            }
            Kind::Group { lambda, blocks } => {
                lambda * blocks.ranges().iter().map(|r| norm2(&z[r.clone()])).sum::<f64>()
            }
            Kind::Affine(c) => {
                let scale = c.rhs().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
                if c.residual(z).iter().any(|v| v.abs() > 1e-8 * scale) {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    /// `prox^D_{κh}(x)`.
    pub fn prox_diag(&self, x: &[f64], d: &[f64], kappa: f64) -> Result<Vec<f64>> {
        check_dim(x.len(), d.len())?;
        check_weights(d, kappa)?;
        let mut out = vec![0.0; x.len()];
        self.prox_diag_into(x, d, kappa, &mut out)?;
        Ok(out)
    }

    /// Unchecked variant of [`prox_diag`](Self::prox_diag) writing into `out`.
    pub(crate) fn prox_diag_into(&self, x: &[f64], d: &[f64], kappa: f64, out: &mut [f64]) -> Result<()> {
        match &self.kind {
            Kind::Zero => out.copy_from_slice(x),
            Kind::L1 { lambda } => {
                for i in 0..x.len() {
                    let t = kappa * lambda / d[i];
                    out[i] = soft_threshold(x[i], t);
                }
            }
            Kind::Box { lo, hi } => {
                for i in 0..x.len() {
                    out[i] = x[i].clamp(*lo, *hi);
                }
            }
            Kind::Hinge { lambda } => {
                for i in 0..x.len() {
                    let t = kappa * lambda / d[i];
                    out[i] = hinge_scalar(x[i], t);
                }
            }
            Kind::Simplex { radius } => weighted_simplex_projection(x, d, *radius, out),
            Kind::L1Ball { radius } => weighted_l1_ball_projection(x, d, *radius, out),
            Kind::LinfNorm { lambda } | Kind::Max { lambda } => {
                let dual_radius = kappa * lambda;
                let dx: Vec<f64> = x.iter().zip(d).map(|(a, b)| a * b).collect();
                let dinv: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
                let mut proj = vec![0.0; x.len()];
                if dual_radius > 0.0 {
                    if matches!(self.kind, Kind::Max { .. }) {
                        weighted_simplex_projection(&dx, &dinv, dual_radius, &mut proj);
                    } else {
                        weighted_l1_ball_projection(&dx, &dinv, dual_radius, &mut proj);
                    }
                }
                for i in 0..x.len() {
                    out[i] = x[i] - proj[i] / d[i];
                }
            }
            Kind::Group { lambda, blocks } => {
                let db = blocks.block_values(d)?;
                check_dim(blocks.dim(), x.len())?;
                for (r, dv) in blocks.ranges().iter().zip(db) {
                    let t = kappa * lambda / dv;
                    let nrm = norm2(&x[r.clone()]);
                    let scale = if nrm > t { 1.0 - t / nrm } else { 0.0 };
                    for i in r.clone() {
                        out[i] = scale * x[i];
                    }
                }
            }
            Kind::Affine(c) => {
                check_dim(c.cols(), x.len())?;
                c.project(x, d, out)?;
            }
        }
        Ok(())
    }

    /// Descriptor of the scalar prox of coordinate `i` with weight `dᵢ`, for separable
    /// piecewise-affine operators.
    pub fn descriptor(&self, d_i: f64, kappa: f64) -> Option<PiecewiseAffineDescriptor> {
        let desc = match &self.kind {
            Kind::Zero => PiecewiseAffineDescriptor::identity(),
            Kind::L1 { lambda } => {
                let t = kappa * lambda / d_i;
                PiecewiseAffineDescriptor {
                    breakpoints: smallvec![-t, t],
                    slopes: smallvec![1.0, 0.0, 1.0],
                    intercepts: smallvec![t, 0.0, -t],
                }
            }
            Kind::Hinge { lambda } => {
                let t = kappa * lambda / d_i;
                PiecewiseAffineDescriptor {
                    breakpoints: smallvec![0.0, t],
                    slopes: smallvec![1.0, 0.0, 1.0],
                    intercepts: smallvec![0.0, 0.0, -t],
                }
            }
            Kind::Box { lo, hi } => box_descriptor(*lo, *hi),
            _ => return None,
        };
        Some(desc)
    }

    /// An element of the Clarke Jacobian of `prox^D_{κh}` at `x`.
    pub fn jacobian(&self, x: &[f64], d: &[f64], kappa: f64) -> Result<ProxJacobian<'_>> {
        let n = x.len();
        let jac = match &self.kind {
            Kind::Zero => ProxJacobian::Diagonal(vec![1.0; n]),
            Kind::L1 { .. } | Kind::Box { .. } | Kind::Hinge { .. } => ProxJacobian::Diagonal(
                (0..n)
                    .map(|i| {
                        let desc = self.descriptor(d[i], kappa).expect("separable operator");
                        desc.slopes[desc.segment(x[i])]
                    })
                    .collect(),
            ),
            Kind::Simplex { radius } => {
                let mut z = vec![0.0; n];
                weighted_simplex_projection(x, d, *radius, &mut z);
                support_jacobian(&z, d, None, false)
            }
            Kind::L1Ball { radius } => {
                let mut z = vec![0.0; n];
                weighted_l1_ball_projection(x, d, *radius, &mut z);
                let inside = x.iter().map(|v| v.abs()).sum::<f64>() <= *radius;
                if inside {
                    ProxJacobian::Diagonal(vec![1.0; n])
                } else {
                    support_jacobian(&z, d, Some(x), false)
                }
            }
            Kind::LinfNorm { lambda } | Kind::Max { lambda } => {
                let r = kappa * lambda;
                if r == 0.0 {
                    ProxJacobian::Diagonal(vec![1.0; n])
                } else {
                    let dx: Vec<f64> = x.iter().zip(d).map(|(a, b)| a * b).collect();
                    let dinv: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
                    let mut proj = vec![0.0; n];
                    let is_max = matches!(self.kind, Kind::Max { .. });
                    if is_max {
                        weighted_simplex_projection(&dx, &dinv, r, &mut proj);
                        support_jacobian(&proj, &dinv, None, true)
                    } else if dx.iter().map(|v| v.abs()).sum::<f64>() <= r {
                        ProxJacobian::Diagonal(vec![0.0; n])
                    } else {
                        weighted_l1_ball_projection(&dx, &dinv, r, &mut proj);
                        support_jacobian(&proj, &dinv, Some(&dx), true)
                    }
                }
            }
            Kind::Group { lambda, blocks } => {
                let db = blocks.block_values(d)?;
                let mut diag = vec![0.0; n];
                let mut terms = Vec::new();
                for (r, dv) in blocks.ranges().iter().zip(db) {
                    let t = kappa * lambda / dv;
                    let xb = &x[r.clone()];
                    let nrm = norm2(xb);
                    if nrm > t {
                        for v in &mut diag[r.clone()] {
                            *v = 1.0 - t / nrm;
                        }
                        terms.push((r.clone(), t / (nrm * nrm * nrm), xb.to_vec()));
                    }
                }
                ProxJacobian::Blocks { diag, terms }
            }
            Kind::Affine(c) => {
                ProxJacobian::Affine { constraint: c, d_inv: d.iter().map(|v| 1.0 / v).collect(), gram: c.weighted_gram(d)? }
            }
        };
        Ok(jac)
    }
}

fn box_descriptor(lo: f64, hi: f64) -> PiecewiseAffineDescriptor {
    match (lo.is_finite(), hi.is_finite()) {
        (false, false) => PiecewiseAffineDescriptor::identity(),
        (true, false) => PiecewiseAffineDescriptor {
            breakpoints: smallvec![lo],
            slopes: smallvec![0.0, 1.0],
            intercepts: smallvec![lo, 0.0],
        },
        (false, true) => PiecewiseAffineDescriptor {
            breakpoints: smallvec![hi],
            slopes: smallvec![1.0, 0.0],
            intercepts: smallvec![0.0, hi],
        },
        (true, true) if lo == hi => PiecewiseAffineDescriptor {
            breakpoints: smallvec![lo],
            slopes: smallvec![0.0, 0.0],
            intercepts: smallvec![lo, lo],
        },
        (true, true) => PiecewiseAffineDescriptor {
            breakpoints: smallvec![lo, hi],
            slopes: smallvec![0.0, 1.0, 0.0],
            intercepts: smallvec![lo, 0.0, hi],
        },
    }
}

#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

#[inline]
fn hinge_scalar(v: f64, t: f64) -> f64 {
    if v <= 0.0 {
        v
    } else if v < t {
        0.0
    } else {
        v - t
    }
}

/// `argmin ½Σ wᵢ(zᵢ − yᵢ)²` over `{z ≥ 0, Σz = ρ}`.
///
/// The solution is `zᵢ = (yᵢ − θ/wᵢ)₊`; `θ` is found by sorting the breakpoints `wᵢyᵢ`.
pub fn weighted_simplex_projection(y: &[f64], w: &[f64], radius: f64, out: &mut [f64]) {
    let theta = simplex_threshold(y, w, radius);
    for i in 0..y.len() {
        out[i] = (y[i] - theta / w[i]).max(0.0);
    }
}

fn simplex_threshold(y: &[f64], w: &[f64], radius: f64) -> f64 {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| (w[b] * y[b]).total_cmp(&(w[a] * y[a])));
    let (mut sy, mut sw) = (0.0, 0.0);
    let mut theta = f64::NEG_INFINITY;
    for (k, &i) in order.iter().enumerate() {
        sy += y[i];
        sw += 1.0 / w[i];
        let cand = (sy - radius) / sw;
        if k == 0 || w[i] * y[i] > cand {
            theta = cand;
        } else {
            break;
        }
    }
    theta
}

/// `argmin ½Σ wᵢ(zᵢ − yᵢ)²` over `{‖z‖₁ ≤ ρ}`.
pub fn weighted_l1_ball_projection(y: &[f64], w: &[f64], radius: f64, out: &mut [f64]) {
    if y.iter().map(|v| v.abs()).sum::<f64>() <= radius {
        out.copy_from_slice(y);
        return;
    }
    let a: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    weighted_simplex_projection(&a, w, radius, out);
    for (o, v) in out.iter_mut().zip(y) {
        *o = o.copysign(*v);
    }
}

/// Jacobian of a weighted simplex (or, with `signs`, ℓ1-ball) projection whose output is
/// `z` and whose metric weights are `w`. With `complement`, returns the Jacobian of the
/// Moreau counterpart `x ↦ x − w ∘ proj(x / w)` evaluated through `dx = x / w`, i.e.
/// `I − W J W⁻¹` with `W = diag(w)`.
fn support_jacobian<'a>(z: &[f64], w: &[f64], signs: Option<&[f64]>, complement: bool) -> ProxJacobian<'a> {
    let n = z.len();
    let mask: Vec<f64> = z.iter().map(|&v| if v != 0.0 { 1.0 } else { 0.0 }).collect();
    let sgn = |i: usize| signs.map_or(1.0, |s| if s[i] < 0.0 { -1.0 } else { 1.0 });
    let total: f64 = (0..n).filter(|&i| mask[i] > 0.0).map(|i| 1.0 / w[i]).sum();
    if total == 0.0 {
        let diag = if complement { vec![1.0; n] } else { vec![0.0; n] };
        return ProxJacobian::Diagonal(diag);
    }
    // J = diag(m) − (1/total)·a bᵀ with aᵢ = mᵢσᵢ/wᵢ, bⱼ = mⱼσⱼ
    let mut a: Vec<f64> = (0..n).map(|i| mask[i] * sgn(i) / w[i]).collect();
    let mut b: Vec<f64> = (0..n).map(|i| mask[i] * sgn(i)).collect();
    if complement {
        // I − W(diag(m) − c a bᵀ)W⁻¹ = diag(1 − m) + c (Wa)(W⁻¹b)ᵀ
        let diag = mask.iter().map(|m| 1.0 - m).collect();
        for i in 0..n {
            a[i] *= w[i];
            b[i] /= w[i];
        }
        ProxJacobian::DiagLowRank { diag, coeff: 1.0 / total, a, b }
    } else {
        ProxJacobian::DiagLowRank { diag: mask, coeff: -1.0 / total, a, b }
    }
}

/// An element of the generalized Jacobian of a diagonal-metric prox, applied matrix-free.
#[derive(Debug, Clone)]
pub enum ProxJacobian<'a> {
    Diagonal(Vec<f64>),
    /// `diag + coeff · a bᵀ`
    DiagLowRank { diag: Vec<f64>, coeff: f64, a: Vec<f64>, b: Vec<f64> },
    /// `diag + Σ β z zᵀ`, each term supported on one block.
    Blocks { diag: Vec<f64>, terms: Vec<(Range<usize>, f64, Vec<f64>)> },
    /// `I − D⁻¹Aᵀ(AD⁻¹Aᵀ)⁻¹A`
    Affine { constraint: &'a AffineConstraint, d_inv: Vec<f64>, gram: Cholesky<f64, Dyn> },
}

impl ProxJacobian<'_> {
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        match self {
            ProxJacobian::Diagonal(diag) => {
                for i in 0..v.len() {
                    out[i] = diag[i] * v[i];
                }
            }
            ProxJacobian::DiagLowRank { diag, coeff, a, b } => {
                let c = coeff * dot(b, v);
                for i in 0..v.len() {
                    out[i] = diag[i] * v[i] + c * a[i];
                }
            }
            ProxJacobian::Blocks { diag, terms } => {
                for i in 0..v.len() {
                    out[i] = diag[i] * v[i];
                }
                for (r, beta, z) in terms {
                    let c = beta * dot(z, &v[r.clone()]);
                    for (o, zi) in out[r.clone()].iter_mut().zip(z) {
                        *o += c * zi;
                    }
                }
            }
            ProxJacobian::Affine { constraint, d_inv, gram } => {
                let av = constraint.matrix() * DVector::from_column_slice(v);
                let lam = gram.solve(&av);
                let corr = constraint.matrix().tr_mul(&lam);
                for i in 0..v.len() {
                    out[i] = v[i] - d_inv[i] * corr[i];
                }
            }
        }
    }

    /// Diagonal entries when the Jacobian is diagonal.
    pub fn as_diagonal(&self) -> Option<&[f64]> {
        match self {
            ProxJacobian::Diagonal(d) => Some(d),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn l1_weighted() {
        let p = ProxOperator::l1(1.0).unwrap();
        assert_eq!(p.prox_diag(&[2.0, 2.0], &[2.0, 1.0], 1.0).unwrap(), vec![1.5, 1.0]);
        assert_eq!(p.prox_diag(&[0.0, 0.0], &[2.0, 1.0], 1.0).unwrap(), vec![0.0, 0.0]);
        assert!(ProxOperator::l1(0.0).is_err());
        assert!(p.prox_diag(&[1.0], &[0.0], 1.0).is_err());
    }

    #[test]
    fn clipping_family() {
        let nn = ProxOperator::nonneg();
        assert_eq!(nn.prox_diag(&[-1.0, 2.0], &[1.0, 1.0], 1.0).unwrap(), vec![0.0, 2.0]);
        let b = ProxOperator::boxed(-1.0, 1.0).unwrap();
        assert_eq!(b.prox_diag(&[-3.0, 0.5], &[1.0, 1.0], 1.0).unwrap(), vec![-1.0, 0.5]);
        assert!(ProxOperator::boxed(1.0, -1.0).is_err());
        let h = ProxOperator::hinge(1.0).unwrap();
        assert_eq!(h.prox_diag(&[2.0, 0.5, -1.0], &[1.0; 3], 1.0).unwrap(), vec![1.0, 0.0, -1.0]);
    }

    #[test]
    fn nonneg_descriptor() {
        let d = ProxOperator::nonneg().descriptor(1.0, 1.0).unwrap();
        assert_eq!(d.breakpoints.as_slice(), &[0.0]);
        assert_eq!(d.slopes.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn descriptors_are_continuous_and_match() {
        let ops = [
            ProxOperator::l1(0.7).unwrap(),
            ProxOperator::nonneg(),
            ProxOperator::nonpos(),
            ProxOperator::boxed(-0.3, 1.2).unwrap(),
            ProxOperator::boxed(0.4, 0.4).unwrap(),
            ProxOperator::hinge(1.3).unwrap(),
            ProxOperator::zero(),
        ];
        for op in &ops {
            for &di in &[0.3, 1.0, 2.5] {
                let desc = op.descriptor(di, 0.8).unwrap();
                assert!(desc.continuity_defect() <= 1e-12);
                assert!(desc.slopes.iter().all(|&a| (0.0..=1.0).contains(&a)));
                for k in 0..200 {
                    let z = -3.0 + 6.0 * k as f64 / 199.0;
                    let direct = op.prox_diag(&[z], &[di], 0.8).unwrap()[0];
                    assert!((direct - desc.eval(z)).abs() <= 1e-12, "{} at {z}", op.name());
                }
            }
        }
    }

    #[test]
    fn simplex_and_ball() {
        let s = ProxOperator::simplex(1.0).unwrap();
        assert!(close(&s.prox_diag(&[0.5, 0.5], &[1.0, 1.0], 1.0).unwrap(), &[0.5, 0.5], 1e-15));
        let b = ProxOperator::l1_ball(1.0).unwrap();
        assert_eq!(b.prox_diag(&[2.0, 0.0], &[1.0, 1.0], 1.0).unwrap(), vec![1.0, 0.0]);
        let z = s.prox_diag(&[3.0, -1.0, 0.2], &[1.0, 2.0, 0.5], 1.0).unwrap();
        assert!((z.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(z.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn simplex_permutation_invariant_with_ties() {
        let s = ProxOperator::simplex(2.0).unwrap();
        let x = [0.4, 1.0, 0.4, -0.2, 1.0];
        let d = [1.0, 2.0, 1.0, 1.0, 2.0];
        let z = s.prox_diag(&x, &d, 1.0).unwrap();
        let perm = [4, 2, 0, 3, 1];
        let xp: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
        let dp: Vec<f64> = perm.iter().map(|&i| d[i]).collect();
        let zp = s.prox_diag(&xp, &dp, 1.0).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(zp[k], z[i]);
        }
        assert_eq!(z[0], z[2]);
        assert_eq!(z[1], z[4]);
    }

    #[test]
    fn linf_and_max() {
        let p = ProxOperator::linf_norm(1.0).unwrap();
        assert!(close(&p.prox_diag(&[0.5, -0.5], &[1.0, 1.0], 1.0).unwrap(), &[0.0, 0.0], 1e-15));
        let m = ProxOperator::max(0.0).unwrap();
        assert_eq!(m.prox_diag(&[0.3, -2.0], &[1.0, 3.0], 1.0).unwrap(), vec![0.3, -2.0]);
    }

    #[test]
    fn moreau_identity_unscaled() {
        let x = [0.9, -1.7, 0.3, 2.2];
        let one = [1.0; 4];
        let pairs = [
            ProxOperator::l1(0.8).unwrap(),
            ProxOperator::l1_ball(1.1).unwrap(),
            ProxOperator::simplex(0.6).unwrap(),
            ProxOperator::nonneg(),
            ProxOperator::hinge(0.5).unwrap(),
        ];
        for h in &pairs {
            let hs = h.conjugate().unwrap();
            for &rho in &[0.5, 1.0, 2.0] {
                // prox_{ρh*}(x) + ρ prox_{h/ρ}(x/ρ) = x
                let a = hs.prox_diag(&x, &one, rho).unwrap();
                let xs: Vec<f64> = x.iter().map(|v| v / rho).collect();
                let b = h.prox_diag(&xs, &one, 1.0 / rho).unwrap();
                for i in 0..4 {
                    assert!((a[i] + rho * b[i] - x[i]).abs() <= 1e-12, "{} ρ={rho}", h.name());
                }
            }
        }
    }

    #[test]
    fn group_soft_threshold() {
        let blocks = Blocks::from_sizes(&[2, 1]).unwrap();
        let g = ProxOperator::group_l2(1.0, blocks).unwrap();
        let z = g.prox_diag(&[1.2, 1.6, 0.5], &[1.0, 1.0, 1.0], 1.0).unwrap();
        assert!(close(&z, &[0.6, 0.8, 0.0], 1e-15));
        assert!(g.prox_diag(&[1.0, 1.0, 1.0], &[1.0, 2.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn affine_projection() {
        let c = AffineConstraint::new(1, 2, vec![1.0, 0.0], vec![0.0]).unwrap();
        let p = ProxOperator::affine(c);
        assert_eq!(p.prox_diag(&[3.0, 4.0], &[1.0, 1.0], 1.0).unwrap(), vec![0.0, 4.0]);
        assert_eq!(p.prox_diag(&[0.0, 4.0], &[1.0, 1.0], 1.0).unwrap(), vec![0.0, 4.0]);
        assert!(AffineConstraint::new(2, 2, vec![1.0, 1.0, 2.0, 2.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let x = [0.9, -1.7, 0.35, 2.2, -0.1];
        let d = [1.0, 2.0, 0.5, 1.5, 3.0];
        let ops = [
            ProxOperator::l1(0.8).unwrap(),
            ProxOperator::simplex(1.5).unwrap(),
            ProxOperator::l1_ball(1.0).unwrap(),
            ProxOperator::linf_norm(1.0).unwrap(),
            ProxOperator::max(1.3).unwrap(),
            ProxOperator::group_l2(0.9, Blocks::from_sizes(&[2, 3]).unwrap()).unwrap(),
            ProxOperator::affine(AffineConstraint::new(2, 5, (0..10).map(|k| (k as f64).sin()).collect(), vec![0.5, -1.0]).unwrap()),
        ];
        let d_group = [1.0, 1.0, 2.0, 2.0, 2.0];
        for op in &ops {
            let d = if op.blocks().is_some() { &d_group } else { &d };
            let jac = op.jacobian(&x, d, 1.0).unwrap();
            let v = [0.3, -0.2, 0.5, 0.1, -0.4];
            let mut jv = [0.0; 5];
            jac.apply(&v, &mut jv);
            let h = 1e-7;
            let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
            let p0 = op.prox_diag(&x, d, 1.0).unwrap();
            let p1 = op.prox_diag(&xp, d, 1.0).unwrap();
            for i in 0..5 {
                let fd = (p1[i] - p0[i]) / h;
                assert!((fd - jv[i]).abs() < 1e-5, "{}: {fd} vs {}", op.name(), jv[i]);
            }
        }
    }
}
