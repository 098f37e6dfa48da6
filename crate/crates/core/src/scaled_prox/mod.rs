//! Proximal operators in a diagonal ± low-rank metric.
//!
//! For `V = P + W S Wᵀ` (signs `S`), the prox `prox^V_{κh}(x)` equals
//! `prox^P_{κh}(x − P⁻¹WSα★)` where `α★ ∈ ℝʳ` is the unique zero of
//!
//! ```text
//! L(α) = Wᵀ(x − prox^P_{κh}(x − P⁻¹WSα)) + α.
//! ```
//!
//! The diagonal prox is cheap, so the work is a small root-finding problem solved by one of
//! the finders in this module.

mod affine;
mod bisection;
mod conjugate;
mod exact;
mod group;
mod newton;
mod rank2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dot, norm2};
use crate::metric::{LowRankMetric, Sign};
use crate::prox::{check_weights, ProxOperator};

pub use affine::affine_closed_form;
pub use bisection::bisection;
pub use conjugate::{moreau_residual, scaled_prox_conjugate};
pub use exact::exact_piecewise_affine;
pub use group::{group_breakpoints, group_path};
pub use newton::{semismooth_newton, NewtonOptions};
pub use rank2::recursive_rank2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootMethod {
    /// No low-rank part; the diagonal prox is the answer.
    Diagonal,
    Exact,
    Bisection,
    SsNewton,
    ClosedForm,
    GroupPath,
    Recursive,
    FixedPoint,
}

impl RootMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            RootMethod::Diagonal => "diagonal",
            RootMethod::Exact => "exact",
            RootMethod::Bisection => "bisection",
            RootMethod::SsNewton => "ssnewton",
            RootMethod::ClosedForm => "closed_form",
            RootMethod::GroupPath => "group_path",
            RootMethod::Recursive => "recursive",
            RootMethod::FixedPoint => "fixed_point",
        }
    }
}

/// Which root finder [`scaled_prox`] should use.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootFinder {
    /// Pick the cheapest applicable method.
    #[default]
    Auto,
    Exact,
    Bisection { tol: f64 },
    SsNewton(NewtonOptions),
    ClosedForm,
    GroupPath,
    Recursive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSolverReport {
    pub alpha_star: Vec<f64>,
    /// `‖L(α★)‖₂`
    pub residual: f64,
    pub iterations: usize,
    pub method: RootMethod,
    /// `‖L(αₖ)‖` per iterate, for the iterative finders.
    pub residual_history: Vec<f64>,
    /// Half-width of the initial bracket, for bisection.
    pub bracket: Option<f64>,
}

impl RootSolverReport {
    pub(crate) fn new(alpha_star: Vec<f64>, residual: f64, iterations: usize, method: RootMethod) -> Self {
        Self { alpha_star, residual, iterations, method, residual_history: Vec::new(), bracket: None }
    }
}

/// The root-finding problem `L(α) = 0` attached to one scaled-prox evaluation.
#[derive(Debug, Clone, Copy)]
pub struct RootProblem<'a> {
    metric: &'a LowRankMetric,
    prox: &'a ProxOperator,
    x: &'a [f64],
    kappa: f64,
}

impl<'a> RootProblem<'a> {
    pub fn new(metric: &'a LowRankMetric, prox: &'a ProxOperator, x: &'a [f64], kappa: f64) -> Result<Self> {
        check_dim(metric.dim(), x.len())?;
        check_weights(metric.diag(), kappa)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("query point has non-finite entries".into()));
        }
        Ok(Self { metric, prox, x, kappa })
    }

    pub fn metric(&self) -> &'a LowRankMetric {
        self.metric
    }

    pub fn prox(&self) -> &'a ProxOperator {
        self.prox
    }

    pub fn x(&self) -> &'a [f64] {
        self.x
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn rank(&self) -> usize {
        self.metric.rank()
    }

    pub fn sign(&self) -> Option<Sign> {
        self.metric.sign()
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.metric.lipschitz_bound()
    }

    pub fn monotonicity_modulus(&self) -> Option<f64> {
        self.metric.monotonicity_modulus()
    }

    /// `x − P⁻¹WSα`
    pub fn shifted(&self, alpha: &[f64]) -> Vec<f64> {
        let mut y = self.x.to_vec();
        for ((pu, s), a) in self.metric.pinv_factors().iter().zip(self.metric.signs()).zip(alpha) {
            let c = -s.value() * a;
            for (yi, pi) in y.iter_mut().zip(pu) {
                *yi += c * pi;
            }
        }
        y
    }

    /// `prox^P_{κh}(x − P⁻¹WSα)`
    pub fn point(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        let y = self.shifted(alpha);
        let mut p = vec![0.0; y.len()];
        self.prox.prox_diag_into(&y, self.metric.diag(), self.kappa, &mut p)?;
        Ok(p)
    }

    /// `L(α)`
    pub fn eval(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval_full(alpha)?.0)
    }

    /// `(L(α), shifted point, prox point)`
    pub(crate) fn eval_full(&self, alpha: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        check_dim(self.rank(), alpha.len())?;
        let y = self.shifted(alpha);
        let mut p = vec![0.0; y.len()];
        self.prox.prox_diag_into(&y, self.metric.diag(), self.kappa, &mut p)?;
        let l = self.residual_map(alpha, &p);
        Ok((l, y, p))
    }

    pub(crate) fn residual_map(&self, alpha: &[f64], p: &[f64]) -> Vec<f64> {
        self.metric
            .factors()
            .iter()
            .zip(alpha)
            .map(|(w, a)| w.iter().zip(self.x).zip(p).map(|((wi, xi), pi)| wi * (xi - pi)).sum::<f64>() + a)
            .collect()
    }

    /// Generalized Jacobian `G = I + WᵀJP⁻¹WS` of `L` at `α`.
    pub fn jacobian(&self, alpha: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.rank(), alpha.len())?;
        self.jacobian_at(&self.shifted(alpha))
    }

    pub(crate) fn jacobian_at(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        let r = self.rank();
        let jac = self.prox.jacobian(y, self.metric.diag(), self.kappa)?;
        let mut g = DMatrix::identity(r, r);
        let mut jv = vec![0.0; y.len()];
        for (j, (pu, s)) in self.metric.pinv_factors().iter().zip(self.metric.signs()).enumerate() {
            jac.apply(pu, &mut jv);
            for (i, w) in self.metric.factors().iter().enumerate() {
                g[(i, j)] += s.value() * dot(w, &jv);
            }
        }
        Ok(g)
    }

    /// `‖L(0)‖ / c`, a bound on `‖α★‖` that follows from strong monotonicity alone.
    pub fn monotone_bound(&self) -> Result<Option<f64>> {
        let Some(c) = self.monotonicity_modulus() else { return Ok(None) };
        let l0 = self.eval(&vec![0.0; self.rank()])?;
        Ok(Some(norm2(&l0) / c))
    }

    /// `‖U‖(2‖x‖ + ‖prox^V_{κh}(0)‖)`, the a-priori root bound for rank one.
    pub fn root_bound(&self) -> Result<f64> {
        let un = self.metric.factors().iter().map(|w| norm2(w)).fold(0.0, f64::max);
        let p0 = if self.prox.zero_in_argmin() {
            0.0
        } else {
            let zero = vec![0.0; self.x.len()];
            norm2(&scaled_prox(self.metric, self.prox, &zero, self.kappa, &RootFinder::Auto)?.0)
        };
        Ok(un * (2.0 * norm2(self.x) + p0))
    }

    pub(crate) fn report(&self, alpha: Vec<f64>, iterations: usize, method: RootMethod) -> Result<RootSolverReport> {
        let l = self.eval(&alpha)?;
        Ok(RootSolverReport::new(alpha, norm2(&l), iterations, method))
    }
}

fn is_piecewise_affine(prox: &ProxOperator) -> bool {
    prox.is_separable() && prox.descriptor(1.0, 1.0).is_some()
}

/// `prox^V_{κh}(x)` together with the root-finding report.
pub fn scaled_prox(
    metric: &LowRankMetric,
    prox: &ProxOperator,
    x: &[f64],
    kappa: f64,
    finder: &RootFinder,
) -> Result<(Vec<f64>, RootSolverReport)> {
    let problem = RootProblem::new(metric, prox, x, kappa)?;
    let report = solve_root(&problem, finder)?;
    let p = problem.point(&report.alpha_star)?;
    Ok((p, report))
}

/// Solve `L(α) = 0` with the requested finder.
pub fn solve_root(problem: &RootProblem<'_>, finder: &RootFinder) -> Result<RootSolverReport> {
    let r = problem.rank();
    if r == 0 {
        return Ok(RootSolverReport::new(Vec::new(), 0.0, 0, RootMethod::Diagonal));
    }
    match finder {
        RootFinder::Auto => {
            let prox = problem.prox();
            if r == 1 && is_piecewise_affine(prox) {
                exact_piecewise_affine(problem)
            } else if r == 1 && prox.affine_constraint().is_some() {
                affine_closed_form(problem)
            } else if r == 1 && prox.group_params().is_some() {
                group_path(problem)
            } else {
                semismooth_newton(problem, &NewtonOptions::default())
            }
        }
        RootFinder::Exact => exact_piecewise_affine(problem),
        RootFinder::Bisection { tol } => bisection(problem, *tol),
        RootFinder::SsNewton(opts) => semismooth_newton(problem, opts),
        RootFinder::ClosedForm => affine_closed_form(problem),
        RootFinder::GroupPath => group_path(problem),
        RootFinder::Recursive => recursive_rank2(problem),
    }
}

/// `prox^{H⁻¹}_{κh}(x)` for a metric given through `H`.
///
/// This is the form in which the inverse Hessian approximation `H = D ± uuᵀ` is handed
/// over. For rank one, the reported multiplier is in the scaling of `u`:
/// `α = uᵀD⁻¹(y − x)/(1 ± uᵀD⁻¹u)`, i.e. the root of
/// `α(1 ± uᵀD⁻¹u) − uᵀD⁻¹(prox^{D⁻¹}_{κh}(x ∓ αu) − x)`.
pub fn scaled_prox_inverse(
    h: &LowRankMetric,
    prox: &ProxOperator,
    x: &[f64],
    kappa: f64,
    finder: &RootFinder,
) -> Result<(Vec<f64>, RootSolverReport)> {
    let b = h.invert()?;
    let (y, mut report) = scaled_prox(&b, prox, x, kappa, finder)?;
    if h.rank() == 1 {
        let s = h.signs()[0].value();
        let denom = 1.0 + s * h.gram()[(0, 0)];
        let u = &h.factors()[0];
        let num: f64 = (0..x.len()).map(|i| u[i] * (y[i] - x[i]) / h.diag()[i]).sum();
        let alpha = num / denom;
        // residual of the H-form map at α
        let shifted: Vec<f64> = (0..x.len()).map(|i| x[i] - s * alpha * u[i]).collect();
        let dinv: Vec<f64> = h.diag().iter().map(|d| 1.0 / d).collect();
        let z = prox.prox_diag(&shifted, &dinv, kappa)?;
        let l = alpha * denom - (0..x.len()).map(|i| u[i] * (z[i] - x[i]) / h.diag()[i]).sum::<f64>();
        report.alpha_star = vec![alpha];
        report.residual = l.abs();
    }
    Ok((y, report))
}
