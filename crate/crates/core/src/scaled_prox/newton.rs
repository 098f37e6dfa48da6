use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{bisection, recursive_rank2, RootMethod, RootProblem, RootSolverReport};
use crate::error::{Error, Result};
use crate::linalg::norm2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Stop once `‖L(α)‖ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Forcing term: linear systems are solved only to `‖Gd + L‖ ≤ η‖L‖`. Zero means exact.
    pub eta: f64,
    /// Starting point; zero when absent.
    pub alpha0: Option<Vec<f64>>,
    /// Switch to a globally convergent method when Newton stalls.
    pub fallback: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 50, eta: 0.0, alpha0: None, fallback: true }
    }
}

impl NewtonOptions {
    pub fn warm(alpha0: Vec<f64>) -> Self {
        Self { alpha0: Some(alpha0), ..Self::default() }
    }
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 30;

fn roundoff_floor(problem: &RootProblem<'_>, alpha: &[f64], p: &[f64]) -> f64 {
    let x = problem.x();
    let scale: f64 = problem
        .metric()
        .factors()
        .iter()
        .map(|w| (0..x.len()).map(|i| w[i].abs() * (x[i].abs() + p[i].abs())).sum::<f64>())
        .sum::<f64>()
        + alpha.iter().map(|a| a.abs()).sum::<f64>();
    8.0 * f64::EPSILON * scale
}

fn newton_direction(g: &DMatrix<f64>, l: &[f64], eta: f64, reg: f64) -> Option<Vec<f64>> {
    let r = l.len();
    let rhs = -DVector::from_column_slice(l);
    if eta > 0.0 {
        // minimal-residual iterations until the forcing condition holds
        let lnorm = norm2(l);
        let mut d = DVector::zeros(r);
        let mut res = rhs.clone();
        for _ in 0..50 {
            if res.norm() <= eta * lnorm {
                return Some(d.as_slice().to_vec());
            }
            let q = g * &res;
            let qq = q.norm_squared();
            if qq == 0.0 {
                break;
            }
            let w = q.dot(&res) / qq;
            d += w * &res;
            res -= w * q;
        }
    }
    let solve = |m: DMatrix<f64>| m.lu().solve(&rhs).filter(|d| d.iter().all(|v| v.is_finite()));
    solve(g.clone())
        .or_else(|| {
            log::debug!("singular semi-smooth Newton matrix, regularizing by {reg}");
            solve(g + DMatrix::identity(r, r) * reg)
        })
        .map(|d| d.as_slice().to_vec())
}

/// Semi-smooth Newton on `L(α) = 0` with a merit line search on `‖L‖`.
///
/// Each step solves `G d = −L` with `G = I + WᵀJP⁻¹WS` built from an element `J` of the
/// Clarke Jacobian of the diagonal prox. When `G` is numerically singular it is shifted by
/// `c·I`. If the budget runs out (or no step decreases `‖L‖`) and `fallback` is set, the
/// iterate is handed to bisection (rank one), a damped fixed-point iteration (single-sign
/// rank ≥ 2) or the recursive reduction (mixed signs).
pub fn semismooth_newton(problem: &RootProblem<'_>, opts: &NewtonOptions) -> Result<RootSolverReport> {
    let r = problem.rank();
    let mut alpha = match &opts.alpha0 {
        Some(a) if a.len() == r && a.iter().all(|v| v.is_finite()) => a.clone(),
        _ => vec![0.0; r],
    };
    let reg = problem.monotonicity_modulus().unwrap_or(1.0).max(1e-8);
    let (mut l, mut y, mut p) = problem.eval_full(&alpha)?;
    let mut res = norm2(&l);
    let mut history = vec![res];
    let mut iterations = 0;
    loop {
        if res <= opts.tol || res <= roundoff_floor(problem, &alpha, &p) {
            let mut rep = RootSolverReport::new(alpha, res, iterations, RootMethod::SsNewton);
            rep.residual_history = history;
            return Ok(rep);
        }
        if iterations >= opts.max_iter {
            break;
        }
        let g = problem.jacobian_at(&y)?;
        let Some(dir) = newton_direction(&g, &l, opts.eta, reg) else { break };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = alpha.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let (lt, yt, pt) = problem.eval_full(&trial)?;
            let rt = norm2(&lt);
            if rt <= (1.0 - ARMIJO * t) * res {
                accepted = Some((trial, lt, yt, pt, rt));
                break;
            }
            t *= 0.5;
        }
        let Some((a, lt, yt, pt, rt)) = accepted else { break };
        alpha = a;
        l = lt;
        y = yt;
        p = pt;
        res = rt;
        history.push(res);
        iterations += 1;
    }

    if !opts.fallback {
        return Err(Error::RootNotFound { method: RootMethod::SsNewton, iterations, residual: res });
    }
    log::debug!("semi-smooth Newton stalled at ‖L‖ = {res:e} after {iterations} steps, falling back");
    let mut rep = if r == 1 {
        bisection(problem, 1e-14 * (1.0 + alpha[0].abs()))?
    } else if problem.sign().is_some() {
        damped_fixed_point(problem, alpha, opts.tol)?
    } else {
        recursive_rank2(problem)?
    };
    rep.iterations += iterations;
    history.append(&mut rep.residual_history);
    rep.residual_history = history;
    Ok(rep)
}

/// `α ← α − (c/Λ²) L(α)`, a contraction for strongly monotone Lipschitz `L`.
fn damped_fixed_point(problem: &RootProblem<'_>, mut alpha: Vec<f64>, tol: f64) -> Result<RootSolverReport> {
    let c = problem.monotonicity_modulus().expect("single-sign metric");
    let lip = problem.lipschitz_bound();
    let step = c / (lip * lip);
    let mut history = Vec::new();
    for k in 0..200_000 {
        let (l, _, p) = problem.eval_full(&alpha)?;
        let res = norm2(&l);
        history.push(res);
        if res <= tol || res <= roundoff_floor(problem, &alpha, &p) {
            let mut rep = RootSolverReport::new(alpha, res, k, RootMethod::FixedPoint);
            rep.residual_history = history;
            return Ok(rep);
        }
        for (a, li) in alpha.iter_mut().zip(&l) {
            *a -= step * li;
        }
    }
    Err(Error::RootNotFound { method: RootMethod::FixedPoint, iterations: 200_000, residual: *history.last().unwrap() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{LowRankMetric, Sign};
    use crate::prox::{AffineConstraint, ProxOperator};

    #[test]
    fn affine_map_converges_in_one_step() {
        let c = AffineConstraint::new(1, 3, vec![1.0, 1.0, 0.0], vec![0.5]).unwrap();
        let h = ProxOperator::affine(c);
        let m = LowRankMetric::rank_one(vec![1.0, 2.0, 1.0], vec![0.3, 0.1, -0.6], Sign::Plus).unwrap();
        let pr = RootProblem::new(&m, &h, &[1.0, 2.0, 3.0], 1.0).unwrap();
        let rep = semismooth_newton(&pr, &NewtonOptions::default()).unwrap();
        assert_eq!(rep.method, RootMethod::SsNewton);
        assert!(rep.iterations <= 1, "{}", rep.iterations);
    }

    #[test]
    fn rank_two_same_sign() {
        let m = LowRankMetric::new(
            vec![1.0, 2.0, 1.5, 0.7],
            vec![vec![0.3, 0.1, -0.6, 0.2], vec![0.0, 0.5, 0.2, -0.1]],
            Sign::Minus,
        )
        .unwrap();
        let h = ProxOperator::l1(0.4).unwrap();
        let pr = RootProblem::new(&m, &h, &[1.0, -2.0, 0.3, 0.05], 1.0).unwrap();
        let rep = semismooth_newton(&pr, &NewtonOptions::default()).unwrap();
        assert!(rep.residual <= 1e-12);
        let fp = damped_fixed_point(&pr, vec![0.0; 2], 1e-12).unwrap();
        for i in 0..2 {
            assert!((fp.alpha_star[i] - rep.alpha_star[i]).abs() < 1e-9);
        }
    }
}
