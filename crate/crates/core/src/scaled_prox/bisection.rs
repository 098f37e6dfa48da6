use super::{RootMethod, RootProblem, RootSolverReport};
use crate::error::{Error, Result};

const MAX_ITER: usize = 400;
const MONOTONE_MARGIN: f64 = 1e-9;

/// Bisection on `[−β, β]` for rank-one metrics.
///
/// `β = ‖u‖(2‖x‖ + ‖prox^V_{κh}(0)‖)` when `0 ∈ argmin h`; otherwise the bracket comes from
/// strong monotonicity, `β = (1 + 10⁻⁹)|L(0)|/c`. Stops when consecutive midpoints differ by less than
/// `tol` or `L` vanishes at a midpoint. A bracket without a sign change is reported as an
/// error and never widened.
pub fn bisection(problem: &RootProblem<'_>, tol: f64) -> Result<RootSolverReport> {
    if problem.rank() != 1 {
        return Err(Error::NotApplicable {
            method: RootMethod::Bisection,
            reason: format!("rank {} ≠ 1", problem.rank()),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("bisection tolerance must be positive, got {tol}")));
    }
    let beta = if problem.prox().zero_in_argmin() {
        problem.root_bound()?
    } else {
        // the bound is attained when L is affine with slope c; keep the root strictly inside
        problem.monotone_bound()?.expect("rank-one metrics have a monotonicity modulus") * (1.0 + MONOTONE_MARGIN)
    };
    let l = |a: f64| -> Result<f64> { Ok(problem.eval(&[a])?[0]) };
    let (mut lo, mut hi) = (-beta, beta);
    if beta > 0.0 {
        let (f_lo, f_hi) = (l(lo)?, l(hi)?);
        if f_lo > 0.0 || f_hi < 0.0 {
            return Err(Error::InvalidBracket { lo, hi, f_lo, f_hi });
        }
    }
    let mut history = Vec::new();
    let mut prev = f64::NAN;
    for k in 1..=MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let f = l(mid)?;
        history.push(f.abs());
        let done = f == 0.0 || (k > 1 && (mid - prev).abs() < tol);
        if done {
            let mut rep = RootSolverReport::new(vec![mid], f.abs(), k, RootMethod::Bisection);
            rep.residual_history = history;
            rep.bracket = Some(beta);
            return Ok(rep);
        }
        if f > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        prev = mid;
    }
    Err(Error::RootNotFound { method: RootMethod::Bisection, iterations: MAX_ITER, residual: history.last().copied().unwrap_or(f64::NAN) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{LowRankMetric, Sign};
    use crate::prox::ProxOperator;

    #[test]
    fn root_at_origin_in_one_step() {
        let m = LowRankMetric::rank_one(vec![1.0, 1.0], vec![1.0, 0.0], Sign::Plus).unwrap();
        let h = ProxOperator::zero();
        let pr = RootProblem::new(&m, &h, &[0.0, 0.0], 1.0).unwrap();
        let rep = bisection(&pr, 1e-10).unwrap();
        assert_eq!(rep.alpha_star, vec![0.0]);
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn iteration_count_bound() {
        let m = LowRankMetric::rank_one(vec![1.0, 2.0, 0.7], vec![0.4, -0.3, 0.5], Sign::Minus).unwrap();
        let h = ProxOperator::l1(0.2).unwrap();
        let pr = RootProblem::new(&m, &h, &[1.0, -2.0, 0.3], 1.0).unwrap();
        let eps = 1e-10;
        let rep = bisection(&pr, eps).unwrap();
        let c = pr.monotonicity_modulus().unwrap();
        let beta = rep.bracket.unwrap();
        let bound = (2.0 * c * beta / eps).log2().ceil() as usize + 2;
        assert!(rep.iterations <= bound, "{} > {bound}", rep.iterations);
    }
}
