use std::time::Instant;

use super::line_search::line_search;
use super::{ConvergenceTrace, LineSearch, ProblemSpec, SolverId, SolverOptions, SolverResult, Termination};
use crate::error::{Error, Result};
use crate::linalg::{check_dim, norm_inf, sub};
use crate::quasi_newton::{initial_metric, sr1_metric, zbfgs_metric, QnMetric, QnPair};
use crate::scaled_prox::{scaled_prox, NewtonOptions, RootFinder, RootSolverReport};

/// Quasi-Newton update used by [`run_quasi_newton`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QnKind {
    Sr1,
    Bfgs,
}

/// One forward–backward step `x̄ = prox^B_{κh}(x − κH∇f(x))`.
///
/// The forward step applies the factored `H`; the backward step is the scaled prox in `B`.
pub fn fb_step(
    problem: &ProblemSpec,
    x: &[f64],
    grad: &[f64],
    metric: &QnMetric,
    kappa: f64,
    finder: &RootFinder,
) -> Result<(Vec<f64>, RootSolverReport)> {
    check_dim(problem.dim(), x.len())?;
    check_dim(x.len(), grad.len())?;
    let hg = metric.h.apply(grad)?;
    let u: Vec<f64> = x.iter().zip(&hg).map(|(xi, gi)| xi - kappa * gi).collect();
    scaled_prox(&metric.b, &problem.h, &u, kappa, finder)
}

pub fn run_zero_sr1(problem: &ProblemSpec, opts: &SolverOptions) -> Result<SolverResult> {
    run_quasi_newton(problem, opts, QnKind::Sr1)
}

pub fn run_zero_bfgs(problem: &ProblemSpec, opts: &SolverOptions) -> Result<SolverResult> {
    run_quasi_newton(problem, opts, QnKind::Bfgs)
}

fn finder_for(opts: &SolverOptions, rank: usize, warm: &Option<Vec<f64>>) -> RootFinder {
    match (&opts.finder, warm) {
        (RootFinder::Auto, Some(a)) if rank >= 2 && a.len() == rank => RootFinder::SsNewton(NewtonOptions::warm(a.clone())),
        (f, _) => f.clone(),
    }
}

fn divergence_slack(f: f64) -> f64 {
    1e-9 * (1.0 + f.abs())
}

/// The quasi-Newton forward–backward loop.
///
/// The first metric is `τI` with `τ = 1/L` when `L` is known and `τ = 1` otherwise. Each
/// trace row `k` holds `F(xₖ)` and `‖pₖ‖∞`.
pub fn run_quasi_newton(problem: &ProblemSpec, opts: &SolverOptions, kind: QnKind) -> Result<SolverResult> {
    let n = problem.dim();
    check_dim(n, problem.x0.len())?;
    if !(opts.kappa > 0.0 && opts.kappa.is_finite()) {
        return Err(Error::InvalidArgument(format!("κ = {} must be positive", opts.kappa)));
    }
    let id = match kind {
        QnKind::Sr1 => SolverId::ZeroSr1,
        QnKind::Bfgs => SolverId::ZeroBfgs,
    };
    let start = Instant::now();
    let mut trace = ConvergenceTrace::new(id.as_str(), problem.name.clone());

    let mut x = problem.x0.clone();
    let mut grad = vec![0.0; n];
    let mut fx = problem.f.value_grad(&x, &mut grad) + problem.h.eval(&x);
    if !fx.is_finite() {
        return Err(Error::InvalidArgument("objective is not finite at x₀".into()));
    }
    let tau0 = problem.lipschitz.map_or(1.0, |l| 1.0 / l);
    let mut metric = initial_metric(n, tau0)?;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut warm: Option<Vec<f64>> = None;
    let mut skipped = 0;
    let mut k = 0;

    let status = loop {
        if let Some((xp, gp)) = prev.take() {
            let pair = QnPair::new(sub(&x, &xp), sub(&grad, &gp))?;
            metric = match kind {
                QnKind::Sr1 => sr1_metric(&pair, &opts.qn, metric.tau)?,
                QnKind::Bfgs => zbfgs_metric(&pair, &opts.qn, metric.tau)?,
            };
            if metric.skipped {
                skipped += 1;
            }
        }
        let finder = finder_for(opts, metric.b.rank(), &warm);
        let (xbar, report) = fb_step(problem, &x, &grad, &metric, opts.kappa, &finder)
            .map_err(|e| Error::ProxFailed { iteration: k, source: Box::new(e) })?;
        warm = Some(report.alpha_star);
        let p = sub(&xbar, &x);
        let pnorm = norm_inf(&p);
        let elapsed = start.elapsed().as_secs_f64();
        if opts.record_trace {
            trace.push(k, fx, pnorm, elapsed);
        }

        if pnorm < opts.tol {
            break Termination::Converged;
        }
        if let (Some(target), Some(fstar)) = (opts.target_error, problem.fstar) {
            if fx - fstar <= target {
                break Termination::TargetReached;
            }
        }
        if k >= opts.max_iter {
            break Termination::MaxIterations;
        }
        if opts.max_seconds.is_some_and(|s| elapsed >= s) {
            break Termination::TimeLimit;
        }

        let ls = line_search(problem, &x, fx, &p, opts.kappa, opts.line_search, opts.sigma, opts.max_halvings);
        if !ls.objective.is_finite() {
            return Err(Error::Diverged { iteration: k, reason: "objective is not finite".into() });
        }
        if ls.stagnated {
            if ls.objective > fx + divergence_slack(fx) {
                return Err(Error::Diverged {
                    iteration: k,
                    reason: format!("objective increased from {fx:e} to {:e} at the smallest step", ls.objective),
                });
            }
            if ls.objective < fx {
                x = ls.x;
                fx = problem.f.value_grad(&x, &mut grad) + problem.h.eval(&x);
                k += 1;
                if opts.record_trace {
                    trace.push(k, fx, pnorm * ls.t, start.elapsed().as_secs_f64());
                }
            }
            break Termination::Stagnated;
        }
        if opts.line_search == LineSearch::Backtracking && ls.objective > fx + divergence_slack(fx) {
            return Err(Error::Diverged { iteration: k, reason: "line search accepted an increase".into() });
        }
        let x_new = ls.x;
        let mut g_new = vec![0.0; n];
        let f_new = problem.f.value_grad(&x_new, &mut g_new) + problem.h.eval(&x_new);
        prev = Some((std::mem::replace(&mut x, x_new), std::mem::replace(&mut grad, g_new)));
        fx = f_new;
        k += 1;
    };

    Ok(SolverResult {
        solver: id,
        x,
        objective: fx,
        iterations: k,
        status,
        seconds: start.elapsed().as_secs_f64(),
        skipped_updates: skipped,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::prox::ProxOperator;
    use crate::solver::Quadratic;

    fn diag_quadratic(d: &[f64], c: &[f64], h: ProxOperator) -> ProblemSpec {
        let n = d.len();
        let q = DenseMatrix::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 }).unwrap();
        ProblemSpec::new("diag", Arc::new(Quadratic::new(q, c.to_vec()).unwrap()), h)
    }

    #[test]
    fn identity_metric_gives_gradient_and_projected_steps() {
        let pb = diag_quadratic(&[2.0, 4.0], &[1.0, -3.0], ProxOperator::zero());
        let x = [1.0, 1.0];
        let mut g = [0.0; 2];
        pb.f.value_grad(&x, &mut g);
        let m = initial_metric(2, 1.0).unwrap();
        let (xb, _) = fb_step(&pb, &x, &g, &m, 0.25, &RootFinder::Auto).unwrap();
        assert_eq!(xb, vec![1.0 - 0.25 * g[0], 1.0 - 0.25 * g[1]]);

        let pb = diag_quadratic(&[2.0, 4.0], &[1.0, -3.0], ProxOperator::nonneg());
        let (xb, _) = fb_step(&pb, &x, &g, &m, 0.25, &RootFinder::Auto).unwrap();
        assert_eq!(xb, vec![(1.0 - 0.25 * g[0]).max(0.0), (1.0 - 0.25 * g[1]).max(0.0)]);
    }

    #[test]
    fn one_dimensional_quadratic_converges_to_zero() {
        let pb = diag_quadratic(&[1.0], &[0.0], ProxOperator::zero()).with_x0(vec![1.0]).unwrap();
        for run in [run_zero_sr1, run_zero_bfgs] {
            let res = run(&pb, &SolverOptions::default()).unwrap();
            assert_eq!(res.status, Termination::Converged);
            assert!(res.x[0].abs() < 1e-10);
        }
    }

    #[test]
    fn separable_l1_problem_matches_soft_threshold() {
        // min ½Σdᵢxᵢ² − cᵢxᵢ + λ‖x‖₁ ⇒ xᵢ = S_λ(cᵢ)/dᵢ
        let d = [1.0, 3.0, 0.5, 2.0, 10.0];
        let c = [2.0, -0.5, 0.05, -4.0, 1.5];
        let lambda = 0.3;
        let pb = diag_quadratic(&d, &c, ProxOperator::l1(lambda).unwrap()).with_lipschitz(10.0);
        for run in [run_zero_sr1, run_zero_bfgs] {
            let res = run(&pb, &SolverOptions::default()).unwrap();
            assert_eq!(res.status, Termination::Converged, "{:?}", res.solver);
            for i in 0..5 {
                let expect = (c[i].abs() - lambda).max(0.0) * c[i].signum() / d[i];
                assert!((res.x[i] - expect).abs() < 1e-8, "{} {}", res.x[i], expect);
            }
            let objs: Vec<f64> = res.trace.records.iter().map(|r| r.objective).collect();
            assert!(objs.windows(2).all(|w| w[1] <= w[0] + crate::solver::ROUNDOFF_SLACK * w[0].abs()));
        }
    }

    #[test]
    fn iteration_budget_is_respected() {
        let d: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let c = vec![1.0; 20];
        let pb = diag_quadratic(&d, &c, ProxOperator::l1(0.1).unwrap());
        let opts = SolverOptions { max_iter: 3, ..SolverOptions::default() };
        let res = run_zero_sr1(&pb, &opts).unwrap();
        assert_eq!(res.status, Termination::MaxIterations);
        assert_eq!(res.iterations, 3);
        assert_eq!(res.trace.len(), 4);
    }
}
