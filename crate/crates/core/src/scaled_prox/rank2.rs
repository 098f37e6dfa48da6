use super::{scaled_prox, RootFinder, RootMethod, RootProblem, RootSolverReport};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::metric::{LowRankMetric, Sign};

/// Nested reduction for `V = P + u₁u₁ᵀ − u₂u₂ᵀ`.
///
/// With `P₁ = P + u₁u₁ᵀ`, `prox^V(x) = prox^{P₁}(x + βP₁⁻¹u₂)` where `β` is the zero of the
/// scalar, strongly monotone map `β ↦ u₂ᵀ(x − prox^{P₁}(x + βP₁⁻¹u₂)) + β`. Each inner
/// `prox^{P₁}` is itself a rank-one problem. The outer equation is solved by a bracketed
/// Newton iteration whose derivative is obtained by differentiating the inner root.
pub fn recursive_rank2(problem: &RootProblem<'_>) -> Result<RootSolverReport> {
    let metric = problem.metric();
    let plus: Vec<usize> = (0..metric.rank()).filter(|&i| metric.signs()[i] == Sign::Plus).collect();
    let minus: Vec<usize> = (0..metric.rank()).filter(|&i| metric.signs()[i] == Sign::Minus).collect();
    if plus.len() > 1 || minus.len() > 1 || metric.rank() == 0 {
        return Err(Error::NotApplicable {
            method: RootMethod::Recursive,
            reason: "requires at most one factor of each sign".into(),
        });
    }
    let diag = metric.diag().to_vec();
    let x = problem.x();
    let kappa = problem.kappa();
    let prox = problem.prox();
    let n = x.len();

    let p1 = match plus.first() {
        Some(&i) => LowRankMetric::rank_one(diag.clone(), metric.factors()[i].clone(), Sign::Plus)?,
        None => LowRankMetric::diagonal(diag.clone())?,
    };
    let Some(&im) = minus.first() else {
        let (p, inner) = scaled_prox(&p1, prox, x, kappa, &RootFinder::Auto)?;
        return finish(problem, &p, inner.iterations);
    };
    let u2 = &metric.factors()[im];
    // P₁⁻¹u₂ by Sherman–Morrison
    let mut v: Vec<f64> = metric.pinv_factors()[im].clone();
    if let Some(&ip) = plus.first() {
        let u1 = &metric.factors()[ip];
        let pu1 = &metric.pinv_factors()[ip];
        let c = dot(u1, &v) / (1.0 + dot(u1, pu1));
        for k in 0..n {
            v[k] -= c * pu1[k];
        }
    }
    let c2 = 1.0 - dot(u2, &v);
    if c2 <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!("outer modulus {c2} ≤ 0")));
    }

    let mut inner_iters = 0;
    let mut outer = |beta: f64| -> Result<(f64, f64, Vec<f64>)> {
        let z: Vec<f64> = (0..n).map(|k| x[k] + beta * v[k]).collect();
        let inner = RootProblem::new(&p1, prox, &z, kappa)?;
        let rep = super::solve_root(&inner, &RootFinder::Auto)?;
        inner_iters += rep.iterations;
        let (_, y, p) = inner.eval_full(&rep.alpha_star)?;
        let l = dot(u2, &x.iter().zip(&p).map(|(a, b)| a - b).collect::<Vec<_>>()) + beta;
        // d p / dβ = J v + J P⁻¹u₁ · u₁ᵀ(v − Jv) / (1 + u₁ᵀJP⁻¹u₁)
        let jac = prox.jacobian(&y, &diag, kappa)?;
        let mut jv = vec![0.0; n];
        jac.apply(&v, &mut jv);
        let mut dp = jv.clone();
        if let Some(&ip) = plus.first() {
            let u1 = &metric.factors()[ip];
            let mut jpu1 = vec![0.0; n];
            jac.apply(&metric.pinv_factors()[ip], &mut jpu1);
            let g1 = 1.0 + dot(u1, &jpu1);
            let coef = (dot(u1, &v) - dot(u1, &jv)) / g1;
            for k in 0..n {
                dp[k] += coef * jpu1[k];
            }
        }
        Ok((l, 1.0 - dot(u2, &dp), p))
    };

    let (l0, _, _) = outer(0.0)?;
    let bound = l0.abs() / c2;
    let (mut lo, mut hi) = (-bound, bound);
    let mut beta = 0.0;
    let mut p_final = None;
    let mut steps = 0;
    for _ in 0..200 {
        let (l, dl, p) = outer(beta)?;
        steps += 1;
        let scale = 1.0 + beta.abs() + x.iter().zip(u2).map(|(a, b)| (a * b).abs()).sum::<f64>();
        p_final = Some(p);
        if l.abs() <= 4.0 * f64::EPSILON * scale {
            break;
        }
        if l > 0.0 {
            hi = beta;
        } else {
            lo = beta;
        }
        let newton = beta - l / dl;
        let next = if dl > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * (1.0 + hi.abs().max(lo.abs())) {
            break;
        }
        beta = next;
    }
    let p = p_final.expect("at least one outer iteration");
    finish(problem, &p, steps + inner_iters)
}

/// Report in the coordinates of the coupled system, `α★ = Wᵀ(p − x)`.
fn finish(problem: &RootProblem<'_>, p: &[f64], iterations: usize) -> Result<RootSolverReport> {
    let x = problem.x();
    let diff: Vec<f64> = p.iter().zip(x).map(|(a, b)| a - b).collect();
    let alpha = problem.metric().factors().iter().map(|w| dot(w, &diff)).collect();
    problem.report(alpha, iterations, RootMethod::Recursive)
}
