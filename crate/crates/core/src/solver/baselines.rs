//! First-order baselines: ISTA, FISTA with Barzilai–Borwein steps, SpaRSA-type SPG, and
//! FISTA with adaptive restart for reference solutions.

use std::collections::VecDeque;
use std::time::Instant;

use super::{ConvergenceTrace, ProblemSpec, SolverId, SolverOptions, SolverResult, Termination};
use crate::error::{Error, Result};
use crate::linalg::{check_dim, dot, norm_inf, sub};

const STEP_MIN: f64 = 1e-30;
const STEP_MAX: f64 = 1e30;
const MAX_BACKTRACKS: usize = 60;
const FISTA_RESTART: usize = 1000;

struct Oracle<'a> {
    problem: &'a ProblemSpec,
    ones: Vec<f64>,
}

impl<'a> Oracle<'a> {
    fn new(problem: &'a ProblemSpec) -> Result<Self> {
        check_dim(problem.dim(), problem.x0.len())?;
        Ok(Self { problem, ones: vec![1.0; problem.dim()] })
    }

    fn f_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut g = vec![0.0; x.len()];
        let f = self.problem.f.value_grad(x, &mut g);
        (f, g)
    }

    /// `prox_{step·h}(y − step·g)`.
    fn prox_grad(&self, y: &[f64], g: &[f64], step: f64, k: usize) -> Result<Vec<f64>> {
        let v: Vec<f64> = y.iter().zip(g).map(|(yi, gi)| yi - step * gi).collect();
        self.problem
            .h
            .prox_diag(&v, &self.ones, step)
            .map_err(|e| Error::ProxFailed { iteration: k, source: Box::new(e) })
    }

    /// `f(z) ≤ f(y) + ⟨g, z − y⟩ + ‖z − y‖²/(2·step)`.
    fn majorized(&self, y: &[f64], fy: f64, g: &[f64], z: &[f64], step: f64) -> (bool, f64) {
        let d = sub(z, y);
        let fz = self.problem.f.value(z);
        let bound = fy + dot(g, &d) + dot(&d, &d) / (2.0 * step);
        (fz <= bound + 1e-12 * fy.abs().max(1.0), fz)
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.problem.objective(x)
    }
}

struct Monitor {
    start: Instant,
    trace: ConvergenceTrace,
    record: bool,
}

impl Monitor {
    fn new(id: &str, problem: &ProblemSpec, record: bool) -> Self {
        Self { start: Instant::now(), trace: ConvergenceTrace::new(id, problem.name.clone()), record }
    }

    /// Records row `k` and returns the termination reason, if any.
    fn check(&mut self, k: usize, fx: f64, step: f64, problem: &ProblemSpec, opts: &SolverOptions) -> Option<Termination> {
        let elapsed = self.start.elapsed().as_secs_f64();
        if self.record {
            self.trace.push(k, fx, step, elapsed);
        }
        if step < opts.tol {
            return Some(Termination::Converged);
        }
        if let (Some(target), Some(fstar)) = (opts.target_error, problem.fstar) {
            if fx - fstar <= target {
                return Some(Termination::TargetReached);
            }
        }
        if k >= opts.max_iter {
            return Some(Termination::MaxIterations);
        }
        if opts.max_seconds.is_some_and(|s| elapsed >= s) {
            return Some(Termination::TimeLimit);
        }
        None
    }

    fn finish(self, solver: SolverId, x: Vec<f64>, objective: f64, iterations: usize, status: Termination) -> SolverResult {
        SolverResult {
            solver,
            x,
            objective,
            iterations,
            status,
            seconds: self.start.elapsed().as_secs_f64(),
            skipped_updates: 0,
            trace: self.trace,
        }
    }
}

fn initial_step(problem: &ProblemSpec) -> f64 {
    problem.lipschitz.map_or(1.0, |l| 1.0 / l)
}

fn check_finite(k: usize, fx: f64) -> Result<()> {
    if fx.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { iteration: k, reason: "objective is not finite".into() })
    }
}

/// Proximal gradient descent starting from step `1/L` (or 1), halved whenever the quadratic
/// upper bound fails.
pub fn run_ista(problem: &ProblemSpec, opts: &SolverOptions) -> Result<SolverResult> {
    let oracle = Oracle::new(problem)?;
    let mut mon = Monitor::new(SolverId::Ista.as_str(), problem, opts.record_trace);
    let mut step = initial_step(problem);
    let mut x = problem.x0.clone();
    let mut k = 0;
    let status = loop {
        let (fx_smooth, g) = oracle.f_grad(&x);
        let fx = fx_smooth + problem.h.eval(&x);
        check_finite(k, fx)?;
        let mut z = oracle.prox_grad(&x, &g, step, k)?;
        let mut tries = 0;
        while !oracle.majorized(&x, fx_smooth, &g, &z, step).0 && tries < MAX_BACKTRACKS {
            step *= 0.5;
            tries += 1;
            z = oracle.prox_grad(&x, &g, step, k)?;
        }
        if let Some(status) = mon.check(k, fx, norm_inf(&sub(&z, &x)), problem, opts) {
            let f = fx;
            break (status, f);
        }
        x = z;
        k += 1;
    };
    Ok(mon.finish(SolverId::Ista, x, status.1, k, status.0))
}

#[derive(Clone, Copy, PartialEq)]
enum FistaVariant {
    /// BB step guess with backtracking, momentum restart every 1000 iterations.
    BbPeriodic,
    /// Step `1/L` with backtracking, gradient-based adaptive restart.
    AdaptiveRestart,
}

fn fista(problem: &ProblemSpec, opts: &SolverOptions, variant: FistaVariant, id: SolverId) -> Result<SolverResult> {
    let oracle = Oracle::new(problem)?;
    let mut mon = Monitor::new(id.as_str(), problem, opts.record_trace);
    let mut step = initial_step(problem);
    let mut x = problem.x0.clone();
    let mut fx = oracle.objective(&x);
    let mut y = x.clone();
    let mut t: f64 = 1.0;
    let mut prev_y: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut since_restart = 0;
    let mut k = 0;
    let status = loop {
        check_finite(k, fx)?;
        let (fy, g) = oracle.f_grad(&y);
        if variant == FistaVariant::BbPeriodic {
            if let Some((yp, gp)) = &prev_y {
                let s = sub(&y, yp);
                let r = sub(&g, gp);
                let (sr, rr) = (dot(&s, &r), dot(&r, &r));
                if sr > 0.0 && rr > 0.0 {
                    step = (sr / rr).clamp(STEP_MIN, STEP_MAX);
                }
            }
        }
        let mut z = oracle.prox_grad(&y, &g, step, k)?;
        let mut tries = 0;
        while !oracle.majorized(&y, fy, &g, &z, step).0 && tries < MAX_BACKTRACKS {
            step *= 0.5;
            tries += 1;
            z = oracle.prox_grad(&y, &g, step, k)?;
        }
        if let Some(status) = mon.check(k, fx, norm_inf(&sub(&z, &y)), problem, opts) {
            break status;
        }
        since_restart += 1;
        let restart = match variant {
            FistaVariant::BbPeriodic => since_restart >= FISTA_RESTART,
            FistaVariant::AdaptiveRestart => {
                let a = sub(&y, &z);
                let b = sub(&z, &x);
                dot(&a, &b) > 0.0
            }
        };
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let fz = oracle.objective(&z);
        // the BB variant is monotone: it keeps xₖ when the prox-gradient point is worse
        let accept = variant == FistaVariant::AdaptiveRestart || fz <= fx;
        let x_next = if accept { z.clone() } else { x.clone() };
        let y_next: Vec<f64> = if restart {
            x_next.clone()
        } else {
            (0..z.len())
                .map(|i| x_next[i] + (t / t_next) * (z[i] - x_next[i]) + ((t - 1.0) / t_next) * (x_next[i] - x[i]))
                .collect()
        };
        if restart {
            t = 1.0;
            since_restart = 0;
        } else {
            t = t_next;
        }
        prev_y = Some((std::mem::replace(&mut y, y_next), g));
        if accept {
            fx = fz;
        }
        x = x_next;
        k += 1;
    };
    Ok(mon.finish(id, x, fx, k, status))
}

/// FISTA with Barzilai–Borwein step guesses, backtracking and a momentum restart every
/// 1000 iterations.
pub fn run_fista_bb(problem: &ProblemSpec, opts: &SolverOptions) -> Result<SolverResult> {
    fista(problem, opts, FistaVariant::BbPeriodic, SolverId::FistaBb)
}

/// FISTA with gradient-based adaptive restart, used for high-accuracy reference solutions.
///
/// The result is labelled as FISTA-BB in the solver id field.
pub fn run_fista_restart(problem: &ProblemSpec, opts: &SolverOptions) -> Result<SolverResult> {
    fista(problem, opts, FistaVariant::AdaptiveRestart, SolverId::FistaBb)
}

/// Spectral projected gradient (SpaRSA): BB steps with a nonmonotone acceptance test over
/// the last 10 objective values.
pub fn run_spg(problem: &ProblemSpec, opts: &SolverOptions) -> Result<SolverResult> {
    const MEMORY: usize = 10;
    let oracle = Oracle::new(problem)?;
    let mut mon = Monitor::new(SolverId::Spg.as_str(), problem, opts.record_trace);
    let mut step = initial_step(problem);
    let mut x = problem.x0.clone();
    let (mut fx_smooth, mut g) = oracle.f_grad(&x);
    let mut fx = fx_smooth + problem.h.eval(&x);
    let mut history: VecDeque<f64> = VecDeque::with_capacity(MEMORY);
    let mut k = 0;
    let status = loop {
        check_finite(k, fx)?;
        if history.len() == MEMORY {
            history.pop_front();
        }
        history.push_back(fx);
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut tries = 0;
        let (z, fz) = loop {
            let z = oracle.prox_grad(&x, &g, step, k)?;
            let d = sub(&z, &x);
            let fz = oracle.objective(&z);
            if fz <= reference - 0.5 * opts.sigma * dot(&d, &d) / step || tries == MAX_BACKTRACKS {
                break (z, fz);
            }
            step *= 0.5;
            tries += 1;
        };
        let pnorm = norm_inf(&sub(&z, &x));
        if let Some(status) = mon.check(k, fx, pnorm, problem, opts) {
            break status;
        }
        if tries == MAX_BACKTRACKS && fz > reference {
            break Termination::Stagnated;
        }
        let (fz_smooth, gz) = oracle.f_grad(&z);
        let s = sub(&z, &x);
        let r = sub(&gz, &g);
        let sr = dot(&s, &r);
        step = if sr > 0.0 { (dot(&s, &s) / sr).clamp(STEP_MIN, STEP_MAX) } else { STEP_MAX.min(step * 2.0) };
        x = z;
        g = gz;
        fx_smooth = fz_smooth;
        fx = fx_smooth + problem.h.eval(&x);
        k += 1;
    };
    Ok(mon.finish(SolverId::Spg, x, fx, k, status))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::prox::ProxOperator;
    use crate::solver::Quadratic;

    fn soft_threshold_problem(with_l: bool) -> ProblemSpec {
        let q = DenseMatrix::from_row_major(1, 1, vec![1.0]).unwrap();
        let pb = ProblemSpec::new("st", Arc::new(Quadratic::new(q, vec![2.0]).unwrap()), ProxOperator::l1(0.5).unwrap());
        if with_l {
            pb.with_lipschitz(1.0)
        } else {
            pb
        }
    }

    #[test]
    fn baselines_find_one_dimensional_soft_threshold() {
        for with_l in [true, false] {
            let pb = soft_threshold_problem(with_l);
            for run in [run_ista, run_fista_bb, run_fista_restart, run_spg] {
                let res = run(&pb, &SolverOptions::default()).unwrap();
                assert_eq!(res.status, Termination::Converged);
                assert!((res.x[0] - 1.5).abs() < 1e-9, "{}", res.x[0]);
            }
        }
    }

    #[test]
    fn ill_conditioned_quadratic_with_box() {
        let n = 8;
        let d: Vec<f64> = (0..n).map(|i| 10f64.powf(i as f64 / 3.0)).collect();
        let q = DenseMatrix::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 }).unwrap();
        let c: Vec<f64> = (0..n).map(|i| d[i] * if i % 2 == 0 { 2.0 } else { -0.5 }).collect();
        let lmax = d[n - 1];
        let pb = ProblemSpec::new("box", Arc::new(Quadratic::new(q, c).unwrap()), ProxOperator::boxed(-1.0, 1.0).unwrap())
            .with_lipschitz(lmax);
        for run in [run_ista, run_fista_bb, run_fista_restart, run_spg] {
            let res = run(&pb, &SolverOptions::default()).unwrap();
            for i in 0..n {
                let expect = if i % 2 == 0 { 1.0 } else { -0.5 };
                assert!((res.x[i] - expect).abs() < 1e-7, "{:?} {i}: {}", res.solver, res.x[i]);
            }
        }
    }
}
