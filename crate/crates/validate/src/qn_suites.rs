use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proxqn::linalg::{norm2, norm_inf, DenseMatrix};
use proxqn::quasi_newton::{initial_metric, sr1_metric, zbfgs_metric, QnConfig, QnMetric, QnPair};
use proxqn::solver::{fb_step, run_zero_bfgs, run_zero_sr1, LineSearch, ProblemSpec, QnKind, Quadratic, SolverOptions};
use proxqn::{LowRankMetric, ProxOperator, RootFinder};
use proxqn_oracle::dense::{assemble, sorted_eigenvalues};
use proxqn_oracle::{minimize_quadratic, Func};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instances::normal_vec;
use crate::{Config, Report};

pub const SECANT_TOL: f64 = 1e-12;
pub const EIGEN_TOL: f64 = 1e-9;
pub const RATE_TOL: f64 = 1e-6;
/// Contraction is checked while `Eₖ` exceeds this.
pub const RATE_FLOOR: f64 = 1e-12;
pub const THEORY_GAMMA: f64 = 0.5;
pub const TRAJECTORY_STEPS: usize = 200;

/// Eigenvalue interval `[a, b]` of the zero-memory SR1 inverse Hessian.
pub fn sr1_bounds(gamma: f64, mu: f64, l: f64) -> (f64, f64) {
    (gamma / l, ((1.0 + gamma) / mu - 2.0 * gamma / l) / (1.0 - gamma))
}

/// Eigenvalue interval `[a, b]` of the zero-memory BFGS inverse Hessian.
pub fn bfgs_bounds(gamma: f64, mu: f64, l: f64) -> (f64, f64) {
    (gamma / ((1.0 + gamma) * l), (1.0 + 2.0 * gamma) / mu - (2.0 + gamma) * gamma / ((1.0 + gamma) * l))
}

pub fn bounds(kind: QnKind, gamma: f64, mu: f64, l: f64) -> (f64, f64) {
    match kind {
        QnKind::Sr1 => sr1_bounds(gamma, mu, l),
        QnKind::Bfgs => bfgs_bounds(gamma, mu, l),
    }
}

/// `(ρ₁, ρ₂, ρ)` for `α = 1 − Lbκ̄/2` and `η = L/(2γμκ̲)`.
pub fn contraction_rate(alpha: f64, eta: f64) -> (f64, f64, f64) {
    let rho1 = 1.0 - alpha * (1.0 - 2.0 * ((eta * eta + eta).sqrt() - eta));
    let rho2 = if eta <= 0.25 { 2.0 * eta } else { 1.0 - 1.0 / (8.0 * eta) };
    let rho = if alpha < 0.5 { rho1 } else { rho1.min(rho2) };
    (rho1, rho2, rho)
}

/// `½xᵀQx − cᵀx + λ‖x‖₁` with the spectrum of `Q` spread over `[μ, L]`.
pub struct TestQuadratic {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub lambda: f64,
    pub mu: f64,
    pub l: f64,
}

impl TestQuadratic {
    pub fn random(rng: &mut ChaCha8Rng, n: usize, mu: f64, l: f64, lambda: f64) -> Self {
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let qr = g.qr().q();
        let eig = DVector::from_fn(n, |i, _| if n == 1 { mu } else { mu + (l - mu) * i as f64 / (n - 1) as f64 });
        let q = &qr * DMatrix::from_diagonal(&eig) * qr.transpose();
        let q = (&q + q.transpose()) * 0.5;
        let c = DVector::from_vec(normal_vec(rng, n)) * 2.0;
        Self { q, c, lambda, mu, l }
    }

    pub fn spec(&self) -> ProblemSpec {
        let n = self.c.len();
        let dense = DenseMatrix::from_fn(n, n, |i, j| self.q[(i, j)]).unwrap();
        let f = Quadratic::new(dense, self.c.iter().copied().collect()).unwrap();
        let h = if self.lambda > 0.0 { ProxOperator::l1(self.lambda).unwrap() } else { ProxOperator::zero() };
        ProblemSpec::new("quadratic_l1", Arc::new(f), h)
            .with_lipschitz(self.l)
            .with_mu(self.mu)
            .with_x0(vec![1.0; n])
            .unwrap()
    }

    /// `F★` from the brute-force oracle.
    pub fn fstar(&self) -> f64 {
        let h = if self.lambda > 0.0 { Func::L1 { lambda: self.lambda } } else { Func::Zero };
        minimize_quadratic(&self.q, &self.c, &h, 1e-14, 5_000_000).value
    }
}

fn dense_of(m: &LowRankMetric) -> DMatrix<f64> {
    let signs: Vec<f64> = m.signs().iter().map(|s| s.value()).collect();
    assemble(m.diag(), m.factors(), &signs)
}

fn secant_error(m: &QnMetric, pair: &QnPair) -> f64 {
    let hy = m.h.apply(&pair.y).unwrap();
    let diff: Vec<f64> = hy.iter().zip(&pair.s).map(|(a, b)| a - b).collect();
    norm2(&diff) / norm2(&pair.s)
}

/// Secant identities on random pairs and eigenvalue bounds along solver trajectories.
pub fn quasi_newton(cfg: &Config) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x514e);
    let mut report = Report::new();
    let mut worst_secant = 0.0_f64;
    let mut checked = 0;
    for i in 0..200 {
        let n = rng.random_range(2..30);
        let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let spd = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
        let s = DVector::from_vec(normal_vec(&mut rng, n));
        let y = &spd * &s;
        let pair = QnPair::new(s.iter().copied().collect(), y.iter().copied().collect()).unwrap();
        let gamma = [0.5, 0.8][i % 2];
        let metrics = [
            ("sr1", sr1_metric(&pair, &QnConfig::with_gamma(gamma), 1.0)),
            ("bfgs", zbfgs_metric(&pair, &QnConfig::with_gamma(gamma), 1.0)),
            ("bfgs γ=1", zbfgs_metric(&pair, &QnConfig::with_gamma(1.0), 1.0)),
        ];
        for (name, m) in metrics {
            match m {
                Ok(m) if !m.skipped => {
                    checked += 1;
                    let e = secant_error(&m, &pair);
                    worst_secant = worst_secant.max(e);
                    if !(e <= SECANT_TOL) {
                        report.fail(format!("{name} secant error {e:.2e} (n={n})"));
                    }
                }
                Ok(_) => {}
                Err(e) => report.fail(format!("{name}: {e}")),
            }
        }
    }

    let mut worst_margin = f64::INFINITY;
    let mut metrics_checked = 0;
    for t in 0..cfg.trajectories() {
        let cond = [4.0, 10.0, 20.0][t % 3];
        let lambda = [0.0, 0.1, 0.5][(t / 3) % 3];
        let quad = TestQuadratic::random(&mut rng, 20, 1.0, cond, lambda);
        let spec = quad.spec();
        for kind in [QnKind::Sr1, QnKind::Bfgs] {
            for gamma in [THEORY_GAMMA, 0.8] {
                let (a, b) = bounds(kind, gamma, quad.mu, quad.l);
                let tol = EIGEN_TOL * b.max(1.0);
                let mut visit = |m: &QnMetric, k: usize, rep: &mut Report| {
                    let ev = sorted_eigenvalues(&dense_of(&m.h));
                    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
                    worst_margin = worst_margin.min((lo - a).min(b - hi));
                    if lo < a - tol || hi > b + tol {
                        rep.fail(format!("{kind:?} γ={gamma} step {k}: spectrum [{lo:.6e}, {hi:.6e}] ⊄ [{a:.6e}, {b:.6e}]"));
                    }
                };
                match trajectory(&spec, kind, gamma, 1.0 / (quad.l * b), TRAJECTORY_STEPS, |m, k| {
                    metrics_checked += 1;
                    visit(m, k, &mut report)
                }) {
                    Ok(()) => {}
                    Err(e) => report.fail(format!("{kind:?} trajectory: {e}")),
                }
            }
        }
    }
    report.note(format!(
        "{checked} secant checks, max ‖Hy − s‖/‖s‖ = {worst_secant:.2e}; {metrics_checked} trajectory metrics, min eigenvalue margin = {worst_margin:.3e}"
    ));
    report
}

/// Unit-step forward–backward iterations with constant `κ`, calling `visit` on every
/// metric built from a pair. Stops after `steps` iterations or when the step vanishes.
pub fn trajectory(
    spec: &ProblemSpec,
    kind: QnKind,
    gamma: f64,
    kappa: f64,
    steps: usize,
    mut visit: impl FnMut(&QnMetric, usize),
) -> proxqn::Result<()> {
    let n = spec.dim();
    let cfg = QnConfig::with_gamma(gamma);
    let mut x = spec.x0.clone();
    let mut g = vec![0.0; n];
    spec.f.value_grad(&x, &mut g);
    let mut metric = initial_metric(n, 1.0 / spec.lipschitz.unwrap_or(1.0))?;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for k in 0..steps {
        if let Some((xp, gp)) = &prev {
            let s: Vec<f64> = x.iter().zip(xp).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g.iter().zip(gp).map(|(a, b)| a - b).collect();
            let pair = QnPair::new(s, y)?;
            metric = match kind {
                QnKind::Sr1 => sr1_metric(&pair, &cfg, metric.tau)?,
                QnKind::Bfgs => zbfgs_metric(&pair, &cfg, metric.tau)?,
            };
            visit(&metric, k);
        }
        let (xn, _) = fb_step(spec, &x, &g, &metric, kappa, &RootFinder::Auto)?;
        let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        if norm_inf(&step) < 1e-9 {
            break;
        }
        let mut gn = vec![0.0; n];
        spec.f.value_grad(&xn, &mut gn);
        prev = Some((std::mem::replace(&mut x, xn), std::mem::replace(&mut g, gn)));
    }
    Ok(())
}

/// Per-step contraction `E_{k+1}/E_k ≤ ρ` in the unit-step, constant-`κ` regime.
pub fn rates(cfg: &Config) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x52415445);
    let mut report = Report::new();
    let mut lines = Vec::new();
    for t in 0..cfg.rate_problems() {
        let cond = [5.0, 20.0][t % 2];
        let quad = TestQuadratic::random(&mut rng, 20, 1.0, cond, 0.1);
        let fstar = quad.fstar();
        let spec = quad.spec().with_fstar(fstar);
        for kind in [QnKind::Sr1, QnKind::Bfgs] {
            let (_, b) = bounds(kind, THEORY_GAMMA, quad.mu, quad.l);
            let kappa = 1.0 / (quad.l * b);
            let alpha = 1.0 - quad.l * b * kappa / 2.0;
            let eta = quad.l / (2.0 * THEORY_GAMMA * quad.mu * kappa);
            let (_, _, rho) = contraction_rate(alpha, eta);
            let opts = SolverOptions {
                tol: 1e-14,
                max_iter: 100_000,
                line_search: LineSearch::None,
                kappa,
                qn: QnConfig::with_gamma(THEORY_GAMMA),
                ..SolverOptions::default()
            };
            let run = match kind {
                QnKind::Sr1 => run_zero_sr1(&spec, &opts),
                QnKind::Bfgs => run_zero_bfgs(&spec, &opts),
            };
            let res = match run {
                Ok(r) => r,
                Err(e) => {
                    report.fail(format!("{kind:?}: {e}"));
                    continue;
                }
            };
            let errs: Vec<f64> = res.trace.records.iter().map(|r| r.objective - fstar).collect();
            let mut worst = 0.0_f64;
            let mut steps = 0;
            for w in errs.windows(2) {
                if w[0] <= RATE_FLOOR {
                    break;
                }
                steps += 1;
                worst = worst.max(w[1] / w[0]);
            }
            if steps == 0 || worst > rho + RATE_TOL {
                report.fail(format!("{kind:?} cond {cond}: max E_(k+1)/E_k = {worst:.6} > ρ = {rho:.6} ({steps} steps)"));
            }
            lines.push(format!("{kind:?}/c={cond}: {worst:.4} ≤ {rho:.6}"));
        }
    }
    report.note(lines.join("; "));
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_cases() {
        // η ≤ 1/4 and α ≥ 1/2: ρ₂ = 2η is available
        let (r1, r2, r) = contraction_rate(0.75, 0.1);
        assert!((r2 - 0.2).abs() < 1e-15);
        assert!((r1 - (1.0 - 0.75 * (1.0 - 2.0 * ((0.11f64).sqrt() - 0.1)))).abs() < 1e-15);
        assert_eq!(r, r1.min(r2));
        // α < 1/2 uses ρ₁ only
        let (r1, _, r) = contraction_rate(0.25, 0.01);
        assert_eq!(r, r1);
        let (_, r2, _) = contraction_rate(0.5, 2.0);
        assert!((r2 - (1.0 - 1.0 / 16.0)).abs() < 1e-15);
    }

    #[test]
    fn bounds_contain_bb_identity_case() {
        // f = ½‖x‖²: every BB step is 1 and H = γI + ..., inside the bounds
        let (a, b) = sr1_bounds(0.5, 1.0, 1.0);
        assert!(a <= 0.5 && b >= 1.0);
        let (a, b) = bfgs_bounds(1.0, 1.0, 1.0);
        assert!((a - 0.5).abs() < 1e-15 && (b - 1.5).abs() < 1e-15);
    }
}
