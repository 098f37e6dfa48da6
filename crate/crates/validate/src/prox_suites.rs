use proxqn::linalg::{dot, norm2};
use proxqn::scaled_prox::{bisection, exact_piecewise_affine, moreau_residual, scaled_prox, semismooth_newton, NewtonOptions};
use proxqn::{ProxOperator, RootFinder, RootProblem, Sign};
use proxqn_oracle::scaled_prox_bruteforce;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instances::{normal_vec, random_dim, random_instance, random_metric, HKind, Instance};
use crate::{Config, Report};

pub const ORACLE_TOL: f64 = 1e-12;
pub const MATCH_TOL: f64 = 1e-7;
pub const AGREE_TOL: f64 = 1e-8;
pub const EXACT_RESIDUAL_TOL: f64 = 1e-12;
pub const BISECTION_EPS: f64 = 1e-10;
pub const CONSTANTS_TOL: f64 = 1e-9;
pub const MOREAU_TOL: f64 = 1e-10;

/// The rank-one instances shared by the oracle, agreement and root-bound checks:
/// `per_kind` instances of every `h`, alternating plus and minus metrics.
pub fn rank_one_instances(cfg: &Config, per_kind: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(per_kind * HKind::ALL.len());
    for kind in HKind::ALL {
        for i in 0..per_kind {
            let n = random_dim(&mut rng, cfg.max_dim());
            let sign = if i % 2 == 0 { Sign::Plus } else { Sign::Minus };
            out.push(random_instance(&mut rng, kind, n, 1, sign));
        }
    }
    out
}

fn problem(inst: &Instance) -> RootProblem<'_> {
    RootProblem::new(&inst.metric, &inst.prox, &inst.x, inst.kappa).expect("valid instance")
}

/// Library scaled prox against the brute-force primal minimizer.
pub fn oracle_equivalence(cfg: &Config) -> Report {
    let instances = rank_one_instances(cfg, cfg.per_kind());
    let mut report = Report::new();
    let mut worst = 0.0_f64;
    for inst in &instances {
        let (z, _) = match scaled_prox(&inst.metric, &inst.prox, &inst.x, inst.kappa, &RootFinder::Auto) {
            Ok(v) => v,
            Err(e) => {
                report.fail(format!("{}: {e}", inst.kind.as_str()));
                continue;
            }
        };
        let oracle = scaled_prox_bruteforce(&inst.dense_metric(), &inst.func, &inst.x_vec(), inst.kappa, ORACLE_TOL);
        let err = z.iter().zip(oracle.x.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(err);
        if !(err <= MATCH_TOL) {
            report.fail(format!("{} n={} err={err:.2e}", inst.kind.as_str(), inst.x.len()));
        }
    }
    report.note(format!("{} instances, max ‖z − z_oracle‖∞ = {worst:.2e} (tol {MATCH_TOL:e})", instances.len()));
    report
}

/// Exact, bisection and semi-smooth Newton roots agree; the exact residual vanishes.
pub fn method_agreement(cfg: &Config) -> Report {
    let instances = rank_one_instances(cfg, cfg.per_kind());
    let mut report = Report::new();
    let (mut worst_gap, mut worst_res) = (0.0_f64, 0.0_f64);
    for inst in &instances {
        let pr = problem(inst);
        let mut alphas = Vec::new();
        match semismooth_newton(&pr, &NewtonOptions::default()) {
            Ok(r) => alphas.push(r.alpha_star[0]),
            Err(e) => report.fail(format!("{} newton: {e}", inst.kind.as_str())),
        }
        match bisection(&pr, BISECTION_EPS) {
            Ok(r) => alphas.push(r.alpha_star[0]),
            Err(e) => report.fail(format!("{} bisection: {e}", inst.kind.as_str())),
        }
        if inst.kind.piecewise_affine() {
            match exact_piecewise_affine(&pr) {
                Ok(r) => {
                    let res = pr.eval(&r.alpha_star).map(|l| l[0].abs()).unwrap_or(f64::INFINITY);
                    worst_res = worst_res.max(res);
                    if !(res <= EXACT_RESIDUAL_TOL) {
                        report.fail(format!("{} exact |L(α★)| = {res:.2e}", inst.kind.as_str()));
                    }
                    alphas.push(r.alpha_star[0]);
                }
                Err(e) => report.fail(format!("{} exact: {e}", inst.kind.as_str())),
            }
        }
        let gap = alphas.iter().map(|a| (a - alphas[0]).abs()).fold(0.0, f64::max);
        worst_gap = worst_gap.max(gap);
        if !(gap <= AGREE_TOL) {
            report.fail(format!("{} α★ spread {gap:.2e}", inst.kind.as_str()));
        }
    }
    report.note(format!(
        "{} instances, max α★ spread = {worst_gap:.2e} (tol {AGREE_TOL:e}), max exact |L(α★)| = {worst_res:.2e} (tol {EXACT_RESIDUAL_TOL:e})",
        instances.len()
    ));
    report
}

/// `|α★| ≤ ‖u‖(2‖x‖ + ‖prox^V_h(0)‖)` and the bisection iteration bound.
pub fn root_bound(cfg: &Config) -> Report {
    let instances = rank_one_instances(cfg, cfg.per_kind());
    let mut report = Report::new();
    let mut worst_ratio = 0.0_f64;
    let mut worst_slack = i64::MAX;
    for inst in &instances {
        let pr = problem(inst);
        let (alpha, bound) = match (semismooth_newton(&pr, &NewtonOptions::default()), pr.root_bound()) {
            (Ok(r), Ok(b)) => (r.alpha_star[0], b),
            (Err(e), _) | (_, Err(e)) => {
                report.fail(format!("{}: {e}", inst.kind.as_str()));
                continue;
            }
        };
        if alpha != 0.0 {
            worst_ratio = worst_ratio.max(alpha.abs() / bound);
        }
        if alpha.abs() > bound * (1.0 + 1e-12) {
            report.fail(format!("{} |α★| = {:.3e} > β = {bound:.3e}", inst.kind.as_str(), alpha.abs()));
        }
        let c = pr.monotonicity_modulus().expect("rank one");
        match bisection(&pr, BISECTION_EPS) {
            Ok(r) => {
                let beta = r.bracket.unwrap_or(0.0);
                if beta > 0.0 {
                    let allowed = (2.0 * c * beta / BISECTION_EPS).log2().ceil().max(0.0) as i64 + 2;
                    worst_slack = worst_slack.min(allowed - r.iterations as i64);
                    if r.iterations as i64 > allowed {
                        report.fail(format!("{} bisection took {} > {allowed} steps", inst.kind.as_str(), r.iterations));
                    }
                }
            }
            Err(e) => report.fail(format!("{} bisection: {e}", inst.kind.as_str())),
        }
    }
    report.note(format!(
        "{} instances, max |α★|/β = {worst_ratio:.3}, min bisection slack = {worst_slack} steps",
        instances.len()
    ));
    report
}

/// `c‖Δα‖² ≤ ⟨ΔL, Δα⟩` and `‖ΔL‖ ≤ (1 + ‖P^{-1/2}U‖²)‖Δα‖` on random pairs.
pub fn monotonicity(cfg: &Config) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4d4f4e);
    let per_kind = (cfg.per_kind() / 8).max(2);
    let pairs = cfg.pairs();
    let mut report = Report::new();
    let (mut min_mono, mut max_lip) = (f64::INFINITY, 0.0_f64);
    let mut count = 0;
    for kind in HKind::ALL {
        for i in 0..per_kind {
            let n = random_dim(&mut rng, cfg.max_dim());
            let rank = if kind == HKind::Affine || i % 3 != 2 { 1 } else { 2 };
            let sign = if i % 2 == 0 { Sign::Plus } else { Sign::Minus };
            let inst = random_instance(&mut rng, kind, n, rank, sign);
            let pr = problem(&inst);
            let c = pr.monotonicity_modulus().expect("single sign");
            let lip = pr.lipschitz_bound();
            count += 1;
            for _ in 0..pairs {
                let scale = rng.random_range(0.01..5.0);
                let a: Vec<f64> = normal_vec(&mut rng, rank).into_iter().map(|v| v * scale).collect();
                let b: Vec<f64> = normal_vec(&mut rng, rank).into_iter().map(|v| v * scale).collect();
                let (la, lb) = match (pr.eval(&a), pr.eval(&b)) {
                    (Ok(la), Ok(lb)) => (la, lb),
                    (Err(e), _) | (_, Err(e)) => {
                        report.fail(format!("{}: {e}", kind.as_str()));
                        continue;
                    }
                };
                let da: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                let dl: Vec<f64> = la.iter().zip(&lb).map(|(x, y)| x - y).collect();
                let dd = dot(&da, &da);
                if dd == 0.0 {
                    continue;
                }
                let inner = dot(&dl, &da);
                let tol = CONSTANTS_TOL * dd.max(1.0);
                min_mono = min_mono.min(inner / dd - c);
                max_lip = max_lip.max(norm2(&dl) / dd.sqrt() - lip);
                if inner < c * dd - tol {
                    report.fail(format!("{} monotonicity ⟨ΔL,Δα⟩ = {inner:.6e} < c‖Δα‖² = {:.6e}", kind.as_str(), c * dd));
                }
                if norm2(&dl) > lip * dd.sqrt() + CONSTANTS_TOL * dd.sqrt().max(1.0) {
                    report.fail(format!("{} Lipschitz ‖ΔL‖ = {:.6e} > {:.6e}", kind.as_str(), norm2(&dl), lip * dd.sqrt()));
                }
            }
        }
    }
    report.note(format!(
        "{count} instances × {pairs} pairs, min (⟨ΔL,Δα⟩/‖Δα‖² − c) = {min_mono:.2e}, max (‖ΔL‖/‖Δα‖ − Λ) = {max_lip:.2e}"
    ));
    report
}

fn conjugable(rng: &mut ChaCha8Rng) -> ProxOperator {
    let p = rng.random_range(0.3..1.5);
    match rng.random_range(0..8) {
        0 => ProxOperator::l1(p).unwrap(),
        1 => ProxOperator::nonneg(),
        2 => ProxOperator::boxed(-p, p).unwrap(),
        3 => ProxOperator::hinge(p).unwrap(),
        4 => ProxOperator::simplex(p).unwrap(),
        5 => ProxOperator::l1_ball(p).unwrap(),
        6 => ProxOperator::linf_norm(p).unwrap(),
        _ => ProxOperator::max(p).unwrap(),
    }
}

/// The metric Moreau identity on random tuples.
pub fn moreau(cfg: &Config) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4d4f52);
    let mut report = Report::new();
    let mut worst = 0.0_f64;
    let tuples = cfg.tuples();
    for i in 0..tuples {
        let n = random_dim(&mut rng, cfg.max_dim());
        let rank = 1 + i % 2;
        let sign = if (i / 2) % 2 == 0 { Sign::Plus } else { Sign::Minus };
        let metric = random_metric(&mut rng, n, rank, sign, None);
        let h = conjugable(&mut rng);
        let x: Vec<f64> = normal_vec(&mut rng, n).into_iter().map(|v| 2.0 * v).collect();
        for rho in [0.5, 1.0, 2.0] {
            match moreau_residual(&metric, &h, &x, rho) {
                Ok(r) => {
                    worst = worst.max(r);
                    if !(r <= MOREAU_TOL) {
                        report.fail(format!("{} rank {rank} ρ={rho}: residual {r:.2e}", h.name()));
                    }
                }
                Err(e) => report.fail(format!("{} ρ={rho}: {e}", h.name())),
            }
        }
    }
    report.note(format!("{tuples} tuples × 3 ρ, max residual = {worst:.2e} (tol {MOREAU_TOL:e})"));
    report
}
