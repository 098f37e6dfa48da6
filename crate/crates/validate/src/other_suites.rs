use std::time::Instant;

use proxqn::harness::{generate, race, Family, ProblemRecipe, RaceProblem, ReferenceCache};
use proxqn::linalg::norm2;
use proxqn::scaled_prox::{scaled_prox, semismooth_newton, NewtonOptions};
use proxqn::solver::{SolverId, SolverOptions};
use proxqn::{ProxOperator, RootFinder, RootProblem, Sign};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instances::{normal_vec, random_instance, random_metric, HKind};
use crate::{Config, Report};

pub const NEWTON_TARGET: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 20;
/// Residuals below `ROUNDOFF_FACTOR·ε·scale(L)` are roundoff and excluded from the ratio tail.
pub const ROUNDOFF_FACTOR: f64 = 100.0;
/// Warm-start distances from `α★`, in units of `1 + ‖α★‖`.
pub const WARM_DISTANCES: [f64; 4] = [1.0, 4.0, 16.0, 64.0];

/// `Σⱼ Σᵢ |wⱼᵢ|(|xᵢ| + |pᵢ|) + ‖α‖₁`: the magnitude of the terms summed in `L(α)`.
fn residual_scale(pr: &RootProblem<'_>, alpha: &[f64]) -> f64 {
    let p = pr.point(alpha).expect("prox point");
    let x = pr.x();
    let terms: f64 = pr.metric().factors().iter().map(|w| (0..x.len()).map(|i| w[i].abs() * (x[i].abs() + p[i].abs())).sum::<f64>()).sum();
    terms + alpha.iter().map(|a| a.abs()).sum::<f64>()
}
pub const DESK_ERROR: f64 = 1e-6;
pub const DESK_COMPARE_ERROR: f64 = 1e-4;
pub const COMPLEXITY_RATIO: f64 = 15.0;

/// Local behaviour of exact semi-smooth Newton from a warm start on group-ℓ1–ℓ2 proxes.
pub fn newton(cfg: &Config) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4e4557);
    let mut report = Report::new();
    let (mut worst_last, mut worst_iters, mut short) = (0.0_f64, 0, 0);
    let count = cfg.newton_instances();
    for i in 0..count {
        let n = rng.random_range(10..=40);
        let rank = 1 + i % 2;
        let sign = if (i / 2) % 2 == 0 { Sign::Plus } else { Sign::Minus };
        let mut inst = random_instance(&mut rng, HKind::Group, n, rank, sign);
        inst.kappa = rng.random_range(0.05..0.3);
        let pr = RootProblem::new(&inst.metric, &inst.prox, &inst.x, inst.kappa).unwrap();
        let reference = match semismooth_newton(&pr, &NewtonOptions { tol: 1e-14, ..NewtonOptions::default() }) {
            Ok(r) => r.alpha_star,
            Err(e) => {
                report.fail(format!("instance {i}: {e}"));
                continue;
            }
        };
        let floor = ROUNDOFF_FACTOR * f64::EPSILON * residual_scale(&pr, &reference);
        // farther warm starts until three ratios above the roundoff floor are observable
        let mut chosen = None;
        for dist in WARM_DISTANCES {
            let dir = normal_vec(&mut rng, rank);
            let scale = dist * (1.0 + norm2(&reference)) / norm2(&dir);
            let alpha0: Vec<f64> = reference.iter().zip(&dir).map(|(a, d)| a + scale * d).collect();
            let opts = NewtonOptions { tol: 0.0, max_iter: NEWTON_MAX_ITER, eta: 0.0, alpha0: Some(alpha0), fallback: false };
            match semismooth_newton(&pr, &opts) {
                Ok(rep) => {
                    let above = rep.residual_history.iter().take_while(|r| **r > floor).count();
                    let enough = above >= 4;
                    chosen = Some(rep);
                    if enough {
                        break;
                    }
                }
                Err(e) => {
                    report.fail(format!("instance {i} (rank {rank}): {e}"));
                    chosen = None;
                    break;
                }
            }
        }
        let Some(rep) = chosen else { continue };
        let h = &rep.residual_history;
        match h.iter().position(|r| *r <= NEWTON_TARGET) {
            Some(k) if k <= NEWTON_MAX_ITER => worst_iters = worst_iters.max(k),
            _ => report.fail(format!("instance {i}: residual {:.2e} after {} steps", rep.residual, rep.iterations)),
        }
        // ratios that reach below the floor measure roundoff, not convergence
        let above: Vec<f64> = h.iter().copied().take_while(|r| *r > floor).collect();
        let ratios: Vec<f64> = above.windows(2).map(|w| w[1] / w[0]).collect();
        if ratios.len() < 2 {
            report.fail(format!("instance {i}: {} Newton step(s) above the roundoff floor {floor:.1e}", ratios.len()));
            continue;
        }
        let tail = &ratios[ratios.len().saturating_sub(3)..];
        if tail.len() < 3 {
            short += 1;
        }
        let last = tail[tail.len() - 1];
        worst_last = worst_last.max(last);
        if !(tail.windows(2).all(|w| w[0] > w[1]) && last < 0.1) {
            report.fail(format!("instance {i} (rank {rank}): ratio tail {tail:?}"));
        }
    }
    report.note(format!(
        "{count} instances, worst last ratio = {worst_last:.2e}, max steps to {NEWTON_TARGET:e} = {worst_iters}, {short} reached the roundoff floor with a tail shorter than three"
    ));
    report
}

pub const DESK_FAMILIES: [Family; 3] = [Family::LassoGaussian, Family::LassoDiff3d, Family::GroupLasso];

/// Desk-scale race of every solver against cached references.
pub fn desk(cfg: &Config) -> Report {
    let mut report = Report::new();
    let cache = cfg.cache.clone().map(ReferenceCache::new).unwrap_or_else(ReferenceCache::from_env);
    let mut problems = Vec::new();
    for family in DESK_FAMILIES {
        let recipe = ProblemRecipe::desk(family, cfg.seed);
        let generated = match generate(&recipe) {
            Ok(g) => g,
            Err(e) => {
                report.fail(format!("{family:?}: {e}"));
                continue;
            }
        };
        match cache.get_or_compute(&recipe, &generated.spec) {
            Ok((reference, _)) => {
                if reference.meta.approximate {
                    report.fail(format!("{} reference is approximate", family.as_str()));
                }
                problems.push(RaceProblem { spec: generated.spec.with_fstar(reference.fstar), recipe: Some(recipe) });
            }
            Err(e) => report.fail(format!("{} reference: {e}", family.as_str())),
        }
    }
    let opts = SolverOptions { target_error: Some(1e-9), ..SolverOptions::default() };
    let entries = race(&problems, &SolverId::ALL, &opts, cfg.jobs);
    let mut lines = Vec::new();
    for p in &problems {
        let name = &p.spec.name;
        let fstar = p.spec.fstar.unwrap();
        let to_target = |solver: SolverId| {
            entries.iter().find(|e| &e.problem == name && e.solver == solver).and_then(|e| e.outcome.as_ref().ok()).and_then(|r| r.trace.iterations_to(fstar, DESK_COMPARE_ERROR))
        };
        let (sr1, ista) = (to_target(SolverId::ZeroSr1), to_target(SolverId::Ista));
        match (sr1, ista) {
            (Some(a), Some(b)) if a <= b => {}
            _ => report.fail(format!("{name}: 0SR1 reaches {DESK_COMPARE_ERROR:e} at {sr1:?}, ISTA at {ista:?}")),
        }
        lines.push(format!("{name}: 0SR1 {} vs ISTA {} iterations to {DESK_COMPARE_ERROR:e}", fmt_opt(sr1), fmt_opt(ista)));
    }
    for e in &entries {
        match &e.outcome {
            Ok(r) => {
                let err = r.objective_error(e.fstar.unwrap());
                if !(err <= DESK_ERROR) {
                    report.fail(format!("{} {}: error {err:.2e} ({:?})", e.problem, e.solver, r.status));
                }
            }
            Err(msg) => report.fail(format!("{} {}: {msg}", e.problem, e.solver)),
        }
    }
    let worst = entries.iter().filter_map(|e| e.final_error()).fold(f64::NEG_INFINITY, f64::max);
    lines.push(format!("{} runs, worst final error {worst:.2e}", entries.len()));
    report.note(lines.join("; "));
    report
}

fn fmt_opt(v: Option<usize>) -> String {
    v.map_or_else(|| "never".into(), |k| k.to_string())
}

/// Best-of-`reps` wall time of the exact ℓ1 scaled prox in dimension `n`.
pub fn l1_exact_seconds(rng: &mut ChaCha8Rng, n: usize, reps: usize) -> f64 {
    let metric = random_metric(rng, n, 1, Sign::Plus, None);
    let h = ProxOperator::l1(0.5).unwrap();
    let x = normal_vec(rng, n);
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            let out = scaled_prox(&metric, &h, &x, 1.0, &RootFinder::Exact).expect("exact ℓ1 prox");
            std::hint::black_box(out);
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Timing ratio of the exact ℓ1 path between `N = 10⁵` and `N = 10⁴`.
pub fn complexity(cfg: &Config) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x434f4d50);
    let mut report = Report::new();
    let small = l1_exact_seconds(&mut rng, 10_000, 9);
    let large = l1_exact_seconds(&mut rng, 100_000, 9);
    let ratio = large / small;
    if !(ratio <= COMPLEXITY_RATIO) {
        report.fail(format!("ratio {ratio:.2} > {COMPLEXITY_RATIO}"));
    }
    report.note(format!("t(1e4) = {:.3} ms, t(1e5) = {:.3} ms, ratio {ratio:.2} (limit {COMPLEXITY_RATIO})", small * 1e3, large * 1e3));
    report
}
