use super::{RootMethod, RootProblem, RootSolverReport};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};

struct Block {
    x: Vec<f64>,
    u: Vec<f64>,
    d: f64,
    t: f64,
}

impl Block {
    fn shifted(&self, s: f64, alpha: f64) -> Vec<f64> {
        self.x.iter().zip(&self.u).map(|(x, u)| x - s * alpha * u / self.d).collect()
    }
}

/// `(L(α), L'(α))` on the smooth piece containing `α`.
fn eval(blocks: &[Block], s: f64, alpha: f64) -> (f64, f64) {
    let mut l = alpha;
    let mut dl = 1.0;
    for b in blocks {
        let y = b.shifted(s, alpha);
        let ny = norm2(&y);
        let active = ny > b.t;
        let scale = if active { 1.0 - b.t / ny } else { 0.0 };
        l += b.x.iter().zip(&b.u).zip(&y).map(|((x, u), yi)| u * (x - scale * yi)).sum::<f64>();
        if active {
            let uy = dot(&b.u, &y);
            let uu = dot(&b.u, &b.u);
            dl += s * (scale * uu + b.t * uy * uy / (ny * ny * ny)) / b.d;
        }
    }
    (l, dl)
}

/// Real roots `α` of `‖d_b x_b − sαu_b‖² = (κλ)²`, i.e. the values where block `b` enters or
/// leaves the active set of the block soft-threshold.
pub fn group_breakpoints(x_b: &[f64], u_b: &[f64], d_b: f64, kappa_lambda: f64, s: f64) -> Vec<f64> {
    let a = dot(u_b, u_b);
    if a == 0.0 {
        return Vec::new();
    }
    let hb = -s * d_b * dot(x_b, u_b);
    let c = d_b * d_b * dot(x_b, x_b) - kappa_lambda * kappa_lambda;
    let disc = hb * hb - a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    // numerically stable pair of roots of aα² + 2hbα + c
    let q = -(hb + hb.signum() * sq);
    if q == 0.0 {
        return vec![0.0];
    }
    let (r1, r2) = (q / a, c / q);
    if r1 <= r2 {
        vec![r1, r2]
    } else {
        vec![r2, r1]
    }
}

/// Rank-one scaled prox of `λ‖·‖₁,₂` with block-constant `P`.
///
/// The breakpoints of `L` are the quadratic roots from [`group_breakpoints`]. After sorting
/// them, a binary search finds the segment where `L` changes sign; `L` is smooth there and a
/// bracketed scalar Newton iteration finishes the job.
pub fn group_path(problem: &RootProblem<'_>) -> Result<RootSolverReport> {
    let not_applicable = |reason: &str| Error::NotApplicable { method: RootMethod::GroupPath, reason: reason.into() };
    if problem.rank() != 1 {
        return Err(not_applicable("rank ≠ 1"));
    }
    let (lambda, partition) = problem.prox().group_params().ok_or_else(|| not_applicable("not a group ℓ1–ℓ2 penalty"))?;
    let metric = problem.metric();
    let dvals = partition.block_values(metric.diag())?;
    let s = metric.signs()[0].value();
    let u = &metric.factors()[0];
    let x = problem.x();
    let kl = problem.kappa() * lambda;

    let blocks: Vec<Block> = partition
        .ranges()
        .iter()
        .zip(&dvals)
        .filter(|(r, _)| u[(*r).clone()].iter().any(|&v| v != 0.0))
        .map(|(r, &d)| Block { x: x[r.clone()].to_vec(), u: u[r.clone()].to_vec(), d, t: kl / d })
        .collect();

    let mut cands: Vec<f64> = blocks.iter().flat_map(|b| group_breakpoints(&b.x, &b.u, b.d, kl, s)).collect();
    cands.sort_unstable_by(f64::total_cmp);
    cands.dedup();

    let mut steps = 0;
    let (mut lo_i, mut hi_i) = (0usize, cands.len());
    while lo_i < hi_i {
        let mid = lo_i + (hi_i - lo_i) / 2;
        let (l, _) = eval(&blocks, s, cands[mid]);
        steps += 1;
        if l == 0.0 {
            return problem.report(vec![cands[mid]], steps, RootMethod::GroupPath);
        }
        if l > 0.0 {
            hi_i = mid;
        } else {
            lo_i = mid + 1;
        }
    }
    let bound = problem.monotone_bound()?.expect("rank-one metrics have a monotonicity modulus");
    let mut lo = lo_i.checked_sub(1).map_or(-bound, |k| cands[k]);
    let mut hi = cands.get(lo_i).copied().unwrap_or(bound);
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }

    let mut alpha = 0.5 * (lo + hi);
    let mut history = Vec::new();
    for _ in 0..200 {
        let (l, dl) = eval(&blocks, s, alpha);
        history.push(l.abs());
        steps += 1;
        if l == 0.0 {
            break;
        }
        if l > 0.0 {
            hi = alpha;
        } else {
            lo = alpha;
        }
        let newton = alpha - l / dl;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - alpha).abs() <= 1e-15 * alpha.abs().max(1e-300) || hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()) {
            alpha = next;
            break;
        }
        alpha = next;
    }
    let mut rep = problem.report(vec![alpha], steps, RootMethod::GroupPath)?;
    rep.residual_history = history;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn breakpoints_of_unit_example() {
        let bps = group_breakpoints(&[1.0, 0.0], &[1.0, 0.0], 1.0, 0.5, 1.0);
        assert_eq!(bps.len(), 2);
        assert!((bps[0] - 0.5).abs() < 1e-15 && (bps[1] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn zero_direction_has_no_breakpoints() {
        assert!(group_breakpoints(&[1.0, 0.0], &[0.0, 0.0], 1.0, 0.5, 1.0).is_empty());
    }
}
