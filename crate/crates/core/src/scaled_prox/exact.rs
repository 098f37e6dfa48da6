use super::{RootMethod, RootProblem, RootSolverReport};
use crate::error::{Error, Result};
use crate::prox::PiecewiseAffineDescriptor;

struct Coord {
    x: f64,
    u: f64,
    d: f64,
    desc: PiecewiseAffineDescriptor,
}

impl Coord {
    fn arg(&self, s: f64, alpha: f64) -> f64 {
        self.x - s * alpha * self.u / self.d
    }
}

fn eval(coords: &[Coord], s: f64, alpha: f64) -> f64 {
    alpha + coords.iter().map(|c| c.u * (c.x - c.desc.eval(c.arg(s, alpha)))).sum::<f64>()
}

fn contribution(c: &Coord, s: f64, j: usize) -> (f64, f64) {
    let (aj, bj) = (c.desc.slopes[j], c.desc.intercepts[j]);
    (s * aj * c.u * c.u / c.d, c.u * ((1.0 - aj) * c.x - bj))
}

/// Index of the first event at which `L ≥ 0`, tracking `L(α) = Aα + B` incrementally;
/// `events.len()` when `L < 0` at every event.
fn sweep(coords: &[Coord], s: f64, events: &[(f64, u32)]) -> Option<usize> {
    // α → −∞ puts zᵢ at +∞ when suᵢ > 0 and at −∞ otherwise
    let mut seg: Vec<usize> = coords.iter().map(|c| if s * c.u > 0.0 { c.desc.breakpoints.len() } else { 0 }).collect();
    let (mut a, mut b) = (1.0, 0.0);
    for (c, &j) in coords.iter().zip(&seg) {
        let (da, db) = contribution(c, s, j);
        a += da;
        b += db;
    }
    let mut k = 0;
    while k < events.len() {
        let t = events[k].0;
        if !t.is_finite() {
            return None;
        }
        if a * t + b >= 0.0 {
            return Some(k);
        }
        while k < events.len() && events[k].0 == t {
            let i = events[k].1 as usize;
            let c = &coords[i];
            let old = seg[i];
            let new = if s * c.u > 0.0 { old.checked_sub(1)? } else { old + 1 };
            if new > c.desc.breakpoints.len() {
                return None;
            }
            let (oa, ob) = contribution(c, s, old);
            let (na, nb) = contribution(c, s, new);
            a += na - oa;
            b += nb - ob;
            seg[i] = new;
            k += 1;
        }
    }
    Some(k)
}

fn verified(coords: &[Coord], s: f64, events: &[(f64, u32)], k: usize, steps: &mut usize) -> bool {
    let left_ok = k == 0 || {
        *steps += 1;
        eval(coords, s, events[k - 1].0) < 0.0
    };
    let right_ok = k == events.len() || {
        *steps += 1;
        eval(coords, s, events[k].0) >= 0.0
    };
    left_ok && right_ok
}

fn binary_search(coords: &[Coord], s: f64, events: &[(f64, u32)], steps: &mut usize) -> usize {
    let (mut lo, mut hi) = (0usize, events.len());
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        *steps += 1;
        if eval(coords, s, events[mid].0) >= 0.0 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Exact root of `L` for a rank-one metric and a separable prox with piecewise-affine
/// coordinates.
///
/// The breakpoints in `α` are sorted once and swept left to right while the slope and
/// intercept of the affine piece of `L` are updated per crossing; the bracketing interval
/// found this way is confirmed by two direct evaluations of `L` (binary search over the
/// breakpoints otherwise).
///
/// On the bracketing segment every coordinate prox is affine, `zᵢ ↦ aᵢzᵢ + bᵢ`, and the root
/// is `α★ = −B/A` with `A = 1 + sΣaᵢuᵢ²/dᵢ`, `B = Σuᵢ((1 − aᵢ)xᵢ − bᵢ)`.
pub fn exact_piecewise_affine(problem: &RootProblem<'_>) -> Result<RootSolverReport> {
    if problem.rank() != 1 {
        return Err(Error::NotApplicable { method: RootMethod::Exact, reason: format!("rank {} ≠ 1", problem.rank()) });
    }
    let metric = problem.metric();
    let s = metric.signs()[0].value();
    let u = &metric.factors()[0];
    let d = metric.diag();
    let x = problem.x();
    let kappa = problem.kappa();

    let mut coords = Vec::new();
    for i in 0..x.len() {
        if u[i] == 0.0 {
            continue;
        }
        let desc = problem.prox().descriptor(d[i], kappa).ok_or(Error::MissingDescriptor)?;
        coords.push(Coord { x: x[i], u: u[i], d: d[i], desc });
    }

    let mut events: Vec<(f64, u32)> = coords
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.desc.breakpoints.iter().map(move |t| (s * c.d * (c.x - t) / c.u, i as u32)))
        .collect();
    events.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut steps = 0;

    let lo = match sweep(&coords, s, &events) {
        Some(k) if verified(&coords, s, &events, k, &mut steps) => k,
        _ => {
            log::debug!("exact root: sweep bracket rejected, binary search");
            binary_search(&coords, s, &events, &mut steps)
        }
    };
    if let Some(&(b, _)) = events.get(lo) {
        if eval(&coords, s, b) == 0.0 {
            return problem.report(vec![b], steps, RootMethod::Exact);
        }
    }
    let left = lo.checked_sub(1).map(|k| events[k].0);
    let right = events.get(lo).map(|e| e.0);
    let probe = match (left, right) {
        (Some(a), Some(b)) => 0.5 * (a + b),
        (Some(a), None) => a + 1.0,
        (None, Some(b)) => b - 1.0,
        (None, None) => 0.0,
    };

    let (mut a_sum, mut b_sum) = (1.0, 0.0);
    for c in &coords {
        let j = c.desc.segment(c.arg(s, probe));
        let (aj, bj) = (c.desc.slopes[j], c.desc.intercepts[j]);
        a_sum += s * aj * c.u * c.u / c.d;
        b_sum += c.u * ((1.0 - aj) * c.x - bj);
    }
    assert!(a_sum > 0.0, "root map slope must be positive for a positive-definite metric");
    let mut alpha = -b_sum / a_sum;
    if let Some(a) = left {
        alpha = alpha.max(a);
    }
    if let Some(b) = right {
        alpha = alpha.min(b);
    }
    problem.report(vec![alpha], steps, RootMethod::Exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{LowRankMetric, Sign};
    use crate::prox::ProxOperator;

    #[test]
    fn single_affine_segment() {
        // only u₁ ≠ 0 and x₁ far inside the linear region of the soft threshold
        let m = LowRankMetric::rank_one(vec![1.0, 1.0], vec![0.5, 0.0], Sign::Plus).unwrap();
        let h = ProxOperator::l1(0.1).unwrap();
        let x = [5.0, 1.0];
        let pr = RootProblem::new(&m, &h, &x, 1.0).unwrap();
        let rep = exact_piecewise_affine(&pr).unwrap();
        // L(α) = 0.5·0.1 + α(1 + 0.25) in the region x − 0.5α > 0.1
        assert!((rep.alpha_star[0] + 0.05 / 1.25).abs() < 1e-15);
        assert!(rep.residual < 1e-15);
    }

    #[test]
    fn rejects_non_separable() {
        let m = LowRankMetric::rank_one(vec![1.0, 1.0], vec![0.5, 0.1], Sign::Plus).unwrap();
        let h = ProxOperator::simplex(1.0).unwrap();
        let pr = RootProblem::new(&m, &h, &[0.2, 0.3], 1.0).unwrap();
        assert!(matches!(exact_piecewise_affine(&pr), Err(Error::MissingDescriptor)));
    }
}
