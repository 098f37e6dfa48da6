use nalgebra::{DMatrix, DVector};

use crate::func::ScalarPieces;

/// Largest dimension accepted by [`active_set_prox`].
pub const MAX_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Piece {
    /// `zᵢ` pinned at a kink or domain end.
    Fixed(f64),
    /// `zᵢ` strictly inside the linear piece `(lo, hi)` with the given slope.
    Free { lo: f64, hi: f64, slope: f64 },
}

fn pieces(p: &ScalarPieces) -> Vec<Piece> {
    let mut bounds = vec![p.lo];
    bounds.extend(p.kinks.iter().copied().filter(|k| *k > p.lo && *k < p.hi));
    bounds.push(p.hi);
    let mut out = Vec::new();
    for w in 0..bounds.len() - 1 {
        let (lo, hi) = (bounds[w], bounds[w + 1]);
        let mid = if lo.is_finite() && hi.is_finite() { 0.5 * (lo + hi) } else if lo.is_finite() { lo + 1.0 } else if hi.is_finite() { hi - 1.0 } else { 0.0 };
        let j = p.kinks.iter().filter(|k| **k < mid).count();
        out.push(Piece::Free { lo, hi, slope: p.slopes[j] });
    }
    out.extend(bounds.iter().copied().filter(|b| b.is_finite()).map(Piece::Fixed));
    out
}

/// Exact `argmin_z κΣφ(zᵢ) + ½(z − x)ᵀV(z − x)` for piecewise-linear `φ` by enumerating
/// which piece every coordinate lies on and solving each reduced linear system.
///
/// Returns `None` when `n > MAX_DIM` or no combination satisfies the optimality conditions
/// within `tol`.
pub fn active_set_prox(v: &DMatrix<f64>, phi: &ScalarPieces, x: &DVector<f64>, kappa: f64, tol: f64) -> Option<DVector<f64>> {
    let n = x.len();
    if n > MAX_DIM {
        return None;
    }
    let choices = pieces(phi);
    let total = choices.len().pow(n as u32);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for code in 0..total {
        let mut c = code;
        let combo: Vec<Piece> = (0..n)
            .map(|_| {
                let p = choices[c % choices.len()];
                c /= choices.len();
                p
            })
            .collect();
        let free: Vec<usize> = (0..n).filter(|&i| matches!(combo[i], Piece::Free { .. })).collect();
        let mut z = DVector::zeros(n);
        for i in 0..n {
            if let Piece::Fixed(t) = combo[i] {
                z[i] = t;
            }
        }
        if !free.is_empty() {
            // V_FF z_F = (Vx)_F − V_FK z_K − κ g_F
            let vx = v * x;
            let m = free.len();
            let a = DMatrix::from_fn(m, m, |r, s| v[(free[r], free[s])]);
            let rhs = DVector::from_fn(m, |r, _| {
                let i = free[r];
                let Piece::Free { slope, .. } = combo[i] else { unreachable!() };
                let fixed: f64 = (0..n).filter(|j| !free.contains(j)).map(|j| v[(i, j)] * z[j]).sum();
                vx[i] - fixed - kappa * slope
            });
            let sol = a.lu().solve(&rhs)?;
            for (r, &i) in free.iter().enumerate() {
                z[i] = sol[r];
            }
        }
        // primal feasibility of the pieces and the dual condition −V(z − x)/κ ∈ ∂φ(z)
        let g = -(v * (&z - x)) / kappa;
        let ok = (0..n).all(|i| match combo[i] {
            Piece::Free { lo, hi, .. } => z[i] >= lo - tol && z[i] <= hi + tol,
            Piece::Fixed(_) => {
                let (lo, hi) = phi.subdifferential(z[i], 1e-14);
                g[i] >= lo - tol && g[i] <= hi + tol
            }
        });
        if ok {
            let val = kappa * z.iter().map(|zi| phi_eval(phi, *zi)).sum::<f64>() + 0.5 * (&z - x).dot(&(v * (&z - x)));
            if best.as_ref().is_none_or(|(b, _)| val < *b) {
                best = Some((val, z));
            }
        }
    }
    best.map(|(_, z)| z)
}

fn phi_eval(p: &ScalarPieces, z: f64) -> f64 {
    // φ(0) = 0 convention: integrate slopes from 0
    let slope_at = |t: f64| p.slopes[p.kinks.iter().filter(|k| **k < t).count()];
    let mut val = 0.0;
    let (a, b, sign) = if z >= 0.0 { (0.0, z, 1.0) } else { (z, 0.0, -1.0) };
    let mut cuts: Vec<f64> = p.kinks.iter().copied().filter(|k| *k > a && *k < b).collect();
    cuts.insert(0, a);
    cuts.push(b);
    for w in cuts.windows(2) {
        val += slope_at(0.5 * (w[0] + w[1])) * (w[1] - w[0]);
    }
    sign * val
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composite::scaled_prox_bruteforce;
    use crate::func::Func;

    #[test]
    fn matches_iterative_oracle_on_rank_one_metrics() {
        let d = DVector::from_vec(vec![1.0, 2.0, 0.5, 1.5]);
        let u = DVector::from_vec(vec![0.4, -0.3, 0.2, 0.5]);
        let v = DMatrix::from_diagonal(&d) + &u * u.transpose();
        let x = DVector::from_vec(vec![1.0, -0.4, 0.05, -2.0]);
        for f in [Func::L1 { lambda: 0.3 }, Func::Hinge { lambda: 0.6 }, Func::Box { lo: -0.5, hi: 0.7 }, Func::nonneg()] {
            let exact = active_set_prox(&v, &f.scalar_pieces().unwrap(), &x, 1.0, 1e-12).unwrap();
            let iter = scaled_prox_bruteforce(&v, &f, &x, 1.0, 1e-13).x;
            assert!((exact - iter).amax() < 1e-9, "{f:?}");
        }
    }

    #[test]
    fn phi_integrates_slopes() {
        let p = Func::L1 { lambda: 2.0 }.scalar_pieces().unwrap();
        assert_eq!(phi_eval(&p, -1.5), 3.0);
        let h = Func::Hinge { lambda: 2.0 }.scalar_pieces().unwrap();
        assert_eq!(phi_eval(&h, -1.5), 0.0);
        assert_eq!(phi_eval(&h, 1.5), 3.0);
    }
}
