use nalgebra::DVector;

/// Largest dimension accepted by the enumerating projections.
pub const MAX_QP_DIM: usize = 12;

/// `argmin ½Σdᵢ(zᵢ − xᵢ)²` over `{z ≥ 0, Σz = r}` by enumerating supports and checking KKT.
///
/// On support `S`: `zᵢ = xᵢ − ν/dᵢ` with `ν` fixed by `Σz = r`; off `S` the multiplier
/// `ν − dᵢxᵢ` must be nonnegative.
pub fn weighted_simplex_active_set(x: &DVector<f64>, d: &DVector<f64>, r: f64, tol: f64) -> Option<DVector<f64>> {
    let n = x.len();
    if n > MAX_QP_DIM {
        return None;
    }
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let on = |i: usize| mask & (1 << i) != 0;
        let (sx, sw) = (0..n).filter(|&i| on(i)).fold((0.0, 0.0), |(a, b), i| (a + x[i], b + 1.0 / d[i]));
        let nu = (sx - r) / sw;
        let z = DVector::from_fn(n, |i, _| if on(i) { x[i] - nu / d[i] } else { 0.0 });
        let primal = (0..n).all(|i| !on(i) || z[i] >= -tol);
        let dual = (0..n).all(|i| on(i) || nu - d[i] * x[i] >= -tol);
        if primal && dual {
            let val: f64 = (0..n).map(|i| 0.5 * d[i] * (z[i] - x[i]).powi(2)).sum();
            if best.as_ref().is_none_or(|(b, _)| val < *b) {
                best = Some((val, z.map(|v| v.max(0.0))));
            }
        }
    }
    best.map(|(_, z)| z)
}

/// `argmin ½Σdᵢ(zᵢ − xᵢ)²` over `{‖z‖₁ ≤ r}`: `x` itself when feasible, otherwise the
/// signed weighted simplex projection of `|x|`.
pub fn weighted_l1_ball_active_set(x: &DVector<f64>, d: &DVector<f64>, r: f64, tol: f64) -> Option<DVector<f64>> {
    if x.iter().map(|v| v.abs()).sum::<f64>() <= r {
        return Some(x.clone());
    }
    let p = weighted_simplex_active_set(&x.abs(), d, r, tol)?;
    Some(DVector::from_fn(x.len(), |i, _| p[i] * x[i].signum()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::project_simplex;

    #[test]
    fn unit_weights_match_sorting_projection() {
        let x = DVector::from_vec(vec![0.9, -0.2, 0.4, 1.3, 0.05]);
        let d = DVector::from_element(5, 1.0);
        let a = weighted_simplex_active_set(&x, &d, 1.0, 1e-14).unwrap();
        let b = project_simplex(&x, 1.0);
        assert!((a - b).amax() < 1e-14);
    }

    #[test]
    fn ball_interior_is_fixed() {
        let x = DVector::from_vec(vec![0.1, -0.2]);
        let d = DVector::from_vec(vec![1.0, 3.0]);
        assert_eq!(weighted_l1_ball_active_set(&x, &d, 1.0, 1e-14).unwrap(), x);
        let y = DVector::from_vec(vec![2.0, 0.0]);
        let p = weighted_l1_ball_active_set(&y, &d, 1.0, 1e-14).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] == 0.0);
    }
}
