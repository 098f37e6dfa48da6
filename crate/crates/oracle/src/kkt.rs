use nalgebra::{DMatrix, DVector};

use crate::func::ScalarPieces;

/// `maxᵢ dist(−(V(z − x))ᵢ/κ, ∂φ(zᵢ))` for separable piecewise-linear `h = Σφ(zᵢ)`.
///
/// Zero exactly when `z = prox^V_{κh}(x)`.
pub fn separable_prox_residual(v: &DMatrix<f64>, phi: &ScalarPieces, x: &DVector<f64>, z: &DVector<f64>, kappa: f64, tol: f64) -> f64 {
    let g = -(v * (z - x)) / kappa;
    (0..z.len())
        .map(|i| {
            let (lo, hi) = phi.subdifferential(z[i], tol);
            if g[i] < lo {
                lo - g[i]
            } else if g[i] > hi {
                g[i] - hi
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// `‖∇f(x) + ξ‖∞` minimized over `ξ ∈ ∂h(x)` for separable piecewise-linear `h`: the
/// distance of `0` from `∂F(x)`.
pub fn separable_stationarity(grad: &DVector<f64>, phi: &ScalarPieces, x: &DVector<f64>, tol: f64) -> f64 {
    (0..x.len())
        .map(|i| {
            let (lo, hi) = phi.subdifferential(x[i], tol);
            let target = -grad[i];
            if target < lo {
                lo - target
            } else if target > hi {
                target - hi
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::Func;

    #[test]
    fn soft_threshold_has_zero_residual() {
        let phi = Func::L1 { lambda: 0.5 }.scalar_pieces().unwrap();
        let v = DMatrix::identity(2, 2);
        let x = DVector::from_vec(vec![1.0, 0.2]);
        let z = DVector::from_vec(vec![0.5, 0.0]);
        assert_eq!(separable_prox_residual(&v, &phi, &x, &z, 1.0, 1e-14), 0.0);
        let wrong = DVector::from_vec(vec![0.6, 0.0]);
        assert!((separable_prox_residual(&v, &phi, &x, &wrong, 1.0, 1e-14) - 0.1).abs() < 1e-14);
        let grad = DVector::from_vec(vec![-0.5, 0.3]);
        assert_eq!(separable_stationarity(&grad, &phi, &z, 1e-14), 0.0);
    }
}
