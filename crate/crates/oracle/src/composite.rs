use nalgebra::{DMatrix, DVector};

use crate::func::Func;

#[derive(Debug, Clone)]
pub struct Minimized {
    pub x: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
    /// `‖x − prox_{h/L}(x − ∇f(x)/L)‖∞` at the returned point.
    pub step_norm: f64,
}

/// Minimizes `f + h` for smooth `f` given as `x ↦ (f(x), ∇f(x))` with gradient Lipschitz
/// constant `lipschitz`.
///
/// `accelerate` selects FISTA with gradient-based adaptive restart; otherwise plain ISTA. Stops when
/// the step `‖x − prox(x − ∇f/L)‖∞` drops below `tol` or after `max_iter` iterations.
pub fn minimize<F>(f: F, lipschitz: f64, h: &Func, x0: DVector<f64>, tol: f64, max_iter: usize, accelerate: bool) -> Minimized
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    let step = 1.0 / lipschitz;
    let prox_step = |y: &DVector<f64>, g: &DVector<f64>| h.prox(&(y - g * step), step);
    let obj = |x: &DVector<f64>| f(x).0 + h.eval(x);
    let mut x = x0.clone();
    let mut y = x0;
    let mut t: f64 = 1.0;
    let mut iterations = 0;
    while iterations < max_iter {
        let (_, g) = f(&y);
        let z = prox_step(&y, &g);
        let moved = (&z - &y).amax();
        iterations += 1;
        if !accelerate {
            x = z;
            y = x.clone();
            if moved < tol {
                break;
            }
            continue;
        }
        if moved < tol {
            let (_, gz) = f(&z);
            if (prox_step(&z, &gz) - &z).amax() < tol {
                x = z;
                break;
            }
        }
        // gradient-based adaptive restart
        if (&y - &z).dot(&(&z - &x)) > 0.0 {
            t = 1.0;
            y = z.clone();
            x = z;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &z + (&z - &x) * ((t - 1.0) / t_next);
        x = z;
        t = t_next;
    }
    let (_, g) = f(&x);
    let step_norm = (prox_step(&x, &g) - &x).amax();
    Minimized { value: obj(&x), x, iterations, step_norm }
}

/// `argmin_z ½zᵀQz − cᵀz + h(z)` for symmetric positive definite `Q`.
pub fn minimize_quadratic(q: &DMatrix<f64>, c: &DVector<f64>, h: &Func, tol: f64, max_iter: usize) -> Minimized {
    let l = q.clone().symmetric_eigen().eigenvalues.max();
    let f = |z: &DVector<f64>| {
        let qz = q * z;
        (0.5 * z.dot(&qz) - c.dot(z), qz - c)
    };
    let x0 = h.prox(&DVector::zeros(c.len()), 1.0);
    minimize(f, l, h, x0, tol, max_iter, true)
}

/// `argmin_z κh(z) + ½(z − x)ᵀV(z − x)`, the proximal point of `κh` in the metric `V`.
pub fn scaled_prox_bruteforce(v: &DMatrix<f64>, h: &Func, x: &DVector<f64>, kappa: f64, tol: f64) -> Minimized {
    let q = v / kappa;
    let c = &q * x;
    minimize_quadratic(&q, &c, h, tol, 2_000_000)
}

/// `argmin_x ½‖Ax − b‖² + h(x)` from `x = 0`.
pub fn least_squares_reference(a: &DMatrix<f64>, b: &DVector<f64>, h: &Func, tol: f64, max_iter: usize, accelerate: bool) -> Minimized {
    let l = (a.transpose() * a).symmetric_eigen().eigenvalues.max();
    let f = |x: &DVector<f64>| {
        let r = a * x - b;
        (0.5 * r.norm_squared(), a.transpose() * r)
    };
    minimize(f, l, h, DVector::zeros(a.ncols()), tol, max_iter, accelerate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_quadratic_solves_linear_system() {
        let q = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let c = DVector::from_vec(vec![1.0, -1.0]);
        let m = minimize_quadratic(&q, &c, &Func::Zero, 1e-14, 100_000);
        let exact = q.lu().solve(&c).unwrap();
        assert!((m.x - exact).amax() < 1e-12);
    }

    #[test]
    fn diagonal_metric_l1_is_soft_threshold() {
        let v = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 4.0]));
        let x = DVector::from_vec(vec![1.0, -0.2, 0.5]);
        let m = scaled_prox_bruteforce(&v, &Func::L1 { lambda: 0.5 }, &x, 1.0, 1e-14);
        let expect = [0.5, 0.0, 0.375];
        for (got, want) in m.x.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got}");
        }
    }

    #[test]
    fn ista_and_fista_agree() {
        let a = DMatrix::from_fn(6, 4, |i, j| ((i * 4 + j) as f64 * 0.7).sin());
        let b = DVector::from_fn(6, |i, _| (i as f64).cos());
        let h = Func::L1 { lambda: 0.1 };
        let slow = least_squares_reference(&a, &b, &h, 1e-13, 1_000_000, false);
        let fast = least_squares_reference(&a, &b, &h, 1e-13, 1_000_000, true);
        assert!((slow.value - fast.value).abs() < 1e-12);
        assert!((slow.x - fast.x).amax() < 1e-9);
    }
}
