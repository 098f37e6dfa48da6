use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{check_dim, DenseMatrix, LinearOperator};
use crate::prox::ProxOperator;

/// A differentiable function with Lipschitz gradient.
pub trait SmoothFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Writes `∇f(x)` into `grad` and returns `f(x)`.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

/// `f(x) = ½‖Ax − b‖²`.
pub struct LeastSquares {
    a: Arc<dyn LinearOperator>,
    b: Vec<f64>,
}

impl LeastSquares {
    pub fn new(a: Arc<dyn LinearOperator>, b: Vec<f64>) -> Result<Self> {
        check_dim(a.rows(), b.len())?;
        Ok(Self { a, b })
    }

    pub fn operator(&self) -> &dyn LinearOperator {
        self.a.as_ref()
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.b.len()];
        self.a.apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        r
    }
}

impl SmoothFunction for LeastSquares {
    fn dim(&self) -> usize {
        self.a.cols()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r = self.residual(x);
        0.5 * r.iter().map(|v| v * v).sum::<f64>()
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let r = self.residual(x);
        self.a.apply_transpose(&r, grad);
        0.5 * r.iter().map(|v| v * v).sum::<f64>()
    }
}

/// `f(x) = ½xᵀQx − cᵀx` with `Q` symmetric.
pub struct Quadratic {
    q: DenseMatrix,
    c: Vec<f64>,
}

impl Quadratic {
    pub fn new(q: DenseMatrix, c: Vec<f64>) -> Result<Self> {
        if q.rows() != q.cols() {
            return Err(Error::InvalidArgument("Q must be square".into()));
        }
        check_dim(q.rows(), c.len())?;
        Ok(Self { q, c })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn linear_term(&self) -> &[f64] {
        &self.c
    }
}

impl SmoothFunction for Quadratic {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut qx = vec![0.0; x.len()];
        self.q.apply(x, &mut qx);
        x.iter().zip(&qx).zip(&self.c).map(|((xi, qi), ci)| 0.5 * xi * qi - ci * xi).sum()
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.q.apply(x, grad);
        let v = x.iter().zip(grad.iter()).zip(&self.c).map(|((xi, qi), ci)| 0.5 * xi * qi - ci * xi).sum();
        for (g, c) in grad.iter_mut().zip(&self.c) {
            *g -= c;
        }
        v
    }
}

/// `min f(x) + h(x)` with optional curvature constants and reference optimum.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub f: Arc<dyn SmoothFunction>,
    pub h: ProxOperator,
    pub x0: Vec<f64>,
    /// Strong-convexity modulus of `f`.
    pub mu: Option<f64>,
    /// Lipschitz constant of `∇f`.
    pub lipschitz: Option<f64>,
    pub fstar: Option<f64>,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("h", &self.h.name())
            .field("mu", &self.mu)
            .field("lipschitz", &self.lipschitz)
            .field("fstar", &self.fstar)
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(name: impl Into<String>, f: Arc<dyn SmoothFunction>, h: ProxOperator) -> Self {
        let n = f.dim();
        Self { name: name.into(), f, h, x0: vec![0.0; n], mu: None, lipschitz: None, fstar: None }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = Some(mu);
        self
    }

    pub fn with_fstar(mut self, fstar: f64) -> Self {
        self.fstar = Some(fstar);
        self
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Result<Self> {
        check_dim(self.dim(), x0.len())?;
        self.x0 = x0;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    /// `F(x) = f(x) + h(x)`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.f.value(x) + self.h.eval(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradients_match_finite_differences() {
        let a = DenseMatrix::from_fn(4, 3, |i, j| ((i + 2 * j) as f64).sin()).unwrap();
        let ls = LeastSquares::new(Arc::new(a), vec![0.5, -1.0, 0.2, 0.0]).unwrap();
        let q = DenseMatrix::from_row_major(3, 3, vec![2.0, 0.5, 0.0, 0.5, 1.0, 0.1, 0.0, 0.1, 3.0]).unwrap();
        let quad = Quadratic::new(q, vec![1.0, -1.0, 0.5]).unwrap();
        let fs: [&dyn SmoothFunction; 2] = [&ls, &quad];
        let x = [0.3, -0.8, 1.1];
        for f in fs {
            let mut g = [0.0; 3];
            let v = f.value_grad(&x, &mut g);
            assert!((v - f.value(&x)).abs() < 1e-14);
            for i in 0..3 {
                let mut xp = x;
                xp[i] += 1e-6;
                let mut xm = x;
                xm[i] -= 1e-6;
                let fd = (f.value(&xp) - f.value(&xm)) / 2e-6;
                assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1.0));
            }
        }
    }
}
