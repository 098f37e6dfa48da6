use nalgebra::{DMatrix, DVector};

/// Feasibility slack used by [`Func::eval`].
pub const FEAS_TOL: f64 = 1e-9;

/// Convex functions with a Euclidean prox, implemented from first principles.
#[derive(Debug, Clone, PartialEq)]
pub enum Func {
    Zero,
    /// `λ‖z‖₁`
    L1 { lambda: f64 },
    /// Indicator of `[lo, hi]ⁿ`.
    Box { lo: f64, hi: f64 },
    /// `λ Σ max(0, zᵢ)`
    Hinge { lambda: f64 },
    /// Indicator of `{z ≥ 0, Σz = radius}`.
    Simplex { radius: f64 },
    /// Indicator of `{‖z‖₁ ≤ radius}`.
    L1Ball { radius: f64 },
    /// `λ Σ_b ‖z_b‖₂` over consecutive blocks of the given sizes.
    Group { lambda: f64, sizes: Vec<usize> },
    /// Indicator of `{Az = b}` (A with full row rank).
    Affine { a: DMatrix<f64>, b: DVector<f64> },
}

impl Func {
    pub fn nonneg() -> Self {
        Func::Box { lo: 0.0, hi: f64::INFINITY }
    }

    pub fn is_separable(&self) -> bool {
        matches!(self, Func::Zero | Func::L1 { .. } | Func::Box { .. } | Func::Hinge { .. })
    }

    pub fn eval(&self, z: &DVector<f64>) -> f64 {
        let ind = |ok: bool| if ok { 0.0 } else { f64::INFINITY };
        match self {
            Func::Zero => 0.0,
            Func::L1 { lambda } => lambda * z.iter().map(|v| v.abs()).sum::<f64>(),
            Func::Box { lo, hi } => ind(z.iter().all(|&v| v >= lo - FEAS_TOL && v <= hi + FEAS_TOL)),
            Func::Hinge { lambda } => lambda * z.iter().map(|v| v.max(0.0)).sum::<f64>(),
            Func::Simplex { radius } => {
                ind(z.iter().all(|&v| v >= -FEAS_TOL) && (z.sum() - radius).abs() <= FEAS_TOL * radius.max(1.0))
            }
            Func::L1Ball { radius } => ind(z.iter().map(|v| v.abs()).sum::<f64>() <= radius + FEAS_TOL * radius.max(1.0)),
            Func::Group { lambda, sizes } => {
                let mut start = 0;
                let mut s = 0.0;
                for &len in sizes {
                    s += z.rows(start, len).norm();
                    start += len;
                }
                lambda * s
            }
            Func::Affine { a, b } => ind((a * z - b).amax() <= 1e-8 * b.amax().max(1.0)),
        }
    }

    /// `argmin_z t·h(z) + ½‖z − v‖²`.
    pub fn prox(&self, v: &DVector<f64>, t: f64) -> DVector<f64> {
        match self {
            Func::Zero => v.clone(),
            Func::L1 { lambda } => v.map(|x| soft(x, t * lambda)),
            Func::Box { lo, hi } => v.map(|x| x.max(*lo).min(*hi)),
            Func::Hinge { lambda } => {
                let c = t * lambda;
                v.map(|x| if x > c { x - c } else if x >= 0.0 { 0.0 } else { x })
            }
            Func::Simplex { radius } => project_simplex(v, *radius),
            Func::L1Ball { radius } => {
                if v.iter().map(|x| x.abs()).sum::<f64>() <= *radius {
                    v.clone()
                } else {
                    let p = project_simplex(&v.map(f64::abs), *radius);
                    DVector::from_fn(v.len(), |i, _| p[i] * v[i].signum())
                }
            }
            Func::Group { lambda, sizes } => {
                let mut out = v.clone();
                let mut start = 0;
                for &len in sizes {
                    let nrm = v.rows(start, len).norm();
                    let scale = if nrm > t * lambda { 1.0 - t * lambda / nrm } else { 0.0 };
                    out.rows_mut(start, len).scale_mut(scale);
                    start += len;
                }
                out
            }
            Func::Affine { a, b } => {
                let gram = a * a.transpose();
                let r = a * v - b;
                let w = gram.lu().solve(&r).expect("A has full row rank");
                v - a.transpose() * w
            }
        }
    }

    /// For separable `h = Σ φ(zᵢ)` with `φ` piecewise linear: kinks and slopes of `φ`.
    pub fn scalar_pieces(&self) -> Option<ScalarPieces> {
        match self {
            Func::Zero => Some(ScalarPieces { kinks: vec![], slopes: vec![0.0], lo: f64::NEG_INFINITY, hi: f64::INFINITY }),
            Func::L1 { lambda } => Some(ScalarPieces { kinks: vec![0.0], slopes: vec![-lambda, *lambda], lo: f64::NEG_INFINITY, hi: f64::INFINITY }),
            Func::Hinge { lambda } => Some(ScalarPieces { kinks: vec![0.0], slopes: vec![0.0, *lambda], lo: f64::NEG_INFINITY, hi: f64::INFINITY }),
            Func::Box { lo, hi } => Some(ScalarPieces { kinks: vec![], slopes: vec![0.0], lo: *lo, hi: *hi }),
            _ => None,
        }
    }
}

/// A convex piecewise-linear scalar function on `[lo, hi]` with `slopes.len() = kinks.len() + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarPieces {
    pub kinks: Vec<f64>,
    pub slopes: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl ScalarPieces {
    /// `[g⁻, g⁺]`: the subdifferential at `z` (normal cone included at the domain ends).
    pub fn subdifferential(&self, z: f64, tol: f64) -> (f64, f64) {
        let mut j = 0;
        while j < self.kinks.len() && z > self.kinks[j] + tol {
            j += 1;
        }
        let at_kink = j < self.kinks.len() && (z - self.kinks[j]).abs() <= tol;
        let (mut lo, mut hi) = if at_kink { (self.slopes[j], self.slopes[j + 1]) } else { (self.slopes[j], self.slopes[j]) };
        if self.lo.is_finite() && (z - self.lo).abs() <= tol {
            lo = f64::NEG_INFINITY;
        }
        if self.hi.is_finite() && (z - self.hi).abs() <= tol {
            hi = f64::INFINITY;
        }
        (lo, hi)
    }
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Euclidean projection onto `{z ≥ 0, Σz = r}` by sorting.
pub fn project_simplex(v: &DVector<f64>, r: f64) -> DVector<f64> {
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - r) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.map(|x| (x - theta).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection_basic() {
        let p = project_simplex(&DVector::from_vec(vec![0.5, 0.5]), 1.0);
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
        let p = project_simplex(&DVector::from_vec(vec![2.0, 0.0, -1.0]), 1.0);
        assert_eq!(p.as_slice(), &[1.0, 0.0, 0.0]);
        let p = project_simplex(&DVector::from_vec(vec![0.3, 0.3, 0.3]), 1.0);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn prox_is_minimizer_on_grid() {
        let funcs = [Func::L1 { lambda: 0.7 }, Func::Hinge { lambda: 0.7 }, Func::Box { lo: -0.5, hi: 1.0 }];
        for f in funcs {
            for &v in &[-2.0, -0.3, 0.1, 0.6, 3.0] {
                let p = f.prox(&DVector::from_element(1, v), 1.3)[0];
                let obj = |z: f64| 1.3 * f.eval(&DVector::from_element(1, z)) + 0.5 * (z - v) * (z - v);
                for k in -400..=400 {
                    let z = k as f64 * 0.01;
                    assert!(obj(p) <= obj(z) + 1e-12, "{f:?} v={v} p={p} z={z}");
                }
            }
        }
    }

    #[test]
    fn affine_projection_is_feasible_and_orthogonal() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0]);
        let f = Func::Affine { a, b };
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let p = f.prox(&v, 1.0);
        assert!((p.sum() - 1.0).abs() < 1e-14);
        let d = &v - &p;
        assert!((d[0] - d[1]).abs() < 1e-14 && (d[1] - d[2]).abs() < 1e-14);
    }
}
