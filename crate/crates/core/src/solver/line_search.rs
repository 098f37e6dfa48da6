use super::{LineSearch, ProblemSpec};
use crate::linalg::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOutcome {
    pub t: f64,
    /// The accepted point `x + tp`.
    pub x: Vec<f64>,
    pub objective: f64,
    pub halvings: usize,
    /// No admissible `t` was found; `t` is the smallest trial step.
    pub stagnated: bool,
}

/// Relative slack `ς` in the sufficient-decrease test; decreases below `ς|F(x)|` are not
/// measurable in floating point.
pub const ROUNDOFF_SLACK: f64 = 8.0 * f64::EPSILON;

/// Step length along `x + tp`.
///
/// `Backtracking` returns the largest `t ∈ {1, ½, ¼, …}` with
/// `F(x + tp) ≤ F(x) − σt‖p‖²/κ + ς|F(x)|`, trying at most `max_halvings` halvings.
#[allow(clippy::too_many_arguments)]
pub fn line_search(
    problem: &ProblemSpec,
    x: &[f64],
    fx: f64,
    p: &[f64],
    kappa: f64,
    mode: LineSearch,
    sigma: f64,
    max_halvings: usize,
) -> LineSearchOutcome {
    let trial = |t: f64| -> (Vec<f64>, f64) {
        let z: Vec<f64> = x.iter().zip(p).map(|(xi, pi)| xi + t * pi).collect();
        let fz = problem.objective(&z);
        (z, fz)
    };
    if mode == LineSearch::None {
        let (z, fz) = trial(1.0);
        return LineSearchOutcome { t: 1.0, x: z, objective: fz, halvings: 0, stagnated: false };
    }
    let pp = dot(p, p);
    let slack = ROUNDOFF_SLACK * fx.abs();
    let mut t = 1.0;
    let mut halvings = 0;
    loop {
        let (z, fz) = trial(t);
        if fz <= fx - sigma * t * pp / kappa + slack {
            return LineSearchOutcome { t, x: z, objective: fz, halvings, stagnated: false };
        }
        if halvings == max_halvings {
            return LineSearchOutcome { t, x: z, objective: fz, halvings, stagnated: true };
        }
        t *= 0.5;
        halvings += 1;
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::prox::ProxOperator;
    use crate::solver::Quadratic;

    fn quad() -> ProblemSpec {
        let q = DenseMatrix::from_row_major(2, 2, vec![2.0, 0.0, 0.0, 1.0]).unwrap();
        ProblemSpec::new("q", Arc::new(Quadratic::new(q, vec![0.0, 0.0]).unwrap()), ProxOperator::zero())
    }

    #[test]
    fn small_gradient_step_is_accepted() {
        let pb = quad();
        let x = [1.0, 1.0];
        let p = [-0.2, -0.1];
        let out = line_search(&pb, &x, pb.objective(&x), &p, 0.1, LineSearch::Backtracking, 1e-4, 30);
        assert_eq!(out.t, 1.0);
        assert!(!out.stagnated);
    }

    #[test]
    fn overscaled_step_is_shortened() {
        let pb = quad();
        let x = [1.0, 1.0];
        let p = [-20.0, -10.0];
        let fx = pb.objective(&x);
        let out = line_search(&pb, &x, fx, &p, 10.0, LineSearch::Backtracking, 1e-4, 30);
        assert!(out.t < 1.0);
        assert!(out.objective <= fx - 1e-4 * out.t * dot(&p, &p) / 10.0);
        let none = line_search(&pb, &x, fx, &p, 10.0, LineSearch::None, 1e-4, 30);
        assert_eq!(none.t, 1.0);
    }

    #[test]
    fn ascent_direction_stagnates() {
        let pb = quad();
        let x = [1.0, 1.0];
        let out = line_search(&pb, &x, pb.objective(&x), &[1.0, 1.0], 1.0, LineSearch::Backtracking, 1e-4, 5);
        assert!(out.stagnated);
        assert_eq!(out.t, 1.0 / 32.0);
    }
}
