use super::{RootMethod, RootProblem, RootSolverReport};
use crate::error::{Error, Result};

/// Closed-form root for an affine constraint and a rank-one metric.
///
/// The diagonal projector onto `{Az = b}` is affine, so `L(α) = L(0) + α(1 ± uᵀΠ_D P⁻¹u)`
/// where `Π_D = I − P⁻¹Aᵀ(AP⁻¹Aᵀ)⁻¹A` is its (constant) Jacobian. One evaluation of `L` and
/// one Jacobian product give `α★` without iteration.
pub fn affine_closed_form(problem: &RootProblem<'_>) -> Result<RootSolverReport> {
    if problem.rank() != 1 || problem.prox().affine_constraint().is_none() {
        return Err(Error::NotApplicable {
            method: RootMethod::ClosedForm,
            reason: "requires rank one and an affine constraint".into(),
        });
    }
    let l0 = problem.eval(&[0.0])?[0];
    let slope = problem.jacobian(&[0.0])?[(0, 0)];
    assert!(slope > 0.0, "affine root map must be increasing, slope = {slope}");
    problem.report(vec![-l0 / slope], 0, RootMethod::ClosedForm)
}
