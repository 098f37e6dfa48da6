//! Proximal quasi-Newton forward–backward splitting.
//!
//! Minimizes `F(x) = f(x) + h(x)` with `f` smooth and `h` convex with a cheap proximal
//! operator, using variable metrics of the form diagonal ± low rank built from zero-memory
//! SR1 and BFGS updates. The crate contains
//!
//! - [`metric`]: diagonal ± rank-r metrics and their inverses,
//! - [`prox`]: proximal operators in diagonal metrics,
//! - [`scaled_prox`]: proximal operators in diagonal ± rank-r metrics,
//! - [`quasi_newton`]: the zero-memory SR1 / BFGS metrics,
//! - [`solver`]: the forward–backward loop and first-order baselines,
//! - [`harness`]: problem generators, reference solutions, races and traces.

// `!(x <= tol)` is used on purpose so that NaN counts as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod linalg;
pub mod metric;
pub mod par;
pub mod prox;
pub mod quasi_newton;
pub mod scaled_prox;
pub mod solver;

pub use error::{Error, Result};
pub use metric::{LowRankMetric, MetricInverse, Sign};
pub use prox::{AffineConstraint, Blocks, PiecewiseAffineDescriptor, ProxOperator};
pub use scaled_prox::{scaled_prox, RootFinder, RootMethod, RootProblem, RootSolverReport};
