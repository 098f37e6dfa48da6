//! Forward–backward solvers for `min f(x) + h(x)`.
//!
//! [`run_zero_sr1`] and [`run_zero_bfgs`] are the quasi-Newton forward–backward methods; the
//! first-order baselines [`run_ista`], [`run_fista_bb`] and [`run_spg`] share the problem,
//! options and trace types.

mod baselines;
mod fb;
mod line_search;
mod problem;
mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quasi_newton::QnConfig;
use crate::scaled_prox::RootFinder;

pub use baselines::{run_fista_bb, run_fista_restart, run_ista, run_spg};
pub use fb::{fb_step, run_quasi_newton, run_zero_bfgs, run_zero_sr1, QnKind};
pub use line_search::{line_search, LineSearchOutcome, ROUNDOFF_SLACK};
pub use problem::{LeastSquares, ProblemSpec, Quadratic, SmoothFunction};
pub use trace::{ConvergenceTrace, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverId {
    #[serde(rename = "zero-sr1")]
    ZeroSr1,
    #[serde(rename = "zero-bfgs")]
    ZeroBfgs,
    #[serde(rename = "ista")]
    Ista,
    #[serde(rename = "fista-bb")]
    FistaBb,
    #[serde(rename = "spg")]
    Spg,
}

impl SolverId {
    pub const ALL: [SolverId; 5] = [SolverId::ZeroSr1, SolverId::ZeroBfgs, SolverId::Ista, SolverId::FistaBb, SolverId::Spg];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverId::ZeroSr1 => "zero-sr1",
            SolverId::ZeroBfgs => "zero-bfgs",
            SolverId::Ista => "ista",
            SolverId::FistaBb => "fista-bb",
            SolverId::Spg => "spg",
        }
    }

    pub fn run(self, problem: &ProblemSpec, opts: &SolverOptions) -> Result<SolverResult> {
        match self {
            SolverId::ZeroSr1 => run_zero_sr1(problem, opts),
            SolverId::ZeroBfgs => run_zero_bfgs(problem, opts),
            SolverId::Ista => run_ista(problem, opts),
            SolverId::FistaBb => run_fista_bb(problem, opts),
            SolverId::Spg => run_spg(problem, opts),
        }
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown solver '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineSearch {
    /// Always take the full step `t = 1`.
    None,
    /// Halve `t` until `F(x + tp) ≤ F(x) − σt‖p‖²/κ`.
    Backtracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once the proximal step satisfies `‖p‖∞ < tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub max_seconds: Option<f64>,
    /// Stop once `F(x) − F★ ≤ target_error` (requires a known `F★`).
    pub target_error: Option<f64>,
    pub line_search: LineSearch,
    /// Sufficient-decrease constant of the backtracking rule.
    pub sigma: f64,
    pub max_halvings: usize,
    /// Step size `κ` in `x̄ = prox^B_{κh}(x − κH∇f(x))`.
    pub kappa: f64,
    pub qn: QnConfig,
    pub finder: RootFinder,
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            max_seconds: None,
            target_error: None,
            line_search: LineSearch::Backtracking,
            sigma: 1e-4,
            max_halvings: 30,
            kappa: 1.0,
            qn: QnConfig::default(),
            finder: RootFinder::Auto,
            record_trace: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    TargetReached,
    MaxIterations,
    TimeLimit,
    /// The line search could not produce sufficient decrease at the smallest step.
    Stagnated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverResult {
    pub solver: SolverId,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub status: Termination,
    pub seconds: f64,
    /// Number of iterations whose quasi-Newton update was skipped.
    pub skipped_updates: usize,
    pub trace: ConvergenceTrace,
}

impl SolverResult {
    pub fn objective_error(&self, fstar: f64) -> f64 {
        self.objective - fstar
    }
}
