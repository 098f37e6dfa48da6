//! Invariant and acceptance suites for `proxqn`.
//!
//! Every suite compares the library against the brute-force oracles of `proxqn-oracle`
//! or against closed-form constants, and reports pass/fail with a one-line summary.

// `!(x <= tol)` is used on purpose so that NaN counts as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

pub mod instances;
pub mod other_suites;
pub mod prox_suites;
pub mod qn_suites;

/// Failures beyond this many are counted but not listed.
const MAX_LISTED: usize = 5;

/// Findings of one suite.
#[derive(Debug, Default, Clone)]
pub struct Report {
    failures: Vec<String>,
    failure_count: usize,
    notes: Vec<String>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fail(&mut self, msg: String) {
        self.failure_count += 1;
        if self.failures.len() < MAX_LISTED {
            self.failures.push(msg);
        }
    }

    pub fn note(&mut self, msg: String) {
        self.notes.push(msg);
    }

    pub fn passed(&self) -> bool {
        self.failure_count == 0
    }

    pub fn failures(&self) -> &[String] {
        &self.failures
    }

    pub fn failure_count(&self) -> usize {
        self.failure_count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    ProxOracle,
    Methods,
    RootBound,
    Monotone,
    Moreau,
    QuasiNewton,
    Rates,
    Newton,
    Desk,
    Complexity,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::ProxOracle,
        Suite::Methods,
        Suite::RootBound,
        Suite::Monotone,
        Suite::Moreau,
        Suite::QuasiNewton,
        Suite::Rates,
        Suite::Newton,
        Suite::Desk,
        Suite::Complexity,
    ];

    /// Acceptance criterion number.
    pub fn number(self) -> usize {
        Suite::ALL.iter().position(|s| *s == self).unwrap() + 1
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::ProxOracle => "prox-oracle",
            Suite::Methods => "methods",
            Suite::RootBound => "root-bound",
            Suite::Monotone => "monotone",
            Suite::Moreau => "moreau",
            Suite::QuasiNewton => "quasi-newton",
            Suite::Rates => "rates",
            Suite::Newton => "newton",
            Suite::Desk => "desk",
            Suite::Complexity => "complexity",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Suite::ProxOracle => "scaled prox matches brute-force minimizer",
            Suite::Methods => "exact, bisection and Newton roots agree",
            Suite::RootBound => "root bound and bisection step count",
            Suite::Monotone => "strong monotonicity and Lipschitz constants",
            Suite::Moreau => "Moreau identity in the metric",
            Suite::QuasiNewton => "secant identity and eigenvalue bounds",
            Suite::Rates => "linear-rate contraction",
            Suite::Newton => "semi-smooth Newton local behaviour",
            Suite::Desk => "desk-scale solver race",
            Suite::Complexity => "exact ℓ1 path scaling",
        }
    }

    /// Wall-clock budget from the acceptance criteria.
    pub fn time_limit(self) -> Option<Duration> {
        match self {
            Suite::ProxOracle => Some(Duration::from_secs(120)),
            Suite::Rates => Some(Duration::from_secs(30)),
            Suite::Desk => Some(Duration::from_secs(300)),
            Suite::Complexity => Some(Duration::from_secs(60)),
            _ => None,
        }
    }

    fn run(self, cfg: &Config) -> Report {
        match self {
            Suite::ProxOracle => prox_suites::oracle_equivalence(cfg),
            Suite::Methods => prox_suites::method_agreement(cfg),
            Suite::RootBound => prox_suites::root_bound(cfg),
            Suite::Monotone => prox_suites::monotonicity(cfg),
            Suite::Moreau => prox_suites::moreau(cfg),
            Suite::QuasiNewton => qn_suites::quasi_newton(cfg),
            Suite::Rates => qn_suites::rates(cfg),
            Suite::Newton => other_suites::newton(cfg),
            Suite::Desk => other_suites::desk(cfg),
            Suite::Complexity => other_suites::complexity(cfg),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s || x.number().to_string() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|x| x.as_str()).collect();
                format!("unknown suite `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    pub seed: u64,
    /// Largest random dimension in the prox suites (default 50).
    pub n: Option<usize>,
    /// Instances per function in the prox suites (default 200).
    pub instances: Option<usize>,
    /// Worker threads for the desk race.
    pub jobs: Option<usize>,
    /// Reference cache directory; the environment default when absent.
    pub cache: Option<PathBuf>,
}

impl Config {
    pub fn max_dim(&self) -> usize {
        self.n.unwrap_or(50).max(3)
    }

    pub fn per_kind(&self) -> usize {
        self.instances.unwrap_or(200).max(1)
    }

    pub fn pairs(&self) -> usize {
        1000
    }

    pub fn tuples(&self) -> usize {
        100
    }

    pub fn trajectories(&self) -> usize {
        9
    }

    pub fn rate_problems(&self) -> usize {
        6
    }

    pub fn newton_instances(&self) -> usize {
        50
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub suite: Suite,
    pub passed: bool,
    pub seconds: f64,
    pub report: Report,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "[{tag}] {:>2} {:<13} {} ({:.1} s)",
            self.suite.number(),
            self.suite.as_str(),
            self.report.notes.join("; "),
            self.seconds
        )?;
        if self.report.failure_count > 0 {
            write!(f, " | {} failure(s): {}", self.report.failure_count, self.report.failures.join(" / "))?;
        }
        Ok(())
    }
}

/// Runs one suite; a panic inside the suite counts as a failure.
pub fn run_suite(suite: Suite, cfg: &Config) -> Outcome {
    let start = Instant::now();
    let mut report = match std::panic::catch_unwind(|| suite.run(cfg)) {
        Ok(r) => r,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            let mut r = Report::new();
            r.fail(format!("panicked: {msg}"));
            r
        }
    };
    let elapsed = start.elapsed();
    if let Some(limit) = suite.time_limit() {
        if elapsed > limit {
            report.fail(format!("took {:.1} s, limit {} s", elapsed.as_secs_f64(), limit.as_secs()));
        }
    }
    Outcome { suite, passed: report.passed(), seconds: elapsed.as_secs_f64(), report }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.as_str().parse::<Suite>().unwrap(), s);
            assert_eq!(s.number().to_string().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn report_counts_beyond_listed() {
        let mut r = Report::new();
        for i in 0..8 {
            r.fail(i.to_string());
        }
        assert_eq!(r.failure_count(), 8);
        assert_eq!(r.failures().len(), MAX_LISTED);
        assert!(!r.passed());
    }
}
