use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    pub step_norm: f64,
    pub seconds: f64,
}

/// Per-iteration history of one solver run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub solver: String,
    pub problem: String,
    pub records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn new(solver: impl Into<String>, problem: impl Into<String>) -> Self {
        Self { solver: solver.into(), problem: problem.into(), records: Vec::new() }
    }

    pub fn push(&mut self, iter: usize, objective: f64, step_norm: f64, seconds: f64) {
        self.records.push(TraceRecord { iter, objective, step_norm, seconds });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// First iteration at which `F(xₖ) − F★ ≤ err`.
    pub fn iterations_to(&self, fstar: f64, err: f64) -> Option<usize> {
        self.records.iter().find(|r| r.objective - fstar <= err).map(|r| r.iter)
    }

    /// Writes `iter,obj_err,step_norm,seconds` rows.
    pub fn write_csv<W: Write>(&self, mut w: W, fstar: f64) -> Result<()> {
        writeln!(w, "iter,obj_err,step_norm,seconds")?;
        for r in &self.records {
            writeln!(w, "{},{:e},{:e},{:.6}", r.iter, r.objective - fstar, r.step_norm, r.seconds)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_rows() {
        let mut t = ConvergenceTrace::new("ista", "p");
        t.push(0, 2.0, f64::NAN, 0.0);
        t.push(1, 1.5, 0.25, 0.001);
        let mut buf = Vec::new();
        t.write_csv(&mut buf, 1.0).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], "iter,obj_err,step_norm,seconds");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("1,5e-1,2.5e-1,"));
        assert_eq!(t.iterations_to(1.0, 0.6), Some(1));
    }
}
