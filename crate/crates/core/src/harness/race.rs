use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::recipe::ProblemRecipe;
use crate::error::Result;
use crate::par::{with_workers, Execution};
use crate::solver::{ProblemSpec, SolverId, SolverOptions, SolverResult, Termination};

/// A problem entered into a race. `spec.fstar` is used for objective errors.
#[derive(Debug, Clone)]
pub struct RaceProblem {
    pub spec: ProblemSpec,
    pub recipe: Option<ProblemRecipe>,
}

#[derive(Debug, Clone)]
pub struct RaceEntry {
    pub problem: String,
    pub solver: SolverId,
    pub fstar: Option<f64>,
    /// Solver errors are kept as messages so the race continues.
    pub outcome: std::result::Result<SolverResult, String>,
}

impl RaceEntry {
    pub fn final_error(&self) -> Option<f64> {
        match (&self.outcome, self.fstar) {
            (Ok(r), Some(fstar)) => Some(r.objective - fstar),
            _ => None,
        }
    }

    pub fn trace_file_name(&self) -> String {
        format!("{}__{}.csv", sanitize(&self.problem), self.solver)
    }
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

/// Runs every `(solver, problem)` pair from the same starting point and options.
///
/// Pairs run on a pool of `jobs` workers (the global pool when `None`); results come back in
/// problem-major order regardless of scheduling.
pub fn race(problems: &[RaceProblem], solvers: &[SolverId], opts: &SolverOptions, jobs: Option<usize>) -> Vec<RaceEntry> {
    let pairs: Vec<(usize, SolverId)> =
        (0..problems.len()).flat_map(|p| solvers.iter().map(move |s| (p, *s))).collect();
    with_workers(jobs, || {
        Execution::Parallel.map(&pairs, |&(p, solver)| {
            let problem = &problems[p].spec;
            let outcome = solver.run(problem, opts).map_err(|e| e.to_string());
            if let Err(msg) = &outcome {
                log::warn!("{solver} failed on {}: {msg}", problem.name);
            }
            RaceEntry { problem: problem.name.clone(), solver, fstar: problem.fstar, outcome }
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestProblem {
    pub name: String,
    pub recipe: Option<ProblemRecipe>,
    pub recipe_hash: Option<String>,
    pub dim: usize,
    pub fstar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub problem: String,
    pub solver: SolverId,
    pub status: Option<Termination>,
    pub error: Option<String>,
    pub iterations: Option<usize>,
    pub final_error: Option<f64>,
    pub seconds: Option<f64>,
    pub trace_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceManifest {
    pub version: String,
    pub options: SolverOptions,
    pub problems: Vec<ManifestProblem>,
    pub runs: Vec<ManifestRun>,
}

/// Writes one CSV per successful run and `manifest.json` into `dir`.
pub fn write_race(dir: &Path, problems: &[RaceProblem], entries: &[RaceEntry], opts: &SolverOptions) -> Result<RaceManifest> {
    fs::create_dir_all(dir)?;
    let mut runs = Vec::with_capacity(entries.len());
    for e in entries {
        let run = match &e.outcome {
            Ok(res) => {
                let file = e.trace_file_name();
                let w = std::io::BufWriter::new(fs::File::create(dir.join(&file))?);
                res.trace.write_csv(w, e.fstar.unwrap_or(0.0))?;
                ManifestRun {
                    problem: e.problem.clone(),
                    solver: e.solver,
                    status: Some(res.status),
                    error: None,
                    iterations: Some(res.iterations),
                    final_error: e.final_error(),
                    seconds: Some(res.seconds),
                    trace_file: Some(file),
                }
            }
            Err(msg) => ManifestRun {
                problem: e.problem.clone(),
                solver: e.solver,
                status: None,
                error: Some(msg.clone()),
                iterations: None,
                final_error: None,
                seconds: None,
                trace_file: None,
            },
        };
        runs.push(run);
    }
    let manifest = RaceManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        options: opts.clone(),
        problems: problems
            .iter()
            .map(|p| ManifestProblem {
                name: p.spec.name.clone(),
                recipe: p.recipe.clone(),
                recipe_hash: p.recipe.as_ref().map(ProblemRecipe::hash),
                dim: p.spec.dim(),
                fstar: p.spec.fstar,
            })
            .collect(),
        runs,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{generate, Family};

    fn small() -> RaceProblem {
        let recipe = ProblemRecipe { m: 10, n: 16, ..ProblemRecipe::desk(Family::LassoGaussian, 1) };
        RaceProblem { spec: generate(&recipe).unwrap().spec.with_fstar(0.0), recipe: Some(recipe) }
    }

    #[test]
    fn single_pair_gives_single_trace() {
        let problems = [small()];
        let opts = SolverOptions { max_iter: 200, ..SolverOptions::default() };
        let out = race(&problems, &[SolverId::ZeroSr1], &opts, Some(1));
        assert_eq!(out.len(), 1);
        let res = out[0].outcome.as_ref().unwrap();
        let times: Vec<f64> = res.trace.records.iter().map(|r| r.seconds).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
        let iters: Vec<usize> = res.trace.records.iter().map(|r| r.iter).collect();
        assert!(iters.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn order_and_results_do_not_depend_on_workers() {
        let problems = [small(), small()];
        let opts = SolverOptions { max_iter: 50, ..SolverOptions::default() };
        let a = race(&problems, &SolverId::ALL, &opts, Some(1));
        let b = race(&problems, &SolverId::ALL, &opts, Some(4));
        assert_eq!(a.len(), 10);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.solver, y.solver);
            assert_eq!(x.outcome.as_ref().unwrap().x, y.outcome.as_ref().unwrap().x);
        }
    }

    #[test]
    fn manifest_and_csvs_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let problems = [small()];
        let opts = SolverOptions { max_iter: 20, ..SolverOptions::default() };
        let entries = race(&problems, &[SolverId::Ista, SolverId::Spg], &opts, None);
        let manifest = write_race(dir.path(), &problems, &entries, &opts).unwrap();
        assert_eq!(manifest.runs.len(), 2);
        for run in &manifest.runs {
            let csv = fs::read_to_string(dir.path().join(run.trace_file.as_ref().unwrap())).unwrap();
            assert!(csv.starts_with("iter,obj_err,step_norm,seconds\n"));
        }
        let back: RaceManifest = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(back, manifest);
    }
}
