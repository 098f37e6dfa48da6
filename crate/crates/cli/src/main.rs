//! `proxqn` command-line front end.
//!
//! Exit codes: 0 success, 1 validation failure, 2 configuration or input error, 3 solver failure.

mod gnuplot;
mod prox_input;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use proxqn::harness::{generate, race, write_race, Family, ProblemRecipe, RaceEntry, RaceProblem, ReferenceCache};
use proxqn::scaled_prox::{scaled_prox_inverse, NewtonOptions};
use proxqn::quasi_newton::QnConfig;
use proxqn::solver::{LineSearch, SolverId, SolverOptions};
use proxqn::{scaled_prox, RootFinder};
use proxqn_validate::{run_suite, Config, Suite};
use serde::{Deserialize, Serialize};

const EXIT_VALIDATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

/// Proximal quasi-Newton solvers, benchmark races and invariant checks.
#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[command(name = "proxqn", version)]
pub struct CliConfig {
    /// Print the parsed configuration as JSON and exit.
    #[arg(long, global = true)]
    #[serde(default)]
    pub dump_config: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Solve one generated problem and write its convergence trace.
    Solve(SolveArgs),
    /// Race several solvers on several problems.
    Race(RaceArgs),
    /// Run the invariant and acceptance suites.
    Validate(ValidateArgs),
    /// Evaluate one scaled proximal operator read from a file.
    Prox(ProxArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RecipeArgs {
    #[arg(long, default_value = "lasso_gaussian")]
    pub family: Family,
    /// Rows of the data matrix (family default when absent).
    #[arg(long)]
    pub m: Option<usize>,
    /// Unknowns, or the grid side for lasso_diff3d.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub block_cap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Start from the full-size benchmark instances instead of the desk defaults.
    #[arg(long)]
    pub paper_scale: bool,
}

impl RecipeArgs {
    fn recipe(&self, family: Family) -> ProblemRecipe {
        let base =
            if self.paper_scale { ProblemRecipe::paper_scale(family, self.seed) } else { ProblemRecipe::desk(family, self.seed) };
        ProblemRecipe {
            m: self.m.unwrap_or(base.m),
            n: self.n.unwrap_or(base.n),
            lambda: self.lambda.unwrap_or(base.lambda),
            block_cap: self.block_cap.unwrap_or(base.block_cap),
            ..base
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineSearchArg {
    None,
    Backtracking,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OptionArgs {
    /// Stop once the proximal step has sup-norm below this.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Wall-clock budget per run.
    #[arg(long)]
    pub max_seconds: Option<f64>,
    /// Stop once F(x) − F★ falls below this.
    #[arg(long)]
    pub target_error: Option<f64>,
    #[arg(long, value_enum, default_value = "backtracking")]
    pub line_search: LineSearchArg,
    /// Scaling of the Barzilai-Borwein step in the quasi-Newton metrics.
    #[arg(long, default_value_t = 0.8)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
}

impl OptionArgs {
    fn options(&self) -> Result<SolverOptions, String> {
        let positive = |name: &str, v: f64| if v.is_finite() && v > 0.0 { Ok(()) } else { Err(format!("--{name} must be positive")) };
        positive("tol", self.tol)?;
        positive("kappa", self.kappa)?;
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err("--gamma must lie in (0, 1]".into());
        }
        if let Some(s) = self.max_seconds {
            positive("max-seconds", s)?;
        }
        if let Some(e) = self.target_error {
            positive("target-error", e)?;
        }
        Ok(SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            max_seconds: self.max_seconds,
            target_error: self.target_error,
            line_search: match self.line_search {
                LineSearchArg::None => LineSearch::None,
                LineSearchArg::Backtracking => LineSearch::Backtracking,
            },
            kappa: self.kappa,
            qn: QnConfig { gamma: self.gamma, ..QnConfig::default() },
            ..SolverOptions::default()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OutputArgs {
    /// Directory for trace CSVs and the manifest.
    #[arg(long, default_value = "proxqn-out")]
    pub out: PathBuf,
    /// Also write plot.gp referencing the trace CSVs.
    #[arg(long)]
    pub gnuplot: bool,
    /// Skip the reference solve; objective errors are then reported against 0.
    #[arg(long)]
    pub no_reference: bool,
    /// Reference cache directory (defaults to $PROXQN_CACHE_DIR).
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub recipe: RecipeArgs,
    #[arg(long, default_value = "zero-sr1")]
    pub solver: SolverId,
    #[command(flatten)]
    pub options: OptionArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RaceArgs {
    #[command(flatten)]
    pub recipe: RecipeArgs,
    /// Families to race (defaults to --family alone).
    #[arg(long = "families", value_delimiter = ',')]
    pub families: Vec<Family>,
    /// Solvers to race (defaults to all).
    #[arg(long = "solvers", value_delimiter = ',')]
    pub solvers: Vec<SolverId>,
    /// Worker threads (defaults to the number of logical cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub options: OptionArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ValidateArgs {
    /// Suites to run, by name or number (defaults to all).
    #[arg(long = "suite", value_delimiter = ',', value_parser = parse_suite)]
    pub suites: Vec<String>,
    /// Largest random dimension in the prox suites.
    #[arg(long)]
    pub n: Option<usize>,
    /// Instances per function in the prox suites.
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

fn parse_suite(s: &str) -> Result<String, String> {
    Suite::from_str(s).map(|x| x.as_str().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinderArg {
    Auto,
    Exact,
    Bisection,
    Ssnewton,
    ClosedForm,
    GroupPath,
    Recursive,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ProxArgs {
    /// Input file (`-` for standard input).
    pub input: PathBuf,
    /// Treat the factors in the file as the inverse metric H = V⁻¹.
    #[arg(long)]
    pub inverse: bool,
    #[arg(long, value_enum, default_value = "auto")]
    pub finder: FinderArg,
    /// Tolerance for the iterative root finders.
    #[arg(long, default_value_t = 1e-12)]
    pub root_tol: f64,
    /// Override the step size from the file.
    #[arg(long)]
    pub kappa: Option<f64>,
}

/// An error carrying its exit code.
struct Failure(u8, String);

fn config_error(msg: impl Into<String>) -> Failure {
    Failure(EXIT_CONFIG, msg.into())
}

fn main() -> ExitCode {
    let cli = match CliConfig::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if cli.dump_config {
        println!("{}", serde_json::to_string(&cli).expect("config serializes"));
        return ExitCode::SUCCESS;
    }
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Race(a) => cmd_race(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Prox(a) => cmd_prox(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("proxqn: {msg}");
            ExitCode::from(code)
        }
    }
}

fn cache(dir: &Option<PathBuf>) -> ReferenceCache {
    match dir {
        Some(d) => ReferenceCache::new(d),
        None => ReferenceCache::from_env(),
    }
}

fn build_problem(recipe: ProblemRecipe, output: &OutputArgs) -> Result<RaceProblem, Failure> {
    recipe.validate().map_err(|e| config_error(e.to_string()))?;
    let generated = generate(&recipe).map_err(|e| config_error(e.to_string()))?;
    let mut spec = generated.spec;
    if !output.no_reference {
        let (reference, hit) =
            cache(&output.cache).get_or_compute(&recipe, &spec).map_err(|e| Failure(EXIT_SOLVER, format!("reference solve: {e}")))?;
        log::info!("reference for {} {}", recipe.id(), if hit { "loaded from cache" } else { "computed" });
        spec = spec.with_fstar(reference.fstar);
    }
    Ok(RaceProblem { spec, recipe: Some(recipe) })
}

fn run_line(e: &RaceEntry, out: &Path) -> String {
    match &e.outcome {
        Ok(r) => {
            let err = e.final_error().map_or("nan".to_string(), |v| format!("{v:e}"));
            format!(
                "problem={} solver={} status={} iterations={} objective={:e} final_error={} seconds={:.6} trace={}",
                e.problem,
                e.solver,
                serde_json::to_value(r.status).unwrap().as_str().unwrap(),
                r.iterations,
                r.objective,
                err,
                r.seconds,
                out.join(e.trace_file_name()).display()
            )
        }
        Err(msg) => format!("problem={} solver={} status=error message={:?}", e.problem, e.solver, msg),
    }
}

fn finish_race(problems: &[RaceProblem], entries: &[RaceEntry], opts: &SolverOptions, output: &OutputArgs) -> Result<(), Failure> {
    let io = |e: proxqn::Error| Failure(EXIT_CONFIG, format!("writing {}: {e}", output.out.display()));
    write_race(&output.out, problems, entries, opts).map_err(io)?;
    for e in entries {
        println!("{}", run_line(e, &output.out));
    }
    if output.gnuplot {
        let path = output.out.join("plot.gp");
        fs::write(&path, gnuplot::script(entries)).map_err(|e| io(e.into()))?;
        println!("gnuplot={}", path.display());
    }
    println!("manifest={}", output.out.join("manifest.json").display());
    Ok(())
}

fn cmd_solve(a: &SolveArgs) -> Result<(), Failure> {
    let opts = a.options.options().map_err(config_error)?;
    let problems = [build_problem(a.recipe.recipe(a.recipe.family), &a.output)?];
    let entries = race(&problems, &[a.solver], &opts, Some(1));
    finish_race(&problems, &entries, &opts, &a.output)?;
    match &entries[0].outcome {
        Ok(r) if r.objective.is_finite() => Ok(()),
        Ok(_) => Err(Failure(EXIT_SOLVER, "solver produced a non-finite objective".into())),
        Err(msg) => Err(Failure(EXIT_SOLVER, msg.clone())),
    }
}

fn cmd_race(a: &RaceArgs) -> Result<(), Failure> {
    let opts = a.options.options().map_err(config_error)?;
    if a.jobs == Some(0) {
        return Err(config_error("--jobs must be positive"));
    }
    let families = if a.families.is_empty() { vec![a.recipe.family] } else { a.families.clone() };
    let solvers = if a.solvers.is_empty() { SolverId::ALL.to_vec() } else { a.solvers.clone() };
    let problems = families.iter().map(|f| build_problem(a.recipe.recipe(*f), &a.output)).collect::<Result<Vec<_>, _>>()?;
    let entries = race(&problems, &solvers, &opts, a.jobs);
    finish_race(&problems, &entries, &opts, &a.output)?;
    let failed = entries.iter().filter(|e| e.outcome.is_err()).count();
    if failed > 0 {
        return Err(Failure(EXIT_SOLVER, format!("{failed} run(s) failed")));
    }
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> Result<(), Failure> {
    let suites: Vec<Suite> = if a.suites.is_empty() {
        Suite::ALL.to_vec()
    } else {
        a.suites.iter().map(|s| Suite::from_str(s).map_err(config_error)).collect::<Result<_, _>>()?
    };
    if a.jobs == Some(0) {
        return Err(config_error("--jobs must be positive"));
    }
    let cfg = Config { seed: a.seed, n: a.n, instances: a.instances, jobs: a.jobs, cache: a.cache.clone() };
    let mut failed = 0;
    for suite in suites {
        let outcome = run_suite(suite, &cfg);
        println!("{outcome}");
        if !outcome.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(Failure(EXIT_VALIDATION, format!("{failed} suite(s) failed")));
    }
    Ok(())
}

fn cmd_prox(a: &ProxArgs) -> Result<(), Failure> {
    let text = if a.input.as_os_str() == "-" {
        std::io::read_to_string(std::io::stdin())
    } else {
        fs::read_to_string(&a.input)
    }
    .map_err(|e| config_error(format!("reading {}: {e}", a.input.display())))?;
    let input = prox_input::parse(&text).map_err(|e| config_error(format!("{}: {e}", a.input.display())))?;
    let kappa = a.kappa.unwrap_or(input.kappa);
    if !(a.root_tol.is_finite() && a.root_tol >= 0.0) {
        return Err(config_error("--root-tol must be non-negative"));
    }
    let finder = match a.finder {
        FinderArg::Auto => RootFinder::Auto,
        FinderArg::Exact => RootFinder::Exact,
        FinderArg::Bisection => RootFinder::Bisection { tol: a.root_tol },
        FinderArg::Ssnewton => RootFinder::SsNewton(NewtonOptions { tol: a.root_tol, ..NewtonOptions::default() }),
        FinderArg::ClosedForm => RootFinder::ClosedForm,
        FinderArg::GroupPath => RootFinder::GroupPath,
        FinderArg::Recursive => RootFinder::Recursive,
    };
    let evaluate = if a.inverse || input.inverse { scaled_prox_inverse } else { scaled_prox };
    let (z, report) = evaluate(&input.metric, &input.h, &input.x, kappa, &finder).map_err(|e| match e {
        proxqn::Error::InvalidArgument(_) | proxqn::Error::DimensionMismatch { .. } => config_error(e.to_string()),
        other => Failure(EXIT_SOLVER, other.to_string()),
    })?;
    print!("{}", prox_input::render(&z, &report));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> CliConfig {
        CliConfig::try_parse_from(std::iter::once("proxqn").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn config_round_trips_through_json() {
        for args in [
            &["solve", "--family", "lasso_gaussian", "--m", "150", "--n", "300", "--lambda", "0.1", "--solver", "zero-sr1", "--tol", "1e-8"][..],
            &["race", "--families", "nnls,group_lasso", "--solvers", "ista,spg", "--jobs", "2", "--gnuplot", "--max-seconds", "3.5"],
            &["validate", "--suite", "rates", "--suite", "1", "--n", "30"],
            &["prox", "in.txt", "--inverse", "--finder", "closed-form", "--kappa", "0.25"],
            &["--dump-config", "solve", "--paper-scale", "--line-search", "none", "--target-error", "1e-6"],
        ] {
            let cfg = parse(args);
            let json = serde_json::to_string(&cfg).unwrap();
            let back: CliConfig = serde_json::from_str(&json).unwrap();
            assert_eq!(back, cfg, "{json}");
        }
    }

    #[test]
    fn suite_names_are_normalised() {
        let Command::Validate(v) = parse(&["validate", "--suite", "7,prox-oracle"]).command else { panic!() };
        assert_eq!(v.suites, vec!["rates", "prox-oracle"]);
    }

    #[test]
    fn unknown_names_are_rejected() {
        for args in [&["solve", "--solver", "newton"][..], &["solve", "--family", "lasso"], &["validate", "--suite", "everything"]] {
            let err = CliConfig::try_parse_from(std::iter::once("proxqn").chain(args.iter().copied())).unwrap_err();
            assert_eq!(err.exit_code(), 2);
        }
    }

    #[test]
    fn recipe_overrides_apply_on_top_of_defaults() {
        let Command::Solve(s) = parse(&["solve", "--family", "group_lasso", "--n", "40", "--seed", "3"]).command else { panic!() };
        let r = s.recipe.recipe(s.recipe.family);
        assert_eq!(r, ProblemRecipe { n: 40, ..ProblemRecipe::desk(Family::GroupLasso, 3) });
    }

    #[test]
    fn bad_options_are_config_errors() {
        let Command::Solve(mut s) = parse(&["solve"]).command else { panic!() };
        assert!(s.options.options().is_ok());
        s.options.gamma = 1.5;
        assert!(s.options.options().is_err());
        s.options.gamma = 0.5;
        s.options.tol = 0.0;
        assert!(s.options.options().is_err());
    }
}
