use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::recipe::ProblemRecipe;
use crate::error::{Error, Result};
use crate::solver::{run_fista_restart, LineSearch, ProblemSpec, SolverOptions, Termination};

pub const CACHE_ENV: &str = "PROXQN_CACHE_DIR";
pub const REFERENCE_TOL: f64 = 1e-12;
pub const REFERENCE_MAX_ITER: usize = 1_000_000;

/// A high-accuracy solution `(x★, F★)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub x: Vec<f64>,
    pub fstar: f64,
    pub meta: ReferenceMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMeta {
    pub recipe: Option<ProblemRecipe>,
    pub recipe_hash: Option<String>,
    pub dim: usize,
    pub fstar: f64,
    pub iterations: usize,
    /// `‖p‖∞` of the final proximal-gradient step.
    pub step_norm: f64,
    /// The iteration cap was hit before the tolerance.
    pub approximate: bool,
    pub version: String,
}

/// FISTA with adaptive restart until the proximal-gradient step is below `tol` in ∞-norm.
pub fn reference_solution(problem: &ProblemSpec, tol: f64, max_iter: usize) -> Result<Reference> {
    let opts = SolverOptions {
        tol,
        max_iter,
        line_search: LineSearch::Backtracking,
        record_trace: false,
        ..SolverOptions::default()
    };
    let res = run_fista_restart(&ProblemSpec { fstar: None, ..problem.clone() }, &opts)?;
    let approximate = res.status != Termination::Converged;
    if approximate {
        log::warn!("reference for {} stopped after {} iterations without reaching {tol:e}", problem.name, res.iterations);
    }
    let mut last_step = vec![0.0; problem.dim()];
    let step_norm = final_step_norm(problem, &res.x, &mut last_step)?;
    Ok(Reference {
        fstar: res.objective,
        meta: ReferenceMeta {
            recipe: None,
            recipe_hash: None,
            dim: problem.dim(),
            fstar: res.objective,
            iterations: res.iterations,
            step_norm,
            approximate,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        x: res.x,
    })
}

/// `‖prox_{h/L}(x − ∇f(x)/L) − x‖∞`.
fn final_step_norm(problem: &ProblemSpec, x: &[f64], scratch: &mut [f64]) -> Result<f64> {
    let l = problem.lipschitz.unwrap_or(1.0).max(f64::MIN_POSITIVE);
    problem.f.value_grad(x, scratch);
    let v: Vec<f64> = x.iter().zip(scratch.iter()).map(|(xi, gi)| xi - gi / l).collect();
    let z = problem.h.prox_diag(&v, &vec![1.0; x.len()], 1.0 / l)?;
    Ok(z.iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// On-disk cache of reference solutions keyed by recipe hash.
///
/// Each entry is `<hash>.bin` (little-endian `f64` values of `x★`) plus `<hash>.json`.
#[derive(Debug, Clone)]
pub struct ReferenceCache {
    dir: PathBuf,
}

impl ReferenceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// `$PROXQN_CACHE_DIR`, or `proxqn-cache` under the system temporary directory.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(dir) if !dir.is_empty() => Self::new(dir),
            _ => Self::new(std::env::temp_dir().join("proxqn-cache")),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn paths(&self, hash: &str) -> (PathBuf, PathBuf) {
        (self.dir.join(format!("{hash}.bin")), self.dir.join(format!("{hash}.json")))
    }

    pub fn load(&self, recipe: &ProblemRecipe) -> Result<Option<Reference>> {
        let hash = recipe.hash();
        let (bin, json) = self.paths(&hash);
        if !bin.exists() || !json.exists() {
            return Ok(None);
        }
        let meta: ReferenceMeta = serde_json::from_slice(&fs::read(&json)?)?;
        let bytes = fs::read(&bin)?;
        if bytes.len() != 8 * meta.dim || meta.recipe_hash.as_deref() != Some(hash.as_str()) {
            log::warn!("ignoring corrupt cache entry {}", bin.display());
            return Ok(None);
        }
        let x = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        Ok(Some(Reference { x, fstar: meta.fstar, meta }))
    }

    pub fn store(&self, recipe: &ProblemRecipe, reference: &Reference) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let hash = recipe.hash();
        let (bin, json) = self.paths(&hash);
        let bytes: Vec<u8> = reference.x.iter().flat_map(|v| v.to_le_bytes()).collect();
        let meta = ReferenceMeta { recipe: Some(recipe.clone()), recipe_hash: Some(hash), ..reference.meta.clone() };
        let tmp = bin.with_extension("bin.tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &bin)?;
        fs::write(&json, serde_json::to_vec_pretty(&meta)?)?;
        Ok(())
    }

    /// Returns the cached reference, computing and storing it on a miss. The flag is true on a
    /// cache hit.
    pub fn get_or_compute(&self, recipe: &ProblemRecipe, problem: &ProblemSpec) -> Result<(Reference, bool)> {
        if let Some(r) = self.load(recipe)? {
            if r.x.len() != problem.dim() {
                return Err(Error::InvalidArgument("cached reference has the wrong dimension".into()));
            }
            return Ok((r, true));
        }
        let mut r = reference_solution(problem, REFERENCE_TOL, REFERENCE_MAX_ITER)?;
        r.meta.recipe = Some(recipe.clone());
        r.meta.recipe_hash = Some(recipe.hash());
        self.store(recipe, &r)?;
        Ok((r, false))
    }
}
