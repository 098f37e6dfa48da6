//! Problem generators, reference solutions, solver races and trace persistence.

mod generate;
mod race;
mod recipe;
mod reference;

pub use generate::{diff3d_operator, generate, random_block_sizes, GeneratedProblem};
pub use race::{race, write_race, ManifestProblem, ManifestRun, RaceEntry, RaceManifest, RaceProblem};
pub use recipe::{Family, ProblemRecipe};
pub use reference::{reference_solution, Reference, ReferenceCache, ReferenceMeta, CACHE_ENV, REFERENCE_MAX_ITER, REFERENCE_TOL};
