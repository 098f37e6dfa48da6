//! Brute-force oracles for checking `proxqn`.
//!
//! Nothing here calls into the library's numerics: metrics are assembled densely, proximal
//! points come from long accelerated proximal-gradient runs or exhaustive active-set
//! enumeration, and scalar problems are solved by golden-section search or bisection.

pub mod active_set;
pub mod composite;
pub mod dense;
pub mod func;
pub mod kkt;
pub mod qp;
pub mod scalar;

pub use active_set::active_set_prox;
pub use composite::{least_squares_reference, minimize, minimize_quadratic, scaled_prox_bruteforce, Minimized};
pub use func::{project_simplex, Func, ScalarPieces};
pub use qp::{weighted_l1_ball_active_set, weighted_simplex_active_set};
