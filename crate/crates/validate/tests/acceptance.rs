//! One pass/fail line per acceptance criterion.
//!
//! Run with `cargo test -p proxqn-validate --test acceptance -- --nocapture`.

use proxqn_validate::{run_suite, Config, Suite};

#[test]
fn acceptance_criteria() {
    let cfg = Config::default();
    let mut failed = Vec::new();
    for suite in Suite::ALL {
        let outcome = run_suite(suite, &cfg);
        println!("{outcome}");
        if !outcome.passed {
            failed.push(suite.as_str());
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
