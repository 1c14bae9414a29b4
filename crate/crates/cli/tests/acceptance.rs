//! The twelve acceptance criteria at full scale. Takes several minutes on
//! one core; run with `cargo test --release --test acceptance -- --nocapture`
//! to see the per-criterion lines as they finish.

use std::path::Path;

use fpp_cli::suite::{run_all, Status};
use fpp_cli::Profile;

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let exe = Path::new(env!("CARGO_BIN_EXE_fpp"));
    let outcomes = run_all(Profile::Full, Some(exe), dir.path()).unwrap();
    assert_eq!(outcomes.len(), 12);
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| o.status != Status::Pass)
        .map(|o| o.line())
        .collect();
    println!("{} of 12 criteria passed", 12 - failed.len());
    assert!(failed.is_empty(), "failing criteria:\n{}", failed.join("\n"));
}
