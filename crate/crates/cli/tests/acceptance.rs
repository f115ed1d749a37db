//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! `ACCEPTANCE_SEED` overrides the root seed and `ACCEPTANCE_CRITERIA` (comma
//! separated ids) restricts the run.

use std::process::ExitCode;

use hawkes_scaling_cli::acceptance::{run_suite, CRITERIA};

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        for id in 1..=CRITERIA {
            println!("criterion_{id:02}: test");
        }
        return ExitCode::SUCCESS;
    }
    let seed = std::env::var("ACCEPTANCE_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(1);
    let ids: Vec<u8> = std::env::var("ACCEPTANCE_CRITERIA")
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect())
        .unwrap_or_default();
    println!("acceptance suite, seed {seed}, {} threads", rayon::current_num_threads());
    let outcomes = run_suite(seed, &ids);
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
