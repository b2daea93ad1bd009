//! One line per acceptance criterion; exits nonzero when any fails.
//! `HAUSSTRAIGHT_SEED` overrides the default seed.

use hausstraight::verify::run_all;

fn main() {
    let seed = std::env::var("HAUSSTRAIGHT_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(7);
    let outcomes = run_all(seed);
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {} failed", outcomes.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
