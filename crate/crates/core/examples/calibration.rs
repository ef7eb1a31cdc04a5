//! Runs every built-in suite at its default size and prints the summary
//! checks, including per-seed shot recovery.
//!
//! cargo run --release -p streamdeq-core --example calibration

use std::time::Instant;

use streamdeq::bench::{run_experiment, SuiteRegistry, DEFAULT_SEEDS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reg = SuiteRegistry::builtin();
    for name in reg.names() {
        let spec = reg.get(name)?.default_spec(DEFAULT_SEEDS);
        let began = Instant::now();
        let out = run_experiment(&spec)?;
        println!("== {name} ({} seeds, budgets {:?}, T={}) in {:.2?}", spec.seeds.len(), spec.budgets, spec.sequence.length, began.elapsed());
        for check in &out.checks {
            println!("{check}");
        }
    }
    Ok(())
}
