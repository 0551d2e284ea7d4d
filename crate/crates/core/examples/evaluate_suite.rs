//! Runs the four IK strategies on a generated suite and prints the tables.
//!
//! `cargo run --release --example evaluate_suite -- [pairs_per_tier] [seed]`

use retarget_ik::eval::{run_experiment, ExperimentOptions, Variant};
use retarget_ik::motiongen::generate_suite_with;
use retarget_ik::{default_body, LimbLengths};

fn main() -> retarget_ik::Result<()> {
    let mut args = std::env::args().skip(1);
    let pairs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(2024);

    let body = default_body(&LimbLengths::default())?;
    let suite = generate_suite_with(seed, pairs, &body)?;
    let report = run_experiment(&suite, &Variant::STANDARD, &body, &ExperimentOptions::default())?;
    print!("{}", report.summary());
    println!("\n{} sequences, {:.1} s", suite.len(), report.total_seconds);
    Ok(())
}
