//! Chooses the temporal weight per speed tier on held-out sequences, then
//! compares the default weights and the calibrated ones on an evaluation
//! suite generated from a different seed.
//!
//! `cargo run --release --example calibrate_lambda -- [calibration_seed] [evaluation_seed]`

use retarget_ik::eval::{calibrate_lambdas, run_experiment, ExperimentOptions, LambdaTable, Variant, LAMBDA_GRID};
use retarget_ik::motiongen::{SpeedTier, SuiteSpec};
use retarget_ik::{default_body, LimbLengths};

fn main() -> retarget_ik::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let calibration_seed = args.first().copied().unwrap_or(1);
    let evaluation_seed = args.get(1).copied().unwrap_or(2024);
    let body = default_body(&LimbLengths::default())?;

    // Twelve held-out sequences: two bent-only/phased pairs per tier.
    let held_out = SuiteSpec { pairs_per_tier: 2, ..SuiteSpec::new(calibration_seed) }.generate(&body)?;
    let calibration = calibrate_lambdas(&held_out, &LAMBDA_GRID, 5, &body, &ExperimentOptions::default())?;
    println!("{:>8} {:>10} {:>10} {:>10}", "lambda", "a", "b", "c");
    for &lambda in &LAMBDA_GRID {
        let cell = |tier| {
            calibration.points.iter().find(|p| p.tier == tier && p.lambda == lambda).map_or(f64::NAN, |p| p.mpjas)
        };
        println!(
            "{lambda:>8} {:>10.3e} {:>10.3e} {:>10.3e}",
            cell(SpeedTier::A),
            cell(SpeedTier::B),
            cell(SpeedTier::C)
        );
    }
    let t = calibration.table;
    println!("calibrated: a {} b {} c {}", t.a, t.b, t.c);

    let suite = SuiteSpec { pairs_per_tier: 1, ..SuiteSpec::new(evaluation_seed) }.generate(&body)?;
    for (name, lambdas) in [("default", LambdaTable::default()), ("calibrated", t)] {
        let options = ExperimentOptions { lambdas, ..Default::default() };
        let report = run_experiment(&suite, &Variant::STANDARD, &body, &options)?;
        println!("\n== {name} weights\n{}", report.summary());
    }
    Ok(())
}
