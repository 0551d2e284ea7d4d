//! Synthetic ground truth: speed tiers, limb modes and the phase schedule.

use retarget_ik::motiongen::{flexion_indices, generate, LimbMode, MotionSpec, SpeedTier};
use retarget_ik::{default_body, LimbLengths};

fn main() -> retarget_ik::Result<()> {
    let body = default_body(&LimbLengths::default())?;
    let flex = flexion_indices(&body)?;
    for tier in SpeedTier::ALL {
        for mode in [LimbMode::BentOnly, LimbMode::Phased] {
            let spec = MotionSpec::new(tier, mode, 42);
            let g = generate(&spec, &body)?;
            let step = g
                .params
                .windows(2)
                .flat_map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (b - a).abs()))
                .fold(0.0, f64::max);
            let knee: Vec<String> = g.params.iter().map(|p| format!("{:.2}", p[flex[0]])).collect();
            println!(
                "{} {:<9} max step {:.4} (cap {:.4})  knee_l.x {}",
                tier.label(),
                mode.label(),
                step,
                tier.cap(),
                knee.join(" ")
            );
        }
    }
    let spec = MotionSpec::new(SpeedTier::A, LimbMode::Phased, 42).with_frames(60);
    println!("60-frame schedule: {:?}", spec.schedule);
    Ok(())
}
