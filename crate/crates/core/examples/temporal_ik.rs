//! Frame-wise versus patch-wise IK on a generated sequence with extended limbs.
//!
//! `cargo run --release --example temporal_ik -- [lambda]`

use retarget_ik::eval::{all_joints, mpjas};
use retarget_ik::motiongen::{generate, LimbMode, MotionSpec, SpeedTier};
use retarget_ik::solver::{ik_sequence_frame_by_frame, ik_sequence_temporal, SolverOptions};
use retarget_ik::{default_body, LimbLengths};

fn main() -> retarget_ik::Result<()> {
    let lambda: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.002);
    let body = default_body(&LimbLengths::default())?;
    let gt = generate(&MotionSpec::new(SpeedTier::B, LimbMode::Phased, 7), &body)?;
    let options = SolverOptions::default();
    let joints = all_joints(&body);

    let runs = [
        ("1a", ik_sequence_frame_by_frame(&body, &gt.poses, false, &options)?),
        ("1b", ik_sequence_frame_by_frame(&body, &gt.poses, true, &options)?),
        ("2_M=5", ik_sequence_temporal(&body, &gt.poses, 5, lambda, &options)?),
    ];
    println!("{} frames, temporal weight {lambda}", gt.params.len());
    for (label, r) in &runs {
        println!(
            "{label:<6} MPJAS {:.3e} rad/joint, {:>5} iterations, {:>6.1} frames/s",
            mpjas(&r.params, &gt.params, &body, &joints)?,
            r.total_iterations(),
            r.fps()
        );
    }
    Ok(())
}
