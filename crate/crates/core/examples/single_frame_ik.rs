//! Recovers the joint angles of one posed frame from its keypoints.

use retarget_ik::losses::{frame_loss, FrameTargets};
use retarget_ik::solver::{ik_frame, Method, SolverOptions};
use retarget_ik::{default_body, LimbLengths, PoseFrame};

fn main() -> retarget_ik::Result<()> {
    let body = default_body(&LimbLengths::default())?;
    let mut truth = body.rest_params();
    for (name, v) in [("hip_l.x", 0.8), ("knee_l.x", 1.1), ("shoulder_r.y", -0.7), ("elbow_r.x", 0.9), ("neck.x", 0.3)]
    {
        let i = body.param_names().iter().position(|n| n == name).expect("known parameter");
        truth[i] = v;
    }
    let frame = PoseFrame::from_pose(&body, &body.apply_params(&truth)?);
    let targets = FrameTargets::new(&body, &frame)?;

    // From the rest pose most link angles sit at the tip of their cones, where
    // the scalar quasi-Newton method finds no descent direction.
    for method in [Method::LeastSquares, Method::QuasiNewton] {
        let options = SolverOptions { method, ..Default::default() };
        let r = ik_frame(&body, &frame, &body.rest_params(), &options)?;
        let s = &r.stages[0];
        println!(
            "{method:?}: loss {:.2e} -> {:.2e} in {} iterations ({:?})",
            s.initial_loss, s.final_loss, s.iterations, s.termination
        );
        println!("  check: {:.2e}", frame_loss(&r.params[0], &targets, &body)?);
        for name in ["hip_l.x", "knee_l.x", "shoulder_r.y", "elbow_r.x", "neck.x"] {
            let i = body.param_names().iter().position(|n| n == name).expect("known parameter");
            println!("  {name:<14} truth {:>7.4} found {:>7.4}", truth[i], r.params[0][i]);
        }
    }
    Ok(())
}
