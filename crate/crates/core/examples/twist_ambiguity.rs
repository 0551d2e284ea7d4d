//! An extended arm does not determine the twist of its upper arm: two IK
//! solutions fit the keypoints equally well with different shoulder twist.

use retarget_ik::losses::{frame_loss, FrameTargets};
use retarget_ik::rotmath::relative_angle;
use retarget_ik::solver::{ik_frame, SolverOptions};
use retarget_ik::{default_body, LimbLengths, PoseFrame};

fn main() -> retarget_ik::Result<()> {
    let body = default_body(&LimbLengths::default())?;
    let index = |name: &str| body.param_names().iter().position(|n| n == name).expect("known parameter");
    let mut truth = body.rest_params();
    truth[index("shoulder_l.x")] = 0.6;
    truth[index("shoulder_l.y")] = -0.4;
    let frame = PoseFrame::from_pose(&body, &body.apply_params(&truth)?);
    let targets = FrameTargets::new(&body, &frame)?;
    let shoulder = body.joint_index("shoulder_l").expect("shoulder joint");

    let mut orientations = Vec::new();
    for twist in [-0.6, 0.0, 0.6] {
        let mut start = body.rest_params();
        start[index("shoulder_l.z")] = twist;
        let r = ik_frame(&body, &frame, &start, &SolverOptions::default())?;
        let p = &r.params[0];
        println!(
            "start twist {twist:>5.2}: solved twist {:>7.4}, loss {:.1e}",
            p[index("shoulder_l.z")],
            frame_loss(p, &targets, &body)?
        );
        orientations.push(body.joint_orientations(&body.apply_params(p)?)[shoulder]);
    }
    println!(
        "shoulder orientation gap between the outer solutions: {:.3} rad",
        relative_angle(&orientations[0], &orientations[2])
    );
    Ok(())
}
