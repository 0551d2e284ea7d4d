//! The default human chain: joints, degrees of freedom, bounds and keypoints.

use retarget_ik::io::format_body_config;
use retarget_ik::{default_body, LimbLengths};

fn main() -> retarget_ik::Result<()> {
    let body = default_body(&LimbLengths::default())?;
    println!(
        "{} nodes, {} reorientable joints, {} parameters ({} rotational DOF), hash {}",
        body.node_names().len(),
        body.joints().len(),
        body.param_count(),
        body.dof_count(),
        &body.config_hash()[..12]
    );
    for (name, (lo, hi)) in body.param_names().iter().zip(body.bounds()) {
        println!("  {name:<18} [{lo:>6.2}, {hi:>5.2}]");
    }
    println!("keypoints: {}", body.keypoint_names().join(", "));

    let rest = body.rest_pose();
    for (name, node) in body.keypoints() {
        println!("  {name:<12} {:.3?}", rest.position(*node).as_slice());
    }

    // A taller subject: same joints, longer links.
    let tall = default_body(&LimbLengths::default().scaled(1.1))?;
    println!("scaled chain hash {}", &tall.config_hash()[..12]);
    let json = format_body_config(body.config())?;
    println!("body file: {} bytes", json.len());
    Ok(())
}
