//! Forward kinematics on a small hand-built branching chain.

use std::f64::consts::FRAC_PI_2;

use retarget_ik::kinematics::{fk, fk_reoriented, link_directions, Hierarchy, KinematicChain, Transform};
use retarget_ik::{RotationMatrix, Vec3};

fn main() -> retarget_ik::Result<()> {
    // root -> a -> b, root -> c
    let h = Hierarchy::new(vec![None, Some(0), Some(1), Some(0)])?;
    let chain = KinematicChain::new(
        vec![
            Transform::IDENTITY,
            Transform::from_translation(Vec3::new(0.0, 0.0, 1.0)),
            Transform::from_translation(Vec3::new(0.0, 0.0, 0.5)),
            Transform::from_translation(Vec3::new(0.3, 0.0, 0.0)),
        ],
        &h,
    )?;
    let rest = fk(&chain, &h)?;

    // Bending joint `a` moves `b` only.
    let mut deltas = vec![RotationMatrix::IDENTITY; 4];
    deltas[1] = RotationMatrix::rot_y(FRAC_PI_2);
    let bent = fk_reoriented(&chain, &h, &deltas)?;
    let dirs = link_directions(&bent, &h)?;

    for (j, dir) in dirs.iter().enumerate() {
        println!(
            "joint {j}: rest {:>20} bent {:>20} link {}",
            format!("{:.3?}", rest.position(j).as_slice()),
            format!("{:.3?}", bent.position(j).as_slice()),
            dir.map_or("-".to_string(), |d| format!("{:.3?}", d.as_slice()))
        );
    }
    Ok(())
}
