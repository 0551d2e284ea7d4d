//! Rotation representations and the one-parameter family of rotations that
//! take one direction onto another.

use std::f64::consts::PI;

use retarget_ik::rotmath::{matrix_to_axis_angle, matrix_to_euler_xyz, relative_angle, solution_space};
use retarget_ik::{EulerXYZ, Vec3};

fn main() -> retarget_ik::Result<()> {
    let r = EulerXYZ::new(0.3, -0.5, 1.2).to_matrix();
    let aa = matrix_to_axis_angle(&r);
    let e = matrix_to_euler_xyz(&r)?;
    println!("euler (0.3, -0.5, 1.2) -> axis {:.4?} angle {:.4}", aa.axis.as_slice(), aa.angle);
    println!("back to euler: ({:.4}, {:.4}, {:.4})", e.x, e.y, e.z);

    // Every member maps a onto b; members differ by a twist about b.
    let a = Vec3::new(0.0, 0.0, -1.0);
    let b = Vec3::new(0.6, 0.0, -0.8);
    let base = solution_space(&a, &b, 0.0)?.to_matrix();
    println!("\n{:>7} {:>22} {:>8} {:>10} {:>12}", "alpha", "axis", "angle", "|Ra - b|", "vs alpha=0");
    for k in 0..=4 {
        let alpha = k as f64 * PI / 4.0;
        let s = solution_space(&a, &b, alpha)?;
        let m = s.to_matrix();
        let miss = (m.rotate(&a) - b).norm();
        println!(
            "{alpha:>7.3} {:>22} {:>8.4} {miss:>10.1e} {:>12.4}",
            format!("{:.3?}", s.axis.as_slice()),
            s.angle,
            relative_angle(&base, &m)
        );
    }
    Ok(())
}
