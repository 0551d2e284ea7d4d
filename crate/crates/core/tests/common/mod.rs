#![allow(dead_code)]

use rand::Rng;
use retarget_ik::kinematics::{Hierarchy, KinematicChain, Transform};
use retarget_ik::{AxisAngle, RotationMatrix, Vec3};

pub fn unit_vector<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn rotation<R: Rng>(rng: &mut R) -> RotationMatrix {
    let angle = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    AxisAngle::new(unit_vector(rng), angle).to_matrix().expect("unit axis")
}

/// Tree with `n` joints in topological order; every non-root joint picks a
/// uniformly random earlier parent, so branching varies from a path to a star.
pub fn random_chain<R: Rng>(rng: &mut R, n: usize) -> (Hierarchy, KinematicChain) {
    let parents: Vec<Option<usize>> = (0..n).map(|j| (j > 0).then(|| rng.gen_range(0..j))).collect();
    let hierarchy = Hierarchy::new(parents).expect("parents precede children");
    let transforms =
        (0..n).map(|_| Transform::new(rotation(rng), unit_vector(rng) * rng.gen_range(0.05..0.5))).collect();
    let chain = KinematicChain::new(transforms, &hierarchy).expect("non-zero links");
    (hierarchy, chain)
}

/// Global transform of `joint` as the product of local transforms from the root.
pub fn path_product(
    h: &Hierarchy,
    chain: &KinematicChain,
    deltas: Option<&[RotationMatrix]>,
    joint: usize,
) -> Transform {
    h.path_from_root(joint).iter().fold(Transform::IDENTITY, |acc, &j| {
        let mut local = chain.transforms()[j];
        if let Some(d) = deltas {
            local = local.compose(&Transform::from_rotation(d[j]));
        }
        acc.compose(&local)
    })
}
