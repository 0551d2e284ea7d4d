//! Hierarchical kinematic chains and forward kinematics.
//!
//! Each joint stores its rigid transform relative to its parent (rotation plus
//! translation, the homogeneous bottom row is implicit). Global transforms are
//! the ordered product of local transforms along the path from the root.
//! Reorientation deltas are right-composed onto each local transform, so a
//! delta at joint `j` moves all descendants of `j` but not `j` itself.

use crate::error::{Error, Result};
use crate::rotmath::{RotationMatrix, Vec3};

/// Rigid transform: `x ↦ rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub rotation: RotationMatrix,
    pub translation: Vec3,
}

impl Transform {
    pub const IDENTITY: Transform =
        Transform { rotation: RotationMatrix::IDENTITY, translation: Vec3::new(0.0, 0.0, 0.0) };

    pub fn new(rotation: RotationMatrix, translation: Vec3) -> Self {
        Transform { rotation, translation }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Transform { rotation: RotationMatrix::IDENTITY, translation }
    }

    pub fn from_rotation(rotation: RotationMatrix) -> Self {
        Transform { rotation, translation: Vec3::zeros() }
    }

    /// `self * other` in homogeneous form.
    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            rotation: RotationMatrix::from_matrix_unchecked(self.rotation.matrix() * other.rotation.matrix()),
            translation: self.translation + self.rotation.matrix() * other.translation,
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.matrix() * p + self.translation
    }
}

/// Parent table of a tree of joints in topological order.
///
/// Joint 0 is the single root (its parent is the world frame); every other
/// joint has a parent with a smaller index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hierarchy {
    parents: Vec<Option<usize>>,
}

impl Hierarchy {
    pub fn new(parents: Vec<Option<usize>>) -> Result<Self> {
        if parents.is_empty() {
            return Err(Error::InvalidHierarchy("no joints".into()));
        }
        if parents[0].is_some() {
            return Err(Error::InvalidHierarchy("joint 0 must be the root".into()));
        }
        for (j, p) in parents.iter().enumerate().skip(1) {
            match p {
                None => return Err(Error::InvalidHierarchy(format!("joint {j} is a second root"))),
                Some(p) if *p >= j => {
                    return Err(Error::InvalidHierarchy(format!(
                        "joint {j} has parent {p}, which is not earlier in topological order"
                    )))
                }
                _ => {}
            }
        }
        Ok(Hierarchy { parents })
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parents[joint]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    /// Joints from the root down to `joint`, inclusive.
    pub fn path_from_root(&self, joint: usize) -> Vec<usize> {
        let mut path = vec![joint];
        let mut j = joint;
        while let Some(p) = self.parents[j] {
            path.push(p);
            j = p;
        }
        path.reverse();
        path
    }

    /// True when `ancestor` lies on the root path of `joint` (a joint is its own ancestor).
    pub fn is_ancestor(&self, ancestor: usize, joint: usize) -> bool {
        let mut j = Some(joint);
        while let Some(k) = j {
            if k == ancestor {
                return true;
            }
            j = self.parents[k];
        }
        false
    }
}

/// Local parent-child transforms of every joint.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    transforms: Vec<Transform>,
}

impl KinematicChain {
    pub fn new(transforms: Vec<Transform>, hierarchy: &Hierarchy) -> Result<Self> {
        if transforms.len() != hierarchy.len() {
            return Err(Error::InconsistentChain(format!(
                "{} transforms for {} joints",
                transforms.len(),
                hierarchy.len()
            )));
        }
        for (j, t) in transforms.iter().enumerate().skip(1) {
            if !(t.translation.norm() > 0.0) {
                return Err(Error::ZeroLengthLink { joint: j });
            }
        }
        Ok(KinematicChain { transforms })
    }

    pub fn len(&self) -> usize {
        self.transforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transforms.is_empty()
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    pub fn link_length(&self, joint: usize) -> f64 {
        self.transforms[joint].translation.norm()
    }
}

/// Global (world-frame) transform of every joint.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPose {
    transforms: Vec<Transform>,
}

impl GlobalPose {
    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    pub fn position(&self, joint: usize) -> Vec3 {
        self.transforms[joint].translation
    }

    pub fn orientation(&self, joint: usize) -> &RotationMatrix {
        &self.transforms[joint].rotation
    }

    pub fn len(&self) -> usize {
        self.transforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transforms.is_empty()
    }
}

pub fn fk(chain: &KinematicChain, h: &Hierarchy) -> Result<GlobalPose> {
    check_lengths(chain, h)?;
    let mut out: Vec<Transform> = Vec::with_capacity(chain.len());
    for (j, local) in chain.transforms.iter().enumerate() {
        let global = match h.parent(j) {
            None => *local,
            Some(p) => out[p].compose(local),
        };
        out.push(global);
    }
    Ok(GlobalPose { transforms: out })
}

/// Forward kinematics with one reorientation delta per joint.
pub fn fk_reoriented(chain: &KinematicChain, h: &Hierarchy, deltas: &[RotationMatrix]) -> Result<GlobalPose> {
    check_lengths(chain, h)?;
    if deltas.len() != chain.len() {
        return Err(Error::InconsistentChain(format!("{} deltas for {} joints", deltas.len(), chain.len())));
    }
    let mut out: Vec<Transform> = Vec::with_capacity(chain.len());
    for (j, (local, delta)) in chain.transforms.iter().zip(deltas).enumerate() {
        let local = local.compose(&Transform::from_rotation(*delta));
        let global = match h.parent(j) {
            None => local,
            Some(p) => out[p].compose(&local),
        };
        out.push(global);
    }
    Ok(GlobalPose { transforms: out })
}

/// Unit direction from each joint's parent to the joint, in the world frame.
///
/// The root has no link and maps to `None`.
pub fn link_directions(gp: &GlobalPose, h: &Hierarchy) -> Result<Vec<Option<Vec3>>> {
    if gp.len() != h.len() {
        return Err(Error::InconsistentChain(format!("{} poses for {} joints", gp.len(), h.len())));
    }
    (0..h.len())
        .map(|j| match h.parent(j) {
            None => Ok(None),
            Some(p) => {
                let v = gp.position(j) - gp.position(p);
                let n = v.norm();
                if n > 0.0 {
                    Ok(Some(v / n))
                } else {
                    Err(Error::ZeroLengthLink { joint: j })
                }
            }
        })
        .collect()
}

fn check_lengths(chain: &KinematicChain, h: &Hierarchy) -> Result<()> {
    if chain.len() != h.len() {
        return Err(Error::InconsistentChain(format!("chain has {} joints, hierarchy has {}", chain.len(), h.len())));
    }
    Ok(())
}
