//! The reorientable human chain: joint table, ranges of motion and the mapping
//! from the optimizer's parameter vector to joint reorientations.
//!
//! The chain is described by a [`BodyConfig`], a plain data table that can be
//! written to and read from disk. [`default_body`] builds the standard
//! 14-joint, 28-DOF layout:
//!
//! | joint            | DOF axes | notes                           |
//! |------------------|----------|---------------------------------|
//! | mid pelvis       | root     | axis-angle `(n_x, n_y, n_z, Φ)` |
//! | hips             | X Y Z    |                                 |
//! | knees            | X        | flexion                         |
//! | lower, mid spine | X Z      | equal ranges                    |
//! | neck             | X        | flexion                         |
//! | clavicles        | Y Z      | no keypoint                     |
//! | shoulders        | X Y Z    |                                 |
//! | elbows           | X        | flexion                         |
//!
//! World axes: `+X` is the subject's left, `+Y` anterior, `+Z` up. In the rest
//! pose every limb hangs along its local `-Z` (legs, arms) or `+Z` (spine), so
//! a Z rotation is a twist about the limb itself.

use std::f64::consts::PI;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{fk_reoriented, GlobalPose, Hierarchy, KinematicChain, Transform};
use crate::rotmath::{axis_angle_to_matrix, euler_xyz_to_matrix, AxisAngle, EulerXYZ, RotationMatrix, Vec3};

pub const BODY_SCHEMA: &str = "retarget-ik/body/1";

/// Below this norm the root axis is treated as absent and the root is not rotated.
pub const ROOT_AXIS_EPS: f64 = 1e-6;

pub const REORIENTABLE_JOINTS: usize = 14;
pub const ROTATIONAL_DOFS: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// One rotational degree of freedom with its range of motion in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DofSpec {
    pub axis: Axis,
    pub lo: f64,
    pub hi: f64,
}

impl DofSpec {
    pub fn new(axis: Axis, lo: f64, hi: f64) -> Self {
        DofSpec { axis, lo, hi }
    }
}

/// One node of the chain. Nodes without DOFs (ankles, wrists, head) are
/// end points that carry a keypoint but are never reoriented.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    /// Rest offset from the parent joint, in the parent's frame (meters).
    pub offset: [f64; 3],
    /// Rest orientation relative to the parent as intrinsic XYZ angles.
    #[serde(default, skip_serializing_if = "is_zero3")]
    pub rest_rotation: [f64; 3],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dofs: Vec<DofSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoint: Option<String>,
}

fn is_zero3(v: &[f64; 3]) -> bool {
    v.iter().all(|x| *x == 0.0)
}

/// Serializable description of a body: joints in topological order plus the
/// keypoints whose root-relative directions enter the global pose term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyConfig {
    pub schema: String,
    pub joints: Vec<JointSpec>,
    pub global_targets: Vec<String>,
}

/// Segment lengths of the default skeleton, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimbLengths {
    pub pelvis_width: f64,
    /// Mid pelvis to lower spine joint.
    pub lumbar: f64,
    /// Each of the two spine segments.
    pub spine: f64,
    pub clavicle: f64,
    pub upper_arm: f64,
    pub forearm: f64,
    pub thigh: f64,
    pub shank: f64,
    pub neck: f64,
    pub head: f64,
}

impl Default for LimbLengths {
    fn default() -> Self {
        LimbLengths {
            pelvis_width: 0.24,
            lumbar: 0.10,
            spine: 0.25,
            clavicle: 0.17,
            upper_arm: 0.28,
            forearm: 0.25,
            thigh: 0.42,
            shank: 0.42,
            neck: 0.12,
            head: 0.15,
        }
    }
}

impl LimbLengths {
    pub fn scaled(&self, k: f64) -> Self {
        LimbLengths {
            pelvis_width: self.pelvis_width * k,
            lumbar: self.lumbar * k,
            spine: self.spine * k,
            clavicle: self.clavicle * k,
            upper_arm: self.upper_arm * k,
            forearm: self.forearm * k,
            thigh: self.thigh * k,
            shank: self.shank * k,
            neck: self.neck * k,
            head: self.head * k,
        }
    }

    fn named(&self) -> [(&'static str, f64); 10] {
        [
            ("pelvis_width", self.pelvis_width),
            ("lumbar", self.lumbar),
            ("spine", self.spine),
            ("clavicle", self.clavicle),
            ("upper_arm", self.upper_arm),
            ("forearm", self.forearm),
            ("thigh", self.thigh),
            ("shank", self.shank),
            ("neck", self.neck),
            ("head", self.head),
        ]
    }
}

/// Lateral offset of each sternoclavicular joint from the spine axis, as a
/// fraction of the clavicle length.
const CLAVICLE_ROOT_FRACTION: f64 = 0.12;

/// The default joint table for the given segment lengths.
pub fn default_config(l: &LimbLengths) -> Result<BodyConfig> {
    for (name, value) in l.named() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidLength { name: name.to_string(), value });
        }
    }
    use Axis::*;
    let j = |name: &str, parent: Option<&str>, offset: [f64; 3], dofs: Vec<DofSpec>, kp: bool| JointSpec {
        name: name.to_string(),
        parent: parent.map(str::to_string),
        offset,
        rest_rotation: [0.0; 3],
        dofs,
        keypoint: kp.then(|| name.to_string()),
    };
    let hip = || vec![DofSpec::new(X, -0.5, 2.1), DofSpec::new(Y, -0.8, 0.8), DofSpec::new(Z, -0.7, 0.7)];
    let knee = || vec![DofSpec::new(X, 0.0, 2.4)];
    let spine = || vec![DofSpec::new(X, -0.4, 0.6), DofSpec::new(Z, -0.4, 0.4)];
    let clavicle = || vec![DofSpec::new(Y, -0.3, 0.3), DofSpec::new(Z, -0.3, 0.3)];
    let shoulder = || vec![DofSpec::new(X, -1.0, 1.5), DofSpec::new(Y, -1.4, 1.4), DofSpec::new(Z, -1.2, 1.2)];
    let elbow = || vec![DofSpec::new(X, 0.0, 2.5)];
    // Knee frames are turned half a revolution about the shank so that positive
    // X flexion swings the foot backwards.
    let knee_joint = |name: &str, parent: &str| JointSpec {
        rest_rotation: [0.0, 0.0, PI],
        ..j(name, Some(parent), [0.0, 0.0, -l.thigh], knee(), true)
    };
    let half_pelvis = l.pelvis_width / 2.0;
    let clav_x = CLAVICLE_ROOT_FRACTION * l.clavicle;

    let joints = vec![
        j("mid_pelvis", None, [0.0; 3], vec![], true),
        j("hip_l", Some("mid_pelvis"), [half_pelvis, 0.0, 0.0], hip(), true),
        knee_joint("knee_l", "hip_l"),
        j("ankle_l", Some("knee_l"), [0.0, 0.0, -l.shank], vec![], true),
        j("hip_r", Some("mid_pelvis"), [-half_pelvis, 0.0, 0.0], hip(), true),
        knee_joint("knee_r", "hip_r"),
        j("ankle_r", Some("knee_r"), [0.0, 0.0, -l.shank], vec![], true),
        j("lower_spine", Some("mid_pelvis"), [0.0, 0.0, l.lumbar], spine(), false),
        j("mid_spine", Some("lower_spine"), [0.0, 0.0, l.spine], spine(), true),
        j("neck", Some("mid_spine"), [0.0, 0.0, l.spine + l.neck], vec![DofSpec::new(X, -0.7, 0.9)], true),
        j("head", Some("neck"), [0.0, 0.0, l.head], vec![], true),
        j("clavicle_l", Some("mid_spine"), [clav_x, 0.0, l.spine], clavicle(), false),
        j("shoulder_l", Some("clavicle_l"), [l.clavicle, 0.0, 0.0], shoulder(), true),
        j("elbow_l", Some("shoulder_l"), [0.0, 0.0, -l.upper_arm], elbow(), true),
        j("wrist_l", Some("elbow_l"), [0.0, 0.0, -l.forearm], vec![], true),
        j("clavicle_r", Some("mid_spine"), [-clav_x, 0.0, l.spine], clavicle(), false),
        j("shoulder_r", Some("clavicle_r"), [-l.clavicle, 0.0, 0.0], shoulder(), true),
        j("elbow_r", Some("shoulder_r"), [0.0, 0.0, -l.upper_arm], elbow(), true),
        j("wrist_r", Some("elbow_r"), [0.0, 0.0, -l.forearm], vec![], true),
    ];
    let global_targets = ["shoulder_l", "elbow_l", "wrist_l", "shoulder_r", "elbow_r", "wrist_r"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    Ok(BodyConfig { schema: BODY_SCHEMA.to_string(), joints, global_targets })
}

/// The default chain with the given segment lengths.
pub fn default_body(lengths: &LimbLengths) -> Result<BodyModel> {
    BodyModel::from_config(default_config(lengths)?)
}

/// A reorientable joint and the slice of the parameter vector driving it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamJoint {
    pub node: usize,
    pub params: Range<usize>,
    /// Axes of the Euler parameters, empty for the root.
    pub axes: Vec<Axis>,
}

/// A validated chain in its rest pose with DOF and keypoint bindings.
#[derive(Debug, Clone)]
pub struct BodyModel {
    config: BodyConfig,
    names: Vec<String>,
    hierarchy: Hierarchy,
    rest: KinematicChain,
    joints: Vec<ParamJoint>,
    bounds: Vec<(f64, f64)>,
    param_names: Vec<String>,
    keypoints: Vec<(String, usize)>,
    local_links: Vec<(usize, usize)>,
    global_targets: Vec<usize>,
}

impl BodyModel {
    pub fn from_config(config: BodyConfig) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidBody(msg));
        if config.joints.is_empty() {
            return bad("no joints".into());
        }
        let mut names: Vec<String> = Vec::with_capacity(config.joints.len());
        let mut parents = Vec::with_capacity(config.joints.len());
        let mut transforms = Vec::with_capacity(config.joints.len());
        let mut joints = Vec::new();
        let mut bounds = Vec::new();
        let mut param_names = Vec::new();
        let mut keypoints: Vec<(String, usize)> = Vec::new();

        for (idx, spec) in config.joints.iter().enumerate() {
            if names.contains(&spec.name) {
                return bad(format!("duplicate joint name `{}`", spec.name));
            }
            let parent = match (&spec.parent, idx) {
                (None, 0) => None,
                (None, _) => return bad(format!("joint `{}` has no parent but is not first", spec.name)),
                (Some(p), 0) => return bad(format!("first joint `{}` must be the root, has parent `{p}`", spec.name)),
                (Some(p), _) => match names.iter().position(|n| n == p) {
                    Some(pi) => Some(pi),
                    None => return bad(format!("parent `{p}` of `{}` must be listed before it", spec.name)),
                },
            };
            if spec.offset.iter().chain(&spec.rest_rotation).any(|v| !v.is_finite()) {
                return bad(format!("non-finite geometry for `{}`", spec.name));
            }
            let rest_rot = euler_xyz_to_matrix(&EulerXYZ::new(
                spec.rest_rotation[0],
                spec.rest_rotation[1],
                spec.rest_rotation[2],
            ));
            transforms.push(Transform::new(rest_rot, Vec3::from(spec.offset)));

            if idx == 0 {
                if !spec.dofs.is_empty() {
                    return bad("the root is axis-angle parameterized and takes no Euler DOFs".into());
                }
                joints.push(ParamJoint { node: 0, params: 0..4, axes: vec![] });
                bounds.extend([(-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0), (-PI, PI)]);
                for c in ["axis_x", "axis_y", "axis_z", "angle"] {
                    param_names.push(format!("{}.{c}", spec.name));
                }
            } else if !spec.dofs.is_empty() {
                let start = bounds.len();
                let mut axes = Vec::new();
                for dof in &spec.dofs {
                    if axes.last().is_some_and(|a: &Axis| *a as u8 >= dof.axis as u8) {
                        return bad(format!("DOFs of `{}` must be distinct and in X, Y, Z order", spec.name));
                    }
                    if !(dof.lo < dof.hi) || !dof.lo.is_finite() || !dof.hi.is_finite() {
                        return bad(format!("empty range of motion on `{}` {:?}", spec.name, dof.axis));
                    }
                    if dof.hi - dof.lo > 2.0 * PI {
                        return bad(format!("range of motion wider than 2π on `{}`", spec.name));
                    }
                    if dof.axis == Axis::Y && !(dof.lo > -PI / 2.0 && dof.hi < PI / 2.0) {
                        return bad(format!(
                            "Y range of `{}` must lie strictly inside (-π/2, π/2) to avoid gimbal lock",
                            spec.name
                        ));
                    }
                    axes.push(dof.axis);
                    bounds.push((dof.lo, dof.hi));
                    param_names.push(format!("{}.{}", spec.name, dof.axis.label()));
                }
                joints.push(ParamJoint { node: idx, params: start..bounds.len(), axes });
            }
            if let Some(kp) = &spec.keypoint {
                if keypoints.iter().any(|(k, _)| k == kp) {
                    return bad(format!("keypoint `{kp}` bound twice"));
                }
                keypoints.push((kp.clone(), idx));
            }
            names.push(spec.name.clone());
            parents.push(parent);
        }

        let hierarchy = Hierarchy::new(parents)?;
        let rest = KinematicChain::new(transforms, &hierarchy)?;

        if joints.len() != REORIENTABLE_JOINTS {
            return bad(format!("{} reorientable joints, expected {REORIENTABLE_JOINTS}", joints.len()));
        }
        let dofs = bounds.len() - 1;
        if dofs != ROTATIONAL_DOFS {
            return bad(format!("{dofs} rotational DOFs, expected {ROTATIONAL_DOFS}"));
        }

        let bound_node = |n: usize| keypoints.iter().any(|(_, k)| *k == n);
        let local_links: Vec<(usize, usize)> = (1..names.len())
            .filter_map(|n| hierarchy.parent(n).map(|p| (n, p)))
            .filter(|&(n, p)| bound_node(n) && bound_node(p))
            .collect();
        if !bound_node(0) {
            return bad("the root must carry a keypoint".into());
        }
        let mut global_targets = Vec::new();
        for t in &config.global_targets {
            match keypoints.iter().find(|(k, _)| k == t) {
                Some((_, n)) if *n != 0 => global_targets.push(*n),
                Some(_) => return bad("the root cannot be a global target".into()),
                None => return bad(format!("global target `{t}` is not a bound keypoint")),
            }
        }

        Ok(BodyModel {
            config,
            names,
            hierarchy,
            rest,
            joints,
            bounds,
            param_names,
            keypoints,
            local_links,
            global_targets,
        })
    }

    pub fn config(&self) -> &BodyConfig {
        &self.config
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn rest_chain(&self) -> &KinematicChain {
        &self.rest
    }

    pub fn node_names(&self) -> &[String] {
        &self.names
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Reorientable joints in parameter order; the root comes first.
    pub fn joints(&self) -> &[ParamJoint] {
        &self.joints
    }

    pub fn joint_name(&self, joint: usize) -> &str {
        &self.names[self.joints[joint].node]
    }

    /// Index into [`Self::joints`] of the joint named `name`.
    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| self.names[j.node] == name)
    }

    pub fn param_count(&self) -> usize {
        self.bounds.len()
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    /// Rotational DOFs: three for the root plus one per Euler parameter.
    pub fn dof_count(&self) -> usize {
        self.bounds.len() - 1
    }

    /// One closed interval per parameter.
    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Keypoint names with the node each one is bound to, in node order.
    pub fn keypoints(&self) -> &[(String, usize)] {
        &self.keypoints
    }

    pub fn keypoint_names(&self) -> Vec<String> {
        self.keypoints.iter().map(|(k, _)| k.clone()).collect()
    }

    pub fn keypoint_of(&self, node: usize) -> Option<&str> {
        self.keypoints.iter().find(|(_, n)| *n == node).map(|(k, _)| k.as_str())
    }

    /// `(child, parent)` node pairs where both ends carry keypoints.
    pub fn local_links(&self) -> &[(usize, usize)] {
        &self.local_links
    }

    /// Nodes whose root-relative directions enter the global pose term.
    pub fn global_targets(&self) -> &[usize] {
        &self.global_targets
    }

    /// Rest parameters: root axis `(0, 0, 1)` with zero angle, all Euler angles zero.
    pub fn rest_params(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.param_count()];
        p[2] = 1.0;
        p
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::ParamLength { got: params.len(), expected: self.param_count() });
        }
        for (index, (&value, &(lo, hi))) in params.iter().zip(&self.bounds).enumerate() {
            if !(value >= lo && value <= hi) {
                return Err(Error::OutOfBounds { index, value, lo, hi });
            }
        }
        Ok(())
    }

    /// Clamps every entry into its bound.
    pub fn project(&self, params: &mut [f64]) {
        for (v, &(lo, hi)) in params.iter_mut().zip(&self.bounds) {
            *v = v.clamp(lo, hi);
        }
    }

    /// Reorientation delta of every node for the given parameters.
    pub fn deltas(&self, params: &[f64]) -> Result<Vec<RotationMatrix>> {
        self.check_params(params)?;
        Ok(self.deltas_unchecked(params))
    }

    fn deltas_unchecked(&self, params: &[f64]) -> Vec<RotationMatrix> {
        let mut deltas = vec![RotationMatrix::IDENTITY; self.names.len()];
        deltas[0] = root_rotation(&params[0..4]);
        for joint in &self.joints[1..] {
            let mut e = EulerXYZ::default();
            for (axis, &v) in joint.axes.iter().zip(&params[joint.params.clone()]) {
                match axis {
                    Axis::X => e.x = v,
                    Axis::Y => e.y = v,
                    Axis::Z => e.z = v,
                }
            }
            deltas[joint.node] = euler_xyz_to_matrix(&e);
        }
        deltas
    }

    /// Global pose of the chain reoriented by `params`.
    pub fn apply_params(&self, params: &[f64]) -> Result<GlobalPose> {
        let deltas = self.deltas(params)?;
        fk_reoriented(&self.rest, &self.hierarchy, &deltas)
    }

    pub fn rest_pose(&self) -> GlobalPose {
        self.apply_params(&self.rest_params()).expect("rest parameters are in bounds")
    }

    /// Global orientation of each reorientable joint, in joint order.
    pub fn joint_orientations(&self, gp: &GlobalPose) -> Vec<RotationMatrix> {
        self.joints.iter().map(|j| *gp.orientation(j.node)).collect()
    }

    /// Stable hexadecimal digest of the canonical configuration text.
    pub fn config_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = serde_json::to_string(&self.config).expect("body config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Root reorientation from `(n_x, n_y, n_z, Φ)`; the axis is normalized here.
pub fn root_rotation(root: &[f64]) -> RotationMatrix {
    let n = Vec3::new(root[0], root[1], root[2]);
    let norm = n.norm();
    if !(norm > ROOT_AXIS_EPS) {
        return RotationMatrix::IDENTITY;
    }
    axis_angle_to_matrix(&AxisAngle::new(n / norm, root[3])).expect("normalized axis")
}
