//! Pose and temporal objective terms.
//!
//! The pose terms compare directions only, so keypoints from a skeleton with
//! different proportions than the chain can still be targeted.

use indexmap::IndexMap;

use crate::body::BodyModel;
use crate::error::{Error, Result};
use crate::kinematics::GlobalPose;
use crate::rotmath::{angle_between, Vec3};

/// Keypoint pairs closer than this have no usable direction.
pub const MIN_TARGET_SEPARATION: f64 = 1e-6;

/// Keypoint positions of one frame, meters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoseFrame {
    pub positions: IndexMap<String, Vec3>,
}

impl PoseFrame {
    pub fn new(positions: IndexMap<String, Vec3>) -> Self {
        PoseFrame { positions }
    }

    /// Keypoint positions of a posed chain (every bound node of `body`).
    pub fn from_pose(body: &BodyModel, gp: &GlobalPose) -> Self {
        let positions = body.keypoints().iter().map(|(k, n)| (k.clone(), gp.position(*n))).collect();
        PoseFrame { positions }
    }

    pub fn get(&self, keypoint: &str) -> Result<Vec3> {
        self.positions.get(keypoint).copied().ok_or_else(|| Error::MissingKeypoint { keypoint: keypoint.to_string() })
    }
}

/// An ordered run of frames sharing one keypoint set.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    frames: Vec<PoseFrame>,
    pub fps: Option<f64>,
}

impl PoseSequence {
    pub fn new(frames: Vec<PoseFrame>, fps: Option<f64>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::SequenceTooShort { got: 0, needed: 1 });
        }
        let first: Vec<&String> = frames[0].positions.keys().collect();
        for (i, f) in frames.iter().enumerate() {
            for k in &first {
                if !f.positions.contains_key(*k) {
                    return Err(Error::MissingKeypoint { keypoint: format!("{k} (frame {i})") });
                }
            }
            if f.positions.len() != first.len() {
                return Err(Error::InconsistentChain(format!("frame {i} has a different keypoint set")));
            }
        }
        Ok(PoseSequence { frames, fps })
    }

    pub fn frames(&self) -> &[PoseFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn keypoints(&self) -> Vec<String> {
        self.frames[0].positions.keys().cloned().collect()
    }
}

/// Unit target directions of one frame, aligned with the body's local links
/// and global targets.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTargets {
    pub local: Vec<Vec3>,
    pub global: Vec<Vec3>,
}

impl FrameTargets {
    pub fn new(body: &BodyModel, frame: &PoseFrame) -> Result<Self> {
        let names = body.node_names();
        let position = |node: usize| -> Result<Vec3> {
            let kp = body.keypoint_of(node).expect("linked nodes carry keypoints");
            let p = frame.get(kp)?;
            if p.iter().all(|v| v.is_finite()) {
                Ok(p)
            } else {
                Err(Error::DegenerateTarget { keypoint: kp.to_string() })
            }
        };
        let direction = |from: usize, to: usize| -> Result<Vec3> {
            let v = position(to)? - position(from)?;
            let n = v.norm();
            if n > MIN_TARGET_SEPARATION {
                Ok(v / n)
            } else {
                Err(Error::DegenerateTarget { keypoint: names[to].clone() })
            }
        };
        let local = body.local_links().iter().map(|&(c, p)| direction(p, c)).collect::<Result<_>>()?;
        let global = body.global_targets().iter().map(|&t| direction(0, t)).collect::<Result<_>>()?;
        Ok(FrameTargets { local, global })
    }

    pub fn for_sequence(body: &BodyModel, seq: &PoseSequence) -> Result<Vec<Self>> {
        seq.frames().iter().map(|f| FrameTargets::new(body, f)).collect()
    }
}

/// Mean angle between each keypoint-bound link of the chain and its target.
pub fn local_pose_error(gp: &GlobalPose, targets: &FrameTargets, body: &BodyModel) -> f64 {
    let links = body.local_links();
    if links.is_empty() {
        return 0.0;
    }
    let sum: f64 =
        links.iter().zip(&targets.local).map(|(&(c, p), t)| angle_between(&(gp.position(c) - gp.position(p)), t)).sum();
    sum / links.len() as f64
}

/// Mean angle between root-to-joint vectors of the arm targets and their targets.
pub fn global_pose_error(gp: &GlobalPose, targets: &FrameTargets, body: &BodyModel) -> f64 {
    let nodes = body.global_targets();
    if nodes.is_empty() {
        return 0.0;
    }
    let root = gp.position(0);
    let sum: f64 = nodes.iter().zip(&targets.global).map(|(&n, t)| angle_between(&(gp.position(n) - root), t)).sum();
    sum / nodes.len() as f64
}

/// Sum of the local and global pose errors at `params`.
pub fn frame_loss(params: &[f64], targets: &FrameTargets, body: &BodyModel) -> Result<f64> {
    let gp = body.apply_params(params)?;
    Ok(local_pose_error(&gp, targets, body) + global_pose_error(&gp, targets, body))
}

/// Number of residuals written by [`pose_residuals`].
pub fn pose_residual_len(body: &BodyModel) -> usize {
    3 * (body.local_links().len() + body.global_targets().len())
}

/// Unit chain direction minus unit target direction, three values per local
/// link followed by three per global target. The chord norm `s` of each triple
/// gives the link angle `2·asin(s/2)`.
pub fn pose_residuals(gp: &GlobalPose, targets: &FrameTargets, body: &BodyModel, out: &mut [f64]) {
    let root = gp.position(0);
    let local = body.local_links().iter().zip(&targets.local).map(|(&(c, p), t)| (gp.position(c) - gp.position(p), t));
    let global = body.global_targets().iter().zip(&targets.global).map(|(&n, t)| (gp.position(n) - root, t));
    for ((v, t), chunk) in local.chain(global).zip(out.chunks_mut(3)) {
        let d = v / v.norm() - t;
        chunk.copy_from_slice(d.as_slice());
    }
}

/// Norm applied to each joint's parameter difference in the temporal term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JointNorm {
    /// Sum of absolute differences of the joint's parameters.
    #[default]
    L1,
    /// Euclidean norm of the joint's parameter differences.
    L2,
}

/// Parameter ranges of each joint, used to group temporal differences.
pub fn joint_groups(body: &BodyModel) -> Vec<std::ops::Range<usize>> {
    body.joints().iter().map(|j| j.params.clone()).collect()
}

fn joint_norm_sum(diff: impl Fn(usize) -> f64, groups: &[std::ops::Range<usize>], norm: JointNorm) -> f64 {
    groups
        .iter()
        .map(|g| match norm {
            JointNorm::L1 => g.clone().map(|i| diff(i).abs()).sum::<f64>(),
            JointNorm::L2 => g.clone().map(|i| diff(i).powi(2)).sum::<f64>().sqrt(),
        })
        .sum()
}

/// Temporal error over a patch stored frame-major in `flat` (`dim` values per frame).
///
/// Differences are forward at the first frame, central inside and backward at
/// the last; the per-frame sums over joints are averaged over frames.
pub fn temporal_error_flat(flat: &[f64], dim: usize, groups: &[std::ops::Range<usize>], norm: JointNorm) -> f64 {
    let m = flat.len() / dim;
    debug_assert!(m >= 2 && flat.len() == m * dim);
    let at = |f: usize, i: usize| flat[f * dim + i];
    let mut total = 0.0;
    for f in 0..m {
        total += if f == 0 {
            joint_norm_sum(|i| at(1, i) - at(0, i), groups, norm)
        } else if f == m - 1 {
            joint_norm_sum(|i| at(f, i) - at(f - 1, i), groups, norm)
        } else {
            joint_norm_sum(|i| (at(f + 1, i) - at(f - 1, i)) / 2.0, groups, norm)
        };
    }
    total / m as f64
}

/// Joint-summed difference between two parameter vectors.
pub fn parameter_difference(a: &[f64], b: &[f64], groups: &[std::ops::Range<usize>], norm: JointNorm) -> f64 {
    joint_norm_sum(|i| a[i] - b[i], groups, norm)
}

/// Temporal error of a parameter sequence with the default per-joint L1 norm.
pub fn temporal_error(params: &[Vec<f64>], body: &BodyModel) -> Result<f64> {
    temporal_error_with(params, body, JointNorm::L1)
}

pub fn temporal_error_with(params: &[Vec<f64>], body: &BodyModel, norm: JointNorm) -> Result<f64> {
    if params.len() < 2 {
        return Err(Error::SequenceTooShort { got: params.len(), needed: 2 });
    }
    let dim = body.param_count();
    let mut flat = Vec::with_capacity(params.len() * dim);
    for p in params {
        if p.len() != dim {
            return Err(Error::ParamLength { got: p.len(), expected: dim });
        }
        flat.extend_from_slice(p);
    }
    Ok(temporal_error_flat(&flat, dim, &joint_groups(body), norm))
}

/// Combined objective of a patch: mean frame loss plus `lambda` times the
/// temporal error. With `stitch`, the difference between the first frame of
/// the patch and the given boundary parameters (the previous patch's last
/// frame) joins the temporal error as one more frame term.
pub fn temporal_loss(
    params: &[Vec<f64>],
    targets: &[FrameTargets],
    body: &BodyModel,
    lambda: f64,
    stitch: Option<&[f64]>,
) -> Result<f64> {
    let m = params.len();
    if m < 2 {
        return Err(Error::SequenceTooShort { got: m, needed: 2 });
    }
    if targets.len() != m {
        return Err(Error::LengthMismatch { left: m, right: targets.len() });
    }
    let mut frames = 0.0;
    for (p, t) in params.iter().zip(targets) {
        frames += frame_loss(p, t, body)?;
    }
    let mut temporal = temporal_error(params, body)?;
    if let Some(prev) = stitch {
        temporal += parameter_difference(&params[0], prev, &joint_groups(body), JointNorm::L1) / m as f64;
    }
    Ok(frames / m as f64 + lambda * temporal)
}
