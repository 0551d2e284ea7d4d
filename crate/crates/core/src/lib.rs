//! Retargeting of 3D joint-position sequences onto a biomechanically
//! constrained human kinematic chain.
//!
//! The pipeline takes per-frame keypoint positions, prescribes the link
//! directions they imply onto a subject-specific chain with fixed limb lengths
//! and joint ranges of motion, and solves for the joint orientations with
//! bounded sequential quadratic programming. Frames can be solved one at a
//! time ([`solver::ik_sequence_frame_by_frame`]) or in non-overlapping patches
//! with a temporal consistency term ([`solver::ik_sequence_temporal`]), which
//! resolves the twist ambiguity of fully extended limbs.
//!
//! Module map:
//!
//! - [`rotmath`]: rotation matrices, axis-angle, XYZ Euler angles and the
//!   family of rotations mapping one direction onto another.
//! - [`kinematics`]: transform hierarchies and forward kinematics.
//! - [`body`]: the 14-joint, 28-DOF human chain and its parameter vector.
//! - [`losses`]: local and global pose errors, temporal error, objectives.
//! - [`optimize`]: box-constrained SQP minimizer.
//! - [`solver`]: frame-wise and temporal IK drivers.
//! - [`motiongen`]: synthetic ground-truth motion.
//! - [`eval`]: angular-separation metrics and the experiment runner.
//! - [`io`] and [`cli`]: file formats and command entry points.
//!
//! The default optimizer method is a damped least-squares SQP over the loss
//! residuals; a projected quasi-Newton method is kept for generic objectives.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod body;
pub mod cli;
pub mod error;
pub mod eval;
pub mod io;
pub mod kinematics;
pub mod losses;
pub mod motiongen;
pub mod optimize;
pub mod rotmath;
pub mod solver;

pub use body::{default_body, BodyConfig, BodyModel, LimbLengths};
pub use error::{Error, Result};
pub use losses::{PoseFrame, PoseSequence};
pub use rotmath::{AxisAngle, EulerXYZ, RotationMatrix, Vec3};
