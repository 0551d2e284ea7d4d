//! Schema-versioned JSON files for poses, joint angles, body configurations
//! and evaluation reports.
//!
//! Every file carries a `schema` tag. Pose and angle files are written in a
//! canonical layout (one keypoint or one frame per line, shortest round-trip
//! number formatting), so reading a written file and writing it again
//! reproduces the same bytes. Non-finite values are rejected on both paths.

use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::body::{BodyConfig, BodyModel, BODY_SCHEMA};
use crate::error::{Error, Result};
use crate::eval::{EvalReport, REPORT_SCHEMA};
use crate::losses::{PoseFrame, PoseSequence};
use crate::motiongen::{LimbMode, SpeedTier};
use crate::rotmath::Vec3;

pub const POSE_SCHEMA: &str = "retarget-ik/poses/1";
pub const ANGLE_SCHEMA: &str = "retarget-ik/angles/1";

/// Keypoint positions per frame, meters.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFile {
    pub fps: Option<f64>,
    pub keypoints: Vec<String>,
    pub frames: Vec<Vec<Vec3>>,
}

impl PoseFile {
    pub fn from_sequence(seq: &PoseSequence) -> Self {
        let keypoints = seq.keypoints();
        let frames = seq.frames().iter().map(|f| keypoints.iter().map(|k| f.positions[k]).collect()).collect();
        PoseFile { fps: seq.fps, keypoints, frames }
    }

    pub fn to_sequence(&self) -> Result<PoseSequence> {
        let frames = self
            .frames
            .iter()
            .map(|row| PoseFrame::new(self.keypoints.iter().cloned().zip(row.iter().copied()).collect()))
            .collect();
        PoseSequence::new(frames, self.fps)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(fps) = self.fps {
            if !(fps.is_finite() && fps > 0.0) {
                return Err(Error::InvalidFile(format!("frame rate must be positive and finite, got {fps}")));
            }
        }
        if self.frames.is_empty() {
            return Err(Error::SequenceTooShort { got: 0, needed: 1 });
        }
        for (i, k) in self.keypoints.iter().enumerate() {
            if self.keypoints[..i].contains(k) {
                return Err(Error::InvalidFile(format!("keypoint `{k}` listed twice")));
            }
        }
        for (f, row) in self.frames.iter().enumerate() {
            if row.len() != self.keypoints.len() {
                return Err(Error::InvalidFile(format!(
                    "frame {f} has {} positions for {} keypoints",
                    row.len(),
                    self.keypoints.len()
                )));
            }
            for (k, p) in self.keypoints.iter().zip(row) {
                if let Some(c) = p.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { location: format!("frame {f}, keypoint `{k}`, coordinate {c}") });
                }
            }
        }
        Ok(())
    }
}

/// Where a set of joint angles came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub body_hash: String,
    /// `1a`, `1b`, `2_M=<M>` or `ground-truth`.
    pub algorithm: String,
    pub lambda: Option<f64>,
    pub patch: Option<usize>,
    pub seed: Option<u64>,
    pub tier: Option<SpeedTier>,
    pub mode: Option<LimbMode>,
}

/// Parameter vectors per frame, radians (root axis components unitless).
#[derive(Debug, Clone, PartialEq)]
pub struct AngleFile {
    pub provenance: Provenance,
    pub params: Vec<String>,
    pub frames: Vec<Vec<f64>>,
}

impl AngleFile {
    pub fn new(body: &BodyModel, provenance: Provenance, frames: Vec<Vec<f64>>) -> Self {
        AngleFile { provenance, params: body.param_names().to_vec(), frames }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::SequenceTooShort { got: 0, needed: 1 });
        }
        for (f, row) in self.frames.iter().enumerate() {
            if row.len() != self.params.len() {
                return Err(Error::InvalidFile(format!(
                    "frame {f} has {} values for {} parameters",
                    row.len(),
                    self.params.len()
                )));
            }
            if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { location: format!("frame {f}, parameter `{}`", self.params[i]) });
            }
        }
        Ok(())
    }

    /// Checks naming, row length and bounds against `body`.
    pub fn validate_for(&self, body: &BodyModel) -> Result<()> {
        self.validate()?;
        if self.params != body.param_names() {
            return Err(Error::InvalidFile("parameter names do not match the body".into()));
        }
        for (f, row) in self.frames.iter().enumerate() {
            for (i, (&v, &(lo, hi))) in row.iter().zip(body.bounds()).enumerate() {
                if !(v >= lo && v <= hi) {
                    return Err(Error::InvalidFile(format!(
                        "frame {f}, parameter `{}` = {v} outside [{lo}, {hi}]",
                        self.params[i]
                    )));
                }
            }
        }
        Ok(())
    }
}

fn number(v: f64) -> String {
    debug_assert!(v.is_finite());
    serde_json::to_string(&v).expect("finite numbers serialize")
}

fn string(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

fn optional<T>(v: &Option<T>, f: impl Fn(&T) -> String) -> String {
    v.as_ref().map_or_else(|| "null".to_string(), f)
}

fn list(items: impl Iterator<Item = String>) -> String {
    format!("[{}]", items.collect::<Vec<_>>().join(", "))
}

pub fn format_pose_file(file: &PoseFile) -> Result<String> {
    file.validate()?;
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"schema\": {},", string(POSE_SCHEMA));
    let _ = writeln!(out, "  \"fps\": {},", optional(&file.fps, |v| number(*v)));
    let _ = writeln!(out, "  \"keypoints\": {},", list(file.keypoints.iter().map(|k| string(k))));
    out.push_str("  \"frames\": [\n");
    for (f, row) in file.frames.iter().enumerate() {
        out.push_str("    {\n");
        for (i, (k, p)) in file.keypoints.iter().zip(row).enumerate() {
            let sep = if i + 1 < row.len() { "," } else { "" };
            let _ = writeln!(out, "      {}: {}{sep}", string(k), list(p.iter().map(|v| number(*v))));
        }
        out.push_str(if f + 1 < file.frames.len() { "    },\n" } else { "    }\n" });
    }
    out.push_str("  ]\n}\n");
    Ok(out)
}

pub fn format_angle_file(file: &AngleFile) -> Result<String> {
    file.validate()?;
    let p = &file.provenance;
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"schema\": {},", string(ANGLE_SCHEMA));
    out.push_str("  \"provenance\": {\n");
    let _ = writeln!(out, "    \"body_hash\": {},", string(&p.body_hash));
    let _ = writeln!(out, "    \"algorithm\": {},", string(&p.algorithm));
    let _ = writeln!(out, "    \"lambda\": {},", optional(&p.lambda, |v| number(*v)));
    let _ = writeln!(out, "    \"patch\": {},", optional(&p.patch, |v| v.to_string()));
    let _ = writeln!(out, "    \"seed\": {},", optional(&p.seed, |v| v.to_string()));
    let _ = writeln!(out, "    \"tier\": {},", optional(&p.tier, |v| string(v.label())));
    let _ = writeln!(out, "    \"mode\": {}", optional(&p.mode, |v| string(v.label())));
    out.push_str("  },\n");
    let _ = writeln!(out, "  \"params\": {},", list(file.params.iter().map(|k| string(k))));
    out.push_str("  \"frames\": [\n");
    for (f, row) in file.frames.iter().enumerate() {
        let sep = if f + 1 < file.frames.len() { "," } else { "" };
        let _ = writeln!(out, "    {}{sep}", list(row.iter().map(|v| number(*v))));
    }
    out.push_str("  ]\n}\n");
    Ok(out)
}

fn parse_error(e: serde_json::Error) -> Error {
    let mut message = e.to_string();
    // The position is reported separately.
    if let Some(at) = message.rfind(" at line ") {
        message.truncate(at);
    }
    Error::Parse { line: e.line(), column: e.column(), message }
}

fn check_schema(found: &str, expected: &str) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::Schema { found: found.to_string(), expected: expected.to_string() })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoses {
    schema: String,
    fps: Option<f64>,
    keypoints: Vec<String>,
    frames: Vec<IndexMap<String, Vec<f64>>>,
}

pub fn parse_pose_file(text: &str) -> Result<PoseFile> {
    let raw: RawPoses = serde_json::from_str(text).map_err(parse_error)?;
    check_schema(&raw.schema, POSE_SCHEMA)?;
    let mut frames = Vec::with_capacity(raw.frames.len());
    for (f, frame) in raw.frames.iter().enumerate() {
        if let Some(extra) = frame.keys().find(|k| !raw.keypoints.contains(k)) {
            return Err(Error::InvalidFile(format!("frame {f}: unknown keypoint `{extra}`")));
        }
        let mut row = Vec::with_capacity(raw.keypoints.len());
        for k in &raw.keypoints {
            let p = frame.get(k).ok_or_else(|| Error::MissingKeypoint { keypoint: format!("{k} (frame {f})") })?;
            if p.len() != 3 {
                return Err(Error::InvalidFile(format!(
                    "frame {f}, keypoint `{k}`: expected 3 coordinates, got {}",
                    p.len()
                )));
            }
            row.push(Vec3::new(p[0], p[1], p[2]));
        }
        frames.push(row);
    }
    let file = PoseFile { fps: raw.fps, keypoints: raw.keypoints, frames };
    file.validate()?;
    Ok(file)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAngles {
    schema: String,
    provenance: Provenance,
    params: Vec<String>,
    frames: Vec<Vec<f64>>,
}

pub fn parse_angle_file(text: &str) -> Result<AngleFile> {
    let raw: RawAngles = serde_json::from_str(text).map_err(parse_error)?;
    check_schema(&raw.schema, ANGLE_SCHEMA)?;
    let file = AngleFile { provenance: raw.provenance, params: raw.params, frames: raw.frames };
    file.validate()?;
    Ok(file)
}

pub fn format_body_config(config: &BodyConfig) -> Result<String> {
    let mut s = serde_json::to_string_pretty(config).map_err(|e| Error::InvalidFile(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn parse_body_config(text: &str) -> Result<BodyConfig> {
    let config: BodyConfig = serde_json::from_str(text).map_err(parse_error)?;
    check_schema(&config.schema, BODY_SCHEMA)?;
    Ok(config)
}

pub fn format_report(report: &EvalReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::InvalidFile(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn parse_report(text: &str) -> Result<EvalReport> {
    let report: EvalReport = serde_json::from_str(text).map_err(parse_error)?;
    check_schema(&report.schema, REPORT_SCHEMA)?;
    Ok(report)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Io { path: dir.display().to_string(), message: e.to_string() })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Prefixes parse and validation errors with the file they came from.
fn in_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io { .. } => e,
        other => Error::InvalidFile(format!("{}: {other}", path.display())),
    })
}

pub fn read_pose_file(path: &Path) -> Result<PoseFile> {
    in_file(path, parse_pose_file(&read_text(path)?))
}

pub fn write_pose_file(path: &Path, file: &PoseFile) -> Result<()> {
    write_text(path, &format_pose_file(file)?)
}

pub fn read_angle_file(path: &Path) -> Result<AngleFile> {
    in_file(path, parse_angle_file(&read_text(path)?))
}

pub fn write_angle_file(path: &Path, file: &AngleFile) -> Result<()> {
    write_text(path, &format_angle_file(file)?)
}

pub fn read_body(path: &Path) -> Result<BodyModel> {
    in_file(path, parse_body_config(&read_text(path)?).and_then(BodyModel::from_config))
}

pub fn write_body_config(path: &Path, config: &BodyConfig) -> Result<()> {
    write_text(path, &format_body_config(config)?)
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    in_file(path, parse_report(&read_text(path)?))
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<()> {
    write_text(path, &format_report(report)?)
}
