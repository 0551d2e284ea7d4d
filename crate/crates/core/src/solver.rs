//! Inverse kinematics drivers.
//!
//! Three strategies share one box-constrained minimizer:
//!
//! - frame by frame from the rest pose (independent frames, solved in parallel),
//! - frame by frame warm-started from the previous frame's solution,
//! - temporal: a warm-started pass, then consecutive patches of `M` frames
//!   optimized jointly with a temporal consistency term and stitched to the
//!   previous patch's last frame.

use std::ops::Range;
use std::time::Instant;

use rayon::prelude::*;

use crate::body::BodyModel;
use crate::error::{Error, Result};
use nalgebra::DMatrix;

use crate::losses::{
    frame_loss, joint_groups, parameter_difference, pose_residual_len, pose_residuals, temporal_error_flat,
    FrameTargets, JointNorm, PoseFrame, PoseSequence,
};
use crate::optimize::{
    minimize, minimize_residuals, Block, Minimum, Objective, OptimizerSettings, Penalty, ResidualObjective, Termination,
};

/// Which IK strategy to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    /// Every frame starts from the rest parameters.
    FrameByFrame,
    /// Frame `m` starts from the solution of frame `m - 1`.
    WarmStarted,
    /// Patches of `patch` frames with temporal weight `lambda`.
    Temporal { patch: usize, lambda: f64 },
}

impl Algorithm {
    /// Short label: `1a`, `1b` or `2_M=<patch>`.
    pub fn label(&self) -> String {
        match self {
            Algorithm::FrameByFrame => "1a".into(),
            Algorithm::WarmStarted => "1b".into(),
            Algorithm::Temporal { patch, .. } => format!("2_M={patch}"),
        }
    }
}

/// Which minimizer runs each frame or patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Reweighted least-squares SQP on the residual structure of the loss.
    #[default]
    LeastSquares,
    /// Quasi-Newton SQP on the scalar loss.
    QuasiNewton,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub optimizer: OptimizerSettings,
    pub method: Method,
    pub joint_norm: JointNorm,
    /// Run independent frames and gradient columns on the rayon pool.
    pub parallel: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            optimizer: OptimizerSettings::default(),
            method: Method::LeastSquares,
            joint_norm: JointNorm::L1,
            parallel: true,
        }
    }
}

/// Outcome of one minimizer call over a frame or a patch.
#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub frames: Range<usize>,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

impl StageReport {
    fn new(frames: Range<usize>, m: &Minimum) -> Self {
        StageReport {
            frames,
            initial_loss: m.initial_value,
            final_loss: m.value,
            iterations: m.iterations,
            evaluations: m.evaluations,
            termination: m.termination,
        }
    }

    pub fn converged(&self) -> bool {
        self.termination.converged()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IKResult {
    /// Optimized parameters per frame.
    pub params: Vec<Vec<f64>>,
    /// One entry per frame (frame-wise strategies) or per patch (temporal).
    pub stages: Vec<StageReport>,
    /// Stages of the warm-started pass preceding the temporal patches.
    pub pre_stages: Vec<StageReport>,
    /// Wall-clock time of the optimization calls.
    pub seconds: f64,
}

impl IKResult {
    /// Minimizer iterations over all stages, including any pre-pass.
    pub fn total_iterations(&self) -> usize {
        self.stages.iter().chain(&self.pre_stages).map(|s| s.iterations).sum()
    }

    pub fn all_converged(&self) -> bool {
        self.stages.iter().all(StageReport::converged)
    }

    /// Frames covered by a stage that did not converge.
    pub fn unconverged_frames(&self) -> Vec<usize> {
        self.stages.iter().filter(|s| !s.converged()).flat_map(|s| s.frames.clone()).collect()
    }

    /// Optimized frames per second of wall-clock time.
    pub fn fps(&self) -> f64 {
        self.params.len() as f64 / self.seconds.max(f64::MIN_POSITIVE)
    }
}

fn pose_blocks(body: &BodyModel, scale: f64) -> impl Iterator<Item = Block> {
    let (n, a) = (body.local_links().len(), body.global_targets().len());
    let local = Block { len: 3, weight: scale / n as f64, penalty: Penalty::Chord };
    let global = Block { len: 3, weight: scale / a as f64, penalty: Penalty::Chord };
    std::iter::repeat_n(local, n).chain(std::iter::repeat_n(global, a))
}

fn write_pose_residuals(body: &BodyModel, targets: &FrameTargets, x: &[f64], out: &mut [f64]) -> bool {
    match body.apply_params(x) {
        Ok(gp) => {
            pose_residuals(&gp, targets, body, out);
            true
        }
        Err(_) => false,
    }
}

/// The per-frame IK objective.
pub struct FrameObjective<'a> {
    pub body: &'a BodyModel,
    pub targets: &'a FrameTargets,
    blocks: Vec<Block>,
}

impl<'a> FrameObjective<'a> {
    pub fn new(body: &'a BodyModel, targets: &'a FrameTargets) -> Self {
        FrameObjective { body, targets, blocks: pose_blocks(body, 1.0).collect() }
    }
}

impl Objective for FrameObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        frame_loss(x, self.targets, self.body).unwrap_or(f64::NAN)
    }
}

impl ResidualObjective for FrameObjective<'_> {
    fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    fn residuals(&self, x: &[f64], out: &mut [f64]) -> bool {
        write_pose_residuals(self.body, self.targets, x, out)
    }
}

fn run_minimizer<O: Objective + ResidualObjective>(
    objective: &O,
    x0: &[f64],
    bounds: &[(f64, f64)],
    options: &SolverOptions,
) -> Result<Minimum> {
    match options.method {
        Method::LeastSquares => minimize_residuals(objective, x0, bounds, &options.optimizer),
        Method::QuasiNewton => minimize(objective, x0, bounds, &options.optimizer),
    }
}

/// Solves one frame from `theta0`.
pub fn ik_frame(body: &BodyModel, frame: &PoseFrame, theta0: &[f64], options: &SolverOptions) -> Result<IKResult> {
    let targets = FrameTargets::new(body, frame)?;
    let start = Instant::now();
    let (x, stage) = solve_frame(body, &targets, theta0, 0, options)?;
    Ok(IKResult {
        params: vec![x],
        stages: vec![stage],
        pre_stages: Vec::new(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn solve_frame(
    body: &BodyModel,
    targets: &FrameTargets,
    theta0: &[f64],
    index: usize,
    options: &SolverOptions,
) -> Result<(Vec<f64>, StageReport)> {
    if theta0.len() != body.param_count() {
        return Err(Error::ParamLength { got: theta0.len(), expected: body.param_count() });
    }
    let objective = FrameObjective::new(body, targets);
    let m = run_minimizer(&objective, theta0, body.bounds(), options)?;
    let stage = StageReport::new(index..index + 1, &m);
    Ok((m.x, stage))
}

/// Frame-wise IK over a sequence, from rest (`warm_start = false`) or from
/// the previous frame's solution.
pub fn ik_sequence_frame_by_frame(
    body: &BodyModel,
    seq: &PoseSequence,
    warm_start: bool,
    options: &SolverOptions,
) -> Result<IKResult> {
    let targets = FrameTargets::for_sequence(body, seq)?;
    let start = Instant::now();
    let (params, stages) = frame_pass(body, &targets, warm_start, options)?;
    Ok(IKResult { params, stages, pre_stages: Vec::new(), seconds: start.elapsed().as_secs_f64() })
}

fn frame_pass(
    body: &BodyModel,
    targets: &[FrameTargets],
    warm_start: bool,
    options: &SolverOptions,
) -> Result<(Vec<Vec<f64>>, Vec<StageReport>)> {
    if targets.is_empty() {
        return Err(Error::SequenceTooShort { got: 0, needed: 1 });
    }
    let rest = body.rest_params();
    if warm_start {
        let mut params = Vec::with_capacity(targets.len());
        let mut stages = Vec::with_capacity(targets.len());
        let mut prev = rest;
        for (i, t) in targets.iter().enumerate() {
            let (x, stage) = solve_frame(body, t, &prev, i, options)?;
            prev.clone_from(&x);
            params.push(x);
            stages.push(stage);
        }
        Ok((params, stages))
    } else {
        let solve = |(i, t): (usize, &FrameTargets)| solve_frame(body, t, &rest, i, options);
        let solved: Vec<_> = if options.parallel {
            targets.par_iter().enumerate().map(solve).collect::<Result<_>>()?
        } else {
            targets.iter().enumerate().map(solve).collect::<Result<_>>()?
        };
        Ok(solved.into_iter().unzip())
    }
}

/// Consecutive patches of `m` frames covering `0..frames`; a trailing single
/// frame joins the previous patch.
pub fn patch_ranges(frames: usize, m: usize) -> Vec<Range<usize>> {
    let mut out: Vec<Range<usize>> = (0..frames).step_by(m.max(1)).map(|s| s..(s + m).min(frames)).collect();
    if out.len() >= 2 && out.last().is_some_and(|r| r.len() == 1) {
        let last = out.pop().expect("nonempty");
        out.last_mut().expect("nonempty").end = last.end;
    }
    out
}

/// Joint objective of one patch, parameters stored frame-major.
pub struct PatchObjective<'a> {
    pub body: &'a BodyModel,
    pub targets: &'a [FrameTargets],
    pub lambda: f64,
    /// Last optimized frame of the previous patch.
    pub stitch: Option<&'a [f64]>,
    pub norm: JointNorm,
    pub parallel: bool,
    groups: Vec<Range<usize>>,
    blocks: Vec<Block>,
}

impl<'a> PatchObjective<'a> {
    pub fn new(
        body: &'a BodyModel,
        targets: &'a [FrameTargets],
        lambda: f64,
        stitch: Option<&'a [f64]>,
        norm: JointNorm,
    ) -> Self {
        let m = targets.len();
        let groups = joint_groups(body);
        let mut blocks: Vec<Block> = (0..m).flat_map(|_| pose_blocks(body, 1.0 / m as f64)).collect();
        if lambda != 0.0 {
            let terms = m + usize::from(stitch.is_some());
            for _ in 0..terms {
                for g in &groups {
                    let weight = lambda / m as f64;
                    match norm {
                        JointNorm::L1 => {
                            blocks.extend(g.clone().map(|_| Block { len: 1, weight, penalty: Penalty::Norm }))
                        }
                        JointNorm::L2 => blocks.push(Block { len: g.len(), weight, penalty: Penalty::Norm }),
                    }
                }
            }
        }
        PatchObjective { body, targets, lambda, stitch, norm, parallel: false, groups, blocks }
    }

    /// Coefficients of frame `f`'s temporal difference: `(frame, coefficient)` pairs.
    fn difference_stencil(&self, f: usize) -> [(usize, f64); 2] {
        let m = self.targets.len();
        if f == 0 {
            [(1, 1.0), (0, -1.0)]
        } else if f == m - 1 {
            [(f, 1.0), (f - 1, -1.0)]
        } else {
            [(f + 1, 0.5), (f - 1, -0.5)]
        }
    }

    /// Parameter indices in temporal block order.
    fn grouped_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.groups.iter().flat_map(|g| g.clone())
    }

    fn dim(&self) -> usize {
        self.body.param_count()
    }

    fn temporal(&self, x: &[f64]) -> f64 {
        let m = self.targets.len();
        let mut t = temporal_error_flat(x, self.dim(), &self.groups, self.norm);
        if let Some(prev) = self.stitch {
            t += parameter_difference(&x[..self.dim()], prev, &self.groups, self.norm) / m as f64;
        }
        t
    }

    fn frame_term(&self, f: usize, x: &[f64]) -> f64 {
        frame_loss(x, &self.targets[f], self.body).unwrap_or(f64::NAN)
    }
}

impl Objective for PatchObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let dim = self.dim();
        let m = self.targets.len();
        let frames: f64 = (0..m).map(|f| self.frame_term(f, &x[f * dim..(f + 1) * dim])).sum();
        frames / m as f64 + self.lambda * self.temporal(x)
    }

    /// Same forward differences as the generic gradient, but each column
    /// re-evaluates only the frame it belongs to.
    fn gradient(&self, x: &[f64], _fx: f64, bounds: &[(f64, f64)], step: f64, grad: &mut [f64]) {
        let dim = self.dim();
        let m = self.targets.len() as f64;
        let column_step = |i: usize| if x[i] + step <= bounds[i].1 { step } else { -step };

        let frame_columns = |f: usize, out: &mut [f64]| {
            let base = &x[f * dim..(f + 1) * dim];
            let f0 = self.frame_term(f, base);
            let mut probe = base.to_vec();
            for (k, g) in out.iter_mut().enumerate() {
                let h = column_step(f * dim + k);
                probe[k] = base[k] + h;
                *g = (self.frame_term(f, &probe) - f0) / (h * m);
                probe[k] = base[k];
            }
        };
        if self.parallel {
            grad.par_chunks_mut(dim).enumerate().for_each(|(f, out)| frame_columns(f, out));
        } else {
            grad.chunks_mut(dim).enumerate().for_each(|(f, out)| frame_columns(f, out));
        }

        if self.lambda != 0.0 {
            let t0 = self.temporal(x);
            let mut probe = x.to_vec();
            for i in 0..x.len() {
                let h = column_step(i);
                probe[i] = x[i] + h;
                grad[i] += self.lambda * (self.temporal(&probe) - t0) / h;
                probe[i] = x[i];
            }
        }
    }
}

impl ResidualObjective for PatchObjective<'_> {
    fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    fn residuals(&self, x: &[f64], out: &mut [f64]) -> bool {
        let dim = self.dim();
        let m = self.targets.len();
        let pose = pose_residual_len(self.body);
        for f in 0..m {
            let chunk = &mut out[f * pose..(f + 1) * pose];
            if !write_pose_residuals(self.body, &self.targets[f], &x[f * dim..(f + 1) * dim], chunk) {
                return false;
            }
        }
        if self.lambda != 0.0 {
            let mut row = m * pose;
            for f in 0..m {
                let [(a, ca), (b, cb)] = self.difference_stencil(f);
                for i in self.grouped_indices() {
                    out[row] = ca * x[a * dim + i] + cb * x[b * dim + i];
                    row += 1;
                }
            }
            if let Some(prev) = self.stitch {
                for i in self.grouped_indices() {
                    out[row] = x[i] - prev[i];
                    row += 1;
                }
            }
        }
        true
    }

    /// Pose rows by forward differences over each frame's own parameters
    /// only; temporal rows are linear and filled exactly.
    fn jacobian(&self, x: &[f64], r: &[f64], bounds: &[(f64, f64)], step: f64, jac: &mut DMatrix<f64>) -> usize {
        let dim = self.dim();
        let m = self.targets.len();
        let pose = pose_residual_len(self.body);
        jac.fill(0.0);

        let frame_columns = |f: usize| -> Vec<f64> {
            let base = &x[f * dim..(f + 1) * dim];
            let r0 = &r[f * pose..(f + 1) * pose];
            let mut probe = base.to_vec();
            let mut shifted = vec![0.0; pose];
            let mut cols = vec![0.0; pose * dim];
            for k in 0..dim {
                let h = if base[k] + step <= bounds[f * dim + k].1 { step } else { -step };
                probe[k] = base[k] + h;
                if !write_pose_residuals(self.body, &self.targets[f], &probe, &mut shifted) {
                    shifted.fill(f64::NAN);
                }
                for (row, (a, b)) in shifted.iter().zip(r0).enumerate() {
                    cols[k * pose + row] = (a - b) / h;
                }
                probe[k] = base[k];
            }
            cols
        };
        let columns: Vec<Vec<f64>> = if self.parallel {
            (0..m).into_par_iter().map(frame_columns).collect()
        } else {
            (0..m).map(frame_columns).collect()
        };
        for (f, cols) in columns.iter().enumerate() {
            for k in 0..dim {
                for row in 0..pose {
                    jac[(f * pose + row, f * dim + k)] = cols[k * pose + row];
                }
            }
        }

        if self.lambda != 0.0 {
            let mut row = m * pose;
            for f in 0..m {
                let [(a, ca), (b, cb)] = self.difference_stencil(f);
                for i in self.grouped_indices() {
                    jac[(row, a * dim + i)] = ca;
                    jac[(row, b * dim + i)] = cb;
                    row += 1;
                }
            }
            if self.stitch.is_some() {
                for i in self.grouped_indices() {
                    jac[(row, i)] = 1.0;
                    row += 1;
                }
            }
        }
        m * dim
    }
}

/// Temporal IK: warm-started frame-wise pass, then patches of `m` frames
/// optimized jointly, each stitched to the previous patch's last frame.
/// Earlier patches are not revisited.
pub fn ik_sequence_temporal(
    body: &BodyModel,
    seq: &PoseSequence,
    m: usize,
    lambda: f64,
    options: &SolverOptions,
) -> Result<IKResult> {
    if m < 2 {
        return Err(Error::InvalidSettings(format!("patch length must be at least 2, got {m}")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidSettings(format!("temporal weight must be finite and non-negative, got {lambda}")));
    }
    if seq.len() < m {
        return Err(Error::SequenceTooShort { got: seq.len(), needed: m });
    }
    let targets = FrameTargets::for_sequence(body, seq)?;
    let start = Instant::now();
    let (mut params, pre_stages) = frame_pass(body, &targets, true, options)?;

    let dim = body.param_count();
    let mut stages = Vec::new();
    for range in patch_ranges(params.len(), m) {
        let stitch = (range.start > 0).then(|| params[range.start - 1].clone());
        let mut objective =
            PatchObjective::new(body, &targets[range.clone()], lambda, stitch.as_deref(), options.joint_norm);
        objective.parallel = options.parallel;
        let x0: Vec<f64> = params[range.clone()].concat();
        let bounds: Vec<(f64, f64)> = body.bounds().iter().copied().cycle().take(x0.len()).collect();
        let result = run_minimizer(&objective, &x0, &bounds, options)?;
        for (f, chunk) in range.clone().zip(result.x.chunks(dim)) {
            params[f].copy_from_slice(chunk);
        }
        stages.push(StageReport::new(range, &result));
    }
    Ok(IKResult { params, stages, pre_stages, seconds: start.elapsed().as_secs_f64() })
}

/// Runs `algorithm` on `seq`.
pub fn solve(body: &BodyModel, seq: &PoseSequence, algorithm: Algorithm, options: &SolverOptions) -> Result<IKResult> {
    match algorithm {
        Algorithm::FrameByFrame => ik_sequence_frame_by_frame(body, seq, false, options),
        Algorithm::WarmStarted => ik_sequence_frame_by_frame(body, seq, true, options),
        Algorithm::Temporal { patch, lambda } => ik_sequence_temporal(body, seq, patch, lambda, options),
    }
}
