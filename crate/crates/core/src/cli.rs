//! Command-line entry points: `retarget`, `generate`, `evaluate` and `bench`.
//!
//! Exit codes: 0 success, 1 invalid input or arguments, 2 non-convergence
//! under `--strict`, 3 file-system errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::body::{default_body, BodyModel, LimbLengths};
use crate::error::Error;
use crate::eval::{
    all_joints, calibrate_lambdas, lower_limb_joints, mpjas_with, per_joint_mpjas, run_experiment, EvalReport,
    ExperimentOptions, LambdaTable, OrientationFrame, Variant, LAMBDA_GRID,
};
use crate::io::{
    read_angle_file, read_body, read_pose_file, write_angle_file, write_body_config, write_pose_file, write_text,
    AngleFile, PoseFile, Provenance,
};
use crate::motiongen::{generate, GroundTruthSequence, LimbMode, MotionSpec, PhaseTransition, SpeedTier, SuiteSpec};
use crate::solver::{solve, Algorithm, Method, SolverOptions};

pub const EVALUATION_SCHEMA: &str = "retarget-ik/evaluation/1";

#[derive(Debug, Parser)]
#[command(name = "retarget-ik", version, about = "Retarget 3D keypoint sequences onto a constrained human chain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve joint angles for a pose file.
    Retarget(RetargetArgs),
    /// Write synthetic ground-truth pose and angle files.
    Generate(GenerateArgs),
    /// Compare predicted angles with ground truth.
    Evaluate(EvaluateArgs),
    /// Generate a suite, run every algorithm and write a report.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmFlag {
    /// Every frame from the rest pose.
    Frame,
    /// Every frame from the previous frame's solution.
    FrameWarm,
    /// Warm-started pass, then patches with the temporal term.
    Temporal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpeedFlag {
    A,
    B,
    C,
}

impl From<SpeedFlag> for SpeedTier {
    fn from(s: SpeedFlag) -> Self {
        match s {
            SpeedFlag::A => SpeedTier::A,
            SpeedFlag::B => SpeedTier::B,
            SpeedFlag::C => SpeedTier::C,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeFlag {
    #[value(alias = "bent")]
    BentOnly,
    Phased,
}

impl From<ModeFlag> for LimbMode {
    fn from(m: ModeFlag) -> Self {
        match m {
            ModeFlag::BentOnly => LimbMode::BentOnly,
            ModeFlag::Phased => LimbMode::Phased,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransitionFlag {
    Ramp,
    Step,
}

impl From<TransitionFlag> for PhaseTransition {
    fn from(t: TransitionFlag) -> Self {
        match t {
            TransitionFlag::Ramp => PhaseTransition::Ramp,
            TransitionFlag::Step => PhaseTransition::Step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodFlag {
    #[value(alias = "lsq")]
    LeastSquares,
    QuasiNewton,
}

impl From<MethodFlag> for Method {
    fn from(m: MethodFlag) -> Self {
        match m {
            MethodFlag::LeastSquares => Method::LeastSquares,
            MethodFlag::QuasiNewton => Method::QuasiNewton,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrientationFlag {
    Global,
    ParentRelative,
}

impl From<OrientationFlag> for OrientationFrame {
    fn from(o: OrientationFlag) -> Self {
        match o {
            OrientationFlag::Global => OrientationFrame::Global,
            OrientationFlag::ParentRelative => OrientationFrame::ParentRelative,
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct RetargetArgs {
    /// Pose file to retarget.
    #[arg(long)]
    pub poses: PathBuf,
    /// Body configuration; the default chain when omitted.
    #[arg(long)]
    pub body: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AlgorithmFlag::Temporal)]
    pub algorithm: AlgorithmFlag,
    /// Patch length of the temporal algorithm.
    #[arg(long = "M", default_value_t = 5)]
    pub patch: usize,
    /// Temporal weight; defaults to the default weight of `--speed`.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Motion speed tier used to pick the default temporal weight.
    #[arg(long, value_enum, default_value_t = SpeedFlag::B)]
    pub speed: SpeedFlag,
    #[arg(long, value_enum, default_value_t = MethodFlag::LeastSquares)]
    pub method: MethodFlag,
    /// Exit with code 2 if any frame or patch did not converge.
    #[arg(long)]
    pub strict: bool,
    /// Output angle file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, clap::Args)]
pub struct GenerateArgs {
    /// The full suite: four bent-only/phased pairs per speed tier.
    #[arg(long)]
    pub suite: bool,
    #[arg(long, value_enum, default_value_t = SpeedFlag::A)]
    pub speed: SpeedFlag,
    #[arg(long, value_enum, default_value_t = ModeFlag::Phased)]
    pub mode: ModeFlag,
    #[arg(long, default_value_t = 30)]
    pub frames: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = TransitionFlag::Ramp)]
    pub transition: TransitionFlag,
    #[arg(long)]
    pub body: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, clap::Args)]
pub struct EvaluateArgs {
    /// Predicted angle file.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth angle file.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub body: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OrientationFlag::Global)]
    pub orientation: OrientationFlag,
    /// Report file; the summary is printed either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Bent-only/phased pairs per speed tier.
    #[arg(long, default_value_t = 4)]
    pub pairs: usize,
    #[arg(long, default_value_t = 30)]
    pub frames: usize,
    /// One temporal weight for every tier instead of the default table.
    #[arg(long, conflicts_with = "calibrate")]
    pub lambda: Option<f64>,
    /// Choose the temporal weights on held-out sequences first.
    #[arg(long)]
    pub calibrate: bool,
    /// Seed of the held-out calibration sequences.
    #[arg(long, default_value_t = 1)]
    pub calibration_seed: u64,
    #[arg(long, value_enum, default_value_t = TransitionFlag::Ramp)]
    pub transition: TransitionFlag,
    #[arg(long, value_enum, default_value_t = MethodFlag::LeastSquares)]
    pub method: MethodFlag,
    #[arg(long, value_enum, default_value_t = OrientationFlag::Global)]
    pub orientation: OrientationFlag,
    /// Exit with code 2 if any run did not converge.
    #[arg(long)]
    pub strict: bool,
    /// Report file; the summary is printed either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failed command and its exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Validation(String),
    NotConverged(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::NotConverged(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::NotConverged(m) | CliError::Io(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn load_body(path: Option<&Path>) -> CliResult<BodyModel> {
    Ok(match path {
        Some(p) => read_body(p)?,
        None => default_body(&LimbLengths::default())?,
    })
}

/// Solves a pose file and writes the angle file. Returns the written file.
pub fn cmd_retarget(args: &RetargetArgs) -> CliResult<AngleFile> {
    let body = load_body(args.body.as_deref())?;
    let poses = read_pose_file(&args.poses)?;
    for (kp, _) in body.keypoints() {
        if !poses.keypoints.contains(kp) {
            return Err(CliError::Validation(format!(
                "{}: keypoint `{kp}` required by the body is missing (frame 0)",
                args.poses.display()
            )));
        }
    }
    let seq = poses.to_sequence()?;
    let lambda = args.lambda.unwrap_or_else(|| SpeedTier::from(args.speed).default_lambda());
    let algorithm = match args.algorithm {
        AlgorithmFlag::Frame => Algorithm::FrameByFrame,
        AlgorithmFlag::FrameWarm => Algorithm::WarmStarted,
        AlgorithmFlag::Temporal => Algorithm::Temporal { patch: args.patch, lambda },
    };
    let options = SolverOptions { method: args.method.into(), ..Default::default() };
    let result = solve(&body, &seq, algorithm, &options)?;

    let temporal = matches!(algorithm, Algorithm::Temporal { .. });
    let provenance = Provenance {
        body_hash: body.config_hash(),
        algorithm: algorithm.label(),
        lambda: temporal.then_some(lambda),
        patch: temporal.then_some(args.patch),
        ..Default::default()
    };
    let file = AngleFile::new(&body, provenance, result.params.clone());
    write_angle_file(&args.out, &file)?;

    let unconverged = result.unconverged_frames();
    println!(
        "{}: {} frames, {} iterations, {:.1} frames/s -> {}",
        algorithm.label(),
        result.params.len(),
        result.total_iterations(),
        result.fps(),
        args.out.display()
    );
    if !unconverged.is_empty() {
        let msg = format!("iteration limit reached on frames {unconverged:?}");
        if args.strict {
            return Err(CliError::NotConverged(msg));
        }
        eprintln!("warning: {msg}");
    }
    Ok(file)
}

/// File stem of a generated sequence.
pub fn sequence_name(spec: &MotionSpec, index: Option<usize>) -> String {
    let tag = index.map_or_else(|| format!("s{}", spec.seed), |k| format!("{k:02}"));
    format!("{}_{}_{tag}", spec.tier.label(), spec.mode.label())
}

fn write_sequence(dir: &Path, name: &str, body: &BodyModel, gt: &GroundTruthSequence) -> CliResult<()> {
    write_pose_file(&dir.join(format!("{name}.poses.json")), &PoseFile::from_sequence(&gt.poses))?;
    let provenance = Provenance {
        body_hash: body.config_hash(),
        algorithm: "ground-truth".into(),
        seed: Some(gt.spec.seed),
        tier: Some(gt.spec.tier),
        mode: Some(gt.spec.mode),
        ..Default::default()
    };
    write_angle_file(&dir.join(format!("{name}.angles.json")), &AngleFile::new(body, provenance, gt.params.clone()))?;
    Ok(())
}

/// Writes `<name>.poses.json` and `<name>.angles.json` per sequence plus
/// `body.json`. Returns the sequence names.
pub fn cmd_generate(args: &GenerateArgs) -> CliResult<Vec<String>> {
    let body = load_body(args.body.as_deref())?;
    let specs: Vec<(MotionSpec, Option<usize>)> = if args.suite {
        let suite = SuiteSpec { transition: args.transition.into(), ..SuiteSpec::new(args.seed) };
        let per_tier = 2 * suite.pairs_per_tier;
        suite
            .specs()
            .into_iter()
            .enumerate()
            .map(|(i, s)| (s.with_frames(args.frames), Some((i % per_tier) / 2)))
            .collect()
    } else {
        let mut spec = MotionSpec::new(args.speed.into(), args.mode.into(), args.seed).with_frames(args.frames);
        spec.transition = args.transition.into();
        vec![(spec, None)]
    };
    let mut names = Vec::with_capacity(specs.len());
    for (spec, index) in &specs {
        let gt = generate(spec, &body)?;
        let name = sequence_name(spec, *index);
        write_sequence(&args.out, &name, &body, &gt)?;
        names.push(name);
    }
    write_body_config(&args.out.join("body.json"), body.config())?;
    let plural = if names.len() == 1 { "" } else { "s" };
    println!("wrote {} sequence{plural} to {}", names.len(), args.out.display());
    Ok(names)
}

/// MPJAS of one predicted sequence against its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceEvaluation {
    pub schema: String,
    pub body_hash: String,
    pub orientation: OrientationFrame,
    pub frames: usize,
    pub predicted: Provenance,
    pub ground_truth: Provenance,
    pub mpjas: f64,
    pub lower_limb_mpjas: f64,
    pub per_joint: IndexMap<String, f64>,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<SequenceEvaluation> {
    let body = load_body(args.body.as_deref())?;
    let pred = read_angle_file(&args.pred)?;
    let gt = read_angle_file(&args.gt)?;
    pred.validate_for(&body).map_err(|e| CliError::Validation(format!("{}: {e}", args.pred.display())))?;
    gt.validate_for(&body).map_err(|e| CliError::Validation(format!("{}: {e}", args.gt.display())))?;
    let frame = args.orientation.into();
    let mpjas = mpjas_with(&pred.frames, &gt.frames, &body, &all_joints(&body), frame)?;
    let lower = mpjas_with(&pred.frames, &gt.frames, &body, &lower_limb_joints(&body)?, frame)?;
    let per = per_joint_mpjas(&pred.frames, &gt.frames, &body, frame)?;
    let per_joint = body.joints().iter().map(|j| body.node_names()[j.node].clone()).zip(per).collect();
    let evaluation = SequenceEvaluation {
        schema: EVALUATION_SCHEMA.into(),
        body_hash: body.config_hash(),
        orientation: frame,
        frames: pred.frames.len(),
        predicted: pred.provenance,
        ground_truth: gt.provenance,
        mpjas,
        lower_limb_mpjas: lower,
        per_joint,
    };
    println!("MPJAS {mpjas:.4e} rad/joint over {} frames (hips+knees {lower:.4e})", evaluation.frames);
    for (joint, v) in &evaluation.per_joint {
        println!("  {joint:<12} {v:.4e}");
    }
    if let Some(out) = &args.out {
        let mut text = serde_json::to_string_pretty(&evaluation).expect("evaluation serializes");
        text.push('\n');
        write_text(out, &text)?;
    }
    Ok(evaluation)
}

/// Runs every algorithm on a generated suite and writes the report if asked.
/// `--strict` is applied by [`run`] after the summary is printed.
pub fn cmd_bench(args: &BenchArgs) -> CliResult<EvalReport> {
    if args.pairs == 0 {
        return Err(CliError::Validation("--pairs must be positive".into()));
    }
    let body = default_body(&LimbLengths::default())?;
    let solver = SolverOptions { method: args.method.into(), ..Default::default() };
    let mut options = ExperimentOptions { solver, orientation: args.orientation.into(), ..Default::default() };
    let suite_spec = |seed: u64, pairs: usize| SuiteSpec {
        pairs_per_tier: pairs,
        transition: args.transition.into(),
        ..SuiteSpec::new(seed)
    };
    let generate_all = |spec: SuiteSpec| -> CliResult<Vec<GroundTruthSequence>> {
        spec.specs().into_iter().map(|s| generate(&s.with_frames(args.frames), &body).map_err(CliError::from)).collect()
    };
    if let Some(lambda) = args.lambda {
        options.lambdas = LambdaTable::uniform(lambda);
    } else if args.calibrate {
        if args.calibration_seed == args.seed {
            return Err(CliError::Validation("calibration and evaluation seeds must differ".into()));
        }
        let held_out = generate_all(suite_spec(args.calibration_seed, 2))?;
        let calibration = calibrate_lambdas(&held_out, &LAMBDA_GRID, 5, &body, &options)?;
        options.lambdas = calibration.table;
    }
    let suite = generate_all(suite_spec(args.seed, args.pairs))?;
    let report = run_experiment(&suite, &Variant::STANDARD, &body, &options)?;
    if let Some(out) = &args.out {
        crate::io::write_report(out, &report)?;
    }
    Ok(report)
}

/// `NotConverged` if any run of `report` hit the iteration limit.
pub fn require_convergence(report: &EvalReport) -> CliResult<()> {
    let stuck: Vec<String> = report
        .runs
        .iter()
        .filter(|r| !r.converged)
        .map(|r| format!("{} on sequence {}", r.algorithm, r.sequence))
        .collect();
    if stuck.is_empty() {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!("iteration limit reached: {}", stuck.join(", "))))
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Retarget(a) => cmd_retarget(a).map(drop),
        Command::Generate(a) => cmd_generate(a).map(drop),
        Command::Evaluate(a) => cmd_evaluate(a).map(drop),
        Command::Bench(a) => {
            let report = cmd_bench(a)?;
            println!("{}", report.summary());
            if a.strict {
                require_convergence(&report)?;
            }
            Ok(())
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
