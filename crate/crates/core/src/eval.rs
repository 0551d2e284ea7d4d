//! Angular-separation metrics and the experiment runner.

use std::time::Instant;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::body::BodyModel;
use crate::error::{Error, Result};
use crate::motiongen::{GroundTruthSequence, LimbMode, SpeedTier};
use crate::rotmath::{relative_angle, RotationMatrix};
use crate::solver::{solve, Algorithm, IKResult, SolverOptions};

pub const REPORT_SCHEMA: &str = "retarget-ik/report/1";

/// Which orientation of each joint is compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrientationFrame {
    /// World orientation from forward kinematics.
    #[default]
    Global,
    /// Orientation relative to the parent node.
    ParentRelative,
}

fn orientations(body: &BodyModel, params: &[f64], frame: OrientationFrame) -> Result<Vec<RotationMatrix>> {
    let gp = body.apply_params(params)?;
    let global = body.joint_orientations(&gp);
    Ok(match frame {
        OrientationFrame::Global => global,
        OrientationFrame::ParentRelative => body
            .joints()
            .iter()
            .zip(global)
            .map(|(j, r)| match body.hierarchy().parent(j.node) {
                Some(p) => gp.orientation(p).transpose() * r,
                None => r,
            })
            .collect(),
    })
}

/// Angle between predicted and ground-truth orientation of each joint, per frame.
pub fn joint_separations(
    pred: &[Vec<f64>],
    gt: &[Vec<f64>],
    body: &BodyModel,
    frame: OrientationFrame,
) -> Result<Vec<Vec<f64>>> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: gt.len() });
    }
    pred.iter()
        .zip(gt)
        .map(|(p, g)| {
            let rp = orientations(body, p, frame)?;
            let rg = orientations(body, g, frame)?;
            Ok(rp.iter().zip(&rg).map(|(a, b)| relative_angle(a, b)).collect())
        })
        .collect()
}

/// Mean per joint angular separation over `subset` (joint indices), averaged
/// over joints and then over frames. Radians per joint.
pub fn mpjas_with(
    pred: &[Vec<f64>],
    gt: &[Vec<f64>],
    body: &BodyModel,
    subset: &[usize],
    frame: OrientationFrame,
) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    if let Some(&j) = subset.iter().find(|&&j| j >= body.joints().len()) {
        return Err(Error::InvalidSettings(format!("joint index {j} out of range")));
    }
    let seps = joint_separations(pred, gt, body, frame)?;
    if seps.is_empty() {
        return Err(Error::SequenceTooShort { got: 0, needed: 1 });
    }
    let per_frame = seps.iter().map(|s| subset.iter().map(|&j| s[j]).sum::<f64>() / subset.len() as f64);
    Ok(per_frame.sum::<f64>() / seps.len() as f64)
}

/// Global-orientation MPJAS over `subset`.
pub fn mpjas(pred: &[Vec<f64>], gt: &[Vec<f64>], body: &BodyModel, subset: &[usize]) -> Result<f64> {
    mpjas_with(pred, gt, body, subset, OrientationFrame::Global)
}

/// Every reorientable joint.
pub fn all_joints(body: &BodyModel) -> Vec<usize> {
    (0..body.joints().len()).collect()
}

/// Joint indices of the named joints.
pub fn joint_subset(body: &BodyModel, names: &[&str]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| body.joint_index(n).ok_or_else(|| Error::InvalidSettings(format!("unknown joint `{n}`"))))
        .collect()
}

/// Hips and knees.
pub fn lower_limb_joints(body: &BodyModel) -> Result<Vec<usize>> {
    joint_subset(body, &["hip_l", "hip_r", "knee_l", "knee_r"])
}

/// Per-joint MPJAS, one value per reorientable joint.
pub fn per_joint_mpjas(
    pred: &[Vec<f64>],
    gt: &[Vec<f64>],
    body: &BodyModel,
    frame: OrientationFrame,
) -> Result<Vec<f64>> {
    let seps = joint_separations(pred, gt, body, frame)?;
    let n = seps.len().max(1) as f64;
    Ok((0..body.joints().len()).map(|j| seps.iter().map(|s| s[j]).sum::<f64>() / n).collect())
}

/// IK strategy in an experiment; temporal weights come from the tier table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    FrameByFrame,
    WarmStarted,
    Temporal { patch: usize },
}

impl Variant {
    /// The four strategies compared by the benchmark.
    pub const STANDARD: [Variant; 4] =
        [Variant::FrameByFrame, Variant::WarmStarted, Variant::Temporal { patch: 3 }, Variant::Temporal { patch: 5 }];

    pub fn algorithm(self, lambda: f64) -> Algorithm {
        match self {
            Variant::FrameByFrame => Algorithm::FrameByFrame,
            Variant::WarmStarted => Algorithm::WarmStarted,
            Variant::Temporal { patch } => Algorithm::Temporal { patch, lambda },
        }
    }

    pub fn label(self) -> String {
        self.algorithm(0.0).label()
    }
}

/// Temporal weight per speed tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaTable {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for LambdaTable {
    fn default() -> Self {
        LambdaTable {
            a: SpeedTier::A.default_lambda(),
            b: SpeedTier::B.default_lambda(),
            c: SpeedTier::C.default_lambda(),
        }
    }
}

impl LambdaTable {
    pub fn uniform(lambda: f64) -> Self {
        LambdaTable { a: lambda, b: lambda, c: lambda }
    }

    pub fn get(&self, tier: SpeedTier) -> f64 {
        match tier {
            SpeedTier::A => self.a,
            SpeedTier::B => self.b,
            SpeedTier::C => self.c,
        }
    }

    pub fn set(&mut self, tier: SpeedTier, lambda: f64) {
        match tier {
            SpeedTier::A => self.a = lambda,
            SpeedTier::B => self.b = lambda,
            SpeedTier::C => self.c = lambda,
        }
    }
}

/// Candidate temporal weights searched by [`calibrate_lambdas`].
pub const LAMBDA_GRID: [f64; 10] = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.3, 0.5, 0.7];

/// Mean MPJAS of the temporal strategy on one tier at one candidate weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub tier: SpeedTier,
    pub lambda: f64,
    pub mpjas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub table: LambdaTable,
    pub points: Vec<CalibrationPoint>,
}

/// Chooses the temporal weight of each speed tier as the candidate with the
/// lowest mean MPJAS of the `patch`-frame temporal strategy over `suite`.
///
/// `suite` should be disjoint from any sequences later used for evaluation.
/// Ties keep the earlier candidate. Tiers absent from `suite` keep
/// `options.lambdas`.
pub fn calibrate_lambdas(
    suite: &[GroundTruthSequence],
    candidates: &[f64],
    patch: usize,
    body: &BodyModel,
    options: &ExperimentOptions,
) -> Result<Calibration> {
    if candidates.is_empty() {
        return Err(Error::InvalidSettings("no candidate temporal weights".into()));
    }
    let variant = Variant::Temporal { patch };
    let label = variant.label();
    let mut points = Vec::new();
    for &lambda in candidates {
        let opts = ExperimentOptions { lambdas: LambdaTable::uniform(lambda), ..*options };
        let report = run_experiment(suite, &[variant], body, &opts)?;
        if let Some(failed) = report.runs.iter().find_map(|r| r.error.clone()) {
            return Err(Error::InvalidSettings(format!("calibration run failed at lambda {lambda}: {failed}")));
        }
        for tier in SpeedTier::ALL {
            if let Some(cell) = report.tier_cell(&label, tier) {
                points.push(CalibrationPoint { tier, lambda, mpjas: cell.mpjas });
            }
        }
    }
    let mut table = options.lambdas;
    for tier in SpeedTier::ALL {
        let best = points.iter().filter(|p| p.tier == tier).fold(None::<&CalibrationPoint>, |best, p| match best {
            Some(b) if b.mpjas <= p.mpjas => Some(b),
            _ => Some(p),
        });
        if let Some(p) = best {
            table.set(tier, p.lambda);
        }
    }
    Ok(Calibration { table, points })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentOptions {
    pub solver: SolverOptions,
    pub lambdas: LambdaTable,
    pub orientation: OrientationFrame,
    /// Run independent (algorithm, sequence) pairs concurrently.
    pub parallel_runs: bool,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            solver: SolverOptions::default(),
            lambdas: LambdaTable::default(),
            orientation: OrientationFrame::Global,
            parallel_runs: true,
        }
    }
}

/// Outcome of one algorithm on one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub sequence: usize,
    pub tier: SpeedTier,
    pub mode: LimbMode,
    pub seed: u64,
    pub frames: usize,
    pub lambda: Option<f64>,
    pub mpjas: f64,
    pub lower_limb_mpjas: f64,
    pub per_joint: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Every stage ended no worse than it started.
    pub monotone: bool,
    /// Every returned parameter lies within its bound.
    pub in_bounds: bool,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierCell {
    pub algorithm: String,
    pub tier: SpeedTier,
    pub sequences: usize,
    pub mpjas: f64,
    pub fps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCell {
    pub algorithm: String,
    pub mode: LimbMode,
    pub sequences: usize,
    pub mpjas: f64,
    pub lower_limb_mpjas: f64,
    pub per_joint: IndexMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallCell {
    pub algorithm: String,
    pub sequences: usize,
    pub mpjas: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Machine {
    pub os: String,
    pub arch: String,
    pub threads: usize,
}

impl Machine {
    pub fn current() -> Self {
        Machine {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            threads: rayon::current_num_threads(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub body_hash: String,
    pub algorithms: Vec<String>,
    pub lambdas: LambdaTable,
    pub orientation: OrientationFrame,
    /// MPJAS and fps per algorithm and speed tier.
    pub tiers: Vec<TierCell>,
    /// MPJAS per algorithm and limb mode, with per-joint breakdowns.
    pub modes: Vec<ModeCell>,
    pub overall: Vec<OverallCell>,
    pub runs: Vec<RunRecord>,
    pub checks: Vec<Check>,
    pub machine: Machine,
    pub total_seconds: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn run_one(
    body: &BodyModel,
    index: usize,
    seq: &GroundTruthSequence,
    variant: Variant,
    options: &ExperimentOptions,
    lower: &[usize],
) -> RunRecord {
    let lambda = options.lambdas.get(seq.spec.tier);
    let algorithm = variant.algorithm(lambda);
    let mut record = RunRecord {
        algorithm: variant.label(),
        sequence: index,
        tier: seq.spec.tier,
        mode: seq.spec.mode,
        seed: seq.spec.seed,
        frames: seq.params.len(),
        lambda: matches!(variant, Variant::Temporal { .. }).then_some(lambda),
        mpjas: f64::NAN,
        lower_limb_mpjas: f64::NAN,
        per_joint: Vec::new(),
        iterations: 0,
        converged: false,
        monotone: false,
        in_bounds: false,
        seconds: 0.0,
        error: None,
    };
    let outcome = (|| -> Result<IKResult> {
        let result = solve(body, &seq.poses, algorithm, &options.solver)?;
        let per_joint = per_joint_mpjas(&result.params, &seq.params, body, options.orientation)?;
        record.mpjas = mean(per_joint.iter().copied());
        record.lower_limb_mpjas = mpjas_with(&result.params, &seq.params, body, lower, options.orientation)?;
        record.per_joint = per_joint;
        Ok(result)
    })();
    match outcome {
        Ok(result) => {
            record.iterations = result.total_iterations();
            record.converged = result.all_converged();
            record.monotone = result.stages.iter().chain(&result.pre_stages).all(|s| s.final_loss <= s.initial_loss);
            record.in_bounds = result.params.iter().all(|p| body.check_params(p).is_ok());
            record.seconds = result.seconds;
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Runs every variant on every sequence and aggregates the results.
///
/// Failed runs are recorded with their error and excluded from averages.
pub fn run_experiment(
    suite: &[GroundTruthSequence],
    variants: &[Variant],
    body: &BodyModel,
    options: &ExperimentOptions,
) -> Result<EvalReport> {
    let lower = lower_limb_joints(body)?;
    let start = Instant::now();
    let jobs: Vec<(Variant, usize)> = variants.iter().flat_map(|&v| (0..suite.len()).map(move |i| (v, i))).collect();
    let job = |&(v, i): &(Variant, usize)| run_one(body, i, &suite[i], v, options, &lower);
    let runs: Vec<RunRecord> =
        if options.parallel_runs { jobs.par_iter().map(job).collect() } else { jobs.iter().map(job).collect() };
    let total_seconds = start.elapsed().as_secs_f64();

    let names: Vec<String> = body.joints().iter().map(|j| body.node_names()[j.node].clone()).collect();
    let labels: Vec<String> = variants.iter().map(|v| v.label()).collect();
    let ok = |r: &&RunRecord| r.error.is_none();

    let mut tiers = Vec::new();
    let mut modes = Vec::new();
    let mut overall = Vec::new();
    for label in &labels {
        let of_alg: Vec<&RunRecord> = runs.iter().filter(|r| &r.algorithm == label).filter(ok).collect();
        for tier in SpeedTier::ALL {
            let cell: Vec<&RunRecord> = of_alg.iter().copied().filter(|r| r.tier == tier).collect();
            if cell.is_empty() {
                continue;
            }
            let frames: usize = cell.iter().map(|r| r.frames).sum();
            let seconds: f64 = cell.iter().map(|r| r.seconds).sum();
            tiers.push(TierCell {
                algorithm: label.clone(),
                tier,
                sequences: cell.len(),
                mpjas: mean(cell.iter().map(|r| r.mpjas)),
                fps: frames as f64 / seconds.max(f64::MIN_POSITIVE),
            });
        }
        for mode in [LimbMode::BentOnly, LimbMode::Phased] {
            let cell: Vec<&RunRecord> = of_alg.iter().copied().filter(|r| r.mode == mode).collect();
            if cell.is_empty() {
                continue;
            }
            let per_joint =
                names.iter().enumerate().map(|(j, n)| (n.clone(), mean(cell.iter().map(|r| r.per_joint[j])))).collect();
            modes.push(ModeCell {
                algorithm: label.clone(),
                mode,
                sequences: cell.len(),
                mpjas: mean(cell.iter().map(|r| r.mpjas)),
                lower_limb_mpjas: mean(cell.iter().map(|r| r.lower_limb_mpjas)),
                per_joint,
            });
        }
        overall.push(OverallCell {
            algorithm: label.clone(),
            sequences: of_alg.len(),
            mpjas: mean(of_alg.iter().map(|r| r.mpjas)),
            iterations: of_alg.iter().map(|r| r.iterations).sum(),
        });
    }

    let mut report = EvalReport {
        schema: REPORT_SCHEMA.to_string(),
        body_hash: body.config_hash(),
        algorithms: labels,
        lambdas: options.lambdas,
        orientation: options.orientation,
        tiers,
        modes,
        overall,
        runs,
        checks: Vec::new(),
        machine: Machine::current(),
        total_seconds,
    };
    report.checks = standard_checks(&report);
    Ok(report)
}

impl EvalReport {
    pub fn tier_cell(&self, algorithm: &str, tier: SpeedTier) -> Option<&TierCell> {
        self.tiers.iter().find(|c| c.algorithm == algorithm && c.tier == tier)
    }

    pub fn mode_cell(&self, algorithm: &str, mode: LimbMode) -> Option<&ModeCell> {
        self.modes.iter().find(|c| c.algorithm == algorithm && c.mode == mode)
    }

    pub fn overall_cell(&self, algorithm: &str) -> Option<&OverallCell> {
        self.overall.iter().find(|c| c.algorithm == algorithm)
    }

    /// Iterations of `algorithm` summed over the runs of one tier.
    pub fn iterations(&self, algorithm: &str, tier: SpeedTier) -> usize {
        self.runs.iter().filter(|r| r.algorithm == algorithm && r.tier == tier).map(|r| r.iterations).sum()
    }

    /// Copy with every wall-clock field zeroed, for comparing metric content.
    pub fn without_timing(&self) -> EvalReport {
        let mut r = self.clone();
        r.total_seconds = 0.0;
        r.machine = Machine { os: String::new(), arch: String::new(), threads: 0 };
        r.tiers.iter_mut().for_each(|c| c.fps = 0.0);
        r.runs.iter_mut().for_each(|c| c.seconds = 0.0);
        r
    }

    pub fn all_checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Plain-text tables of the report.
    pub fn summary(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "MPJAS over 14 joints (rad/joint) and optimization fps per speed tier");
        let _ = write!(s, "{:<10}", "algorithm");
        for t in SpeedTier::ALL {
            let _ = write!(s, " {:>12} {:>8}", format!("E[{}]", t.label()), "fps");
        }
        let _ = writeln!(s, " {:>12}", "E[all]");
        for a in &self.algorithms {
            let _ = write!(s, "{a:<10}");
            for t in SpeedTier::ALL {
                match self.tier_cell(a, t) {
                    Some(c) => {
                        let _ = write!(s, " {:>12.4e} {:>8.1}", c.mpjas, c.fps);
                    }
                    None => {
                        let _ = write!(s, " {:>12} {:>8}", "-", "-");
                    }
                }
            }
            let e = self.overall_cell(a).map_or(f64::NAN, |c| c.mpjas);
            let _ = writeln!(s, " {e:>12.4e}");
        }
        let _ = writeln!(s, "\nMPJAS by limb mode (rad/joint)");
        let _ = writeln!(s, "{:<10} {:>12} {:>12} {:>14}", "algorithm", "bent-only", "phased", "hips+knees(b)");
        for a in &self.algorithms {
            let bent = self.mode_cell(a, LimbMode::BentOnly);
            let ph = self.mode_cell(a, LimbMode::Phased);
            let _ = writeln!(
                s,
                "{a:<10} {:>12.4e} {:>12.4e} {:>14.4e}",
                bent.map_or(f64::NAN, |c| c.mpjas),
                ph.map_or(f64::NAN, |c| c.mpjas),
                bent.map_or(f64::NAN, |c| c.lower_limb_mpjas)
            );
        }
        let _ = writeln!(s, "\nPer-joint MPJAS, phased sequences (rad)");
        if let Some(first) = self.modes.iter().find(|c| c.mode == LimbMode::Phased) {
            let _ = write!(s, "{:<12}", "joint");
            for a in &self.algorithms {
                let _ = write!(s, " {a:>10}");
            }
            let _ = writeln!(s);
            for joint in first.per_joint.keys() {
                let _ = write!(s, "{joint:<12}");
                for a in &self.algorithms {
                    let v = self.mode_cell(a, LimbMode::Phased).and_then(|c| c.per_joint.get(joint)).copied();
                    let _ = write!(s, " {:>10.3e}", v.unwrap_or(f64::NAN));
                }
                let _ = writeln!(s);
            }
        }
        let failed = self.runs.iter().filter(|r| r.error.is_some()).count();
        if failed > 0 {
            let _ = writeln!(s, "\n{failed} run(s) failed; see the report file");
        }
        let _ = writeln!(s, "\nChecks");
        for c in &self.checks {
            let _ = writeln!(s, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        s
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.to_string(), passed, detail }
}

/// Ordering and band checks evaluated on whatever cells the report holds.
/// Checks whose inputs are missing are omitted.
pub fn standard_checks(r: &EvalReport) -> Vec<Check> {
    let mut out = Vec::new();
    let failed = r.runs.iter().filter(|x| x.error.is_some()).count();
    out.push(check("all runs completed", failed == 0, format!("{failed} failed")));
    let bad = r.runs.iter().filter(|x| x.error.is_none() && !(x.monotone && x.in_bounds)).count();
    out.push(check("monotone loss and bound feasibility", bad == 0, format!("{bad} violating runs")));

    let worst = r.overall.iter().map(|c| c.mpjas).fold(f64::NEG_INFINITY, f64::max);
    if !r.overall.is_empty() {
        out.push(check("every algorithm below 1.5e-1 rad/joint", worst < 0.15, format!("max {worst:.4e}")));
    }
    if let Some(c) = r.overall_cell("2_M=5") {
        out.push(check("2_M=5 average below 1.0e-1 rad/joint", c.mpjas < 0.1, format!("{:.4e}", c.mpjas)));
    }
    if let (Some(t), Some(a)) = (r.mode_cell("2_M=5", LimbMode::Phased), r.mode_cell("1a", LimbMode::Phased)) {
        out.push(check("phased: 2_M=5 below 1a", t.mpjas < a.mpjas, format!("{:.4e} vs {:.4e}", t.mpjas, a.mpjas)));
    }
    if let (Some(five), Some(three)) = (r.mode_cell("2_M=5", LimbMode::Phased), r.mode_cell("2_M=3", LimbMode::Phased))
    {
        out.push(check(
            "phased: 2_M=5 at most 2_M=3",
            five.mpjas <= three.mpjas,
            format!("{:.4e} vs {:.4e}", five.mpjas, three.mpjas),
        ));
    }
    let bent: Vec<f64> = r.modes.iter().filter(|c| c.mode == LimbMode::BentOnly).map(|c| c.mpjas).collect();
    if bent.len() >= 2 {
        let lo = bent.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = bent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push(check("bent-only: algorithms within 2x", hi <= 2.0 * lo, format!("{lo:.4e} .. {hi:.4e}")));
    }
    if let (Some(b), Some(p)) = (r.mode_cell("1a", LimbMode::BentOnly), r.mode_cell("1a", LimbMode::Phased)) {
        out.push(check(
            "1a: bent-only at most phased",
            b.mpjas <= p.mpjas,
            format!("{:.4e} vs {:.4e}", b.mpjas, p.mpjas),
        ));
        if let (Some(cl), Some(kn)) =
            (mean_joints(p, &["clavicle_l", "clavicle_r"]), mean_joints(p, &["knee_l", "knee_r"]))
        {
            out.push(check("1a phased: clavicles above knees", cl > kn, format!("{cl:.4e} vs {kn:.4e}")));
        }
    }
    if let Some(c) = r.mode_cell("2_M=5", LimbMode::BentOnly) {
        out.push(check(
            "bent-only: 2_M=5 hips+knees below 1e-2",
            c.lower_limb_mpjas < 1e-2,
            format!("{:.4e}", c.lower_limb_mpjas),
        ));
    }
    if r.algorithms.iter().any(|a| a == "1a") && r.algorithms.iter().any(|a| a == "1b") {
        let (a, b) = (r.iterations("1a", SpeedTier::A), r.iterations("1b", SpeedTier::A));
        if a > 0 {
            out.push(check("slow tier: 1b iterations at most 1a", b <= a, format!("{b} vs {a}")));
        }
    }
    out.push(aggregation_check(r));
    out
}

fn mean_joints(cell: &ModeCell, names: &[&str]) -> Option<f64> {
    let v: Option<Vec<f64>> = names.iter().map(|n| cell.per_joint.get(*n).copied()).collect();
    v.map(|v| mean(v.into_iter()))
}

/// The overall average equals the sequence-weighted mean of the tier averages.
fn aggregation_check(r: &EvalReport) -> Check {
    let mut worst = 0.0f64;
    for o in &r.overall {
        let cells: Vec<&TierCell> = r.tiers.iter().filter(|c| c.algorithm == o.algorithm).collect();
        let n: usize = cells.iter().map(|c| c.sequences).sum();
        if n == 0 {
            continue;
        }
        let weighted = cells.iter().map(|c| c.mpjas * c.sequences as f64).sum::<f64>() / n as f64;
        worst = worst.max((weighted - o.mpjas).abs());
    }
    check("overall equals weighted tier mean", worst <= 1e-12, format!("max deviation {worst:.1e}"))
}
