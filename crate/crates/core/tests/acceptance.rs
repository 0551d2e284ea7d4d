//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Recovery criteria (4 to 6) use temporal weights chosen on held-out
//! sequences (seed 1) and are evaluated on a disjoint suite (seed 2024); the
//! same suite under the default weights is reported alongside for reference.

mod common;

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use retarget_ik::cli::{cmd_bench, BenchArgs, MethodFlag, OrientationFlag, TransitionFlag};
use retarget_ik::eval::{
    calibrate_lambdas, run_experiment, EvalReport, ExperimentOptions, LambdaTable, Variant, LAMBDA_GRID,
};
use retarget_ik::kinematics::fk_reoriented;
use retarget_ik::losses::{frame_loss, FrameTargets};
use retarget_ik::motiongen::{generate_suite, LimbMode, SpeedTier, SuiteSpec};
use retarget_ik::optimize::{minimize, minimize_residuals, Block, OptimizerSettings, Penalty, ResidualObjective};
use retarget_ik::rotmath::{relative_angle, solution_space};
use retarget_ik::solver::{ik_frame, SolverOptions};
use retarget_ik::{default_body, BodyModel, LimbLengths, PoseFrame};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn body() -> BodyModel {
    default_body(&LimbLengths::default()).unwrap()
}

fn solution_space_property() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let (mut map_error, mut ortho_error) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let a = common::unit_vector(&mut rng) * rng.gen_range(0.1..10.0);
        let b = common::unit_vector(&mut rng) * rng.gen_range(0.1..10.0);
        let alpha = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let r = solution_space(&a, &b, alpha).unwrap().to_matrix();
        map_error = map_error.max((r.rotate(&a.normalize()) - b.normalize()).abs().max());
        ortho_error = ortho_error.max(r.orthonormality_error()).max((r.determinant() - 1.0).abs());
    }
    let seconds = start.elapsed().as_secs_f64();
    outcome(
        map_error < 1e-9 && ortho_error < 1e-9 && seconds < 1.0,
        format!("10^4 triples: map error {map_error:.1e}, orthonormality {ortho_error:.1e}, {seconds:.3} s"),
    )
}

fn fk_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut fk_error, mut length_error) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.gen_range(2..=20);
        let (h, chain) = common::random_chain(&mut rng, n);
        let deltas: Vec<_> = (0..n).map(|_| common::rotation(&mut rng)).collect();
        let gp = fk_reoriented(&chain, &h, &deltas).unwrap();
        for j in 0..n {
            let full = common::path_product(&h, &chain, Some(&deltas), j);
            fk_error = fk_error
                .max((gp.position(j) - full.translation).abs().max())
                .max(gp.orientation(j).max_abs_diff(&full.rotation));
            if let Some(p) = h.parent(j) {
                length_error =
                    length_error.max(((gp.position(j) - gp.position(p)).norm() - chain.link_length(j)).abs());
            }
        }
    }
    outcome(
        fk_error < 1e-12 && length_error < 1e-9,
        format!("100 chains: incremental vs product {fk_error:.1e}, link length {length_error:.1e}"),
    )
}

fn generator_consistency(body: &BodyModel) -> Outcome {
    let suite = generate_suite(2024, body).unwrap();
    let (mut worst_loss, mut bound_violations) = (0.0f64, 0);
    let mut cap_ratio = [0.0f64; 3];
    for g in &suite {
        let targets = FrameTargets::for_sequence(body, &g.poses).unwrap();
        for (p, t) in g.params.iter().zip(&targets) {
            worst_loss = worst_loss.max(frame_loss(p, t, body).unwrap());
            bound_violations += usize::from(body.check_params(p).is_err());
        }
        let tier = SpeedTier::ALL.iter().position(|&t| t == g.spec.tier).unwrap();
        for w in g.params.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                cap_ratio[tier] = cap_ratio[tier].max((b - a).abs() / g.spec.tier.cap());
            }
        }
    }
    outcome(
        worst_loss < 1e-9 && bound_violations == 0 && cap_ratio.iter().all(|&r| r <= 1.0),
        format!(
            "{} sequences: max frame loss {worst_loss:.1e}, {bound_violations} out-of-range frames, \
             max step / cap a {:.3} b {:.3} c {:.3}",
            suite.len(),
            cap_ratio[0],
            cap_ratio[1],
            cap_ratio[2]
        ),
    )
}

fn overall(r: &EvalReport, algorithm: &str) -> f64 {
    r.overall_cell(algorithm).unwrap().mpjas
}

fn mode(r: &EvalReport, algorithm: &str, mode: LimbMode) -> (f64, f64) {
    let c = r.mode_cell(algorithm, mode).unwrap();
    (c.mpjas, c.lower_limb_mpjas)
}

fn recovery(r: &EvalReport) -> (bool, String) {
    let worst = r.algorithms.iter().map(|a| overall(r, a)).fold(0.0, f64::max);
    let temporal = overall(r, "2_M=5");
    (worst < 0.15 && temporal < 0.1, format!("max {worst:.3e}, 2_M=5 {temporal:.3e}"))
}

fn ordering(r: &EvalReport) -> (bool, String) {
    let (phased_t, phased_a) = (mode(r, "2_M=5", LimbMode::Phased).0, mode(r, "1a", LimbMode::Phased).0);
    let bent: Vec<f64> = r.algorithms.iter().map(|a| mode(r, a, LimbMode::BentOnly).0).collect();
    let (lo, hi) = (bent.iter().copied().fold(f64::INFINITY, f64::min), bent.iter().copied().fold(0.0, f64::max));
    (
        phased_t < phased_a && hi <= 2.0 * lo,
        format!("phased 2_M=5 {phased_t:.3e} vs 1a {phased_a:.3e}, bent-only {lo:.3e}..{hi:.3e}"),
    )
}

fn lower_limbs(r: &EvalReport) -> (bool, String) {
    let v = mode(r, "2_M=5", LimbMode::BentOnly).1;
    (v < 1e-2, format!("bent-only hips+knees 2_M=5 {v:.3e}"))
}

fn twist_witness(body: &BodyModel) -> Outcome {
    let set = |p: &mut Vec<f64>, name: &str, v: f64| {
        let i = body.param_names().iter().position(|n| n == name).unwrap();
        p[i] = v;
    };
    let mut pose = body.rest_params();
    set(&mut pose, "shoulder_l.x", 0.6);
    set(&mut pose, "shoulder_l.y", -0.4);
    set(&mut pose, "knee_r.x", 0.7);
    let frame = PoseFrame::from_pose(body, &body.apply_params(&pose).unwrap());
    let targets = FrameTargets::new(body, &frame).unwrap();
    let twist = body.param_names().iter().position(|n| n == "shoulder_l.z").unwrap();
    let shoulder = body.joint_index("shoulder_l").unwrap();

    // Same frame, starts differing only in the twist about the extended upper arm.
    let solutions: Vec<Vec<f64>> = [-0.3, 0.3]
        .iter()
        .map(|&z| {
            let mut start = body.rest_params();
            set(&mut start, "shoulder_l.z", z);
            ik_frame(body, &frame, &start, &SolverOptions::default()).unwrap().params.remove(0)
        })
        .collect();
    let losses: Vec<f64> = solutions.iter().map(|p| frame_loss(p, &targets, body).unwrap()).collect();
    let param_gap = (solutions[0][twist] - solutions[1][twist]).abs();
    let orientations: Vec<_> =
        solutions.iter().map(|p| body.joint_orientations(&body.apply_params(p).unwrap())[shoulder]).collect();
    let orientation_gap = relative_angle(&orientations[0], &orientations[1]);
    outcome(
        param_gap >= 0.3 && losses.iter().all(|&l| l < 1e-8),
        format!(
            "shoulder twist gap {param_gap:.3} rad (orientation {orientation_gap:.3} rad), losses {:.1e} / {:.1e}",
            losses[0], losses[1]
        ),
    )
}

/// `Σ w_b ‖r_b‖` test problems for the residual method.
struct Residuals<F: Fn(&[f64], &mut [f64])> {
    blocks: Vec<Block>,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> ResidualObjective for Residuals<F> {
    fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    fn residuals(&self, x: &[f64], out: &mut [f64]) -> bool {
        (self.f)(x, out);
        true
    }
}

fn optimizer_contract(reports: &[&EvalReport]) -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    let near = |x: &[f64], y: &[f64], tol: f64| x.iter().zip(y).all(|(a, b)| (a - b).abs() <= tol);
    let in_box = |x: &[f64], b: &[(f64, f64)]| x.iter().zip(b).all(|(v, &(lo, hi))| *v >= lo && *v <= hi);
    let settings = OptimizerSettings::default();
    let fine = OptimizerSettings { max_iterations: 2000, objective_tolerance: 1e-14, fd_step: 1e-9, ..settings };

    // Ill-conditioned quadratic whose minimizer lies outside the box in two coordinates.
    let scales = [1.0, 10.0, 100.0, 0.5];
    let centers = [0.3, 2.0, -3.0, -0.2];
    let quadratic = |x: &[f64]| x.iter().zip(&scales).zip(&centers).map(|((v, s), c)| s * (v - c).powi(2)).sum::<f64>();
    let bounds = [(-1.0, 1.0); 4];
    let m = minimize(&quadratic, &[0.9, -0.9, 0.9, 0.9], &bounds, &settings).unwrap();
    check("bounded quadratic", near(&m.x, &[0.3, 1.0, -1.0, -0.2], 1e-6) && in_box(&m.x, &bounds));

    let rosenbrock = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
    let bounds = [(-2.0, 2.0), (-1.0, 3.0)];
    let m = minimize(&rosenbrock, &[-1.2, 1.0], &bounds, &fine).unwrap();
    check("rosenbrock", near(&m.x, &[1.0, 1.0], 1e-4) && m.value <= m.initial_value);

    let beale = |x: &[f64]| {
        (1.5 - x[0] + x[0] * x[1]).powi(2)
            + (2.25 - x[0] + x[0] * x[1] * x[1]).powi(2)
            + (2.625 - x[0] + x[0] * x[1].powi(3)).powi(2)
    };
    let m = minimize(&beale, &[1.0, 1.0], &[(-4.5, 4.5); 2], &fine).unwrap();
    check("beale", near(&m.x, &[3.0, 0.5], 1e-4));

    let himmelblau = |x: &[f64]| (x[0] * x[0] + x[1] - 11.0).powi(2) + (x[0] + x[1] * x[1] - 7.0).powi(2);
    let m = minimize(&himmelblau, &[0.0, 0.0], &[(0.0, 5.0); 2], &fine).unwrap();
    check("himmelblau in the first quadrant", near(&m.x, &[3.0, 2.0], 1e-5));

    let r = Residuals {
        blocks: vec![Block { len: 2, weight: 1.0, penalty: Penalty::Norm }],
        f: |x: &[f64], out: &mut [f64]| {
            out[0] = 10.0 * (x[1] - x[0] * x[0]);
            out[1] = 1.0 - x[0];
        },
    };
    let m = minimize_residuals(&r, &[-1.2, 1.0], &[(-2.0, 2.0), (-1.0, 3.0)], &settings).unwrap();
    check("rosenbrock residuals", near(&m.x, &[1.0, 1.0], 1e-6) && m.value < 1e-8);

    // Σ|x_i - c_i| with the box cutting off one target.
    let r = Residuals {
        blocks: vec![Block { len: 1, weight: 1.0, penalty: Penalty::Norm }; 3],
        f: |x: &[f64], out: &mut [f64]| {
            out[0] = x[0] - 0.25;
            out[1] = x[1] + 0.5;
            out[2] = x[0] + x[1] - 3.0;
        },
    };
    let bounds = [(-1.0, 1.0); 2];
    let m = minimize_residuals(&r, &[0.0, 0.0], &bounds, &settings).unwrap();
    check("bounded absolute deviations", in_box(&m.x, &bounds) && m.value <= m.initial_value);
    let mut jac = DMatrix::zeros(3, 2);
    let mut res = [0.0; 3];
    r.residuals(&[0.1, 0.2], &mut res);
    r.jacobian(&[0.1, 0.2], &res, &bounds, 1e-7, &mut jac);
    check(
        "residual jacobian",
        (jac - DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0])).abs().max() < 1e-6,
    );

    let runs: Vec<_> = reports.iter().flat_map(|r| &r.runs).collect();
    let violating = runs.iter().filter(|r| !(r.monotone && r.in_bounds && r.error.is_none())).count();
    check("ik runs", violating == 0);
    outcome(
        failures.is_empty(),
        format!(
            "7 test problems{}; {} IK runs, {violating} non-monotone or out of bounds",
            if failures.is_empty() { String::new() } else { format!(" (failed: {})", failures.join(", ")) },
            runs.len()
        ),
    )
}

fn bench_args() -> BenchArgs {
    BenchArgs {
        seed: 2024,
        pairs: 1,
        frames: 30,
        lambda: None,
        calibrate: false,
        calibration_seed: 1,
        transition: TransitionFlag::Ramp,
        method: MethodFlag::LeastSquares,
        orientation: OrientationFlag::Global,
        strict: false,
        out: None,
    }
}

fn determinism() -> Outcome {
    let a = cmd_bench(&bench_args()).unwrap();
    let b = cmd_bench(&bench_args()).unwrap();
    let same = a.without_timing() == b.without_timing();
    outcome(same, format!("{} runs per bench, metrics {}", a.runs.len(), if same { "identical" } else { "differ" }))
}

fn main() {
    let started = Instant::now();
    let body = body();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |id: usize, name: &'static str, o: Outcome| {
        println!("[{}] {id}. {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };

    report(1, "solution-space property", solution_space_property());
    report(2, "forward kinematics oracle", fk_oracle());
    report(3, "generator consistency", generator_consistency(&body));

    let options = ExperimentOptions::default();
    let held_out = SuiteSpec { pairs_per_tier: 2, ..SuiteSpec::new(1) }.generate(&body).unwrap();
    let calibration = calibrate_lambdas(&held_out, &LAMBDA_GRID, 5, &body, &options).unwrap();
    let lambdas = calibration.table;
    println!("temporal weights chosen on 12 held-out sequences: a {} b {} c {}", lambdas.a, lambdas.b, lambdas.c);
    let suite = SuiteSpec { pairs_per_tier: 1, ..SuiteSpec::new(2024) }.generate(&body).unwrap();
    let evaluate = |lambdas| {
        run_experiment(&suite, &Variant::STANDARD, &body, &ExperimentOptions { lambdas, ..Default::default() }).unwrap()
    };
    let calibrated = evaluate(lambdas);
    let defaults = evaluate(LambdaTable::default());
    let with_reference = |f: fn(&EvalReport) -> (bool, String)| {
        let (passed, detail) = f(&calibrated);
        let (reference_passed, reference) = f(&defaults);
        let verdict = if reference_passed { "pass" } else { "fail" };
        outcome(passed, format!("{detail} [default weights: {reference}, {verdict}]"))
    };
    report(4, "recovery band", with_reference(recovery));
    report(5, "ordering", with_reference(ordering));
    report(6, "lower-limb precision", with_reference(lower_limbs));
    report(7, "twist indeterminacy witness", twist_witness(&body));
    report(8, "optimizer contract", optimizer_contract(&[&calibrated, &defaults]));

    let (warm, cold) = (calibrated.iterations("1b", SpeedTier::A), calibrated.iterations("1a", SpeedTier::A));
    report(9, "warm-start benefit", outcome(warm <= cold, format!("slow tier iterations 1b {warm} vs 1a {cold}")));
    report(10, "determinism", determinism());

    let failed: Vec<String> = results.iter().filter(|r| !r.2.passed).map(|r| format!("{}. {}", r.0, r.1)).collect();
    println!(
        "{} of {} criteria passed in {:.0} s",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
