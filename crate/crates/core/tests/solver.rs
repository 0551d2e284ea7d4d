use nalgebra::DMatrix;

use retarget_ik::losses::{FrameTargets, JointNorm};
use retarget_ik::motiongen::{generate, LimbMode, MotionSpec, SpeedTier};
use retarget_ik::optimize::{residual_value, Objective, ResidualObjective};
use retarget_ik::solver::{solve, Algorithm, FrameObjective, PatchObjective, SolverOptions};
use retarget_ik::{default_body, BodyModel, LimbLengths};

fn body() -> BodyModel {
    default_body(&LimbLengths::default()).unwrap()
}

/// Central differences of the residuals, column by column.
fn central_jacobian<O: ResidualObjective>(o: &O, x: &[f64], h: f64) -> DMatrix<f64> {
    let rows = o.residual_len();
    let mut jac = DMatrix::zeros(rows, x.len());
    let (mut up, mut down) = (vec![0.0; rows], vec![0.0; rows]);
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        assert!(o.residuals(&probe, &mut up));
        probe[j] = x[j] - h;
        assert!(o.residuals(&probe, &mut down));
        probe[j] = x[j];
        for i in 0..rows {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    jac
}

fn interior(body: &BodyModel, seed: u64) -> Vec<f64> {
    let g = generate(&MotionSpec::new(SpeedTier::C, LimbMode::BentOnly, seed), body).unwrap();
    g.params[7].clone()
}

#[test]
fn frame_jacobian_matches_central_differences() {
    let b = body();
    let g = generate(&MotionSpec::new(SpeedTier::B, LimbMode::BentOnly, 3), &b).unwrap();
    let targets = FrameTargets::for_sequence(&b, &g.poses).unwrap();
    let objective = FrameObjective::new(&b, &targets[4]);
    let x = interior(&b, 9);
    let mut r = vec![0.0; objective.residual_len()];
    assert!(objective.residuals(&x, &mut r));
    assert!((residual_value(objective.blocks(), &r) - objective.value(&x)).abs() < 1e-12);

    let bounds = b.bounds();
    let mut jac = DMatrix::zeros(r.len(), x.len());
    objective.jacobian(&x, &r, bounds, 1e-7, &mut jac);
    let reference = central_jacobian(&objective, &x, 1e-5);
    let scale = reference.abs().max();
    assert!((jac - &reference).abs().max() < 1e-5 * scale.max(1.0));
}

#[test]
fn patch_jacobian_matches_central_differences() {
    let b = body();
    let g = generate(&MotionSpec::new(SpeedTier::B, LimbMode::Phased, 4), &b).unwrap();
    let targets = FrameTargets::for_sequence(&b, &g.poses).unwrap();
    let stitch = g.params[2].clone();
    for norm in [JointNorm::L1, JointNorm::L2] {
        let objective = PatchObjective::new(&b, &targets[3..6], 0.05, Some(&stitch), norm);
        let x: Vec<f64> = (0..3).flat_map(|k| interior(&b, 20 + k)).collect();
        let mut r = vec![0.0; objective.residual_len()];
        assert!(objective.residuals(&x, &mut r));
        assert!((residual_value(objective.blocks(), &r) - objective.value(&x)).abs() < 1e-12);

        let bounds: Vec<(f64, f64)> = (0..3).flat_map(|_| b.bounds().iter().copied()).collect();
        let mut jac = DMatrix::zeros(r.len(), x.len());
        objective.jacobian(&x, &r, &bounds, 1e-7, &mut jac);
        let reference = central_jacobian(&objective, &x, 1e-5);
        assert!((jac - &reference).abs().max() < 1e-5 * reference.abs().max().max(1.0));
    }
}

#[test]
fn parallel_and_serial_runs_agree_bit_for_bit() {
    let b = body();
    let g = generate(&MotionSpec::new(SpeedTier::A, LimbMode::Phased, 12).with_frames(12), &b).unwrap();
    for algorithm in [Algorithm::FrameByFrame, Algorithm::WarmStarted, Algorithm::Temporal { patch: 5, lambda: 0.01 }] {
        let serial = solve(&b, &g.poses, algorithm, &SolverOptions { parallel: false, ..Default::default() }).unwrap();
        let parallel = solve(&b, &g.poses, algorithm, &SolverOptions::default()).unwrap();
        assert_eq!(serial.params, parallel.params, "{}", algorithm.label());
        assert_eq!(serial.stages.len(), parallel.stages.len());
        for (s, p) in serial.stages.iter().zip(&parallel.stages) {
            assert_eq!((s.final_loss, s.iterations), (p.final_loss, p.iterations));
        }
    }
}

#[test]
fn every_stage_is_monotone_and_in_bounds() {
    let b = body();
    let g = generate(&MotionSpec::new(SpeedTier::C, LimbMode::Phased, 8), &b).unwrap();
    let r = solve(&b, &g.poses, Algorithm::Temporal { patch: 3, lambda: 0.3 }, &SolverOptions::default()).unwrap();
    for s in r.stages.iter().chain(&r.pre_stages) {
        assert!(s.final_loss <= s.initial_loss, "{:?}", s.frames);
    }
    for p in &r.params {
        b.check_params(p).unwrap();
    }
}
