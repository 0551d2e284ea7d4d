mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use retarget_ik::io::{format_angle_file, format_pose_file, parse_angle_file, parse_pose_file, AngleFile, PoseFile};
use retarget_ik::kinematics::{fk, fk_reoriented};
use retarget_ik::losses::{frame_loss, FrameTargets};
use retarget_ik::rotmath::{
    angle_between, matrix_to_axis_angle, matrix_to_euler_xyz, relative_angle, solution_space, wrap_angle,
};
use retarget_ik::{default_body, AxisAngle, BodyModel, EulerXYZ, LimbLengths, PoseFrame, Vec3};

fn vec3() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("away from zero", |(x, y, z)| (x * x + y * y + z * z).sqrt() > 1e-3)
        .prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn body() -> BodyModel {
    default_body(&LimbLengths::default()).unwrap()
}

fn random_params(body: &BodyModel, unit: &[f64]) -> Vec<f64> {
    let mut p: Vec<f64> = body.bounds().iter().zip(unit).map(|(&(lo, hi), u)| lo + (hi - lo) * u).collect();
    body.project(&mut p);
    p
}

proptest! {
    #[test]
    fn every_family_member_maps_a_onto_b(a in vec3(), b in vec3(), alpha in -10.0..10.0f64) {
        let s = solution_space(&a, &b, alpha).unwrap();
        let r = s.to_matrix();
        let image = r.rotate(&a.normalize());
        prop_assert!((image - b.normalize()).abs().max() < 1e-9);
        prop_assert!(r.orthonormality_error() < 1e-9);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
        prop_assert!((s.axis.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn family_axis_is_equidistant_from_both_directions(a in vec3(), b in vec3(), alpha in -3.2..3.2f64) {
        let s = solution_space(&a, &b, alpha).unwrap();
        prop_assert!((s.axis.dot(&a.normalize()) - s.axis.dot(&b.normalize())).abs() < 1e-9);
    }

    #[test]
    fn axis_angle_round_trip(axis in vec3(), angle in 1e-6..3.1f64) {
        let r = AxisAngle::new(axis.normalize(), angle).to_matrix().unwrap();
        let back = matrix_to_axis_angle(&r);
        let again = back.to_matrix().unwrap();
        prop_assert!(r.max_abs_diff(&again) < 1e-8);
        prop_assert!((back.angle - angle).abs() < 1e-7);
    }

    #[test]
    fn euler_round_trip_away_from_gimbal_lock(x in -3.1..3.1f64, y in -1.5..1.5f64, z in -3.1..3.1f64) {
        let r = EulerXYZ::new(x, y, z).to_matrix();
        let e = matrix_to_euler_xyz(&r).unwrap();
        prop_assert!(r.max_abs_diff(&e.to_matrix()) < 1e-8);
        prop_assert!(wrap_angle(e.x - x).abs() < 1e-7);
        prop_assert!((e.y - y).abs() < 1e-7);
        prop_assert!(wrap_angle(e.z - z).abs() < 1e-7);
    }

    #[test]
    fn relative_angle_is_a_metric(s in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let (a, b, c) = (common::rotation(&mut rng), common::rotation(&mut rng), common::rotation(&mut rng));
        prop_assert!(relative_angle(&a, &a) < 1e-7);
        prop_assert!((relative_angle(&a, &b) - relative_angle(&b, &a)).abs() < 1e-9);
        prop_assert!(relative_angle(&a, &c) <= relative_angle(&a, &b) + relative_angle(&b, &c) + 1e-9);
    }

    #[test]
    fn incremental_fk_equals_path_product(s in any::<u64>(), n in 2usize..=20) {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let (h, chain) = common::random_chain(&mut rng, n);
        let deltas: Vec<_> = (0..n).map(|_| common::rotation(&mut rng)).collect();
        let gp = fk_reoriented(&chain, &h, &deltas).unwrap();
        for j in 0..n {
            let full = common::path_product(&h, &chain, Some(&deltas), j);
            prop_assert!((gp.position(j) - full.translation).abs().max() < 1e-12);
            prop_assert!(gp.orientation(j).max_abs_diff(&full.rotation) < 1e-12);
        }
    }

    #[test]
    fn reorientation_preserves_link_lengths(s in any::<u64>(), n in 2usize..=20) {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let (h, chain) = common::random_chain(&mut rng, n);
        let rest = fk(&chain, &h).unwrap();
        let deltas: Vec<_> = (0..n).map(|_| common::rotation(&mut rng)).collect();
        let moved = fk_reoriented(&chain, &h, &deltas).unwrap();
        for j in 1..n {
            let p = h.parent(j).unwrap();
            let before = (rest.position(j) - rest.position(p)).norm();
            let after = (moved.position(j) - moved.position(p)).norm();
            prop_assert!((before - chain.link_length(j)).abs() < 1e-9);
            prop_assert!((after - before).abs() < 1e-9);
        }
    }

    #[test]
    fn delta_moves_descendants_only(s in any::<u64>(), n in 2usize..=20) {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let (h, chain) = common::random_chain(&mut rng, n);
        let k = (s % n as u64) as usize;
        let mut deltas = vec![retarget_ik::RotationMatrix::IDENTITY; n];
        deltas[k] = common::rotation(&mut rng);
        let rest = fk(&chain, &h).unwrap();
        let moved = fk_reoriented(&chain, &h, &deltas).unwrap();
        for j in 0..n {
            if j == k || !h.is_ancestor(k, j) {
                prop_assert!((rest.position(j) - moved.position(j)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn body_pose_matches_its_own_targets(unit in prop::collection::vec(0.0..1.0f64, 29)) {
        let b = body();
        let p = random_params(&b, &unit);
        b.check_params(&p).unwrap();
        let frame = PoseFrame::from_pose(&b, &b.apply_params(&p).unwrap());
        let targets = FrameTargets::new(&b, &frame).unwrap();
        prop_assert!(frame_loss(&p, &targets, &b).unwrap() < 1e-9);
    }

    #[test]
    fn body_reorientation_keeps_limb_lengths(unit in prop::collection::vec(0.0..1.0f64, 29)) {
        let b = body();
        let p = random_params(&b, &unit);
        let gp = b.apply_params(&p).unwrap();
        let rest = b.rest_pose();
        for j in 1..b.hierarchy().len() {
            let parent = b.hierarchy().parent(j).unwrap();
            let now = (gp.position(j) - gp.position(parent)).norm();
            let then = (rest.position(j) - rest.position(parent)).norm();
            prop_assert!((now - then).abs() < 1e-9);
        }
    }

    #[test]
    fn frame_loss_is_non_negative_and_bounded(unit in prop::collection::vec(0.0..1.0f64, 29), other in prop::collection::vec(0.0..1.0f64, 29)) {
        let b = body();
        let frame = PoseFrame::from_pose(&b, &b.apply_params(&random_params(&b, &other)).unwrap());
        let targets = FrameTargets::new(&b, &frame).unwrap();
        let loss = frame_loss(&random_params(&b, &unit), &targets, &b).unwrap();
        // Each link angle is at most π.
        prop_assert!((0.0..=2.0 * std::f64::consts::PI + 1e-12).contains(&loss));
    }

    #[test]
    fn pose_files_round_trip_byte_for_byte(s in any::<u64>(), frames in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let keypoints: Vec<String> = (0..5).map(|i| format!("k{i}")).collect();
        let rows = (0..frames).map(|_| (0..5).map(|_| common::unit_vector(&mut rng) * 1.7).collect()).collect();
        let file = PoseFile { fps: Some(30.0), keypoints, frames: rows };
        let text = format_pose_file(&file).unwrap();
        let parsed = parse_pose_file(&text).unwrap();
        prop_assert_eq!(&parsed, &file);
        prop_assert_eq!(format_pose_file(&parsed).unwrap(), text);
    }

    #[test]
    fn every_finite_coordinate_survives_a_round_trip(v in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 3)) {
        let file = PoseFile { fps: None, keypoints: vec!["k".into()], frames: vec![vec![Vec3::new(v[0], v[1], v[2])]] };
        let parsed = parse_pose_file(&format_pose_file(&file).unwrap()).unwrap();
        prop_assert_eq!(parsed.frames[0][0].iter().map(|x| x.to_bits()).collect::<Vec<_>>(), v.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn angle_files_round_trip_byte_for_byte(unit in prop::collection::vec(0.0..1.0f64, 29)) {
        let b = body();
        let file = AngleFile::new(&b, Default::default(), vec![random_params(&b, &unit), b.rest_params()]);
        let text = format_angle_file(&file).unwrap();
        let parsed = parse_angle_file(&text).unwrap();
        parsed.validate_for(&b).unwrap();
        prop_assert_eq!(&parsed, &file);
        prop_assert_eq!(format_angle_file(&parsed).unwrap(), text);
    }
}

#[test]
fn angle_between_handles_near_parallel_vectors() {
    let a = Vec3::new(1.0, 0.0, 0.0);
    let b = Vec3::new(1.0, 1e-9, 0.0);
    assert!((angle_between(&a, &b) - 1e-9).abs() < 1e-15);
    assert!((angle_between(&a, &-a) - std::f64::consts::PI).abs() < 1e-15);
}
