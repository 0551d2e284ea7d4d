//! Writes and reads pose, angle and body files the way the command line does.

use retarget_ik::io::{
    read_angle_file, read_body, read_pose_file, read_text, write_angle_file, write_body_config, write_pose_file,
    AngleFile, PoseFile, Provenance,
};
use retarget_ik::motiongen::{generate, LimbMode, MotionSpec, SpeedTier};
use retarget_ik::{default_body, LimbLengths};

fn main() -> retarget_ik::Result<()> {
    let dir = std::env::temp_dir().join("retarget-ik-example");
    let body = default_body(&LimbLengths::default())?;
    let gt = generate(&MotionSpec::new(SpeedTier::C, LimbMode::BentOnly, 3).with_frames(4), &body)?;

    let poses = dir.join("walk.poses.json");
    let angles = dir.join("walk.angles.json");
    let body_file = dir.join("body.json");
    write_pose_file(&poses, &PoseFile::from_sequence(&gt.poses))?;
    let provenance = Provenance {
        body_hash: body.config_hash(),
        algorithm: "ground-truth".into(),
        seed: Some(3),
        ..Default::default()
    };
    write_angle_file(&angles, &AngleFile::new(&body, provenance, gt.params.clone()))?;
    write_body_config(&body_file, body.config())?;

    let text = read_text(&poses)?;
    println!("{}\n...", text.lines().take(12).collect::<Vec<_>>().join("\n"));
    let back = read_angle_file(&angles)?;
    back.validate_for(&read_body(&body_file)?)?;
    assert_eq!(back.frames, gt.params);
    println!(
        "{} frames of {} keypoints, angle file valid for the body",
        read_pose_file(&poses)?.frames.len(),
        gt.poses.keypoints().len()
    );
    Ok(())
}
