//! Synthetic ground-truth motion.
//!
//! Every parameter follows a random walk reflected at its range of motion,
//! with per-frame increments bounded by the speed cap. By default the
//! increment itself drifts slowly (a smooth walk); independent uniform
//! increments are available too. In bent-only mode the knee and elbow flexion
//! walks are confined to `[BENT_MIN_FLEXION, hi]`. Phased mode reuses the
//! bent-only walk of the same seed and overrides those four channels with a
//! schedule of extended (zero flexion) and bent phases, so all other channels
//! are identical between the two modes.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::body::BodyModel;
use crate::error::{Error, Result};
use crate::losses::{PoseFrame, PoseSequence};

/// Smallest flexion of a bent knee or elbow, radians.
pub const BENT_MIN_FLEXION: f64 = 0.3;

/// Per-frame change of a smooth walk's increment, as a fraction of the cap.
pub const SMOOTH_DRIFT: f64 = 0.25;

/// Relative margin kept below the speed cap so that rounding in `x + d` never
/// produces a realized step above it.
const CAP_MARGIN: f64 = 1e-9;

/// Extended/bent phase lengths used by phased mode, starting with an extended phase.
pub const DEFAULT_SCHEDULE: [usize; 5] = [3, 9, 6, 9, 3];

/// Parameters whose extension the phase schedule controls.
pub const FLEXION_PARAMS: [&str; 4] = ["knee_l.x", "knee_r.x", "elbow_l.x", "elbow_r.x"];

/// Maximum per-frame change of every parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedTier {
    /// π/500 per frame.
    A,
    /// π/200 per frame.
    B,
    /// π/70 per frame.
    C,
}

impl SpeedTier {
    pub const ALL: [SpeedTier; 3] = [SpeedTier::A, SpeedTier::B, SpeedTier::C];

    pub fn cap(self) -> f64 {
        match self {
            SpeedTier::A => PI / 500.0,
            SpeedTier::B => PI / 200.0,
            SpeedTier::C => PI / 70.0,
        }
    }

    /// Temporal weight used for this tier unless overridden.
    pub fn default_lambda(self) -> f64 {
        match self {
            SpeedTier::A => 0.7,
            SpeedTier::B => 0.5,
            SpeedTier::C => 0.3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SpeedTier::A => "a",
            SpeedTier::B => "b",
            SpeedTier::C => "c",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "a" | "A" => Some(SpeedTier::A),
            "b" | "B" => Some(SpeedTier::B),
            "c" | "C" => Some(SpeedTier::C),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimbMode {
    BentOnly,
    Phased,
}

impl LimbMode {
    pub fn label(self) -> &'static str {
        match self {
            LimbMode::BentOnly => "bent-only",
            LimbMode::Phased => "phased",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bent-only" | "bent" => Some(LimbMode::BentOnly),
            "phased" => Some(LimbMode::Phased),
            _ => None,
        }
    }
}

/// Increment law of the per-parameter random walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WalkKind {
    /// The increment starts uniform in `±cap` and drifts by at most
    /// `SMOOTH_DRIFT · cap` per frame, clamped to `±cap`.
    #[default]
    Smooth,
    /// Independent increments uniform in `±cap`.
    Independent,
}

/// How flexion changes between an extended and a bent phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseTransition {
    /// Ramp up from and back down to zero within the bent phase at the speed
    /// cap, never exceeding the paired bent-only value.
    #[default]
    Ramp,
    /// Switch at the phase boundary; the boundary frame may exceed the speed cap
    /// on the flexion channels.
    Step,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSpec {
    pub frames: usize,
    pub tier: SpeedTier,
    pub mode: LimbMode,
    pub seed: u64,
    /// Alternating extended/bent phase lengths, extended first; phased mode only.
    pub schedule: Vec<usize>,
    pub transition: PhaseTransition,
    /// Flexion every bent phase must reach; zero only demands strictly positive flexion.
    pub min_bent_peak: f64,
    pub walk: WalkKind,
    /// Fraction of each range of motion, centered, from which the start pose is drawn.
    pub start_spread: f64,
}

impl MotionSpec {
    pub fn new(tier: SpeedTier, mode: LimbMode, seed: u64) -> Self {
        MotionSpec {
            frames: 30,
            tier,
            mode,
            seed,
            schedule: DEFAULT_SCHEDULE.to_vec(),
            transition: PhaseTransition::Ramp,
            min_bent_peak: 0.0,
            walk: WalkKind::Smooth,
            start_spread: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::InvalidMotionSpec("at least one frame is required".into()));
        }
        if !(self.start_spread >= 0.0 && self.start_spread <= 1.0) {
            return Err(Error::InvalidMotionSpec(format!("start spread {} outside [0, 1]", self.start_spread)));
        }
        if !(self.min_bent_peak >= 0.0 && self.min_bent_peak.is_finite()) {
            return Err(Error::InvalidMotionSpec(format!("invalid bent flexion floor {}", self.min_bent_peak)));
        }
        if self.mode == LimbMode::Phased {
            let total: usize = self.schedule.iter().sum();
            if total != self.frames || self.schedule.contains(&0) {
                return Err(Error::InfeasibleSchedule(format!(
                    "phase lengths {:?} must be positive and sum to {} frames",
                    self.schedule, self.frames
                )));
            }
        }
        Ok(())
    }

    /// Sets the length and rescales the phase schedule proportionally
    /// (largest remainder, every phase keeps at least one frame). Lengths
    /// shorter than the number of phases leave the schedule infeasible.
    pub fn with_frames(mut self, frames: usize) -> Self {
        let total: usize = self.schedule.iter().sum();
        let phases = self.schedule.len();
        if total != frames && total > 0 && frames >= phases {
            let shares: Vec<f64> = self.schedule.iter().map(|&l| (l * frames) as f64 / total as f64).collect();
            let mut lengths: Vec<usize> = shares.iter().map(|s| (s.floor() as usize).max(1)).collect();
            while lengths.iter().sum::<usize>() > frames {
                let longest = (0..phases).max_by_key(|&i| (lengths[i], std::cmp::Reverse(i))).unwrap();
                lengths[longest] -= 1;
            }
            let mut order: Vec<usize> = (0..phases).collect();
            order.sort_by(|&a, &b| {
                (shares[b] - shares[b].floor()).total_cmp(&(shares[a] - shares[a].floor())).then(a.cmp(&b))
            });
            let assigned: usize = lengths.iter().sum();
            for &i in order.iter().cycle().take(frames - assigned) {
                lengths[i] += 1;
            }
            self.schedule = lengths;
        }
        self.frames = frames;
        self
    }

    /// Whether each frame belongs to an extended phase.
    pub fn extended_frames(&self) -> Vec<bool> {
        match self.mode {
            LimbMode::BentOnly => vec![false; self.frames],
            LimbMode::Phased => {
                self.schedule.iter().enumerate().flat_map(|(i, &len)| std::iter::repeat_n(i % 2 == 0, len)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthSequence {
    pub spec: MotionSpec,
    /// Ground-truth parameters per frame.
    pub params: Vec<Vec<f64>>,
    /// Keypoint positions from forward kinematics of `params`.
    pub poses: PoseSequence,
}

/// Indices of the schedule-controlled flexion parameters.
pub fn flexion_indices(body: &BodyModel) -> Result<Vec<usize>> {
    FLEXION_PARAMS
        .iter()
        .map(|n| {
            body.param_names()
                .iter()
                .position(|p| p == n)
                .ok_or_else(|| Error::InvalidMotionSpec(format!("body has no parameter `{n}`")))
        })
        .collect()
}

/// Generates one ground-truth sequence.
pub fn generate(spec: &MotionSpec, body: &BodyModel) -> Result<GroundTruthSequence> {
    spec.validate()?;
    let flex = flexion_indices(body)?;
    let cap = spec.tier.cap() * (1.0 - CAP_MARGIN);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let ranges: Vec<(f64, f64)> = body
        .bounds()
        .iter()
        .enumerate()
        .map(|(i, &(lo, hi))| if flex.contains(&i) { (lo.max(BENT_MIN_FLEXION), hi) } else { (lo, hi) })
        .collect();

    let mut current: Vec<f64> = start_pose(&ranges, spec.start_spread, &mut rng);
    let mut step: Vec<f64> = (0..current.len()).map(|_| rng.gen_range(-cap..=cap)).collect();
    let drift = SMOOTH_DRIFT * cap;
    let mut params = Vec::with_capacity(spec.frames);
    params.push(current.clone());
    for _ in 1..spec.frames {
        for ((v, d), &(lo, hi)) in current.iter_mut().zip(&mut step).zip(&ranges) {
            *d = match spec.walk {
                WalkKind::Smooth => (*d + rng.gen_range(-drift..=drift)).clamp(-cap, cap),
                WalkKind::Independent => rng.gen_range(-cap..=cap),
            };
            let next = *v + *d;
            if next > hi || next < lo {
                // Bounce: continue away from the bound.
                *d = -*d;
            }
            *v = reflect(next, lo, hi);
        }
        params.push(current.clone());
    }

    if spec.mode == LimbMode::Phased {
        apply_schedule(spec, &flex, &mut params)?;
    }

    let frames =
        params.iter().map(|p| Ok(PoseFrame::from_pose(body, &body.apply_params(p)?))).collect::<Result<Vec<_>>>()?;
    Ok(GroundTruthSequence { spec: spec.clone(), params, poses: PoseSequence::new(frames, None)? })
}

fn start_pose(ranges: &[(f64, f64)], spread: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut p: Vec<f64> = ranges
        .iter()
        .map(|&(lo, hi)| {
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * spread * (hi - lo);
            if half > 0.0 {
                rng.gen_range(mid - half..=mid + half)
            } else {
                mid
            }
        })
        .collect();
    // Root: a random unit axis and a moderate angle.
    let axis = loop {
        let v = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0f64..=1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.2 && n <= 1.0 {
            break [v[0] / n, v[1] / n, v[2] / n];
        }
    };
    p[..3].copy_from_slice(&axis);
    p[3] = rng.gen_range(-0.5 * spread * PI..=0.5 * spread * PI);
    p
}

/// Folds `v` back into `[lo, hi]` by mirroring at the bounds.
fn reflect(mut v: f64, lo: f64, hi: f64) -> f64 {
    for _ in 0..4 {
        if v > hi {
            v = 2.0 * hi - v;
        } else if v < lo {
            v = 2.0 * lo - v;
        } else {
            return v;
        }
    }
    v.clamp(lo, hi)
}

fn apply_schedule(spec: &MotionSpec, flex: &[usize], params: &mut [Vec<f64>]) -> Result<()> {
    let cap = spec.tier.cap() * (1.0 - CAP_MARGIN);
    let mut start = 0;
    for (phase, &len) in spec.schedule.iter().enumerate() {
        let range = start..start + len;
        start += len;
        let extended = phase % 2 == 0;
        let after_extended = phase > 0;
        let before_extended = phase + 1 < spec.schedule.len();
        for &i in flex {
            let mut peak = 0.0f64;
            for (k, f) in range.clone().enumerate() {
                let bent = params[f][i];
                params[f][i] = if extended {
                    0.0
                } else {
                    match spec.transition {
                        PhaseTransition::Step => bent,
                        PhaseTransition::Ramp => {
                            let up = if after_extended { cap * (k + 1) as f64 } else { f64::INFINITY };
                            let down = if before_extended { cap * (len - k) as f64 } else { f64::INFINITY };
                            bent.min(up).min(down)
                        }
                    }
                };
                peak = peak.max(params[f][i]);
            }
            if !extended && (peak <= 0.0 || peak < spec.min_bent_peak) {
                return Err(Error::InfeasibleSchedule(format!(
                    "a {len}-frame bent phase at {cap:.4} rad/frame reaches only {peak:.3} rad of flexion, \
                     below the required {}",
                    spec.min_bent_peak
                )));
            }
        }
    }
    Ok(())
}

/// Seed of sequence `k` of `tier` in a suite generated from `seed`.
pub fn suite_seed(seed: u64, tier: SpeedTier, k: usize) -> u64 {
    let t = SpeedTier::ALL.iter().position(|&x| x == tier).expect("listed tier") as u64;
    let mut z = seed ^ (t * 1_000 + k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Shape of a generated suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub seed: u64,
    /// Bent-only/phased pairs per speed tier; each pair shares a seed.
    pub pairs_per_tier: usize,
    pub transition: PhaseTransition,
    pub walk: WalkKind,
}

impl SuiteSpec {
    /// Four pairs per tier: 24 sequences.
    pub fn new(seed: u64) -> Self {
        SuiteSpec { seed, pairs_per_tier: 4, transition: PhaseTransition::default(), walk: WalkKind::default() }
    }

    /// The motion specs of the suite, ordered by tier, then pair, bent-only first.
    pub fn specs(&self) -> Vec<MotionSpec> {
        let mut out = Vec::with_capacity(6 * self.pairs_per_tier);
        for tier in SpeedTier::ALL {
            for k in 0..self.pairs_per_tier {
                for mode in [LimbMode::BentOnly, LimbMode::Phased] {
                    let mut spec = MotionSpec::new(tier, mode, suite_seed(self.seed, tier, k));
                    spec.transition = self.transition;
                    spec.walk = self.walk;
                    out.push(spec);
                }
            }
        }
        out
    }

    pub fn generate(&self, body: &BodyModel) -> Result<Vec<GroundTruthSequence>> {
        self.specs().iter().map(|s| generate(s, body)).collect()
    }
}

/// `pairs_per_tier` bent-only/phased pairs per speed tier with default motion settings.
pub fn generate_suite_with(seed: u64, pairs_per_tier: usize, body: &BodyModel) -> Result<Vec<GroundTruthSequence>> {
    SuiteSpec { pairs_per_tier, ..SuiteSpec::new(seed) }.generate(body)
}

/// The 24-sequence suite: 4 bent-only and 4 phased 30-frame sequences per tier.
pub fn generate_suite(seed: u64, body: &BodyModel) -> Result<Vec<GroundTruthSequence>> {
    SuiteSpec::new(seed).generate(body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{default_body, LimbLengths};

    fn body() -> BodyModel {
        default_body(&LimbLengths::default()).unwrap()
    }

    fn max_step(params: &[Vec<f64>], skip: &[usize]) -> f64 {
        params
            .windows(2)
            .flat_map(|w| w[0].iter().zip(&w[1]).enumerate().map(|(i, (a, b))| (i, (b - a).abs())))
            .filter(|(i, _)| !skip.contains(i))
            .map(|(_, d)| d)
            .fold(0.0, f64::max)
    }

    #[test]
    fn schedule_rescales_with_length() {
        let spec = MotionSpec::new(SpeedTier::A, LimbMode::Phased, 1);
        assert_eq!(spec.clone().with_frames(30).schedule, DEFAULT_SCHEDULE);
        assert_eq!(spec.clone().with_frames(60).schedule, [6, 18, 12, 18, 6]);
        for n in 5..80 {
            let s = spec.clone().with_frames(n);
            s.validate().unwrap();
            assert!(s.schedule.iter().all(|&l| l > 0));
        }
        assert!(spec.with_frames(4).validate().is_err());
    }

    #[test]
    fn tier_caps() {
        assert_eq!(SpeedTier::A.cap(), PI / 500.0);
        assert_eq!(SpeedTier::B.cap(), PI / 200.0);
        assert_eq!(SpeedTier::C.cap(), PI / 70.0);
    }

    #[test]
    fn slow_tier_respects_cap_and_bounds() {
        let b = body();
        let g = generate(&MotionSpec::new(SpeedTier::A, LimbMode::BentOnly, 7), &b).unwrap();
        assert_eq!(g.params.len(), 30);
        assert!(max_step(&g.params, &[]) <= PI / 500.0);
        for p in &g.params {
            b.check_params(p).unwrap();
        }
    }

    #[test]
    fn modes_share_everything_but_flexion() {
        let b = body();
        let flex = flexion_indices(&b).unwrap();
        let bent = generate(&MotionSpec::new(SpeedTier::B, LimbMode::BentOnly, 11), &b).unwrap();
        let phased = generate(&MotionSpec::new(SpeedTier::B, LimbMode::Phased, 11), &b).unwrap();
        for (x, y) in bent.params.iter().zip(&phased.params) {
            for i in (0..x.len()).filter(|i| !flex.contains(i)) {
                assert_eq!(x[i], y[i]);
            }
        }
    }

    #[test]
    fn phased_schedule_ramps_within_the_cap() {
        let b = body();
        let flex = flexion_indices(&b).unwrap();
        for tier in SpeedTier::ALL {
            let spec = MotionSpec::new(tier, LimbMode::Phased, 3);
            let g = generate(&spec, &b).unwrap();
            let ext = spec.extended_frames();
            assert_eq!(ext.iter().filter(|&&e| e).count(), 12);
            for (p, &e) in g.params.iter().zip(&ext) {
                for &i in &flex {
                    if e {
                        assert_eq!(p[i], 0.0);
                    } else {
                        assert!(p[i] > 0.0);
                    }
                }
            }
            assert!(flex.iter().all(|&i| (0..3).all(|f| g.params[f][i] == 0.0)));
            assert!(max_step(&g.params, &[]) <= tier.cap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn step_transition_reaches_the_bent_floor_immediately() {
        let b = body();
        let flex = flexion_indices(&b).unwrap();
        let mut spec = MotionSpec::new(SpeedTier::C, LimbMode::Phased, 3);
        spec.transition = PhaseTransition::Step;
        let g = generate(&spec, &b).unwrap();
        for (p, e) in g.params.iter().zip(spec.extended_frames()) {
            assert!(flex.iter().all(|&i| if e { p[i] == 0.0 } else { p[i] >= BENT_MIN_FLEXION }));
        }
        assert!(max_step(&g.params, &flex) <= PI / 70.0 * (1.0 + 1e-12));
    }

    #[test]
    fn bent_floor_unreachable_under_the_cap_is_reported() {
        // A 9-frame bent phase between extended phases peaks at 5 · cap < 0.3 rad.
        let b = body();
        let mut spec = MotionSpec::new(SpeedTier::C, LimbMode::Phased, 3);
        spec.min_bent_peak = BENT_MIN_FLEXION;
        assert!(matches!(generate(&spec, &b), Err(Error::InfeasibleSchedule(_))));
    }

    #[test]
    fn long_bent_phases_reach_the_floor_within_the_cap() {
        let b = body();
        let mut spec = MotionSpec::new(SpeedTier::C, LimbMode::Phased, 3);
        spec.min_bent_peak = BENT_MIN_FLEXION;
        spec.schedule = vec![3, 20, 6, 20, 3];
        spec.frames = 52;
        let g = generate(&spec, &b).unwrap();
        assert!(max_step(&g.params, &[]) <= PI / 70.0 * (1.0 + 1e-12));
    }

    #[test]
    fn independent_increments_keep_the_cap() {
        let b = body();
        let mut spec = MotionSpec::new(SpeedTier::B, LimbMode::BentOnly, 9);
        spec.walk = WalkKind::Independent;
        let g = generate(&spec, &b).unwrap();
        assert!(max_step(&g.params, &[]) <= PI / 200.0 * (1.0 + 1e-12));
    }

    #[test]
    fn schedule_must_cover_the_frames() {
        let b = body();
        let mut spec = MotionSpec::new(SpeedTier::C, LimbMode::Phased, 3);
        spec.frames = 31;
        assert!(matches!(generate(&spec, &b), Err(Error::InfeasibleSchedule(_))));
    }

    #[test]
    fn suite_shape() {
        let b = body();
        let s = generate_suite(5, &b).unwrap();
        assert_eq!(s.len(), 24);
        for tier in SpeedTier::ALL {
            assert_eq!(s.iter().filter(|g| g.spec.tier == tier).count(), 8);
            assert_eq!(s.iter().filter(|g| g.spec.tier == tier && g.spec.mode == LimbMode::Phased).count(), 4);
        }
        assert_eq!(generate_suite(5, &b).unwrap(), s);
    }

    #[test]
    fn reflection_stays_inside() {
        assert_eq!(reflect(1.25, 0.0, 1.0), 0.75);
        assert_eq!(reflect(-0.25, 0.0, 1.0), 0.25);
        assert_eq!(reflect(0.5, 0.0, 1.0), 0.5);
    }
}
