//! Field-of-view gating, out-of-view segmentation, and the tracking
//! handoff state machine.
//!
//! The headset tracks the hand only inside its camera frustum. We model
//! the frustum as an azimuth/elevation box in the head frame (+x forward,
//! +y left, +z up): the wrist is trackable when its direction from the
//! head satisfies |azimuth| <= h/2 and |elevation| <= v/2. Re-entry uses a
//! small hysteresis margin so a wrist hovering at the boundary does not
//! chatter between states.
//!
//! The headset's own tracking range is wider than 120 degrees but not
//! published; the default of 140 degrees is a configurable stand-in.

use crate::ekf::ImuSample;
use crate::frames::{input_row, InputFrame, PRIOR_LEN};
use crate::geom::{cubic_resample, GeomError, Pose, RotMat, Vec3};
use crate::synth::recording::Recording;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FovConfig {
    /// Horizontal field of view, degrees, in (0, 360).
    pub horizontal_fov_deg: f64,
    /// Vertical field of view, degrees; 180 leaves elevation unconstrained.
    pub vertical_fov_deg: f64,
    /// Extra margin required to re-enter the tracked state, degrees.
    pub reentry_hysteresis_deg: f64,
}

impl Default for FovConfig {
    fn default() -> Self {
        Self {
            horizontal_fov_deg: 140.0,
            vertical_fov_deg: 180.0,
            reentry_hysteresis_deg: 2.0,
        }
    }
}

impl FovConfig {
    pub fn with_horizontal(deg: f64) -> Self {
        Self { horizontal_fov_deg: deg, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FovError {
    /// Wrist coincides with the head; direction undefined.
    Degenerate,
    /// The hand left the view before five tracked poses were observed.
    PriorUnavailable,
    Geom(GeomError),
}

impl fmt::Display for FovError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FovError::Degenerate => write!(f, "wrist coincides with head position"),
            FovError::PriorUnavailable => {
                write!(f, "hand left the view before 5 tracked poses were available")
            }
            FovError::Geom(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for FovError {}

impl From<GeomError> for FovError {
    fn from(e: GeomError) -> Self {
        FovError::Geom(e)
    }
}

/// Pure geometric test: is the wrist inside the tracking frustum?
pub fn in_tracking_fov(head: &Pose, wrist_pos: Vec3, cfg: &FovConfig) -> Result<bool, FovError> {
    inside_with_margin(head, wrist_pos, cfg, 0.0)
}

fn inside_with_margin(
    head: &Pose,
    wrist_pos: Vec3,
    cfg: &FovConfig,
    margin_deg: f64,
) -> Result<bool, FovError> {
    let rel = wrist_pos - head.position;
    if rel.norm() <= 1e-6 {
        return Err(FovError::Degenerate);
    }
    let d = head.orientation.conjugate().rotate(rel);
    let azimuth = d.y.atan2(d.x).to_degrees();
    let elevation = d.z.atan2((d.x * d.x + d.y * d.y).sqrt()).to_degrees();
    let half_h = cfg.horizontal_fov_deg / 2.0 - margin_deg;
    let half_v = cfg.vertical_fov_deg / 2.0 - margin_deg;
    Ok(azimuth.abs() <= half_h && elevation.abs() <= half_v)
}

/// Stateful in/out decision with re-entry hysteresis.
#[derive(Debug, Clone)]
pub struct FovGate {
    in_view: Option<bool>,
}

impl FovGate {
    pub fn new() -> Self {
        Self { in_view: None }
    }

    /// Returns true while the wrist counts as tracked.
    pub fn step(&mut self, head: &Pose, wrist_pos: Vec3, cfg: &FovConfig) -> Result<bool, FovError> {
        let next = match self.in_view {
            None => in_tracking_fov(head, wrist_pos, cfg)?,
            Some(true) => in_tracking_fov(head, wrist_pos, cfg)?,
            Some(false) => inside_with_margin(head, wrist_pos, cfg, cfg.reentry_hysteresis_deg)?,
        };
        self.in_view = Some(next);
        Ok(next)
    }
}

impl Default for FovGate {
    fn default() -> Self {
        Self::new()
    }
}

/// Head poses resampled onto the IMU timestamp grid.
pub fn head_at_imu_times(rec: &Recording) -> Result<Vec<Pose>, GeomError> {
    cubic_resample(&rec.head_times(), &rec.head_poses, &rec.imu_times())
}

/// Per-IMU-sample out-of-view mask (true = out of view), hysteresis applied.
pub fn oov_mask(rec: &Recording, cfg: &FovConfig) -> Result<Vec<bool>, FovError> {
    let heads = head_at_imu_times(rec)?;
    let mut gate = FovGate::new();
    let mut mask = Vec::with_capacity(rec.imu.len());
    for (head, wrist) in heads.iter().zip(rec.wrist_gt.iter()) {
        mask.push(!gate.step(head, wrist.position, cfg)?);
    }
    Ok(mask)
}

/// Out-of-view intervals of a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    /// Half-open IMU index ranges `[exit, reentry)`, disjoint and sorted.
    /// A segment still open at the end of the recording closes at `len`.
    pub segments: Vec<(usize, usize)>,
    /// Segments discarded because fewer than five tracked head-rate poses
    /// preceded them.
    pub dropped: usize,
}

/// Splits a recording into maximal out-of-view runs.
///
/// A run is kept only if at least [`PRIOR_LEN`] tracked (in-view) head-rate
/// knots precede it; earlier runs are dropped and counted.
pub fn segment_out_of_view(rec: &Recording, cfg: &FovConfig) -> Result<Segmentation, FovError> {
    let mask = oov_mask(rec, cfg)?;
    segment_mask(rec, &mask)
}

/// Groups an out-of-view mask into kept/dropped segments.
pub fn segment_mask(rec: &Recording, mask: &[bool]) -> Result<Segmentation, FovError> {
    // in-view status of each head-rate knot, from the IMU-rate mask
    let knot_tracked = head_knots_tracked(rec, mask);
    let imu_rate = rec.meta.imu_rate;
    let head_rate = rec.meta.head_rate;

    let mut segments = Vec::new();
    let mut dropped = 0usize;
    let mut i = 0usize;
    while i < mask.len() {
        if !mask[i] {
            i += 1;
            continue;
        }
        let exit = i;
        while i < mask.len() && mask[i] {
            i += 1;
        }
        let reentry = i;
        // count tracked head knots strictly before the exit time
        let exit_t = exit as f64 / imu_rate;
        let knots_before = knot_tracked
            .iter()
            .enumerate()
            .filter(|(j, tracked)| (*j as f64 / head_rate) < exit_t && **tracked)
            .count();
        if knots_before >= PRIOR_LEN {
            segments.push((exit, reentry));
        } else {
            dropped += 1;
        }
    }
    Ok(Segmentation { segments, dropped })
}

/// For each head-rate knot, whether the wrist counted as tracked there.
pub fn head_knots_tracked(rec: &Recording, mask: &[bool]) -> Vec<bool> {
    let imu_rate = rec.meta.imu_rate;
    let head_rate = rec.meta.head_rate;
    (0..rec.head_poses.len())
        .map(|j| {
            let t = j as f64 / head_rate;
            let i = ((t * imu_rate).floor() as usize).min(mask.len().saturating_sub(1));
            !mask[i]
        })
        .collect()
}

/// Who is producing the pose this step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseSource {
    Headset,
    Model,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrackerState {
    InView,
    OutOfView { exit_time: f64 },
}

/// Tracking handoff state machine.
///
/// While the headset tracks the wrist, the machine records a rolling window
/// of the last five tracked (wrist, head) pose pairs. When tracking drops
/// it freezes that window as the prior and starts buffering input rows;
/// when tracking resumes the buffer is cleared so drift cannot leak into
/// the next excursion.
#[derive(Debug, Clone)]
pub struct Tracker {
    history: VecDeque<(Pose, Pose)>,
    state: TrackerState,
    prior: Option<[(Pose, Pose); PRIOR_LEN]>,
    buffer: Vec<InputFrame>,
    /// Buffer cap in samples; multiples of 8 slide off the front beyond it.
    max_buffer: usize,
}

/// 15 s at the nominal IMU rate, rounded down to a multiple of 8.
pub const DEFAULT_MAX_BUFFER: usize = 6400;

impl Tracker {
    pub fn new() -> Self {
        Self::with_max_buffer(DEFAULT_MAX_BUFFER)
    }

    pub fn with_max_buffer(max_buffer: usize) -> Self {
        assert!(max_buffer >= 8 && max_buffer.is_multiple_of(8));
        Self {
            history: VecDeque::with_capacity(PRIOR_LEN + 1),
            state: TrackerState::InView,
            prior: None,
            buffer: Vec::new(),
            max_buffer,
        }
    }

    pub fn state(&self) -> &TrackerState {
        &self.state
    }

    /// Prior captured at the last exit; present only while out of view.
    pub fn prior(&self) -> Option<&[(Pose, Pose); PRIOR_LEN]> {
        self.prior.as_ref()
    }

    /// Input rows accumulated since the exit.
    pub fn buffer(&self) -> &[InputFrame] {
        &self.buffer
    }

    /// Absorbs one IMU step.
    ///
    /// `headset_wrist` carries the tracked wrist pose when the headset
    /// currently sees the hand, `None` otherwise. Returns which source owns
    /// the pose for this step.
    pub fn step(
        &mut self,
        headset_wrist: Option<&Pose>,
        head: &Pose,
        imu: &ImuSample,
        ekf_rot: &RotMat,
    ) -> Result<PoseSource, FovError> {
        match (&self.state, headset_wrist) {
            (TrackerState::InView, Some(wrist)) => {
                self.push_history(*wrist, *head);
                Ok(PoseSource::Headset)
            }
            (TrackerState::InView, None) => {
                if self.history.len() < PRIOR_LEN {
                    return Err(FovError::PriorUnavailable);
                }
                let mut prior = [(Pose::IDENTITY, Pose::IDENTITY); PRIOR_LEN];
                for (slot, pair) in prior.iter_mut().zip(self.history.iter()) {
                    *slot = *pair;
                }
                self.prior = Some(prior);
                self.state = TrackerState::OutOfView { exit_time: imu.t };
                self.buffer.clear();
                self.buffer.push(input_row(imu, head, ekf_rot));
                Ok(PoseSource::Model)
            }
            (TrackerState::OutOfView { .. }, None) => {
                self.buffer.push(input_row(imu, head, ekf_rot));
                if self.buffer.len() > self.max_buffer {
                    self.buffer.drain(0..8);
                }
                Ok(PoseSource::Model)
            }
            (TrackerState::OutOfView { .. }, Some(wrist)) => {
                self.state = TrackerState::InView;
                self.prior = None;
                self.buffer.clear();
                self.push_history(*wrist, *head);
                Ok(PoseSource::Headset)
            }
        }
    }

    fn push_history(&mut self, wrist: Pose, head: Pose) {
        // the same headset pose may be presented for several IMU steps
        // between headset updates; keep distinct observations only
        if self.history.back().map(|(w, _)| *w == wrist).unwrap_or(false) {
            return;
        }
        self.history.push_back((wrist, head));
        while self.history.len() > PRIOR_LEN {
            self.history.pop_front();
        }
    }
}

impl Default for Tracker {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Quat;
    use crate::rng::Rng;
    use crate::synth::recording::{ArmModel, RecordingMeta, HEAD_RATE, IMU_RATE, SCHEMA_VERSION};

    fn head_at_origin() -> Pose {
        Pose::new(Vec3::new(0.0, 0.0, 1.7), Quat::IDENTITY)
    }

    fn wrist_at_azimuth(head: &Pose, az_deg: f64) -> Vec3 {
        let az = az_deg.to_radians();
        head.position + Vec3::new(az.cos(), az.sin(), 0.0).scale(0.6)
    }

    #[test]
    fn forward_is_always_inside() {
        let head = head_at_origin();
        let cfg = FovConfig::with_horizontal(1.0);
        assert!(in_tracking_fov(&head, wrist_at_azimuth(&head, 0.0), &cfg).unwrap());
    }

    #[test]
    fn behind_is_outside_at_120() {
        let head = head_at_origin();
        let cfg = FovConfig::with_horizontal(120.0);
        assert!(!in_tracking_fov(&head, wrist_at_azimuth(&head, 180.0), &cfg).unwrap());
    }

    #[test]
    fn half_angle_boundary_at_90() {
        let head = head_at_origin();
        let cfg = FovConfig::with_horizontal(90.0);
        assert!(in_tracking_fov(&head, wrist_at_azimuth(&head, 44.0), &cfg).unwrap());
        assert!(!in_tracking_fov(&head, wrist_at_azimuth(&head, 46.0), &cfg).unwrap());
        assert!(in_tracking_fov(&head, wrist_at_azimuth(&head, -44.0), &cfg).unwrap());
        assert!(!in_tracking_fov(&head, wrist_at_azimuth(&head, -46.0), &cfg).unwrap());
    }

    #[test]
    fn coincident_wrist_is_degenerate() {
        let head = head_at_origin();
        let cfg = FovConfig::default();
        assert!(matches!(
            in_tracking_fov(&head, head.position, &cfg),
            Err(FovError::Degenerate)
        ));
    }

    #[test]
    fn vertical_fov_constrains_elevation() {
        let head = head_at_origin();
        let cfg = FovConfig {
            horizontal_fov_deg: 180.0,
            vertical_fov_deg: 60.0,
            reentry_hysteresis_deg: 0.0,
        };
        let above = head.position + Vec3::new(0.3, 0.0, 0.4);
        let slightly_up = head.position + Vec3::new(0.5, 0.0, 0.2);
        assert!(!in_tracking_fov(&head, above, &cfg).unwrap());
        assert!(in_tracking_fov(&head, slightly_up, &cfg).unwrap());
    }

    #[test]
    fn fov_test_is_monotone_in_angle() {
        let mut rng = Rng::new(8);
        for _ in 0..2000 {
            let head = Pose::new(
                Vec3::new(rng.normal(), rng.normal(), 1.7),
                Quat::sample_uniform(&mut rng),
            );
            let wrist = head.position
                + Vec3::new(rng.normal(), rng.normal(), rng.normal()).normalized().scale(0.5);
            let f1 = rng.range(10.0, 340.0);
            let f2 = rng.range(f1, 350.0);
            let narrow = FovConfig { horizontal_fov_deg: f1, ..FovConfig::with_horizontal(f1) };
            let wide = FovConfig { horizontal_fov_deg: f2, ..FovConfig::with_horizontal(f2) };
            if in_tracking_fov(&head, wrist, &narrow).unwrap() {
                assert!(in_tracking_fov(&head, wrist, &wide).unwrap());
            }
        }
    }

    /// Builds a recording with a static head and a scripted wrist azimuth.
    fn scripted_recording(azimuth_deg: impl Fn(f64) -> f64, duration: f64) -> Recording {
        let n = (duration * IMU_RATE).floor() as usize;
        let mut m = (duration * HEAD_RATE).floor() as usize + 1;
        while (m - 1) as f64 / HEAD_RATE < (n - 1) as f64 / IMU_RATE {
            m += 1;
        }
        let head = head_at_origin();
        let imu: Vec<ImuSample> = (0..n)
            .map(|k| ImuSample {
                t: k as f64 / IMU_RATE,
                accel: Vec3::new(0.0, 0.0, 9.81),
                gyro: Vec3::ZERO,
            })
            .collect();
        let wrist_gt: Vec<Pose> = (0..n)
            .map(|k| {
                let t = k as f64 / IMU_RATE;
                Pose::new(wrist_at_azimuth(&head, azimuth_deg(t)), Quat::IDENTITY)
            })
            .collect();
        Recording {
            meta: RecordingMeta {
                schema_version: SCHEMA_VERSION,
                seed: 0,
                imu_rate: IMU_RATE,
                head_rate: HEAD_RATE,
                duration_s: duration,
                task: "test".into(),
                arm: ArmModel::default(),
            },
            imu,
            head_poses: vec![head; m],
            wrist_gt,
            pinch_times: vec![],
        }
    }

    /// Independent per-sample oracle for the gated mask.
    fn oracle_mask(rec: &Recording, cfg: &FovConfig) -> Vec<bool> {
        let heads = head_at_imu_times(rec).unwrap();
        let mut in_view: Option<bool> = None;
        let mut mask = Vec::new();
        for (head, wrist) in heads.iter().zip(rec.wrist_gt.iter()) {
            let margin = match in_view {
                Some(false) => cfg.reentry_hysteresis_deg,
                _ => 0.0,
            };
            let inside = inside_with_margin(head, wrist.position, cfg, margin).unwrap();
            in_view = Some(inside);
            mask.push(!inside);
        }
        mask
    }

    #[test]
    fn all_inside_has_no_segments() {
        let rec = scripted_recording(|_| 10.0, 2.0);
        let seg = segment_out_of_view(&rec, &FovConfig::with_horizontal(120.0)).unwrap();
        assert!(seg.segments.is_empty());
        assert_eq!(seg.dropped, 0);
    }

    #[test]
    fn single_excursion_matches_oracle() {
        // swings out past the half angle once, between t=2 and t=4
        let rec = scripted_recording(
            |t| {
                if (2.0..4.0).contains(&t) {
                    -100.0
                } else {
                    -10.0
                }
            },
            6.0,
        );
        let cfg = FovConfig::with_horizontal(120.0);
        let seg = segment_out_of_view(&rec, &cfg).unwrap();
        assert_eq!(seg.segments.len(), 1);
        assert_eq!(seg.dropped, 0);
        let (exit, reentry) = seg.segments[0];
        let mask = oracle_mask(&rec, &cfg);
        for (i, &out) in mask.iter().enumerate() {
            assert_eq!(out, (exit..reentry).contains(&i), "sample {i}");
        }
        // excursion spans about two seconds of samples
        let len = reentry - exit;
        assert!((len as f64 - 2.0 * IMU_RATE).abs() < 8.0, "len {len}");
    }

    #[test]
    fn narrow_fov_mask_contains_wide_fov_mask() {
        let mut rng = Rng::new(99);
        for _ in 0..5 {
            let phase = rng.range(0.0, std::f64::consts::TAU);
            let swing = rng.range(60.0, 110.0);
            let rec = scripted_recording(
                move |t| -20.0 - swing * (0.5 + 0.5 * (1.3 * t + phase).sin()),
                5.0,
            );
            let wide = oov_mask(&rec, &FovConfig::with_horizontal(120.0)).unwrap();
            let narrow = oov_mask(&rec, &FovConfig::with_horizontal(40.0)).unwrap();
            for (w, n) in wide.iter().zip(narrow.iter()) {
                if *w {
                    assert!(*n, "out at 120 deg must be out at 40 deg");
                }
            }
        }
    }

    #[test]
    fn segments_are_disjoint_sorted_and_cover_mask() {
        let rec = scripted_recording(|t| -30.0 - 60.0 * (1.7 * t).sin().max(0.0), 8.0);
        let cfg = FovConfig::with_horizontal(100.0);
        let mask = oov_mask(&rec, &cfg).unwrap();
        let seg = segment_out_of_view(&rec, &cfg).unwrap();
        let mut covered = vec![false; mask.len()];
        let mut prev_end = 0;
        for &(a, b) in &seg.segments {
            assert!(a >= prev_end && b > a);
            prev_end = b;
            for c in covered.iter_mut().take(b).skip(a) {
                *c = true;
            }
        }
        if seg.dropped == 0 {
            assert_eq!(covered, mask);
        }
    }

    fn dummy_imu(t: f64) -> ImuSample {
        ImuSample { t, accel: Vec3::new(0.0, 0.0, 9.81), gyro: Vec3::ZERO }
    }

    #[test]
    fn tracker_stays_in_view_on_continuous_tracking() {
        let mut tracker = Tracker::new();
        let head = head_at_origin();
        let wrist = Pose::new(wrist_at_azimuth(&head, -10.0), Quat::IDENTITY);
        for k in 0..100 {
            let src = tracker
                .step(Some(&wrist), &head, &dummy_imu(k as f64 / IMU_RATE), &RotMat::IDENTITY)
                .unwrap();
            assert_eq!(src, PoseSource::Headset);
            assert_eq!(*tracker.state(), TrackerState::InView);
        }
    }

    #[test]
    fn tracker_captures_prior_on_exit() {
        let mut tracker = Tracker::new();
        let head = head_at_origin();
        let exit_at = 854; // t = 2 s
        let mut expected_prior = Vec::new();
        for k in 0..exit_at {
            let wrist = Pose::new(
                wrist_at_azimuth(&head, -10.0 - 0.01 * k as f64),
                Quat::IDENTITY,
            );
            if k >= exit_at - PRIOR_LEN {
                expected_prior.push(wrist);
            }
            tracker
                .step(Some(&wrist), &head, &dummy_imu(k as f64 / IMU_RATE), &RotMat::IDENTITY)
                .unwrap();
        }
        let t_exit = exit_at as f64 / IMU_RATE;
        let src = tracker
            .step(None, &head, &dummy_imu(t_exit), &RotMat::IDENTITY)
            .unwrap();
        assert_eq!(src, PoseSource::Model);
        match tracker.state() {
            TrackerState::OutOfView { exit_time } => assert_eq!(*exit_time, t_exit),
            s => panic!("unexpected state {s:?}"),
        }
        let prior = tracker.prior().unwrap();
        for (got, expect) in prior.iter().zip(expected_prior.iter()) {
            assert_eq!(got.0, *expect);
        }
        assert_eq!(tracker.buffer().len(), 1);
    }

    #[test]
    fn tracker_clears_buffer_on_reentry() {
        let mut tracker = Tracker::new();
        let head = head_at_origin();
        for k in 0..10 {
            let wrist = Pose::new(wrist_at_azimuth(&head, -10.0 - 0.1 * k as f64), Quat::IDENTITY);
            tracker
                .step(Some(&wrist), &head, &dummy_imu(k as f64 / IMU_RATE), &RotMat::IDENTITY)
                .unwrap();
        }
        for k in 10..50 {
            tracker
                .step(None, &head, &dummy_imu(k as f64 / IMU_RATE), &RotMat::IDENTITY)
                .unwrap();
        }
        assert_eq!(tracker.buffer().len(), 40);
        let wrist = Pose::new(wrist_at_azimuth(&head, -12.0), Quat::IDENTITY);
        tracker
            .step(Some(&wrist), &head, &dummy_imu(50.0 / IMU_RATE), &RotMat::IDENTITY)
            .unwrap();
        assert_eq!(*tracker.state(), TrackerState::InView);
        assert!(tracker.buffer().is_empty());
        assert!(tracker.prior().is_none());
        // a second exit starts a fresh buffer
        tracker
            .step(None, &head, &dummy_imu(51.0 / IMU_RATE), &RotMat::IDENTITY)
            .unwrap();
        assert_eq!(tracker.buffer().len(), 1);
    }

    #[test]
    fn tracker_errors_without_prior() {
        let mut tracker = Tracker::new();
        let head = head_at_origin();
        let wrist = Pose::new(wrist_at_azimuth(&head, -10.0), Quat::IDENTITY);
        for k in 0..3 {
            tracker
                .step(Some(&wrist), &head, &dummy_imu(k as f64 / IMU_RATE), &RotMat::IDENTITY)
                .unwrap();
        }
        let err = tracker
            .step(None, &head, &dummy_imu(3.0 / IMU_RATE), &RotMat::IDENTITY)
            .unwrap_err();
        assert_eq!(err, FovError::PriorUnavailable);
        assert_eq!(*tracker.state(), TrackerState::InView);
    }

    #[test]
    fn tracker_buffer_slides_at_cap() {
        let mut tracker = Tracker::with_max_buffer(16);
        let head = head_at_origin();
        for k in 0..PRIOR_LEN {
            let wrist = Pose::new(wrist_at_azimuth(&head, -10.0 - k as f64), Quat::IDENTITY);
            tracker
                .step(Some(&wrist), &head, &dummy_imu(k as f64 / IMU_RATE), &RotMat::IDENTITY)
                .unwrap();
        }
        for k in PRIOR_LEN..PRIOR_LEN + 40 {
            tracker
                .step(None, &head, &dummy_imu(k as f64 / IMU_RATE), &RotMat::IDENTITY)
                .unwrap();
        }
        assert!(tracker.buffer().len() <= 16);
        // newest row is always retained; accel z lives at row index 2
        let newest = tracker.buffer().last().unwrap();
        assert_eq!(newest[2], 9.81);
    }

    #[test]
    fn tracker_replay_matches_segmentation() {
        let rec = scripted_recording(
            |t| {
                if (1.5..2.5).contains(&t) || (4.0..5.5).contains(&t) {
                    -120.0
                } else {
                    -15.0 - 3.0 * (2.0 * t).sin()
                }
            },
            7.0,
        );
        let cfg = FovConfig::with_horizontal(110.0);
        let mask = oov_mask(&rec, &cfg).unwrap();
        let seg = segment_mask(&rec, &mask).unwrap();
        assert_eq!(seg.segments.len(), 2);
        assert_eq!(seg.dropped, 0);

        let heads = head_at_imu_times(&rec).unwrap();
        let mut tracker = Tracker::new();
        let mut replay_oov = vec![false; rec.imu.len()];
        for k in 0..rec.imu.len() {
            let tracked = !mask[k];
            let wrist = rec.wrist_gt[k];
            let src = tracker
                .step(
                    tracked.then_some(&wrist),
                    &heads[k],
                    &rec.imu[k],
                    &RotMat::IDENTITY,
                )
                .unwrap();
            replay_oov[k] = src == PoseSource::Model;
        }
        let mut expect = vec![false; rec.imu.len()];
        for &(a, b) in &seg.segments {
            for e in expect.iter_mut().take(b).skip(a) {
                *e = true;
            }
        }
        assert_eq!(replay_oov, expect);
    }
}
