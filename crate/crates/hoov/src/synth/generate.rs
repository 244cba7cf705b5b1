//! Session generator: random smooth arm motion, quasi-static head, IMU
//! synthesis, and scripted pinch transients, all reproducible from a seed.

use super::arm::{forward_kinematics, JointAngles, SmoothTrack};
use super::imu::{imu_from_trajectory, ImuNoise};
use super::recording::{ArmModel, Recording, RecordingMeta, HEAD_RATE, IMU_RATE, SCHEMA_VERSION};
use crate::geom::{Pose, Quat, Vec3};
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub imu_rate: f64,
    pub head_rate: f64,
    /// 0 freezes every joint at its first knot (constant wrist pose).
    pub motion_scale: f64,
    pub imu_noise: ImuNoise,
    /// Sigma of the head position wobble, meters.
    pub head_pos_noise: f64,
    /// Amplitude of the head orientation wobble, degrees.
    pub head_rot_noise_deg: f64,
    /// Inclusive range for the number of pinch events per session.
    pub pinch_count: (usize, usize),
    /// Nominal head height above the floor, meters.
    pub head_height: f64,
    /// Spacing between joint knots, seconds.
    pub knot_dt: (f64, f64),
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            imu_rate: IMU_RATE,
            head_rate: HEAD_RATE,
            motion_scale: 1.0,
            imu_noise: ImuNoise::default(),
            head_pos_noise: 0.008,
            head_rot_noise_deg: 1.5,
            pinch_count: (1, 3),
            head_height: 1.70,
            knot_dt: (0.7, 1.6),
        }
    }
}

impl GenConfig {
    /// Noise-free, motion-free variant for physics cross-checks.
    pub fn frozen() -> Self {
        Self {
            motion_scale: 0.0,
            imu_noise: ImuNoise::NONE,
            head_pos_noise: 0.0,
            head_rot_noise_deg: 0.0,
            pinch_count: (0, 0),
            ..Self::default()
        }
    }
}

const TASKS: [&str; 3] = ["drop", "grab", "compound"];

/// Generates one synthetic session. Identical (seed, arm, duration, cfg)
/// always produce a bit-identical `Recording`.
pub fn generate_session(seed: u64, arm: &ArmModel, duration: f64, cfg: &GenConfig) -> Recording {
    assert!((1.0..=300.0).contains(&duration), "duration {duration} outside [1, 300] s");
    let root = Rng::new(seed);

    let n = (duration * cfg.imu_rate).floor() as usize;
    let mut m = (duration * cfg.head_rate).floor() as usize + 1;
    while (m - 1) as f64 / cfg.head_rate < (n - 1) as f64 / cfg.imu_rate {
        m += 1;
    }

    // --- joint tracks ---
    let mut joints_rng = root.fork("joints");
    let track = |range: (f64, f64), rng: &mut Rng| -> SmoothTrack {
        if cfg.motion_scale == 0.0 {
            let mid = 0.5 * (range.0 + range.1);
            SmoothTrack::constant(mid, duration)
        } else {
            SmoothTrack::random(rng, duration, range, cfg.knot_dt)
        }
    };
    let mut azimuth = track(arm.shoulder_azimuth, &mut joints_rng);
    let mut elevation = track(arm.shoulder_elevation, &mut joints_rng);
    let mut twist = track(arm.shoulder_twist, &mut joints_rng);
    let mut flexion = track(arm.elbow_flexion, &mut joints_rng);
    let mut pronation = track(arm.pronation, &mut joints_rng);
    // sessions hold a known posture with the hand in front of the user for
    // the first two knots, so even a 40 degree FOV starts with the wrist
    // tracked and the estimator always has a prior for the first excursion
    azimuth.pin_start(2, 0.10);
    elevation.pin_start(2, -0.15);
    twist.pin_start(2, 0.0);
    flexion.pin_start(2, 0.3);
    pronation.pin_start(2, 0.0);

    // --- body anchor and head motion ---
    // The shoulder hangs off a static body; the head wobbles independently.
    let body_head = Vec3::new(0.0, 0.0, cfg.head_height);
    let shoulder_world = body_head + arm.shoulder_offset;

    let mut head_rng = root.fork("head");
    let head_track = |amp: f64, rng: &mut Rng| -> SmoothTrack {
        if amp == 0.0 {
            SmoothTrack::constant(0.0, duration)
        } else {
            SmoothTrack::random(rng, duration, (-amp, amp), (0.8, 2.0))
        }
    };
    let hx = head_track(cfg.head_pos_noise, &mut head_rng);
    let hy = head_track(cfg.head_pos_noise, &mut head_rng);
    let hz = head_track(cfg.head_pos_noise, &mut head_rng);
    let rot_amp = cfg.head_rot_noise_deg.to_radians();
    let hyaw = head_track(rot_amp, &mut head_rng);
    let hpitch = head_track(rot_amp, &mut head_rng);
    let hroll = head_track(rot_amp, &mut head_rng);

    let head_pose_at = |t: f64| -> Pose {
        let pos = body_head + Vec3::new(hx.eval(t), hy.eval(t), hz.eval(t));
        let q = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), hyaw.eval(t))
            .mul(Quat::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), hpitch.eval(t)))
            .mul(Quat::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), hroll.eval(t)));
        Pose::new(pos, q)
    };
    let head_poses: Vec<Pose> =
        (0..m).map(|k| head_pose_at(k as f64 / cfg.head_rate)).collect();

    // --- wrist trajectory by forward kinematics ---
    let wrist_gt: Vec<Pose> = (0..n)
        .map(|k| {
            let t = k as f64 / cfg.imu_rate;
            let joints = JointAngles {
                azimuth: azimuth.eval(t),
                elevation: elevation.eval(t),
                twist: twist.eval(t),
                flexion: flexion.eval(t),
                pronation: pronation.eval(t),
            };
            forward_kinematics(arm, shoulder_world, &joints)
        })
        .collect();

    // --- IMU synthesis ---
    let mut noise_rng = root.fork("imu-noise");
    let mut imu = imu_from_trajectory(&wrist_gt, cfg.imu_rate, cfg.imu_noise, &mut noise_rng)
        .expect("session has >= 3 samples");

    // --- pinch transients ---
    let mut pinch_rng = root.fork("pinch");
    let pinch_n = if cfg.pinch_count.1 == 0 {
        0
    } else {
        cfg.pinch_count.0 + pinch_rng.below(cfg.pinch_count.1 - cfg.pinch_count.0 + 1)
    };
    let mut pinch_times: Vec<f64> = Vec::new();
    let mut guard = 0;
    while pinch_times.len() < pinch_n && guard < 1000 {
        guard += 1;
        let t = pinch_rng.range(1.0, duration - 0.5);
        if pinch_times.iter().all(|&p| (p - t).abs() > 1.0) {
            pinch_times.push(t);
        }
    }
    pinch_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for &t in &pinch_times {
        let k0 = (t * cfg.imu_rate).round() as usize;
        let dir = Vec3::new(pinch_rng.normal(), pinch_rng.normal(), pinch_rng.normal())
            .normalized();
        // biphasic knock: sharp onset, quick ring-down
        for (j, amp) in [12.0, -9.0, 5.5, -2.5, 1.0].iter().enumerate() {
            if let Some(s) = imu.get_mut(k0 + j) {
                s.accel = s.accel + dir.scale(*amp);
            }
        }
    }

    let task = TASKS[(seed % 3) as usize].to_string();
    Recording {
        meta: RecordingMeta {
            schema_version: SCHEMA_VERSION,
            seed,
            imu_rate: cfg.imu_rate,
            head_rate: cfg.head_rate,
            duration_s: duration,
            task,
            arm: arm.clone(),
        },
        imu,
        head_poses,
        wrist_gt,
        pinch_times,
    }
}
