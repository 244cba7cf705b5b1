//! Forward kinematics for a 5-DoF right arm and smooth random joint tracks.
//!
//! The chain is shoulder (azimuth, elevation, twist) -> elbow (flexion) ->
//! forearm (pronation) -> wrist. The wrist frame follows the convention the
//! rest of the pipeline expects: local y points along the forearm back
//! toward the shoulder, local z points down through the palm at zero
//! pronation, x completes the right-handed frame.

use super::recording::ArmModel;
use crate::geom::{Pose, Quat, RotMat, Vec3};
use crate::rng::Rng;

/// Joint configuration, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointAngles {
    /// Shoulder azimuth: 0 = forward, negative swings to the right.
    pub azimuth: f64,
    /// Shoulder elevation: 0 = horizontal, positive raises the arm.
    pub elevation: f64,
    /// Rotation of the upper arm about its own axis.
    pub twist: f64,
    /// Elbow bend: 0 = straight arm.
    pub flexion: f64,
    /// Forearm roll about its own axis.
    pub pronation: f64,
}

impl JointAngles {
    pub fn clamp_to(&self, arm: &ArmModel) -> JointAngles {
        JointAngles {
            azimuth: self.azimuth.clamp(arm.shoulder_azimuth.0, arm.shoulder_azimuth.1),
            elevation: self.elevation.clamp(arm.shoulder_elevation.0, arm.shoulder_elevation.1),
            twist: self.twist.clamp(arm.shoulder_twist.0, arm.shoulder_twist.1),
            flexion: self.flexion.clamp(arm.elbow_flexion.0, arm.elbow_flexion.1),
            pronation: self.pronation.clamp(arm.pronation.0, arm.pronation.1),
        }
    }
}

/// Wrist pose for a joint configuration, with the shoulder anchored at
/// `shoulder_world` (the body is assumed static within a session).
pub fn forward_kinematics(arm: &ArmModel, shoulder_world: Vec3, joints: &JointAngles) -> Pose {
    let j = joints.clamp_to(arm);

    // upper arm direction from spherical shoulder angles
    let (s_el, c_el) = j.elevation.sin_cos();
    let (s_az, c_az) = j.azimuth.sin_cos();
    let upper_dir = Vec3::new(c_el * c_az, c_el * s_az, s_el);

    // upper-arm frame: e1 along the arm, e2 the elbow hinge axis
    let reference = Vec3::new(0.0, 0.0, 1.0);
    let e2_base = reference.cross(upper_dir).normalized();
    let twist_rot = Quat::from_axis_angle(upper_dir, j.twist);
    let hinge = twist_rot.rotate(e2_base);

    let elbow = shoulder_world + upper_dir.scale(arm.upper_len);

    // flexion rotates the forearm away from the upper-arm axis about the hinge
    let flex_rot = Quat::from_axis_angle(hinge, j.flexion);
    let fore_dir = flex_rot.rotate(upper_dir);
    let wrist_pos = elbow + fore_dir.scale(arm.fore_len);

    // wrist frame: y back along the forearm, z through the palm
    let y_w = -fore_dir;
    let palm_base = fore_dir.cross(hinge).normalized();
    let pron_rot = Quat::from_axis_angle(fore_dir, j.pronation);
    let z_w = pron_rot.rotate(palm_base);
    let x_w = y_w.cross(z_w);
    let orientation = Quat::from_rotation_matrix(&RotMat::from_cols(x_w, y_w, z_w));

    Pose::new(wrist_pos, orientation)
}

/// Piecewise-smoothstep track through random knots inside a range.
///
/// Values interpolate between knots with a cubic easing, so the track is C1
/// and never leaves the knot hull (and therefore never leaves the range).
#[derive(Debug, Clone)]
pub struct SmoothTrack {
    knot_times: Vec<f64>,
    knot_values: Vec<f64>,
}

impl SmoothTrack {
    /// Random track over [0, duration] with knots every ~`knot_dt` seconds.
    pub fn random(
        rng: &mut Rng,
        duration: f64,
        range: (f64, f64),
        knot_dt: (f64, f64),
    ) -> Self {
        let mut knot_times = vec![0.0];
        let mut t = 0.0;
        while t < duration {
            t += rng.range(knot_dt.0, knot_dt.1);
            knot_times.push(t);
        }
        let knot_values = knot_times.iter().map(|_| rng.range(range.0, range.1)).collect();
        Self { knot_times, knot_values }
    }

    pub fn constant(value: f64, duration: f64) -> Self {
        Self { knot_times: vec![0.0, duration.max(1.0)], knot_values: vec![value, value] }
    }

    /// Overrides the first `n` knot values (used to pin the session start).
    pub fn pin_start(&mut self, n: usize, value: f64) {
        for v in self.knot_values.iter_mut().take(n) {
            *v = value;
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let times = &self.knot_times;
        if t <= times[0] {
            return self.knot_values[0];
        }
        if t >= *times.last().unwrap() {
            return *self.knot_values.last().unwrap();
        }
        let i = match times.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let u = (t - times[i]) / (times[i + 1] - times[i]);
        let s = u * u * (3.0 - 2.0 * u);
        self.knot_values[i] + (self.knot_values[i + 1] - self.knot_values[i]) * s
    }
}
