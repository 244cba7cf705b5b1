//! IMU signal synthesis: invert the sensing chain over a wrist trajectory.

use crate::ekf::ImuSample;
use crate::geom::{Pose, Vec3};
use crate::rng::Rng;
use std::fmt;

/// Gravity as specific force: a resting sensor pointing z up reads +g on z.
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, PartialEq)]
pub enum ImuSynthError {
    /// Needs at least three poses for the central differences.
    TooShort { got: usize },
}

impl fmt::Display for ImuSynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImuSynthError::TooShort { got } => {
                write!(f, "imu synthesis needs at least 3 poses, got {got}")
            }
        }
    }
}

impl std::error::Error for ImuSynthError {}

#[derive(Debug, Clone, Copy)]
pub struct ImuNoise {
    /// Accelerometer white noise sigma, m/s^2 per axis.
    pub accel_sigma: f64,
    /// Gyro white noise sigma, rad/s per axis.
    pub gyro_sigma: f64,
}

impl ImuNoise {
    pub const NONE: ImuNoise = ImuNoise { accel_sigma: 0.0, gyro_sigma: 0.0 };
}

impl Default for ImuNoise {
    fn default() -> Self {
        Self { accel_sigma: 0.05, gyro_sigma: 0.002 }
    }
}

/// Synthesizes sensor-frame IMU samples from a wrist trajectory sampled on
/// a uniform grid.
///
/// Gyro comes from the body-frame quaternion increment, so integrating the
/// noiseless gyro with the exponential map reproduces the orientation track
/// exactly. Linear acceleration is the central second difference of the
/// positions, so the matching 3-term recurrence inverts it exactly given
/// the first two positions.
pub fn imu_from_trajectory(
    wrist: &[Pose],
    rate: f64,
    noise: ImuNoise,
    rng: &mut Rng,
) -> Result<Vec<ImuSample>, ImuSynthError> {
    let n = wrist.len();
    if n < 3 {
        return Err(ImuSynthError::TooShort { got: n });
    }
    let dt = 1.0 / rate;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        // body-frame angular velocity over [k, k+1]
        let gyro = if k + 1 < n {
            wrist[k]
                .orientation
                .conjugate()
                .mul(wrist[k + 1].orientation)
                .to_rotation_vector()
                .scale(rate)
        } else {
            // hold the last rate
            wrist[k - 1]
                .orientation
                .conjugate()
                .mul(wrist[k].orientation)
                .to_rotation_vector()
                .scale(rate)
        };

        let accel_world = if k == 0 {
            central_accel(wrist, 1, dt)
        } else if k == n - 1 {
            central_accel(wrist, n - 2, dt)
        } else {
            central_accel(wrist, k, dt)
        };

        // specific force in the sensor frame
        let world_from_sensor = wrist[k].orientation;
        let f =
            world_from_sensor.conjugate().rotate(accel_world + Vec3::new(0.0, 0.0, GRAVITY));

        let accel_noise =
            Vec3::new(rng.normal(), rng.normal(), rng.normal()).scale(noise.accel_sigma);
        let gyro_noise =
            Vec3::new(rng.normal(), rng.normal(), rng.normal()).scale(noise.gyro_sigma);
        out.push(ImuSample {
            t: k as f64 * dt,
            accel: f + accel_noise,
            gyro: gyro + gyro_noise,
        });
    }
    Ok(out)
}

fn central_accel(wrist: &[Pose], k: usize, dt: f64) -> Vec3 {
    let p_prev = wrist[k - 1].position;
    let p = wrist[k].position;
    let p_next = wrist[k + 1].position;
    (p_next - p.scale(2.0) + p_prev).scale(1.0 / (dt * dt))
}

/// Inverts noiseless synthesized IMU signals back to positions.
///
/// Test oracle for the synthesis above and the basis of the dead-reckoning
/// baseline: orientation integrates the gyro, then positions follow the
/// exact inverse of the central-difference recurrence given p0 and p1.
pub fn dead_reckon_exact(
    imu: &[ImuSample],
    q0: crate::geom::Quat,
    p0: Vec3,
    p1: Vec3,
    rate: f64,
) -> Vec<Vec3> {
    let dt = 1.0 / rate;
    let mut qs = Vec::with_capacity(imu.len());
    let mut q = q0;
    qs.push(q);
    for s in imu.iter().take(imu.len() - 1) {
        q = q.mul(crate::geom::Quat::from_rotation_vector(s.gyro.scale(dt))).normalized();
        qs.push(q);
    }
    let mut ps = vec![p0, p1];
    for k in 1..imu.len() - 1 {
        let a_world = qs[k].rotate(imu[k].accel) - Vec3::new(0.0, 0.0, GRAVITY);
        let next = ps[k].scale(2.0) - ps[k - 1] + a_world.scale(dt * dt);
        ps.push(next);
    }
    ps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Quat;

    const RATE: f64 = 427.0;

    #[test]
    fn static_pose_reads_gravity_only() {
        let q = Quat::from_axis_angle(Vec3::new(0.3, 0.8, 0.1), 0.9);
        let poses = vec![Pose::new(Vec3::new(0.2, -0.3, 1.1), q); 100];
        let mut rng = Rng::new(0);
        let imu = imu_from_trajectory(&poses, RATE, ImuNoise::NONE, &mut rng).unwrap();
        let expect = q.conjugate().rotate(Vec3::new(0.0, 0.0, GRAVITY));
        for s in &imu {
            assert!((s.gyro).norm() < 1e-12);
            assert!((s.accel - expect).norm() < 1e-9);
        }
    }

    #[test]
    fn constant_rotation_rate_recovers_gyro() {
        // 1 rad/s about body z, no translation
        let n = 427;
        let poses: Vec<Pose> = (0..n)
            .map(|k| {
                let t = k as f64 / RATE;
                Pose::new(
                    Vec3::ZERO,
                    Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), t),
                )
            })
            .collect();
        let mut rng = Rng::new(0);
        let imu = imu_from_trajectory(&poses, RATE, ImuNoise::NONE, &mut rng).unwrap();
        for s in imu.iter().take(n - 1) {
            // body z stays aligned with world z here
            assert!((s.gyro - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-3, "{:?}", s.gyro);
        }
    }

    #[test]
    fn too_short_is_rejected() {
        let poses = vec![Pose::IDENTITY; 2];
        let mut rng = Rng::new(0);
        assert!(matches!(
            imu_from_trajectory(&poses, RATE, ImuNoise::NONE, &mut rng),
            Err(ImuSynthError::TooShort { got: 2 })
        ));
    }

    #[test]
    fn noiseless_double_integration_recovers_positions() {
        // a swinging trajectory with orientation change, 1 second
        let n = 428;
        let poses: Vec<Pose> = (0..n)
            .map(|k| {
                let t = k as f64 / RATE;
                let p = Vec3::new(
                    0.3 * (2.1 * t).sin(),
                    -0.2 * (1.7 * t).cos(),
                    1.4 + 0.1 * (3.0 * t).sin(),
                );
                let q = Quat::from_axis_angle(Vec3::new(0.2, 1.0, 0.4), 0.8 * (1.3 * t).sin());
                Pose::new(p, q)
            })
            .collect();
        let mut rng = Rng::new(0);
        let imu = imu_from_trajectory(&poses, RATE, ImuNoise::NONE, &mut rng).unwrap();
        let recon = dead_reckon_exact(
            &imu,
            poses[0].orientation,
            poses[0].position,
            poses[1].position,
            RATE,
        );
        let mut max_err: f64 = 0.0;
        for (r, p) in recon.iter().zip(poses.iter()) {
            max_err = max_err.max((*r - p.position).norm());
        }
        assert!(max_err < 1e-3, "max reconstruction error {max_err} m");
    }
}
