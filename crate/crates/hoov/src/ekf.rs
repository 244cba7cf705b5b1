//! Wrist orientation from raw 6-axis IMU signals.
//!
//! A 3-dimensional error-state extended Kalman filter: the nominal state is
//! a unit quaternion (world-from-sensor), the error state is a small
//! rotation vector in the sensor frame. Gyro integration predicts, the
//! gravity direction measured by the accelerometer corrects roll and pitch
//! whenever the specific-force magnitude is close enough to gravity to
//! trust. There is no magnetometer, so yaw is pure integration and drifts;
//! downstream consumers know this and treat the output as an auxiliary
//! feature, not ground truth.

use crate::geom::{Quat, Vec3};
use std::fmt;

/// One IMU reading: specific force plus angular velocity, sensor frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Seconds on the session clock; strictly increasing within a stream.
    pub t: f64,
    /// Specific force, m/s^2. At rest with sensor z up this reads +g on z.
    pub accel: Vec3,
    /// Angular velocity, rad/s.
    pub gyro: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EkfError {
    /// First accelerometer sample too far from 1 g to align from.
    NotQuasiStatic { magnitude: f64 },
}

impl fmt::Display for EkfError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EkfError::NotQuasiStatic { magnitude } => write!(
                f,
                "initial accel magnitude {magnitude:.3} m/s^2 is not within [0.5g, 1.5g]"
            ),
        }
    }
}

impl std::error::Error for EkfError {}

/// Filter tuning. Defaults were tuned on synthetic data.
#[derive(Debug, Clone, Copy)]
pub struct EkfConfig {
    pub gravity_mag: f64,
    /// Gyro noise density, rad/s/sqrt(Hz).
    pub gyro_noise_density: f64,
    /// Accelerometer measurement sigma, m/s^2.
    pub accel_noise: f64,
    /// Accept gravity updates when | ||a|| - g | <= gate_frac * g.
    pub gate_frac: f64,
    /// Initial roll/pitch variance, rad^2.
    pub init_tilt_var: f64,
    /// Initial yaw variance, rad^2 (large: unobservable without magnetometer).
    pub init_yaw_var: f64,
}

impl Default for EkfConfig {
    fn default() -> Self {
        Self {
            gravity_mag: 9.81,
            gyro_noise_density: 0.005,
            accel_noise: 0.3,
            gate_frac: 0.1,
            init_tilt_var: 0.01,
            init_yaw_var: 10.0,
        }
    }
}

/// Filter state; a plain value, stepped purely.
#[derive(Debug, Clone)]
pub struct EkfState {
    /// World-from-sensor orientation.
    pub q: Quat,
    /// 3x3 error-state covariance, row-major, rad^2, sensor frame.
    pub cov: [f64; 9],
    pub cfg: EkfConfig,
}

/// Aligns the initial orientation so measured specific force maps to world
/// +z, with zero yaw (the minimal rotation has no twist about gravity).
pub fn ekf_init(first_accel: Vec3, cfg: EkfConfig) -> Result<EkfState, EkfError> {
    let mag = first_accel.norm();
    let g = cfg.gravity_mag;
    if !(0.5 * g..=1.5 * g).contains(&mag) {
        return Err(EkfError::NotQuasiStatic { magnitude: mag });
    }
    let up_sensor = first_accel.normalized();
    let world_up = Vec3::new(0.0, 0.0, 1.0);
    // minimal rotation taking up_sensor to world_up
    let q = quat_between(up_sensor, world_up);

    // Covariance in the sensor frame: tilt directions span the plane
    // orthogonal to the sensed up axis; the axis itself is world yaw.
    let n = up_sensor;
    let mut cov = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            let ni = [n.x, n.y, n.z][i];
            let nj = [n.x, n.y, n.z][j];
            let eye = if i == j { 1.0 } else { 0.0 };
            cov[3 * i + j] = cfg.init_tilt_var * (eye - ni * nj) + cfg.init_yaw_var * ni * nj;
        }
    }
    Ok(EkfState { q, cov, cfg })
}

/// Minimal rotation taking unit vector `a` to unit vector `b`.
fn quat_between(a: Vec3, b: Vec3) -> Quat {
    let d = a.dot(b).clamp(-1.0, 1.0);
    if d > 1.0 - 1e-12 {
        return Quat::IDENTITY;
    }
    if d < -1.0 + 1e-12 {
        // antiparallel: rotate pi about any axis orthogonal to a
        let ortho = if a.x.abs() < 0.9 {
            Vec3::new(1.0, 0.0, 0.0)
        } else {
            Vec3::new(0.0, 1.0, 0.0)
        };
        let axis = a.cross(ortho).normalized();
        return Quat::from_axis_angle(axis, std::f64::consts::PI);
    }
    let axis = a.cross(b);
    let angle = d.acos();
    Quat::from_axis_angle(axis, angle)
}

/// One predict(+update) cycle. Pure: state in, state out.
pub fn ekf_step(state: &EkfState, sample: &ImuSample, dt: f64) -> EkfState {
    assert!(dt > 0.0 && dt <= 0.1, "dt {dt} outside (0, 0.1]");
    let cfg = state.cfg;

    // --- predict: integrate gyro through the exponential map
    let delta = sample.gyro.scale(dt);
    let q = state.q.mul(Quat::from_rotation_vector(delta)).normalized();

    // error propagation: delta_theta' = Exp(-omega dt) delta_theta + w
    let f = Quat::from_rotation_vector(-delta).to_rotation_matrix();
    let mut p = mat_mul(&f.m, &mat_mul(&state.cov, &transpose(&f.m)));
    let q_step = cfg.gyro_noise_density * cfg.gyro_noise_density * dt;
    p[0] += q_step;
    p[4] += q_step;
    p[8] += q_step;

    // --- update: gravity direction, gated on specific-force magnitude
    let mag = sample.accel.norm();
    let gate = cfg.gate_frac * cfg.gravity_mag;
    if (mag - cfg.gravity_mag).abs() <= gate && mag > 1e-9 {
        let measured_up = sample.accel.scale(1.0 / mag);
        let predicted_up = q.conjugate().rotate(Vec3::new(0.0, 0.0, 1.0));
        // m ~= predicted_up + [predicted_up]x delta_theta
        let h = skew(predicted_up);
        let r_dir = (cfg.accel_noise / cfg.gravity_mag).powi(2);
        // S = H P H^T + R
        let mut s = mat_mul(&h, &mat_mul(&p, &transpose(&h)));
        s[0] += r_dir;
        s[4] += r_dir;
        s[8] += r_dir;
        if let Some(s_inv) = invert3(&s) {
            let k = mat_mul(&mat_mul(&p, &transpose(&h)), &s_inv);
            let e = measured_up - predicted_up;
            let corr = mat_vec(&k, e);
            let q_new = q.mul(Quat::from_rotation_vector(corr)).normalized();
            // Joseph form keeps the covariance PSD under rounding
            let mut ikh = mat_mul(&k, &h);
            for (idx, v) in ikh.iter_mut().enumerate() {
                let eye = if idx % 4 == 0 { 1.0 } else { 0.0 };
                *v = eye - *v;
            }
            let mut p_new = mat_mul(&ikh, &mat_mul(&p, &transpose(&ikh)));
            let krk = mat_mul(&k, &mat_scale(&transpose(&k), r_dir));
            for i in 0..9 {
                p_new[i] += krk[i];
            }
            symmetrize(&mut p_new);
            return EkfState { q: q_new, cov: p_new, cfg };
        }
    }

    symmetrize(&mut p);
    EkfState { q, cov: p, cfg }
}

// --- tiny 3x3 helpers (row-major [f64; 9]) ---

fn skew(v: Vec3) -> [f64; 9] {
    [0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0]
}

fn transpose(m: &[f64; 9]) -> [f64; 9] {
    [m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]]
}

fn mat_mul(a: &[f64; 9], b: &[f64; 9]) -> [f64; 9] {
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0.0;
            for k in 0..3 {
                s += a[3 * i + k] * b[3 * k + j];
            }
            out[3 * i + j] = s;
        }
    }
    out
}

fn mat_vec(m: &[f64; 9], v: Vec3) -> Vec3 {
    Vec3::new(
        m[0] * v.x + m[1] * v.y + m[2] * v.z,
        m[3] * v.x + m[4] * v.y + m[5] * v.z,
        m[6] * v.x + m[7] * v.y + m[8] * v.z,
    )
}

fn mat_scale(m: &[f64; 9], s: f64) -> [f64; 9] {
    let mut out = *m;
    for v in out.iter_mut() {
        *v *= s;
    }
    out
}

fn invert3(m: &[f64; 9]) -> Option<[f64; 9]> {
    let det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
        + m[2] * (m[3] * m[7] - m[4] * m[6]);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv_det = 1.0 / det;
    Some([
        (m[4] * m[8] - m[5] * m[7]) * inv_det,
        (m[2] * m[7] - m[1] * m[8]) * inv_det,
        (m[1] * m[5] - m[2] * m[4]) * inv_det,
        (m[5] * m[6] - m[3] * m[8]) * inv_det,
        (m[0] * m[8] - m[2] * m[6]) * inv_det,
        (m[2] * m[3] - m[0] * m[5]) * inv_det,
        (m[3] * m[7] - m[4] * m[6]) * inv_det,
        (m[1] * m[6] - m[0] * m[7]) * inv_det,
        (m[0] * m[4] - m[1] * m[3]) * inv_det,
    ])
}

fn symmetrize(m: &mut [f64; 9]) {
    for i in 0..3 {
        for j in (i + 1)..3 {
            let avg = 0.5 * (m[3 * i + j] + m[3 * j + i]);
            m[3 * i + j] = avg;
            m[3 * j + i] = avg;
        }
    }
}

/// Runs the filter over a whole sample stream, returning one orientation
/// per sample (the orientation after absorbing that sample).
pub fn ekf_run(samples: &[ImuSample], cfg: EkfConfig) -> Result<Vec<Quat>, EkfError> {
    assert!(!samples.is_empty());
    let mut state = ekf_init(samples[0].accel, cfg)?;
    let mut out = Vec::with_capacity(samples.len());
    out.push(state.q);
    for w in samples.windows(2) {
        let dt = (w[1].t - w[0].t).clamp(1e-6, 0.1);
        state = ekf_step(&state, &w[1], dt);
        out.push(state.q);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    const G: f64 = 9.81;

    fn up(state: &EkfState) -> Vec3 {
        // world up expressed in sensor frame
        state.q.conjugate().rotate(Vec3::new(0.0, 0.0, 1.0))
    }

    /// Eigenvalues of a symmetric 3x3 matrix (trigonometric closed form).
    fn sym_eigenvalues(m: &[f64; 9]) -> [f64; 3] {
        let p1 = m[1] * m[1] + m[2] * m[2] + m[5] * m[5];
        let q = (m[0] + m[4] + m[8]) / 3.0;
        if p1.abs() < 1e-300 {
            return [m[0], m[4], m[8]];
        }
        let p2 = (m[0] - q).powi(2) + (m[4] - q).powi(2) + (m[8] - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let mut b = *m;
        b[0] -= q;
        b[4] -= q;
        b[8] -= q;
        let det_b = b[0] * (b[4] * b[8] - b[5] * b[7]) - b[1] * (b[3] * b[8] - b[5] * b[6])
            + b[2] * (b[3] * b[7] - b[4] * b[6]);
        let r = (det_b / (2.0 * p * p * p)).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        [e1, e2, e3]
    }

    #[test]
    fn init_aligned_is_identity() {
        let s = ekf_init(Vec3::new(0.0, 0.0, G), EkfConfig::default()).unwrap();
        assert!(s.q.angle_to(Quat::IDENTITY) < 1e-12);
    }

    #[test]
    fn init_rotates_sensor_x_to_world_z() {
        let s = ekf_init(Vec3::new(G, 0.0, 0.0), EkfConfig::default()).unwrap();
        let mapped = s.q.rotate(Vec3::new(1.0, 0.0, 0.0));
        assert!((mapped - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-9);
    }

    #[test]
    fn init_rejects_freefall() {
        assert!(matches!(
            ekf_init(Vec3::new(0.0, 0.0, 0.1), EkfConfig::default()),
            Err(EkfError::NotQuasiStatic { .. })
        ));
    }

    #[test]
    fn static_gravity_is_a_fixed_point() {
        let cfg = EkfConfig::default();
        let mut state = ekf_init(Vec3::new(0.0, 0.0, G), cfg).unwrap();
        let q0 = state.q;
        for k in 0..1000 {
            let sample = ImuSample {
                t: k as f64 * 0.001,
                accel: Vec3::new(0.0, 0.0, G),
                gyro: Vec3::ZERO,
            };
            state = ekf_step(&state, &sample, 0.001);
        }
        assert!(state.q.angle_to(q0).to_degrees() < 1e-6);
    }

    #[test]
    fn gated_yaw_matches_closed_form_integration() {
        // accel magnitude far from g keeps the update off the whole time
        let cfg = EkfConfig::default();
        let mut state = ekf_init(Vec3::new(0.0, 0.0, G), cfg).unwrap();
        for k in 0..1000 {
            let sample = ImuSample {
                t: k as f64 * 0.001,
                accel: Vec3::new(0.0, 0.0, 30.0),
                gyro: Vec3::new(0.0, 0.0, 1.0),
            };
            state = ekf_step(&state, &sample, 0.001);
        }
        let expect = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), 1.0);
        assert!(state.q.angle_to(expect) < 1e-4);
    }

    #[test]
    fn gated_yaw_equals_direct_gyro_integration() {
        let cfg = EkfConfig::default();
        let mut rng = Rng::new(2);
        let mut state = ekf_init(Vec3::new(0.0, 0.0, G), cfg).unwrap();
        let mut direct = state.q;
        for k in 0..5000 {
            let gyro = Vec3::new(rng.normal(), rng.normal(), rng.normal());
            let sample = ImuSample {
                t: k as f64 * 0.001,
                accel: Vec3::new(0.0, 0.0, 50.0), // always gated
                gyro,
            };
            state = ekf_step(&state, &sample, 0.001);
            direct = direct.mul(Quat::from_rotation_vector(gyro.scale(0.001))).normalized();
        }
        assert!(state.q.angle_to(direct) < 1e-6);
    }

    #[test]
    fn tilt_error_converges_under_noisy_gravity() {
        // Monte-Carlo over 20 seeds; mean terminal tilt error must be < 2 deg.
        let cfg = EkfConfig::default();
        let mut total = 0.0;
        for seed in 0..20u64 {
            let mut rng = Rng::new(1000 + seed);
            let mut state = ekf_init(Vec3::new(0.0, 0.0, G), cfg).unwrap();
            // inject a 10 degree pitch error
            let err = Quat::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), 10f64.to_radians());
            state.q = state.q.mul(err);
            for k in 0..2000 {
                let noise = Vec3::new(rng.normal(), rng.normal(), rng.normal()).scale(0.05);
                let sample = ImuSample {
                    t: k as f64 / 427.0,
                    accel: Vec3::new(0.0, 0.0, G) + noise,
                    gyro: Vec3::ZERO,
                };
                state = ekf_step(&state, &sample, 1.0 / 427.0);
            }
            // tilt error: angle between estimated and true up directions
            let tilt = up(&state).dot(Vec3::new(0.0, 0.0, 1.0)).clamp(-1.0, 1.0).acos();
            total += tilt.to_degrees();
        }
        let mean = total / 20.0;
        assert!(mean < 2.0, "mean tilt error {mean} deg");
    }

    #[test]
    fn covariance_stays_positive_semidefinite() {
        let cfg = EkfConfig::default();
        let mut rng = Rng::new(4);
        let mut state = ekf_init(Vec3::new(0.0, 0.0, G), cfg).unwrap();
        for k in 0..100_000 {
            let gyro = Vec3::new(rng.normal(), rng.normal(), rng.normal()).scale(2.0);
            // mix of gated and accepted updates
            let accel = if k % 3 == 0 {
                Vec3::new(rng.normal(), rng.normal(), G + rng.normal() * 0.3)
            } else {
                Vec3::new(rng.normal(), rng.normal(), rng.normal()).scale(20.0)
            };
            let dt = rng.range(1e-4, 0.1);
            state = ekf_step(&state, &ImuSample { t: k as f64, accel, gyro }, dt);
            if k % 97 == 0 {
                let eig = sym_eigenvalues(&state.cov);
                for e in eig {
                    assert!(e > -1e-12, "eigenvalue {e} at step {k}");
                }
            }
        }
        let eig = sym_eigenvalues(&state.cov);
        for e in eig {
            assert!(e > -1e-12);
        }
    }

    #[test]
    fn filter_is_deterministic() {
        let cfg = EkfConfig::default();
        let mut rng = Rng::new(6);
        let samples: Vec<ImuSample> = (0..2000)
            .map(|k| ImuSample {
                t: k as f64 / 427.0,
                accel: Vec3::new(rng.normal(), rng.normal(), G + rng.normal()),
                gyro: Vec3::new(rng.normal(), rng.normal(), rng.normal()),
            })
            .collect();
        let a = ekf_run(&samples, cfg).unwrap();
        let b = ekf_run(&samples, cfg).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x, y);
        }
    }
}
