//! Rotation and interpolation primitives.
//!
//! Conventions, fixed once for the whole crate:
//! - world frame is right-handed, z-up; +x is the nominal "forward" of a
//!   level head at identity orientation
//! - quaternions are `(w, x, y, z)`, scalar first, and always unit norm
//! - rotation matrices are row-major 3x3, world-from-local
//! - the 6D rotation encoding is the first two *columns* of a rotation
//!   matrix, concatenated column-first
//! - angles are radians internally; degrees appear only at API edges that
//!   say so in their name

use serde::{Deserialize, Serialize};
use std::fmt;

pub const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum GeomError {
    /// 6D input whose vectors are too short or too parallel to orthonormalize.
    DegenerateInput,
    /// Fewer than four knots given to the cubic resampler.
    InsufficientKnots { got: usize },
    /// Query time outside the knot span.
    OutOfRange { t: f64, lo: f64, hi: f64 },
    /// Knot times must be strictly increasing.
    NonMonotonicTimes,
}

impl fmt::Display for GeomError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeomError::DegenerateInput => write!(f, "degenerate 6D rotation input"),
            GeomError::InsufficientKnots { got } => {
                write!(f, "cubic resampling needs at least 4 knots, got {got}")
            }
            GeomError::OutOfRange { t, lo, hi } => {
                write!(f, "query time {t} outside knot span [{lo}, {hi}]")
            }
            GeomError::NonMonotonicTimes => write!(f, "knot times must be strictly increasing"),
        }
    }
}

impl std::error::Error for GeomError {}

// ---------------------------------------------------------------------------
// Vec3
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        Vec3::new(self.x / n, self.y / n, self.z / n)
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        self.scale(s)
    }
}

// ---------------------------------------------------------------------------
// Quat
// ---------------------------------------------------------------------------

/// Unit quaternion, scalar-first. `q` and `-q` are the same rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Builds a unit quaternion, normalizing the raw components.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }.normalized()
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let a = axis.normalized();
        let (s, c) = (angle * 0.5).sin_cos();
        Quat { w: c, x: a.x * s, y: a.y * s, z: a.z * s }
    }

    /// Exponential map of a rotation vector (axis * angle).
    pub fn from_rotation_vector(rv: Vec3) -> Self {
        let angle = rv.norm();
        if angle < 1e-12 {
            // first-order expansion keeps this smooth through zero
            Quat::new(1.0, rv.x * 0.5, rv.y * 0.5, rv.z * 0.5)
        } else {
            Quat::from_axis_angle(rv, angle)
        }
    }

    /// Log map: rotation vector whose exponential is `self` (angle in [0, pi]).
    pub fn to_rotation_vector(self) -> Vec3 {
        let q = if self.w < 0.0 { self.neg() } else { self };
        let v = Vec3::new(q.x, q.y, q.z);
        let sin_half = v.norm();
        if sin_half < 1e-12 {
            return v.scale(2.0);
        }
        let angle = 2.0 * sin_half.atan2(q.w);
        v.scale(angle / sin_half)
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Quat {
        let n = self.norm();
        Quat { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    pub fn conjugate(self) -> Quat {
        Quat { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Quat {
        Quat { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn dot(self, o: Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Hamilton product.
    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, o: Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    /// Rotates a vector by this quaternion.
    pub fn rotate(self, v: Vec3) -> Vec3 {
        // v' = v + 2w(u x v) + 2(u x (u x v))
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v).scale(2.0);
        v + t.scale(self.w) + u.cross(t)
    }

    pub fn to_rotation_matrix(self) -> RotMat {
        let Quat { w, x, y, z } = self;
        RotMat {
            m: [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        }
    }

    /// Shepperd's method; picks the numerically largest pivot.
    pub fn from_rotation_matrix(r: &RotMat) -> Quat {
        let m = &r.m;
        let trace = m[0] + m[4] + m[8];
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Quat {
                w: 0.25 * s,
                x: (m[7] - m[5]) / s,
                y: (m[2] - m[6]) / s,
                z: (m[3] - m[1]) / s,
            }
        } else if m[0] > m[4] && m[0] > m[8] {
            let s = (1.0 + m[0] - m[4] - m[8]).sqrt() * 2.0;
            Quat {
                w: (m[7] - m[5]) / s,
                x: 0.25 * s,
                y: (m[1] + m[3]) / s,
                z: (m[2] + m[6]) / s,
            }
        } else if m[4] > m[8] {
            let s = (1.0 + m[4] - m[0] - m[8]).sqrt() * 2.0;
            Quat {
                w: (m[2] - m[6]) / s,
                x: (m[1] + m[3]) / s,
                y: 0.25 * s,
                z: (m[5] + m[7]) / s,
            }
        } else {
            let s = (1.0 + m[8] - m[0] - m[4]).sqrt() * 2.0;
            Quat {
                w: (m[3] - m[1]) / s,
                x: (m[2] + m[6]) / s,
                y: (m[5] + m[7]) / s,
                z: 0.25 * s,
            }
        };
        q.normalized()
    }

    /// Uniformly distributed random rotation.
    pub fn sample_uniform(rng: &mut crate::rng::Rng) -> Quat {
        Quat::new(rng.normal(), rng.normal(), rng.normal(), rng.normal())
    }

    /// Angle of the rotation taking `self` to `other`, in radians.
    ///
    /// Computed through atan2 of the difference quaternion, which stays
    /// well-conditioned near zero where the acos form loses ~8 digits.
    pub fn angle_to(self, other: Quat) -> f64 {
        let d = self.conjugate().mul(other);
        let v = Vec3::new(d.x, d.y, d.z).norm();
        2.0 * v.atan2(d.w.abs())
    }

    /// Spherical linear interpolation along the shorter arc.
    pub fn slerp(self, other: Quat, t: f64) -> Quat {
        let mut b = other;
        let mut dot = self.dot(b);
        if dot < 0.0 {
            b = b.neg();
            dot = -dot;
        }
        if dot > 1.0 - 1e-10 {
            // nearly parallel: nlerp and renormalize
            return Quat::new(
                self.w + (b.w - self.w) * t,
                self.x + (b.x - self.x) * t,
                self.y + (b.y - self.y) * t,
                self.z + (b.z - self.z) * t,
            );
        }
        let theta = dot.clamp(-1.0, 1.0).acos();
        let sin_theta = theta.sin();
        let wa = ((1.0 - t) * theta).sin() / sin_theta;
        let wb = (t * theta).sin() / sin_theta;
        Quat::new(
            self.w * wa + b.w * wb,
            self.x * wa + b.x * wb,
            self.y * wa + b.y * wb,
            self.z * wa + b.z * wb,
        )
    }
}

/// Angle of the difference rotation, in degrees.
///
/// `theta = 2 * acos(|a . b|)`; the absolute value makes the metric
/// invariant under the q/-q sign ambiguity. The dot is clamped to [0, 1]
/// before acos to absorb rounding.
pub fn quat_angle_diff(a: Quat, b: Quat) -> f64 {
    let d = a.dot(b).abs().clamp(0.0, 1.0);
    2.0 * d.acos().to_degrees()
}

// ---------------------------------------------------------------------------
// RotMat
// ---------------------------------------------------------------------------

/// Row-major 3x3 rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotMat {
    pub m: [f64; 9],
}

impl RotMat {
    pub const IDENTITY: RotMat = RotMat {
        m: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
    };

    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        RotMat {
            m: [c0.x, c1.x, c2.x, c0.y, c1.y, c2.y, c0.z, c1.z, c2.z],
        }
    }

    pub fn col(&self, i: usize) -> Vec3 {
        Vec3::new(self.m[i], self.m[3 + i], self.m[6 + i])
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::new(self.m[3 * i], self.m[3 * i + 1], self.m[3 * i + 2])
    }

    pub fn transpose(&self) -> RotMat {
        let m = &self.m;
        RotMat {
            m: [m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]],
        }
    }

    pub fn mul(&self, o: &RotMat) -> RotMat {
        let mut out = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += self.m[3 * i + k] * o.m[3 * k + j];
                }
                out[3 * i + j] = s;
            }
        }
        RotMat { m: out }
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6])
    }

    /// Max absolute deviation of R^T R from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.transpose().mul(self);
        let mut err: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                err = err.max((g.m[3 * i + j] - expect).abs());
            }
        }
        err
    }

    pub fn rot_x(angle: f64) -> RotMat {
        Quat::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), angle).to_rotation_matrix()
    }

    pub fn rot_y(angle: f64) -> RotMat {
        Quat::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), angle).to_rotation_matrix()
    }

    pub fn rot_z(angle: f64) -> RotMat {
        Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), angle).to_rotation_matrix()
    }
}

// ---------------------------------------------------------------------------
// Rot6D
// ---------------------------------------------------------------------------

/// Continuous 6D rotation encoding: first two matrix columns, column-first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot6D {
    pub v: [f64; 6],
}

/// Encodes a rotation matrix as its first two columns.
pub fn rot_to_6d(r: &RotMat) -> Rot6D {
    let c0 = r.col(0);
    let c1 = r.col(1);
    Rot6D { v: [c0.x, c0.y, c0.z, c1.x, c1.y, c1.z] }
}

/// Recovers a rotation matrix by Gram-Schmidt on the two encoded columns.
pub fn sixd_to_rot(v: &Rot6D) -> Result<RotMat, GeomError> {
    let a = Vec3::new(v.v[0], v.v[1], v.v[2]);
    let b = Vec3::new(v.v[3], v.v[4], v.v[5]);
    if a.norm() <= 1e-6 {
        return Err(GeomError::DegenerateInput);
    }
    let c0 = a.normalized();
    let b_orth = b - c0.scale(c0.dot(b));
    if b_orth.norm() <= 1e-6 {
        return Err(GeomError::DegenerateInput);
    }
    let c1 = b_orth.normalized();
    let c2 = c0.cross(c1);
    Ok(RotMat::from_cols(c0, c1, c2))
}

// ---------------------------------------------------------------------------
// Pose
// ---------------------------------------------------------------------------

/// World position plus world-from-local orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

impl Pose {
    pub const IDENTITY: Pose = Pose { position: Vec3::ZERO, orientation: Quat::IDENTITY };

    pub fn new(position: Vec3, orientation: Quat) -> Self {
        Pose { position, orientation }
    }
}

// ---------------------------------------------------------------------------
// Cubic interpolation
// ---------------------------------------------------------------------------

/// One-dimensional cubic spline interpolant through (t_i, y_i) knots.
///
/// Uses not-a-knot end conditions, so any data that came from a single
/// polynomial of degree <= 3 is reproduced exactly across the whole span.
pub struct CubicSpline {
    t: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn fit(t: &[f64], y: &[f64]) -> Result<Self, GeomError> {
        let n = t.len();
        if n < 4 {
            return Err(GeomError::InsufficientKnots { got: n });
        }
        assert_eq!(t.len(), y.len());
        for w in t.windows(2) {
            if w[1] <= w[0] {
                return Err(GeomError::NonMonotonicTimes);
            }
        }

        let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        // Tridiagonal system for interior second derivatives m[1..n-1],
        // with the not-a-knot rows folded into the first and last equations.
        let k = n - 2;
        let mut sub = vec![0.0; k];
        let mut diag = vec![0.0; k];
        let mut sup = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for i in 1..=k {
            rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        // interior rows
        for i in 1..=k {
            sub[i - 1] = h[i - 1];
            diag[i - 1] = 2.0 * (h[i - 1] + h[i]);
            sup[i - 1] = h[i];
        }
        // not-a-knot at the left end: m0 = (1 + h0/h1) m1 - (h0/h1) m2
        let r0 = h[0] / h[1];
        diag[0] += h[0] * (1.0 + r0);
        sup[0] -= h[0] * r0;
        // not-a-knot at the right end
        let r1 = h[n - 2] / h[n - 3];
        diag[k - 1] += h[n - 2] * (1.0 + r1);
        sub[k - 1] -= h[n - 2] * r1;

        // Thomas solve
        for i in 1..k {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m_inner = vec![0.0; k];
        m_inner[k - 1] = rhs[k - 1] / diag[k - 1];
        for i in (0..k - 1).rev() {
            m_inner[i] = (rhs[i] - sup[i] * m_inner[i + 1]) / diag[i];
        }

        let mut m = vec![0.0; n];
        m[1..=k].copy_from_slice(&m_inner);
        m[0] = (1.0 + r0) * m[1] - r0 * m[2];
        m[n - 1] = (1.0 + r1) * m[n - 2] - r1 * m[n - 3];

        Ok(CubicSpline { t: t.to_vec(), y: y.to_vec(), m })
    }

    /// Index of the knot interval containing `x`.
    fn segment(&self, x: f64) -> Result<usize, GeomError> {
        let lo = self.t[0];
        let hi = *self.t.last().unwrap();
        if x < lo || x > hi {
            return Err(GeomError::OutOfRange { t: x, lo, hi });
        }
        // binary search for the last knot <= x
        let mut i = match self.t.binary_search_by(|probe| probe.partial_cmp(&x).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        if i == self.t.len() - 1 {
            i -= 1;
        }
        Ok(i)
    }

    pub fn eval(&self, x: f64) -> Result<f64, GeomError> {
        let i = self.segment(x)?;
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - x) / h;
        let b = (x - self.t[i]) / h;
        let h2 = h * h / 6.0;
        Ok(a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h2)
    }
}

/// Resamples a timestamped pose sequence at the given target times.
///
/// Positions follow a cubic spline per coordinate; orientations slerp
/// between the bracketing knots with a cubic-smoothstep parameter, so the
/// orientation track is C1 at the knots as well.
pub fn cubic_resample(
    times: &[f64],
    poses: &[Pose],
    target_times: &[f64],
) -> Result<Vec<Pose>, GeomError> {
    if times.len() < 4 {
        return Err(GeomError::InsufficientKnots { got: times.len() });
    }
    assert_eq!(times.len(), poses.len());
    let xs: Vec<f64> = poses.iter().map(|p| p.position.x).collect();
    let ys: Vec<f64> = poses.iter().map(|p| p.position.y).collect();
    let zs: Vec<f64> = poses.iter().map(|p| p.position.z).collect();
    let sx = CubicSpline::fit(times, &xs)?;
    let sy = CubicSpline::fit(times, &ys)?;
    let sz = CubicSpline::fit(times, &zs)?;

    let mut out = Vec::with_capacity(target_times.len());
    for &t in target_times {
        let pos = Vec3::new(sx.eval(t)?, sy.eval(t)?, sz.eval(t)?);
        let i = sx.segment(t)?;
        let u = (t - times[i]) / (times[i + 1] - times[i]);
        let s = u * u * (3.0 - 2.0 * u);
        let q = poses[i].orientation.slerp(poses[i + 1].orientation, s);
        out.push(Pose::new(pos, q));
    }
    Ok(out)
}
