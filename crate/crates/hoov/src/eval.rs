//! Tracking metrics, report tables, the target-selection simulation, and
//! the dead-reckoning comparator.
//!
//! Position error is the Euclidean distance (reported in cm as MAE /
//! median / std); orientation error is the mean angle of the difference
//! rotation in degrees. Reports follow the standard table schema: pos
//! mean/median/std, per-task event means, rot mean/median/std, one row per
//! FOV condition, plus an error-over-time-outside curve with 5th/95th
//! percentile bands.

use crate::geom::{quat_angle_diff, sixd_to_rot, Pose, Quat, Vec3};
use crate::model::{HoovNet, PoseEstimate};
use crate::synth::dataset::SequenceSample;
use crate::synth::imu::GRAVITY;
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    LengthMismatch { lhs: usize, rhs: usize },
    EmptyInput,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::LengthMismatch { lhs, rhs } => {
                write!(f, "length mismatch: {lhs} vs {rhs}")
            }
            EvalError::EmptyInput => write!(f, "no samples to summarize"),
        }
    }
}

impl std::error::Error for EvalError {}

/// Per-step position (m) and rotation (deg) errors.
pub fn pose_errors(
    pred: &[PoseEstimate],
    gt: &[Pose],
) -> Result<Vec<(f64, f64)>, EvalError> {
    if pred.len() != gt.len() {
        return Err(EvalError::LengthMismatch { lhs: pred.len(), rhs: gt.len() });
    }
    Ok(pred
        .iter()
        .zip(gt.iter())
        .map(|(p, g)| {
            let pos_err = (p.position - g.position).norm();
            let rot_err = match sixd_to_rot(&p.rot6d) {
                Ok(m) => quat_angle_diff(Quat::from_rotation_matrix(&m), g.orientation),
                Err(_) => 180.0,
            };
            (pos_err, rot_err)
        })
        .collect())
}

/// Errors of one out-of-view segment, annotated for aggregation.
#[derive(Debug, Clone)]
pub struct SegmentErrors {
    pub task: String,
    /// (position error m, rotation error deg, seconds since FOV exit).
    pub errors: Vec<(f64, f64, f64)>,
    /// Position errors at pinch-event times inside the segment, meters.
    pub event_pos_errors: Vec<f64>,
}

/// One bucket of the error-over-time-outside curve.
#[derive(Debug, Clone)]
pub struct CurveBucket {
    pub t_lo: f64,
    pub t_hi: f64,
    pub count: usize,
    pub mean_cm: f64,
    pub median_cm: f64,
    pub p5_cm: f64,
    pub p95_cm: f64,
}

/// Aggregate report over all out-of-view samples of a condition.
#[derive(Debug, Clone)]
pub struct Report {
    pub samples: usize,
    pub mean_pos_cm: f64,
    pub median_pos_cm: f64,
    pub std_pos_cm: f64,
    pub mean_rot_deg: f64,
    pub median_rot_deg: f64,
    pub std_rot_deg: f64,
    /// Mean position error (cm) at event times, per task label.
    pub task_event_mean_cm: BTreeMap<String, f64>,
    pub curve: Vec<CurveBucket>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    // linear interpolation between order statistics
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Builds the aggregate report from per-segment errors.
pub fn summarize(segments: &[SegmentErrors], bucket_s: f64) -> Result<Report, EvalError> {
    let mut pos: Vec<f64> = Vec::new();
    let mut rot: Vec<f64> = Vec::new();
    for seg in segments {
        for &(p, r, _) in &seg.errors {
            pos.push(p * 100.0);
            rot.push(r);
        }
    }
    if pos.is_empty() {
        return Err(EvalError::EmptyInput);
    }

    // per-task means at event times
    let mut task_sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for seg in segments {
        for &e in &seg.event_pos_errors {
            let entry = task_sums.entry(seg.task.clone()).or_insert((0.0, 0));
            entry.0 += e * 100.0;
            entry.1 += 1;
        }
    }
    let task_event_mean_cm =
        task_sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();

    // error-over-time-outside curve
    let max_t = segments
        .iter()
        .flat_map(|s| s.errors.iter().map(|e| e.2))
        .fold(0.0f64, f64::max);
    let buckets = ((max_t / bucket_s).ceil() as usize).max(1);
    let mut curve = Vec::new();
    for b in 0..buckets {
        let lo = b as f64 * bucket_s;
        let hi = lo + bucket_s;
        let mut vals: Vec<f64> = segments
            .iter()
            .flat_map(|s| s.errors.iter())
            .filter(|e| e.2 >= lo && e.2 < hi)
            .map(|e| e.0 * 100.0)
            .collect();
        if vals.is_empty() {
            continue;
        }
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        curve.push(CurveBucket {
            t_lo: lo,
            t_hi: hi,
            count: vals.len(),
            mean_cm: mean(&vals),
            median_cm: quantile(&vals, 0.5),
            p5_cm: quantile(&vals, 0.05),
            p95_cm: quantile(&vals, 0.95),
        });
    }

    let mut pos_for_median = pos.clone();
    let mut rot_for_median = rot.clone();
    Ok(Report {
        samples: pos.len(),
        mean_pos_cm: mean(&pos),
        median_pos_cm: median(&mut pos_for_median),
        std_pos_cm: std_dev(&pos),
        mean_rot_deg: mean(&rot),
        median_rot_deg: median(&mut rot_for_median),
        std_rot_deg: std_dev(&rot),
        task_event_mean_cm,
        curve,
    })
}

/// Runs the model over sequences and collects per-segment errors.
pub fn evaluate_sequences(net: &HoovNet, seqs: &[SequenceSample]) -> Vec<SegmentErrors> {
    let mut out = Vec::new();
    for seq in seqs {
        let (_, _, times) = seq.targets();
        let Ok(est) = net.forward(seq.x(), &seq.prior, &times) else { continue };
        let gt: Vec<Pose> = (1..=seq.tau())
            .map(|t| {
                let idx = seq.exit + 8 * t - 1;
                Pose::new(
                    Vec3::from_array(seq.features.wrist_pos[idx]),
                    seq.features.wrist_quat[idx],
                )
            })
            .collect();
        let Ok(errors) = pose_errors(&est, &gt) else { continue };
        let exit_t = seq.features.times[seq.exit];
        let annotated: Vec<(f64, f64, f64)> = errors
            .iter()
            .zip(times.iter())
            .map(|(&(p, r), &t)| (p, r, t - exit_t))
            .collect();
        let event_pos_errors = event_errors(seq, &est, &times);
        out.push(SegmentErrors {
            task: seq.features.task.clone(),
            errors: annotated,
            event_pos_errors,
        });
    }
    out
}

/// Position error at the output step nearest each pinch event inside the
/// segment's span.
fn event_errors(seq: &SequenceSample, est: &[PoseEstimate], times: &[f64]) -> Vec<f64> {
    let t0 = seq.features.times[seq.exit];
    let t1 = seq.features.times[seq.exit + seq.len - 1];
    let mut out = Vec::new();
    for &pt in &seq.features.pinch_times {
        if pt < t0 || pt > t1 {
            continue;
        }
        let step = times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - pt).abs().partial_cmp(&(b.1 - pt).abs()).unwrap())
            .map(|(i, _)| i);
        if let Some(i) = step {
            let idx = seq.exit + 8 * (i + 1) - 1;
            let gt = Vec3::from_array(seq.features.wrist_pos[idx]);
            out.push((est[i].position - gt).norm());
        }
    }
    out
}

/// Dead-reckoning comparator: EKF orientation plus gravity-compensated
/// double integration, seeded with the last tracked pose and the velocity
/// of the last two tracked knots. Returns positions at the model's output
/// steps, so the two methods are scored on identical timestamps.
pub fn dead_reckoning_positions(seq: &SequenceSample) -> Vec<[f64; 3]> {
    let f = &seq.features;
    let dt = 1.0 / f.imu_rate;
    // prior rows: [wrist_pos(3) | wrist_rot6d(6) | head...]; rows are
    // chronological, so the last row is the most recent tracked pose
    let last = seq.prior[crate::frames::PRIOR_LEN - 1];
    let prev = seq.prior[crate::frames::PRIOR_LEN - 2];
    let p_last = Vec3::new(last[0], last[1], last[2]);
    let p_prev = Vec3::new(prev[0], prev[1], prev[2]);
    // knots are head-rate spaced
    let knot_dt = 1.0 / 70.0;
    let mut v = (p_last - p_prev).scale(1.0 / knot_dt);
    if !v.is_finite() {
        v = Vec3::ZERO;
    }
    let mut p = p_last;
    let mut out = Vec::with_capacity(seq.tau());
    for k in 0..seq.len {
        let idx = seq.exit + k;
        let row = &f.rows[idx];
        let accel_sensor = Vec3::new(row[0], row[1], row[2]);
        let a_world =
            f.ekf_quats[idx].rotate(accel_sensor) - Vec3::new(0.0, 0.0, GRAVITY);
        v = v + a_world.scale(dt);
        p = p + v.scale(dt);
        if (k + 1) % 8 == 0 {
            out.push(p.to_array());
        }
    }
    out
}

/// Mean position error (m) of the dead-reckoning comparator over sequences,
/// evaluated at the model's output timestamps.
pub fn dead_reckoning_mae(seqs: &[SequenceSample]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for seq in seqs {
        let est = dead_reckoning_positions(seq);
        let (tp, _, _) = seq.targets();
        for (e, t) in est.iter().zip(tp.iter()) {
            let d = Vec3::from_array(*e) - Vec3::from_array(*t);
            sum += d.norm();
            n += 1;
        }
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Mean model position error (m) over sequences.
pub fn model_mae(net: &HoovNet, seqs: &[SequenceSample]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for seq in seqs {
        let (tp, _, times) = seq.targets();
        let Ok(est) = net.forward(seq.x(), &seq.prior, &times) else { continue };
        for (e, t) in est.iter().zip(tp.iter()) {
            sum += (e.position - Vec3::from_array(*t)).norm();
            n += 1;
        }
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// The 17-target selection grid: two spherical shells around the shoulder
/// (full arm length and half arm length), three sagittal angles and three
/// elevations at 30-degree spacing toward the user's right, minus the
/// closer center target.
pub fn target_grid(arm_len: f64, shoulder_height: f64) -> Vec<Vec3> {
    let shoulder = Vec3::new(0.0, 0.0, shoulder_height);
    let mut out = Vec::with_capacity(17);
    let angles = [-30f64.to_radians(), 0.0, 30f64.to_radians()];
    for (li, &r) in [arm_len, arm_len / 2.0].iter().enumerate() {
        for &az in &angles {
            for &el in &angles {
                if li == 1 && az == 0.0 && el == 0.0 {
                    continue; // the closer center location is excluded
                }
                let dir = Vec3::new(
                    az.sin() * el.cos(),
                    -az.cos() * el.cos(),
                    el.sin(),
                );
                out.push(shoulder + dir.scale(r));
            }
        }
    }
    out
}

/// Fraction of events whose nearest grid target matches the true target.
pub fn selection_success(estimates: &[Vec3], true_targets: &[usize], grid: &[Vec3]) -> f64 {
    assert_eq!(estimates.len(), true_targets.len());
    if estimates.is_empty() {
        return 0.0;
    }
    let hits = estimates
        .iter()
        .zip(true_targets.iter())
        .filter(|(e, &t)| nearest_target(**e, grid) == t)
        .count();
    hits as f64 / estimates.len() as f64
}

pub fn nearest_target(p: Vec3, grid: &[Vec3]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, g) in grid.iter().enumerate() {
        let d = (p - *g).norm();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

// --- report writers ---

const TABLE_COLUMNS: &str =
    "condition,mean_pos_cm,median_pos_cm,std_pos_cm,mean_drop_cm,mean_grab_cm,mean_comp_cm,mean_rot_deg,median_rot_deg,std_rot_deg";

fn task_cell(report: &Report, task: &str) -> String {
    report
        .task_event_mean_cm
        .get(task)
        .map(|v| format!("{v:.2}"))
        .unwrap_or_default()
}

pub fn write_report_csv(rows: &[(String, Report)], path: &Path) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{TABLE_COLUMNS}")?;
    for (label, r) in rows {
        writeln!(
            f,
            "{label},{:.2},{:.2},{:.2},{},{},{},{:.2},{:.2},{:.2}",
            r.mean_pos_cm,
            r.median_pos_cm,
            r.std_pos_cm,
            task_cell(r, "drop"),
            task_cell(r, "grab"),
            task_cell(r, "compound"),
            r.mean_rot_deg,
            r.median_rot_deg,
            r.std_rot_deg,
        )?;
    }
    Ok(())
}

pub fn write_report_markdown(rows: &[(String, Report)], path: &Path) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(
        f,
        "| condition | mean pos. | median pos. | std. pos. | mean DROP | mean GRAB | mean COMP. | mean rot. | median rot. | std. rot. |"
    )?;
    writeln!(f, "|---|---|---|---|---|---|---|---|---|---|")?;
    for (label, r) in rows {
        writeln!(
            f,
            "| {label} | {:.2} | {:.2} | {:.2} | {} | {} | {} | {:.2} | {:.2} | {:.2} |",
            r.mean_pos_cm,
            r.median_pos_cm,
            r.std_pos_cm,
            task_cell(r, "drop"),
            task_cell(r, "grab"),
            task_cell(r, "compound"),
            r.mean_rot_deg,
            r.median_rot_deg,
            r.std_rot_deg,
        )?;
    }
    Ok(())
}

pub fn write_curve_csv(report: &Report, path: &Path) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "t_lo_s,t_hi_s,count,mean_cm,median_cm,p5_cm,p95_cm")?;
    for b in &report.curve {
        writeln!(
            f,
            "{:.2},{:.2},{},{:.3},{:.3},{:.3},{:.3}",
            b.t_lo, b.t_hi, b.count, b.mean_cm, b.median_cm, b.p5_cm, b.p95_cm
        )?;
    }
    Ok(())
}
