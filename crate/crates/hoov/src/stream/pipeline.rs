//! The per-session processing pipeline, shared verbatim by the live TCP
//! service and offline batch inference; online/offline equivalence holds
//! by construction and is verified end to end in tests.
//!
//! Frames drive everything. Head poses accumulate into a short history;
//! IMU samples wait until the history brackets their timestamp (one knot
//! beyond, for the cubic segment), then run the EKF, the pinch detector,
//! and the tracking state machine. While the hand is out of view, every
//! eighth processed sample re-runs the estimator over the buffered input
//! sequence and emits the newest output step.

use super::protocol::{pose_from_wire, WireMsg};
use crate::ekf::{ekf_init, ekf_step, EkfConfig, EkfState, ImuSample};
use crate::fov::{FovConfig, FovGate, PoseSource, Tracker};
use crate::geom::{cubic_resample, Pose, Vec3};
use crate::model::HoovNet;
use crate::pinch::PinchDetector;
use crate::synth::recording::Recording;
use std::collections::VecDeque;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub ekf: EkfConfig,
    pub pinch: PinchDetector,
    /// A tracked pose older than this no longer counts as current, seconds.
    pub max_track_age: f64,
    /// Re-run the estimator after this many new out-of-view samples.
    pub infer_every: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            ekf: EkfConfig::default(),
            pinch: PinchDetector::default(),
            max_track_age: 0.05,
            infer_every: 8,
        }
    }
}

/// Uniform Catmull-Rom position + eased-slerp orientation between the two
/// middle knots; the causal local interpolation used on the live path.
fn interpolate_head(knots: &[(f64, Pose)], j: usize, t: f64) -> Pose {
    let p = |i: isize| -> Pose {
        let idx = i.clamp(0, knots.len() as isize - 1) as usize;
        knots[idx].1
    };
    let (t1, t2) = (knots[j].0, knots[j + 1].0);
    let u = ((t - t1) / (t2 - t1)).clamp(0.0, 1.0);
    let (p0, p1, p2, p3) = (
        p(j as isize - 1).position,
        p(j as isize).position,
        p(j as isize + 1).position,
        p(j as isize + 2).position,
    );
    let u2 = u * u;
    let u3 = u2 * u;
    let pos = (p1.scale(2.0)
        + (p2 - p0).scale(u)
        + (p0.scale(2.0) - p1.scale(5.0) + p2.scale(4.0) - p3).scale(u2)
        + (p1.scale(3.0) - p0 - p2.scale(3.0) + p3).scale(u3))
    .scale(0.5);
    let s = u * u * (3.0 - 2.0 * u);
    let q = p(j as isize).orientation.slerp(p(j as isize + 1).orientation, s);
    Pose::new(pos, q)
}

/// One streaming session: state machine plus model inference.
pub struct SessionPipeline {
    net: Arc<HoovNet>,
    cfg: PipelineConfig,
    ekf: Option<EkfState>,
    last_imu_t: Option<f64>,
    pinch: PinchDetector,
    tracker: Tracker,
    heads: VecDeque<(f64, Pose)>,
    pending_imu: VecDeque<ImuSample>,
    last_tracked: Option<(f64, Pose)>,
    buf_times: Vec<f64>,
    /// Samples dropped before the EKF could initialize.
    pub uninitialized_drops: u64,
}

impl SessionPipeline {
    pub fn new(net: Arc<HoovNet>, cfg: PipelineConfig) -> Self {
        let max_buffer = net.max_seq_samples(crate::synth::recording::IMU_RATE);
        Self {
            net,
            cfg: cfg.clone(),
            ekf: None,
            last_imu_t: None,
            pinch: cfg.pinch,
            tracker: Tracker::with_max_buffer(max_buffer.max(8)),
            heads: VecDeque::new(),
            pending_imu: VecDeque::new(),
            last_tracked: None,
            buf_times: Vec::new(),
            uninitialized_drops: 0,
        }
    }

    /// Feeds one frame; returns the frames emitted in response.
    pub fn handle(&mut self, msg: &WireMsg) -> Vec<WireMsg> {
        let mut out = Vec::new();
        match msg {
            WireMsg::HeadPose { t, pos, quat } => {
                self.heads.push_back((*t, pose_from_wire(*pos, *quat)));
                while self.heads.len() > 64 {
                    self.heads.pop_front();
                }
            }
            WireMsg::TrackedWrist { t, pos, quat } => {
                self.last_tracked = Some((*t, pose_from_wire(*pos, *quat)));
                // in-view pass-through: the headset pose is the output
                out.push(msg.clone());
            }
            WireMsg::Imu { t, accel, gyro } => {
                self.pending_imu.push_back(ImuSample {
                    t: *t,
                    accel: Vec3::new(accel[0] as f64, accel[1] as f64, accel[2] as f64),
                    gyro: Vec3::new(gyro[0] as f64, gyro[1] as f64, gyro[2] as f64),
                });
            }
            // estimator/pinch frames are outputs; ignore if echoed back
            WireMsg::PoseEstimate { .. } | WireMsg::PinchEvent { .. } => {}
        }
        self.drain_pending(&mut out);
        out
    }

    /// Bracketing knot index for time `t` such that the successor knot is
    /// also known (the cubic segment needs one knot of lookahead).
    fn bracket(&self, t: f64) -> Option<usize> {
        if self.heads.len() < 3 {
            return None;
        }
        let j = self.heads.iter().rposition(|(kt, _)| *kt <= t)?;
        if j + 2 < self.heads.len() && self.heads[j + 1].0 >= t {
            Some(j)
        } else {
            None
        }
    }

    fn drain_pending(&mut self, out: &mut Vec<WireMsg>) {
        while let Some(imu) = self.pending_imu.front().copied() {
            let Some(j) = self.bracket(imu.t) else { break };
            self.pending_imu.pop_front();
            let knots: Vec<(f64, Pose)> = self.heads.iter().copied().collect();
            let head = interpolate_head(&knots, j, imu.t);
            self.process_sample(&imu, &head, out);
        }
    }

    fn process_sample(&mut self, imu: &ImuSample, head: &Pose, out: &mut Vec<WireMsg>) {
        // orientation filter
        let ekf_state = match self.ekf.take() {
            Some(state) => {
                let dt = (imu.t - self.last_imu_t.unwrap_or(imu.t - 1.0 / 427.0))
                    .clamp(1e-6, 0.1);
                ekf_step(&state, imu, dt)
            }
            None => match ekf_init(imu.accel, self.cfg.ekf) {
                Ok(state) => state,
                Err(_) => {
                    self.uninitialized_drops += 1;
                    return;
                }
            },
        };
        self.last_imu_t = Some(imu.t);
        let ekf_rot = ekf_state.q.to_rotation_matrix();
        self.ekf = Some(ekf_state);

        // pinch detection runs in every state
        let (pinch, event) = self.pinch.update(imu);
        self.pinch = pinch;
        if let Some(ev) = event {
            out.push(WireMsg::PinchEvent { t: ev.t, score: ev.score as f32 });
        }

        // tracking status: the last headset pose, if still fresh
        let tracked_pose = self
            .last_tracked
            .filter(|(tt, _)| imu.t - *tt <= self.cfg.max_track_age)
            .map(|(_, p)| p);

        let was_buffer_len = self.tracker.buffer().len();
        let source = match self.tracker.step(tracked_pose.as_ref(), head, imu, &ekf_rot) {
            Ok(src) => src,
            Err(_) => {
                // exit before a full prior: stay on the headset source
                return;
            }
        };

        match source {
            PoseSource::Headset => {
                self.buf_times.clear();
            }
            PoseSource::Model => {
                if self.tracker.buffer().len() == 1 && was_buffer_len != 1 {
                    self.buf_times.clear();
                }
                self.buf_times.push(imu.t);
                if self.buf_times.len() > self.tracker.buffer().len() {
                    // the tracker slid its window; mirror it
                    let drop = self.buf_times.len() - self.tracker.buffer().len();
                    self.buf_times.drain(0..drop);
                }
                debug_assert_eq!(self.buf_times.len(), self.tracker.buffer().len());

                let len = self.tracker.buffer().len();
                if len.is_multiple_of(self.cfg.infer_every) {
                    if let Some(prior) = self.tracker.prior() {
                        let prior_rows: Vec<crate::frames::PriorFrame> = prior
                            .iter()
                            .map(|(w, h)| crate::frames::prior_row(w, h))
                            .collect();
                        let times: Vec<f64> = (1..=len / 8)
                            .map(|k| self.buf_times[8 * k - 1])
                            .collect();
                        if let Ok(est) = self.net.forward(self.tracker.buffer(), &prior_rows, &times) {
                            if let Some(last) = est.last() {
                                out.push(WireMsg::PoseEstimate {
                                    t: last.t,
                                    pos: [
                                        last.position.x as f32,
                                        last.position.y as f32,
                                        last.position.z as f32,
                                    ],
                                    rot6d: [
                                        last.rot6d.v[0] as f32,
                                        last.rot6d.v[1] as f32,
                                        last.rot6d.v[2] as f32,
                                        last.rot6d.v[3] as f32,
                                        last.rot6d.v[4] as f32,
                                        last.rot6d.v[5] as f32,
                                    ],
                                });
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Replays a recording as the frame stream a headset-plus-wristband rig
/// would produce: head poses at the headset rate, tracked wrist poses
/// while the wrist is inside the simulated FOV, IMU samples at the IMU
/// rate, merged in time order.
pub fn recording_to_frames(rec: &Recording, fov: &FovConfig) -> Vec<WireMsg> {
    let imu_times = rec.imu_times();
    let last_imu_t = *imu_times.last().expect("non-empty recording");
    let head_times = rec.head_times();
    let in_span: Vec<usize> =
        (0..head_times.len()).filter(|&j| head_times[j] <= last_imu_t).collect();
    let knot_times: Vec<f64> = in_span.iter().map(|&j| head_times[j]).collect();
    let wrist_at_knots =
        cubic_resample(&imu_times, &rec.wrist_gt, &knot_times).expect("resample wrist");

    // tag orders simultaneous frames: head pose, then tracked wrist, then imu
    let mut tagged: Vec<(f64, u8, WireMsg)> = Vec::new();
    let mut gate = FovGate::new();
    for (slot, &j) in in_span.iter().enumerate() {
        let t = head_times[j];
        let head = rec.head_poses[j];
        tagged.push((t, 0, WireMsg::head_pose(t, &head)));
        let wrist = wrist_at_knots[slot];
        if gate.step(&head, wrist.position, fov).unwrap_or(false) {
            tagged.push((t, 1, WireMsg::tracked_wrist(t, &wrist)));
        }
    }
    for (k, s) in rec.imu.iter().enumerate() {
        tagged.push((
            imu_times[k],
            2,
            WireMsg::Imu {
                t: imu_times[k],
                accel: [s.accel.x as f32, s.accel.y as f32, s.accel.z as f32],
                gyro: [s.gyro.x as f32, s.gyro.y as f32, s.gyro.z as f32],
            },
        ));
    }
    tagged.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    tagged.into_iter().map(|(_, _, m)| m).collect()
}

/// Offline batch inference: the exact pipeline the service runs, fed from
/// a recording instead of a socket.
pub fn infer_recording(
    net: &Arc<HoovNet>,
    rec: &Recording,
    fov: &FovConfig,
    cfg: &PipelineConfig,
) -> Vec<WireMsg> {
    let frames = recording_to_frames(rec, fov);
    let mut pipe = SessionPipeline::new(Arc::clone(net), cfg.clone());
    let mut out = Vec::new();
    for f in &frames {
        out.extend(pipe.handle(f));
    }
    out
}
