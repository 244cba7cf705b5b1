//! Out-of-view training sequences from recordings.
//!
//! Per-recording signal streams (EKF orientations, resampled head poses,
//! assembled input rows) are computed once and shared; sequences are cheap
//! views over them, so sweeping the whole FOV augmentation grid costs only
//! the segmentation, not another copy of the signals.

use super::recording::Recording;
use crate::ekf::{ekf_run, EkfConfig, EkfError};
use crate::fov::{head_at_imu_times, head_knots_tracked, oov_mask, segment_mask, FovConfig, FovError};
use crate::frames::{input_row, prior_row, InputFrame, PriorFrame, PRIOR_LEN};
use crate::geom::{cubic_resample, rot_to_6d, GeomError, Pose, Quat};
use crate::rng::Rng;
use std::fmt;
use std::sync::Arc;

#[derive(Debug)]
pub enum DatasetError {
    BadFovGrid(f64),
    BadSplit { sum: f64 },
    EmptySplit(&'static str),
    NoSequences,
    Fov(FovError),
    Geom(GeomError),
    Ekf(EkfError),
}

impl fmt::Display for DatasetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetError::BadFovGrid(v) => write!(f, "fov value {v} outside (0, 360)"),
            DatasetError::BadSplit { sum } => write!(f, "split fractions sum to {sum}, not 1"),
            DatasetError::EmptySplit(which) => write!(f, "{which} split received no sessions"),
            DatasetError::NoSequences => write!(f, "no out-of-view sequences were produced"),
            DatasetError::Fov(e) => write!(f, "{e}"),
            DatasetError::Geom(e) => write!(f, "{e}"),
            DatasetError::Ekf(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for DatasetError {}

impl From<FovError> for DatasetError {
    fn from(e: FovError) -> Self {
        DatasetError::Fov(e)
    }
}

impl From<GeomError> for DatasetError {
    fn from(e: GeomError) -> Self {
        DatasetError::Geom(e)
    }
}

impl From<EkfError> for DatasetError {
    fn from(e: EkfError) -> Self {
        DatasetError::Ekf(e)
    }
}

/// Precomputed per-recording streams shared by every derived sequence.
#[derive(Debug)]
pub struct RecordingFeatures {
    pub session: u64,
    pub task: String,
    pub imu_rate: f64,
    /// Assembled network input rows, one per IMU sample.
    pub rows: Vec<InputFrame>,
    pub wrist_pos: Vec<[f64; 3]>,
    pub wrist_rot6d: Vec<[f64; 6]>,
    pub wrist_quat: Vec<Quat>,
    pub times: Vec<f64>,
    /// Wrist/head poses at in-span head-rate knots (prior source).
    pub knot_times: Vec<f64>,
    pub knot_wrist: Vec<Pose>,
    pub knot_head: Vec<Pose>,
    /// EKF orientation per IMU sample (baseline input).
    pub ekf_quats: Vec<Quat>,
    pub pinch_times: Vec<f64>,
}

/// Builds the shared streams for one recording.
pub fn compute_features(rec: &Recording) -> Result<RecordingFeatures, DatasetError> {
    let heads = head_at_imu_times(rec)?;
    let ekf_quats = ekf_run(&rec.imu, EkfConfig::default())?;
    let rows: Vec<InputFrame> = rec
        .imu
        .iter()
        .zip(heads.iter())
        .zip(ekf_quats.iter())
        .map(|((imu, head), q)| input_row(imu, head, &q.to_rotation_matrix()))
        .collect();
    let wrist_pos: Vec<[f64; 3]> = rec.wrist_gt.iter().map(|p| p.position.to_array()).collect();
    let wrist_rot6d: Vec<[f64; 6]> = rec
        .wrist_gt
        .iter()
        .map(|p| rot_to_6d(&p.orientation.to_rotation_matrix()).v)
        .collect();
    let wrist_quat: Vec<Quat> = rec.wrist_gt.iter().map(|p| p.orientation).collect();
    let times = rec.imu_times();

    // head-rate knots inside the IMU span carry the tracked wrist poses
    let last_imu_t = *times.last().unwrap();
    let knot_times: Vec<f64> =
        rec.head_times().into_iter().filter(|t| *t <= last_imu_t).collect();
    let knot_wrist = cubic_resample(&times, &rec.wrist_gt, &knot_times)?;
    let knot_head = rec.head_poses[..knot_times.len()].to_vec();

    Ok(RecordingFeatures {
        session: rec.meta.seed,
        task: rec.meta.task.clone(),
        imu_rate: rec.meta.imu_rate,
        rows,
        wrist_pos,
        wrist_rot6d,
        wrist_quat,
        times,
        knot_times,
        knot_wrist,
        knot_head,
        ekf_quats,
        pinch_times: rec.pinch_times.clone(),
    })
}

/// One out-of-view training/evaluation sequence: a view into the shared
/// feature streams plus its frozen prior.
#[derive(Debug, Clone)]
pub struct SequenceSample {
    pub features: Arc<RecordingFeatures>,
    /// IMU index of the first out-of-view sample.
    pub exit: usize,
    /// Row count, a multiple of the downsample factor.
    pub len: usize,
    pub prior: [PriorFrame; PRIOR_LEN],
    pub fov_deg: f64,
}

impl SequenceSample {
    pub fn x(&self) -> &[InputFrame] {
        &self.features.rows[self.exit..self.exit + self.len]
    }

    pub fn tau(&self) -> usize {
        self.len / 8
    }

    /// Target positions/rotations and timestamps at the downsampled output
    /// steps (every 8th IMU sample, at the end of each block).
    pub fn targets(&self) -> (Vec<[f64; 3]>, Vec<[f64; 6]>, Vec<f64>) {
        let steps = self.tau();
        let mut pos = Vec::with_capacity(steps);
        let mut rot = Vec::with_capacity(steps);
        let mut times = Vec::with_capacity(steps);
        for t in 1..=steps {
            let idx = self.exit + 8 * t - 1;
            pos.push(self.features.wrist_pos[idx]);
            rot.push(self.features.wrist_rot6d[idx]);
            times.push(self.features.times[idx]);
        }
        (pos, rot, times)
    }
}

/// Extracts the sequences one FOV value induces on a recording.
pub fn sequences_for_fov(
    features: &Arc<RecordingFeatures>,
    rec: &Recording,
    fov_deg: f64,
    max_samples: usize,
) -> Result<Vec<SequenceSample>, DatasetError> {
    let cfg = FovConfig::with_horizontal(fov_deg);
    let mask = oov_mask(rec, &cfg)?;
    let seg = segment_mask(rec, &mask)?;
    let knot_tracked = head_knots_tracked(rec, &mask);
    let mut out = Vec::new();
    for &(exit, reentry) in &seg.segments {
        let exit_t = features.times[exit];
        // last PRIOR_LEN *tracked* knots strictly before the exit; knots
        // inside an earlier out-of-view stretch carry no headset pose
        let usable: Vec<usize> = (0..features.knot_times.len())
            .filter(|&j| features.knot_times[j] < exit_t && knot_tracked.get(j).copied().unwrap_or(false))
            .collect();
        if usable.len() < PRIOR_LEN {
            continue;
        }
        let mut prior = [[0.0; 18]; PRIOR_LEN];
        for (slot, &j) in prior.iter_mut().zip(&usable[usable.len() - PRIOR_LEN..]) {
            *slot = prior_row(&features.knot_wrist[j], &features.knot_head[j]);
        }
        let raw_len = (reentry - exit).min(max_samples);
        let len = (raw_len / 8) * 8;
        if len < 8 {
            continue;
        }
        out.push(SequenceSample {
            features: Arc::clone(features),
            exit,
            len,
            prior,
            fov_deg,
        });
    }
    Ok(out)
}

/// The standard augmentation grid: 40 to 120 degrees in steps of 5.
pub fn default_fov_grid() -> Vec<f64> {
    (0..17).map(|i| 40.0 + 5.0 * i as f64).collect()
}

#[derive(Debug, Default)]
pub struct Dataset {
    pub train: Vec<SequenceSample>,
    pub val: Vec<SequenceSample>,
    pub test: Vec<SequenceSample>,
}

impl Dataset {
    pub fn total(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }
}

/// Assembles train/val/test sequence sets from recordings.
///
/// Every recording is segmented once per FOV value; splits are
/// session-disjoint (a recording's sequences all land in one split).
/// Assembly is a pure function of (recordings, grid, split, seed).
pub fn build_dataset(
    recordings: &[Recording],
    fov_grid: &[f64],
    split: (f64, f64, f64),
    seed: u64,
    max_samples: usize,
) -> Result<Dataset, DatasetError> {
    for &f in fov_grid {
        if !(0.0..360.0).contains(&f) || f == 0.0 {
            return Err(DatasetError::BadFovGrid(f));
        }
    }
    let sum = split.0 + split.1 + split.2;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(DatasetError::BadSplit { sum });
    }

    // session-disjoint split assignment
    let n = recordings.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = Rng::new(seed).fork("split");
    rng.shuffle(&mut order);
    let n_train = (split.0 * n as f64).round() as usize;
    let n_val = (split.1 * n as f64).round() as usize;
    let n_train = n_train.min(n);
    let n_val = n_val.min(n - n_train);

    let mut dataset = Dataset::default();
    for (rank, &rec_idx) in order.iter().enumerate() {
        let rec = &recordings[rec_idx];
        let features = Arc::new(compute_features(rec)?);
        let bucket: &mut Vec<SequenceSample> = if rank < n_train {
            &mut dataset.train
        } else if rank < n_train + n_val {
            &mut dataset.val
        } else {
            &mut dataset.test
        };
        for &fov in fov_grid {
            bucket.extend(sequences_for_fov(&features, rec, fov, max_samples)?);
        }
    }

    if split.0 > 0.0 && dataset.train.is_empty() {
        return Err(DatasetError::EmptySplit("train"));
    }
    if split.1 > 0.0 && dataset.val.is_empty() {
        return Err(DatasetError::EmptySplit("val"));
    }
    if split.2 > 0.0 && dataset.test.is_empty() {
        return Err(DatasetError::EmptySplit("test"));
    }
    if dataset.total() == 0 {
        return Err(DatasetError::NoSequences);
    }
    Ok(dataset)
}


// --- manifests ---

/// On-disk description of a dataset: which recordings, which FOV grid,
/// how to split. Building from a manifest is deterministic.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    /// Recording file names, relative to the manifest's directory.
    pub recordings: Vec<String>,
    pub fov_grid: Vec<f64>,
    pub split: (f64, f64, f64),
    pub seed: u64,
    pub max_seq_samples: usize,
}

impl DatasetManifest {
    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        let json = serde_json::to_vec_pretty(self).expect("manifest serialization");
        std::fs::write(path, json)
    }

    pub fn load(path: &std::path::Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        serde_json::from_slice(&bytes)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Loads every referenced recording (paths resolved against the
    /// manifest's directory).
    pub fn load_recordings(
        &self,
        manifest_path: &std::path::Path,
    ) -> Result<Vec<Recording>, super::recording::RecordingError> {
        let base = manifest_path.parent().unwrap_or(std::path::Path::new("."));
        self.recordings
            .iter()
            .map(|name| super::recording::load_recording(&base.join(name)))
            .collect()
    }

    pub fn build(&self, manifest_path: &std::path::Path) -> Result<Dataset, String> {
        let recordings = self.load_recordings(manifest_path).map_err(|e| e.to_string())?;
        build_dataset(
            &recordings,
            &self.fov_grid,
            self.split,
            self.seed,
            self.max_seq_samples,
        )
        .map_err(|e| e.to_string())
    }
}
