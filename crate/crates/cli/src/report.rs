//! Run report: per-frame estimates vs truth plus summary metrics.

use serde::{Deserialize, Serialize};

use crate::PipelineError;

/// Wall-clock cost of one frame, milliseconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub priors_ms: f64,
    pub pose_ms: f64,
    pub depth_ms: f64,
    pub map_ms: f64,
    pub total_ms: f64,
}

/// One frame of the report; estimate fields are absent where the producing
/// path failed on this frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub index: usize,
    pub t: f64,
    pub n_priors: usize,

    // Spectral-point path.
    pub distance_fft: Option<f64>,
    pub yaw_fft: Option<f64>,
    pub pitch_fft: Option<f64>,
    // Dense-depth path.
    pub distance_depthmap: Option<f64>,
    pub yaw_depthmap: Option<f64>,
    pub pitch_depthmap: Option<f64>,
    // Acoustic comparisons from the recorded sensor stream.
    pub distance_dvl: Option<f64>,
    pub yaw_dvl: Option<f64>,
    pub pitch_dvl: Option<f64>,
    pub distance_echo: f64,
    pub imu_yaw: f64,

    // Fused global pose.
    pub r: f64,
    pub theta: f64,
    pub z: f64,
    pub psi: f64,
    pub r_pred: f64,
    pub r_fit: Option<f64>,
    pub fit_residual: Option<f64>,
    pub degraded: bool,

    // Ground truth.
    pub truth_distance: f64,
    pub truth_yaw: f64,
    pub truth_pitch: f64,
    pub truth_r: f64,
    pub truth_theta: f64,
    pub truth_z: f64,
    pub truth_psi: f64,

    pub timing: StageTimings,
}

/// Percentiles of one timing stage over the run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingPercentiles {
    pub p50_ms: f64,
    pub p90_ms: f64,
    pub max_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub priors: TimingPercentiles,
    pub pose: TimingPercentiles,
    pub depth: TimingPercentiles,
    pub map: TimingPercentiles,
    pub total: TimingPercentiles,
}

/// Aggregate metrics of a run. RMSE fields are absent when the producing
/// path yielded no estimates at all.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub frame_count: usize,
    pub degraded_frames: usize,
    /// Readings deviating more than 3 sigma from the analytic truth.
    pub acoustic_outliers_dvl: usize,
    pub acoustic_outliers_echo: usize,
    pub rmse_distance_fft: Option<f64>,
    pub rmse_distance_depthmap: Option<f64>,
    pub rmse_distance_dvl: Option<f64>,
    pub rmse_distance_echo: Option<f64>,
    pub rmse_yaw_fft: Option<f64>,
    pub rmse_yaw_depthmap: Option<f64>,
    pub rmse_yaw_dvl: Option<f64>,
    pub rmse_r: Option<f64>,
    pub rmse_theta: Option<f64>,
    pub rmse_psi: Option<f64>,
    pub rmse_z: Option<f64>,
    pub timing: TimingSummary,
}

/// Full run report, serialized as `report.json` in the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset_dir: String,
    pub frames: Vec<FrameRecord>,
    pub summary: Summary,
}

impl RunReport {
    pub fn save(&self, path: &std::path::Path) -> Result<(), PipelineError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| PipelineError::Runtime(e.to_string()))?;
        std::fs::write(path, json).map_err(crate::io_err(path))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(crate::io_err(path))?;
        serde_json::from_str(&text)
            .map_err(|e| PipelineError::Runtime(format!("{}: {e}", path.display())))
    }

    /// Copy with every timing field zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        let mut copy = self.clone();
        for f in &mut copy.frames {
            f.timing = StageTimings::default();
        }
        copy.summary.timing = TimingSummary::default();
        copy
    }
}

/// RMSE between two equal-length series.
pub fn rmse(estimate: &[f64], truth: &[f64]) -> Result<f64, PipelineError> {
    if estimate.len() != truth.len() {
        return Err(PipelineError::Runtime(format!(
            "series length mismatch: {} vs {}",
            estimate.len(),
            truth.len()
        )));
    }
    if estimate.is_empty() {
        return Err(PipelineError::Runtime("empty series".into()));
    }
    let sum: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - t) * (e - t))
        .sum();
    Ok((sum / estimate.len() as f64).sqrt())
}

/// RMSE over frames where the estimate exists; `None` when it never does.
pub fn rmse_optional(pairs: impl Iterator<Item = (Option<f64>, f64)>) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (est, truth) in pairs {
        if let Some(e) = est {
            let d = e - truth;
            sum += d * d;
            count += 1;
        }
    }
    (count > 0).then(|| (sum / count as f64).sqrt())
}

pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let idx = ((sorted.len() as f64 - 1.0) * q.clamp(0.0, 1.0)).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

pub fn timing_percentiles(values: &mut [f64]) -> TimingPercentiles {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    TimingPercentiles {
        p50_ms: percentile(values, 0.5),
        p90_ms: percentile(values, 0.9),
        max_ms: percentile(values, 1.0),
    }
}
