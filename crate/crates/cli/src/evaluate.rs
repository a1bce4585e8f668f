//! Metric evaluation and plot-ready CSV export from a run report.
//!
//! Distance and relative-orientation series carry both raw and smoothed
//! columns (the smoothing window is configurable); global pose, radial
//! error, and yaw comparison series stay raw. The yaw comparison shifts
//! both series so their initial values align, which removes the arbitrary
//! initial-yaw offset between the estimate and the IMU.

use std::path::Path;

use serde::{Deserialize, Serialize};

use netpen_core::geometry::angle_diff;

use crate::report::RunReport;
use crate::smooth::smooth_sparse;
use crate::{io_err, PipelineError};

/// Evaluation metrics, serialized as `metrics.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub frame_count: usize,
    pub degraded_frames: usize,
    pub acoustic_outliers_dvl: usize,
    pub acoustic_outliers_echo: usize,
    pub rmse_distance_fft: Option<f64>,
    pub rmse_distance_depthmap: Option<f64>,
    pub rmse_distance_dvl: Option<f64>,
    pub rmse_distance_echo: Option<f64>,
    pub rmse_yaw_fft_deg: Option<f64>,
    pub rmse_yaw_depthmap_deg: Option<f64>,
    pub rmse_yaw_dvl_deg: Option<f64>,
    pub rmse_r: Option<f64>,
    pub rmse_psi_deg: Option<f64>,
    pub rmse_z: Option<f64>,
    /// Largest |r_pred - r_fit| radial gap over the run.
    pub max_radial_gap: f64,
    /// Final aligned IMU-vs-estimate yaw residual, radians.
    pub final_yaw_residual: f64,
    /// Median end-to-end frame latency, milliseconds.
    pub median_frame_ms: f64,
}

fn series_or_nan(values: impl Iterator<Item = Option<f64>>) -> Vec<f64> {
    values.map(|v| v.unwrap_or(f64::NAN)).collect()
}

fn csv_cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn write_csv(path: &Path, header: &str, rows: Vec<Vec<f64>>) -> Result<(), PipelineError> {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(csv_cell).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Continuous (unwrapped) version of a wrapped angle series.
fn unwrap_angles(series: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let mut level = 0.0;
    for (i, v) in series.iter().enumerate() {
        if i == 0 {
            out.push(*v);
            continue;
        }
        level += angle_diff(*v, series[i - 1]);
        out.push(series[0] + level);
    }
    out
}

/// Evaluate a finished run directory: reads `report.json`, writes the five
/// figure CSVs plus `metrics.json`, and returns the metrics.
pub fn evaluate(out_dir: &Path, smoothing_window: usize) -> Result<Metrics, PipelineError> {
    let report = RunReport::load(&out_dir.join("report.json"))?;
    evaluate_report(&report, out_dir, smoothing_window)
}

pub fn evaluate_report(
    report: &RunReport,
    out_dir: &Path,
    smoothing_window: usize,
) -> Result<Metrics, PipelineError> {
    let frames = &report.frames;
    if frames.is_empty() {
        return Err(PipelineError::Runtime("report has no frames".into()));
    }
    let n = frames.len();
    let window = smoothing_window.min(if n.is_multiple_of(2) { n - 1 } else { n }).max(1);

    let t: Vec<f64> = frames.iter().map(|f| f.t).collect();

    // Distances: truth + four methods, raw and smoothed.
    let truth_d: Vec<f64> = frames.iter().map(|f| f.truth_distance).collect();
    let fft_d = series_or_nan(frames.iter().map(|f| f.distance_fft));
    let depth_d = series_or_nan(frames.iter().map(|f| f.distance_depthmap));
    let dvl_d = series_or_nan(frames.iter().map(|f| f.distance_dvl));
    let echo_d: Vec<f64> = frames.iter().map(|f| f.distance_echo).collect();
    let fft_s = smooth_sparse(&fft_d, window)?;
    let depth_s = smooth_sparse(&depth_d, window)?;
    let dvl_s = smooth_sparse(&dvl_d, window)?;
    let echo_s = smooth_sparse(&echo_d, window)?;
    write_csv(
        &out_dir.join("distances.csv"),
        "t,truth,fft_raw,fft_smooth,depthmap_raw,depthmap_smooth,dvl_raw,dvl_smooth,echo_raw,echo_smooth",
        (0..n)
            .map(|i| {
                vec![
                    t[i], truth_d[i], fft_d[i], fft_s[i], depth_d[i], depth_s[i], dvl_d[i],
                    dvl_s[i], echo_d[i], echo_s[i],
                ]
            })
            .collect(),
    )?;

    // Relative orientation.
    let truth_yaw: Vec<f64> = frames.iter().map(|f| f.truth_yaw).collect();
    let fft_yaw = series_or_nan(frames.iter().map(|f| f.yaw_fft));
    let depth_yaw = series_or_nan(frames.iter().map(|f| f.yaw_depthmap));
    let dvl_yaw = series_or_nan(frames.iter().map(|f| f.yaw_dvl));
    let fft_yaw_s = smooth_sparse(&fft_yaw, window)?;
    let depth_yaw_s = smooth_sparse(&depth_yaw, window)?;
    let dvl_yaw_s = smooth_sparse(&dvl_yaw, window)?;
    write_csv(
        &out_dir.join("angles.csv"),
        "t,truth_yaw,fft_raw,fft_smooth,depthmap_raw,depthmap_smooth,dvl_raw,dvl_smooth",
        (0..n)
            .map(|i| {
                vec![
                    t[i],
                    truth_yaw[i],
                    fft_yaw[i],
                    fft_yaw_s[i],
                    depth_yaw[i],
                    depth_yaw_s[i],
                    dvl_yaw[i],
                    dvl_yaw_s[i],
                ]
            })
            .collect(),
    )?;

    // Top-down trajectory.
    write_csv(
        &out_dir.join("trajectory_topdown.csv"),
        "t,x_est,y_est,x_true,y_true,z_est,z_true",
        frames
            .iter()
            .map(|f| {
                vec![
                    f.t,
                    f.r * f.theta.cos(),
                    f.r * f.theta.sin(),
                    f.truth_r * f.truth_theta.cos(),
                    f.truth_r * f.truth_theta.sin(),
                    f.z,
                    f.truth_z,
                ]
            })
            .collect(),
    )?;

    // Radial error: integrated prediction vs circle fit.
    let radial_gap: Vec<f64> = frames
        .iter()
        .map(|f| match f.r_fit {
            Some(fit) => (f.r_pred - fit).abs(),
            None => f64::NAN,
        })
        .collect();
    write_csv(
        &out_dir.join("radial_error.csv"),
        "t,r_pred,r_fit,abs_gap",
        (0..n)
            .map(|i| {
                vec![
                    t[i],
                    frames[i].r_pred,
                    frames[i].r_fit.unwrap_or(f64::NAN),
                    radial_gap[i],
                ]
            })
            .collect(),
    )?;

    // Yaw comparison: estimate vs IMU, both shifted so the initial values
    // align.
    let psi_est = unwrap_angles(&frames.iter().map(|f| f.psi).collect::<Vec<_>>());
    let imu = unwrap_angles(&frames.iter().map(|f| f.imu_yaw).collect::<Vec<_>>());
    let psi_aligned: Vec<f64> = psi_est.iter().map(|v| v - psi_est[0]).collect();
    let imu_aligned: Vec<f64> = imu.iter().map(|v| v - imu[0]).collect();
    let residual: Vec<f64> = psi_aligned
        .iter()
        .zip(&imu_aligned)
        .map(|(p, i)| i - p)
        .collect();
    write_csv(
        &out_dir.join("yaw_comparison.csv"),
        "t,psi_est_aligned,imu_aligned,residual",
        (0..n)
            .map(|i| vec![t[i], psi_aligned[i], imu_aligned[i], residual[i]])
            .collect(),
    )?;

    let to_deg = |v: Option<f64>| v.map(|x| x.to_degrees());
    let metrics = Metrics {
        frame_count: n,
        degraded_frames: report.summary.degraded_frames,
        acoustic_outliers_dvl: report.summary.acoustic_outliers_dvl,
        acoustic_outliers_echo: report.summary.acoustic_outliers_echo,
        rmse_distance_fft: report.summary.rmse_distance_fft,
        rmse_distance_depthmap: report.summary.rmse_distance_depthmap,
        rmse_distance_dvl: report.summary.rmse_distance_dvl,
        rmse_distance_echo: report.summary.rmse_distance_echo,
        rmse_yaw_fft_deg: to_deg(report.summary.rmse_yaw_fft),
        rmse_yaw_depthmap_deg: to_deg(report.summary.rmse_yaw_depthmap),
        rmse_yaw_dvl_deg: to_deg(report.summary.rmse_yaw_dvl),
        rmse_r: report.summary.rmse_r,
        rmse_psi_deg: to_deg(report.summary.rmse_psi),
        rmse_z: report.summary.rmse_z,
        max_radial_gap: radial_gap
            .iter()
            .filter(|v| !v.is_nan())
            .fold(0.0f64, |a, b| a.max(*b)),
        final_yaw_residual: *residual.last().expect("non-empty"),
        median_frame_ms: report.summary.timing.total.p50_ms,
    };
    let json =
        serde_json::to_string_pretty(&metrics).map_err(|e| PipelineError::Runtime(e.to_string()))?;
    std::fs::write(out_dir.join("metrics.json"), json).map_err(io_err(&out_dir.join("metrics.json")))?;
    Ok(metrics)
}

/// Plain-text metric table for terminal output.
pub fn metrics_table(m: &Metrics) -> String {
    let opt = |v: Option<f64>| match v {
        Some(x) => format!("{x:.4}"),
        None => "-".to_string(),
    };
    let mut s = String::new();
    s.push_str(&format!("frames                {}\n", m.frame_count));
    s.push_str(&format!("degraded frames       {}\n", m.degraded_frames));
    s.push_str(&format!(
        "acoustic outliers     dvl {} / echo {}\n",
        m.acoustic_outliers_dvl, m.acoustic_outliers_echo
    ));
    s.push_str(&format!(
        "distance rmse [m]     fft {} / depthmap {} / dvl {} / echo {}\n",
        opt(m.rmse_distance_fft),
        opt(m.rmse_distance_depthmap),
        opt(m.rmse_distance_dvl),
        opt(m.rmse_distance_echo)
    ));
    s.push_str(&format!(
        "rel. yaw rmse [deg]   fft {} / depthmap {} / dvl {}\n",
        opt(m.rmse_yaw_fft_deg),
        opt(m.rmse_yaw_depthmap_deg),
        opt(m.rmse_yaw_dvl_deg)
    ));
    s.push_str(&format!(
        "global rmse           r {} m / psi {} deg / z {} m\n",
        opt(m.rmse_r),
        opt(m.rmse_psi_deg),
        opt(m.rmse_z)
    ));
    s.push_str(&format!("max radial gap [m]    {:.4}\n", m.max_radial_gap));
    s.push_str(&format!(
        "final yaw residual    {:.3} deg\n",
        m.final_yaw_residual.to_degrees()
    ));
    s.push_str(&format!("median frame [ms]     {:.2}\n", m.median_frame_ms));
    s
}
