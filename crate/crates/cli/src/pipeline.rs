//! End-to-end pipeline: per frame, in timestamp order,
//! spectral priors -> point pose -> depth completion -> depth-map pose ->
//! global fusion -> map insertion and cylinder stacking; acoustic
//! comparison estimates come from the recorded sensor stream. Per-frame
//! failures degrade the frame rather than aborting the run.

use std::path::Path;
use std::time::Instant;

use log::{debug, info};

use netpen_core::depthfill::complete_depth;
use netpen_core::geometry::wrap_angle;
use netpen_core::globalpose::{
    fuse_frame, write_pose_csv, write_pose_jsonl, BodyVelocity, GlobalPose, PoseRecord,
};
use netpen_core::image::{load_png, GrayImage};
use netpen_core::mapping::{
    export_map, insert_depth_image, map_to_cloud, project_to_cylinder, write_ply,
    ColoredPointCloud, InverseSensorModel, OccupancyMap, PlyFormat,
};
use netpen_core::netfft::{extract_priors, priors_to_points};
use netpen_core::relpose::{
    relpose_from_depthmap, relpose_from_dvl_beams, relpose_from_points, DvlBeamGeometry,
};
use netpen_core::simpen::{load_dataset, Dataset};

use crate::report::{
    rmse_optional, timing_percentiles, FrameRecord, RunReport, StageTimings, Summary,
    TimingSummary,
};
use crate::{io_err, PipelineConfig, PipelineError};

fn ms(from: Instant) -> f64 {
    from.elapsed().as_secs_f64() * 1000.0
}

/// Run the pipeline over a dataset directory and write all artifacts into
/// `out_dir`: `poses.csv`, `poses.jsonl`, `report.json`, `cloud.ply`,
/// `map.bin`, `map_occupied.ply`, and optionally per-frame depth rasters.
pub fn run_pipeline(
    dataset_dir: &Path,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<RunReport, PipelineError> {
    let dataset = load_dataset(dataset_dir).map_err(|e| PipelineError::Dataset(e.to_string()))?;
    let fft_cfg = config.fft_config()?;
    let strategy = config.completion_strategy()?;
    let k = dataset
        .scenario
        .intrinsics::<f64>()
        .map_err(|e| PipelineError::Dataset(e.to_string()))?;
    let pen_radius = dataset.scenario.world.pen_radius;
    let pen_depth = dataset.scenario.world.pen_depth;
    let dt_nominal = dataset.scenario.sim.dt;
    let geometry = DvlBeamGeometry::standard();

    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let depth_dir = out_dir.join("depth");
    if config.output.depth_rasters {
        std::fs::create_dir_all(&depth_dir).map_err(io_err(&depth_dir))?;
    }

    let model = InverseSensorModel {
        hit_logodds: config.map.hit_logodds,
        miss_logodds: config.map.miss_logodds,
        max_ray_range: config.map.max_ray_range,
    };
    model
        .validate()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let mut map = if config.map.enabled {
        Some(
            OccupancyMap::for_pen(pen_radius, pen_depth, config.map.leaf_resolution)
                .map_err(|e| PipelineError::Config(e.to_string()))?,
        )
    } else {
        None
    };
    let mut cloud = config.cloud.enabled.then(ColoredPointCloud::<f64>::new);

    info!(
        "running pipeline over {} frames from {}",
        dataset.frames.len(),
        dataset_dir.display()
    );

    let mut frames: Vec<FrameRecord> = Vec::with_capacity(dataset.frames.len());
    let mut pose_records: Vec<PoseRecord> = Vec::with_capacity(dataset.frames.len());
    let mut prev_pose: Option<GlobalPose<f64>> = None;
    let mut prev_velocity: Option<BodyVelocity<f64>> = None;

    for frame in &dataset.frames {
        let sensors = &frame.sensors;
        let truth = &frame.truth;

        // Stage 1: spectral priors.
        let t_priors = Instant::now();
        let rgb = load_png(&frame.png_path)
            .map_err(|e| PipelineError::Runtime(format!("frame {}: {e}", frame.index)))?;
        let gray = GrayImage::<f64>::from_rgb_luma(&rgb);
        let priors = extract_priors(&gray, &k, &fft_cfg)
            .map_err(|e| PipelineError::Runtime(format!("frame {}: {e}", frame.index)))?;
        let pts = priors_to_points(&priors, &k)
            .map_err(|e| PipelineError::Runtime(format!("frame {}: {e}", frame.index)))?;
        let points: Vec<_> = pts.iter().map(|(p, _)| *p).collect();
        let weights: Vec<_> = pts.iter().map(|(_, w)| *w).collect();
        let priors_ms = ms(t_priors);

        // Stage 2: poses (vision points, acoustic comparison, fusion).
        let t_pose = Instant::now();
        let vision = if points.len() >= 3 {
            relpose_from_points(&points, Some(&weights)).ok()
        } else {
            None
        };
        let dvl_pose = relpose_from_dvl_beams(sensors.dvl_beams, &geometry).ok();

        let velocity = prev_velocity.unwrap_or(BodyVelocity {
            vx: 0.0,
            vy: 0.0,
            t: sensors.t,
        });
        let prev = prev_pose.unwrap_or_else(|| {
            // Virtual previous pose for the first frame: theta defined as 0,
            // radius seeded from the vision distance (the circle fit
            // replaces it anyway on a good frame).
            let seed_distance = vision
                .as_ref()
                .map(|p| p.distance)
                .unwrap_or(sensors.echo_range);
            GlobalPose {
                r: (pen_radius - seed_distance).clamp(0.0, pen_radius),
                theta: 0.0,
                z: sensors.pressure_depth,
                psi: 0.0,
                t: sensors.t - dt_nominal,
            }
        });
        let dt = (sensors.t - prev.t).max(1e-6);
        let outcome = fuse_frame(
            &prev,
            &velocity,
            &points,
            sensors.pressure_depth,
            pen_radius,
            dt,
        )
        .map_err(|e| PipelineError::Runtime(format!("frame {}: {e}", frame.index)))?;
        let pose_ms = ms(t_pose);

        // Stage 3: dense depth completion and its comparison pose.
        let t_depth = Instant::now();
        let depth = if priors.is_empty() {
            None
        } else {
            complete_depth(k.width, k.height, &priors, &k, &strategy)
                .map_err(|e| PipelineError::Runtime(format!("frame {}: {e}", frame.index)))
                .map(Some)?
        };
        let depth_pose = depth
            .as_ref()
            .and_then(|d| relpose_from_depthmap(d, &k, config.pose.depthmap_sample_stride).ok());
        let depth_ms = ms(t_depth);

        // Stage 4: mapping products from the estimated pose.
        let t_map = Instant::now();
        let skip_products = config.exclude_degraded && outcome.degraded;
        if !skip_products {
            if let (Some(map), Some(depth)) = (map.as_mut(), depth.as_ref()) {
                insert_depth_image(map, &outcome.pose, depth, &k, &model, config.map.ray_stride)
                    .map_err(|e| PipelineError::Runtime(format!("frame {}: {e}", frame.index)))?;
            }
            if let Some(cloud) = cloud.as_mut() {
                if outcome.pose.r < pen_radius {
                    let stacked = project_to_cylinder(
                        &rgb,
                        &outcome.pose,
                        &k,
                        pen_radius,
                        config.cloud.pixel_stride,
                        frame.index as u32,
                    )
                    .map_err(|e| PipelineError::Runtime(format!("frame {}: {e}", frame.index)))?;
                    cloud.extend(stacked);
                }
            }
        }
        if config.output.depth_rasters {
            if let Some(depth) = depth.as_ref() {
                let path = depth_dir.join(format!("{:06}.f32", frame.index));
                depth
                    .write_raster(&path)
                    .map_err(|e| PipelineError::Runtime(e.to_string()))?;
            }
        }
        let map_ms = ms(t_map);

        let timing = StageTimings {
            priors_ms,
            pose_ms,
            depth_ms,
            map_ms,
            total_ms: priors_ms + pose_ms + depth_ms + map_ms,
        };
        debug!(
            "frame {}: {} priors, degraded={}, {:.1} ms",
            frame.index,
            priors.len(),
            outcome.degraded,
            timing.total_ms
        );

        pose_records.push(PoseRecord::from_outcome(&outcome));
        frames.push(FrameRecord {
            index: frame.index,
            t: sensors.t,
            n_priors: priors.len(),
            distance_fft: vision.as_ref().map(|p| p.distance),
            yaw_fft: vision.as_ref().map(|p| p.yaw_rel),
            pitch_fft: vision.as_ref().map(|p| p.pitch_rel),
            distance_depthmap: depth_pose.as_ref().map(|p| p.distance),
            yaw_depthmap: depth_pose.as_ref().map(|p| p.yaw_rel),
            pitch_depthmap: depth_pose.as_ref().map(|p| p.pitch_rel),
            distance_dvl: dvl_pose.as_ref().map(|p| p.distance),
            yaw_dvl: dvl_pose.as_ref().map(|p| p.yaw_rel),
            pitch_dvl: dvl_pose.as_ref().map(|p| p.pitch_rel),
            distance_echo: sensors.echo_range,
            imu_yaw: sensors.imu_yaw,
            r: outcome.pose.r,
            theta: outcome.pose.theta,
            z: outcome.pose.z,
            psi: outcome.pose.psi,
            r_pred: outcome.r_pred,
            r_fit: (!outcome.degraded).then_some(outcome.pose.r),
            fit_residual: outcome.fit.as_ref().map(|f| f.rms_residual),
            degraded: outcome.degraded,
            truth_distance: truth.distance,
            truth_yaw: truth.yaw_rel,
            truth_pitch: truth.pitch_rel,
            truth_r: truth.r,
            truth_theta: truth.theta,
            truth_z: truth.z,
            truth_psi: truth.psi,
            timing,
        });

        prev_pose = Some(outcome.pose);
        prev_velocity = Some(BodyVelocity {
            vx: sensors.dvl_vx,
            vy: sensors.dvl_vy,
            t: sensors.t,
        });
    }

    let summary = summarize(&dataset, &frames);
    let report = RunReport {
        dataset_dir: dataset_dir.display().to_string(),
        frames,
        summary,
    };

    write_pose_csv(&out_dir.join("poses.csv"), &pose_records)
        .map_err(|e| PipelineError::Runtime(e.to_string()))?;
    write_pose_jsonl(&out_dir.join("poses.jsonl"), &pose_records)
        .map_err(|e| PipelineError::Runtime(e.to_string()))?;
    if let Some(cloud) = cloud.as_ref() {
        write_ply(cloud, &out_dir.join("cloud.ply"), PlyFormat::BinaryLittleEndian)
            .map_err(|e| PipelineError::Runtime(e.to_string()))?;
    }
    if let Some(map) = map.as_ref() {
        export_map(map, &out_dir.join("map.bin"))
            .map_err(|e| PipelineError::Runtime(e.to_string()))?;
        let surface = map_to_cloud(map, config.map.min_hits_occupied, (0.0, pen_depth));
        write_ply(
            &surface,
            &out_dir.join("map_occupied.ply"),
            PlyFormat::BinaryLittleEndian,
        )
        .map_err(|e| PipelineError::Runtime(e.to_string()))?;
    }
    report.save(&out_dir.join("report.json"))?;
    info!(
        "pipeline done: {} frames, {} degraded, median {:.1} ms/frame",
        report.summary.frame_count, report.summary.degraded_frames, report.summary.timing.total.p50_ms
    );
    Ok(report)
}

fn summarize(dataset: &Dataset, frames: &[FrameRecord]) -> Summary {
    let noise = &dataset.scenario.noise;
    // An acoustic reading is an outlier when it deviates from the analytic
    // truth by more than 3 sigma of its configured noise (floored so that
    // noise-free runs still use a meaningful gate).
    let dvl_gate = 3.0 * noise.dvl_range_sigma.max(0.01);
    let echo_gate = 3.0 * noise.echo_sigma.max(0.01);

    let mut outliers_dvl = 0usize;
    let mut outliers_echo = 0usize;
    for f in frames {
        if let Some(d) = f.distance_dvl {
            // The DVL closed form reports axial distance; compare like
            // against like.
            if (d - f.truth_distance).abs() > dvl_gate {
                outliers_dvl += 1;
            }
        }
        if (f.distance_echo - f.truth_distance).abs() > echo_gate {
            outliers_echo += 1;
        }
    }

    let mut timing = TimingSummary::default();
    let mut priors: Vec<f64> = frames.iter().map(|f| f.timing.priors_ms).collect();
    let mut pose: Vec<f64> = frames.iter().map(|f| f.timing.pose_ms).collect();
    let mut depth: Vec<f64> = frames.iter().map(|f| f.timing.depth_ms).collect();
    let mut map: Vec<f64> = frames.iter().map(|f| f.timing.map_ms).collect();
    let mut total: Vec<f64> = frames.iter().map(|f| f.timing.total_ms).collect();
    timing.priors = timing_percentiles(&mut priors);
    timing.pose = timing_percentiles(&mut pose);
    timing.depth = timing_percentiles(&mut depth);
    timing.map = timing_percentiles(&mut map);
    timing.total = timing_percentiles(&mut total);

    Summary {
        frame_count: frames.len(),
        degraded_frames: frames.iter().filter(|f| f.degraded).count(),
        acoustic_outliers_dvl: outliers_dvl,
        acoustic_outliers_echo: outliers_echo,
        rmse_distance_fft: rmse_optional(
            frames.iter().map(|f| (f.distance_fft, f.truth_distance)),
        ),
        rmse_distance_depthmap: rmse_optional(
            frames
                .iter()
                .map(|f| (f.distance_depthmap, f.truth_distance)),
        ),
        rmse_distance_dvl: rmse_optional(
            frames.iter().map(|f| (f.distance_dvl, f.truth_distance)),
        ),
        rmse_distance_echo: rmse_optional(
            frames
                .iter()
                .map(|f| (Some(f.distance_echo), f.truth_distance)),
        ),
        rmse_yaw_fft: rmse_optional(frames.iter().map(|f| (f.yaw_fft, f.truth_yaw))),
        rmse_yaw_depthmap: rmse_optional(frames.iter().map(|f| (f.yaw_depthmap, f.truth_yaw))),
        rmse_yaw_dvl: rmse_optional(frames.iter().map(|f| (f.yaw_dvl, f.truth_yaw))),
        rmse_r: rmse_optional(frames.iter().map(|f| (Some(f.r), f.truth_r))),
        rmse_theta: rmse_optional(
            frames
                .iter()
                .map(|f| (Some(wrap_angle(f.theta - f.truth_theta) + f.truth_theta), f.truth_theta)),
        ),
        rmse_psi: rmse_optional(
            frames
                .iter()
                .map(|f| (Some(wrap_angle(f.psi - f.truth_psi) + f.truth_psi), f.truth_psi)),
        ),
        rmse_z: rmse_optional(frames.iter().map(|f| (Some(f.z), f.truth_z))),
        timing,
    }
}
