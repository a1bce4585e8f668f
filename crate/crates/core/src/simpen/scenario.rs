//! Scenario configuration: a human-readable TOML schema covering world,
//! camera, noise, fish, trajectory segments, and the simulation seed.
//!
//! All values are `f64` in the file; converters instantiate the generic
//! world/noise types at the working precision. Defaults describe the
//! reference inspection scenario: three net-following segments at 1.0 m,
//! 2.1 m, and 1.5 m commanded distance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, ControllerConfig, PenWorld, RopeSegment, SensorNoise, SimError};
use crate::geometry::CameraIntrinsics;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub pen_radius: f64,
    pub pen_depth: f64,
    pub grid_cell: f64,
    pub twine_width: f64,
    pub water_attenuation: f64,
    /// Evenly spaced vertical ropes around the pen.
    pub vertical_rope_count: u32,
    pub vertical_rope_width: f64,
    pub diagonal_ropes: Vec<DiagonalRopeConfig>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            pen_radius: 25.0,
            pen_depth: 20.0,
            grid_cell: 0.02,
            twine_width: 0.004,
            water_attenuation: 0.25,
            vertical_rope_count: 12,
            vertical_rope_width: 0.05,
            diagonal_ropes: vec![DiagonalRopeConfig::default()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagonalRopeConfig {
    pub theta_start_deg: f64,
    pub z_start: f64,
    pub theta_end_deg: f64,
    pub z_end: f64,
    pub width: f64,
}

impl Default for DiagonalRopeConfig {
    fn default() -> Self {
        Self {
            theta_start_deg: -8.0,
            z_start: 2.0,
            theta_end_deg: 30.0,
            z_end: 9.0,
            width: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            fx: 800.0,
            fy: 800.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub dvl_velocity_sigma: f64,
    pub dvl_range_sigma: f64,
    pub echo_sigma: f64,
    pub pressure_sigma: f64,
    pub imu_yaw_drift_rate: f64,
    pub fish_hit_probability: f64,
    pub pixel_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            dvl_velocity_sigma: 0.005,
            dvl_range_sigma: 0.03,
            echo_sigma: 0.03,
            pressure_sigma: 0.01,
            imu_yaw_drift_rate: 0.0,
            fish_hit_probability: 0.0,
            pixel_sigma: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FishConfig {
    pub count: u32,
    pub mean_half_length: f64,
    pub mean_speed: f64,
}

impl Default for FishConfig {
    fn default() -> Self {
        Self {
            count: 0,
            mean_half_length: 0.22,
            mean_speed: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    /// Commanded net distance, meters.
    pub distance: f64,
    /// Tangential speed, m/s.
    pub speed: f64,
    /// Commanded depth, meters.
    pub depth: f64,
    /// Segment duration, seconds.
    pub duration: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            distance: 1.0,
            speed: 0.25,
            depth: 5.0,
            duration: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryConfig {
    pub start_distance: f64,
    pub start_theta_deg: f64,
    pub start_depth: f64,
    pub segments: Vec<SegmentConfig>,
    pub controller_gain: f64,
    pub controller_max_surge: f64,
    pub controller_depth_gain: f64,
    pub controller_max_heave: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            start_distance: 1.0,
            start_theta_deg: 0.0,
            start_depth: 5.0,
            segments: vec![
                SegmentConfig {
                    distance: 1.0,
                    ..SegmentConfig::default()
                },
                SegmentConfig {
                    distance: 2.1,
                    ..SegmentConfig::default()
                },
                SegmentConfig {
                    distance: 1.5,
                    ..SegmentConfig::default()
                },
            ],
            controller_gain: 0.9,
            controller_max_surge: 0.6,
            controller_depth_gain: 0.8,
            controller_max_heave: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    /// Frame interval, seconds.
    pub dt: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { seed: 7, dt: 0.1 }
    }
}

/// Complete scenario description; `Default` is the reference three-segment
/// inspection run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub world: WorldConfig,
    pub camera: CameraConfig,
    pub noise: NoiseConfig,
    pub fish: FishConfig,
    pub trajectory: TrajectoryConfig,
    pub sim: SimConfig,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::InvalidConfig(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), SimError> {
        std::fs::write(path, self.to_toml_string()).map_err(io_err(path))
    }

    /// Total frame count over all segments.
    pub fn frame_count(&self) -> usize {
        self.trajectory
            .segments
            .iter()
            .map(|s| (s.duration / self.sim.dt).round() as usize)
            .sum()
    }

    pub fn world<R: Real>(&self) -> Result<PenWorld<R>, SimError> {
        let w = &self.world;
        let mut ropes = Vec::new();
        for i in 0..w.vertical_rope_count {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / w.vertical_rope_count.max(1) as f64;
            let theta = crate::geometry::wrap_angle(theta);
            ropes.push(RopeSegment::vertical(
                R::from_config(theta),
                R::zero(),
                R::from_config(w.pen_depth),
                R::from_config(w.vertical_rope_width),
            ));
        }
        for d in &w.diagonal_ropes {
            ropes.push(RopeSegment {
                theta_a: R::from_config(d.theta_start_deg.to_radians()),
                z_a: R::from_config(d.z_start),
                theta_b: R::from_config(d.theta_end_deg.to_radians()),
                z_b: R::from_config(d.z_end),
                width: R::from_config(d.width),
            });
        }
        let world = PenWorld {
            pen_radius: R::from_config(w.pen_radius),
            pen_depth: R::from_config(w.pen_depth),
            grid_cell: R::from_config(w.grid_cell),
            twine_width: R::from_config(w.twine_width),
            rope_segments: ropes,
            water_attenuation: R::from_config(w.water_attenuation),
        };
        world.validate()?;
        Ok(world)
    }

    pub fn intrinsics<R: Real>(&self) -> Result<CameraIntrinsics<R>, SimError> {
        let c = &self.camera;
        CameraIntrinsics::new(
            R::from_config(c.fx),
            R::from_config(c.fy),
            R::from_config(c.cx),
            R::from_config(c.cy),
            c.width,
            c.height,
        )
        .map_err(SimError::from)
    }

    pub fn sensor_noise<R: Real>(&self) -> Result<SensorNoise<R>, SimError> {
        let n = &self.noise;
        let noise = SensorNoise {
            dvl_velocity_sigma: R::from_config(n.dvl_velocity_sigma),
            dvl_range_sigma: R::from_config(n.dvl_range_sigma),
            echo_sigma: R::from_config(n.echo_sigma),
            pressure_sigma: R::from_config(n.pressure_sigma),
            imu_yaw_drift_rate: R::from_config(n.imu_yaw_drift_rate),
            fish_hit_probability: R::from_config(n.fish_hit_probability),
            pixel_sigma: R::from_config(n.pixel_sigma),
        };
        noise.validate()?;
        Ok(noise)
    }

    pub fn controller<R: Real>(&self) -> ControllerConfig<R> {
        let t = &self.trajectory;
        ControllerConfig {
            gain: R::from_config(t.controller_gain),
            max_surge: R::from_config(t.controller_max_surge),
            depth_gain: R::from_config(t.controller_depth_gain),
            max_heave: R::from_config(t.controller_max_heave),
            ..ControllerConfig::default()
        }
    }
}
