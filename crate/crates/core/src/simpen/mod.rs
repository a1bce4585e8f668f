//! Synthetic net-pen world: an analytic cylinder wearing a periodic net
//! texture, ellipsoidal fish occluders, sensor simulators with fish-induced
//! outliers, and a net-following controller. Ground truth for every test in
//! the crate comes from here.
//!
//! The net texture is rendered analytically (no texture assets), which
//! guarantees the spectral content the patch detector assumes and makes the
//! pinhole period law exact. Fish are geometric occluders that affect both
//! the camera (texture blackout) and the acoustic sensors (short ranges),
//! the minimal mechanism reproducing both failure modes.

mod controller;
mod dataset;
mod fish;
mod render;
mod scenario;
mod sensors;

pub use controller::{settling_time, step_controller, ControllerConfig};
pub use dataset::{
    generate_dataset, load_dataset, Dataset, DatasetFrame, SensorRecord, TruthRecord,
};
pub use fish::{FishField, FishOccluder};
pub use render::render_frame;
pub use scenario::{
    CameraConfig, DiagonalRopeConfig, FishConfig, NoiseConfig, ScenarioConfig, SegmentConfig,
    SimConfig, TrajectoryConfig, WorldConfig,
};
pub use sensors::{net_relative_truth, sample_sensors, SensorFrame};

use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::{wrap_angle, GeometryError, Point2};
use crate::image::RasterError;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("pose at r = {0:.3} is outside the pen of radius {1:.3}")]
    PoseOutsidePen(f64, f64),
    #[error("setpoint {0:.3} m is unreachable inside a pen of radius {1:.3}")]
    UnreachableSetpoint(f64, f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset error at {path}: {reason}")]
    Dataset { path: PathBuf, reason: String },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A rope lying on the cylinder surface: linear in `(theta, z)` from
/// `(theta_a, z_a)` to `(theta_b, z_b)`. Vertical ropes keep theta fixed;
/// diagonal ropes interpolate both coordinates (a helical arc).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RopeSegment<R> {
    pub theta_a: R,
    pub z_a: R,
    pub theta_b: R,
    pub z_b: R,
    /// Band width on the surface, meters.
    pub width: R,
}

impl<R: Real> RopeSegment<R> {
    pub fn vertical(theta: R, z_top: R, z_bottom: R, width: R) -> Self {
        Self {
            theta_a: theta,
            z_a: z_top,
            theta_b: theta,
            z_b: z_bottom,
            width,
        }
    }

    /// Surface distance from the point `(theta, z)` to this segment, in the
    /// unrolled `(radius * theta, z)` plane.
    pub fn surface_distance(&self, theta: R, z: R, radius: R) -> R {
        // Local coordinates relative to the segment start; theta differences
        // are wrapped so segments near the seam behave.
        let du = radius * wrap_angle(theta - self.theta_a);
        let dv = z - self.z_a;
        let su = radius * wrap_angle(self.theta_b - self.theta_a);
        let sv = self.z_b - self.z_a;
        let p = Point2::new(du, dv);
        let s = Point2::new(su, sv);
        let len_sq = s.dot(s);
        if len_sq == R::zero() {
            return p.norm();
        }
        let t = (p.dot(s) / len_sq).clamp(R::zero(), R::one());
        (p - s * t).norm()
    }

    /// Point on the segment at parameter `t in [0, 1]` as `(theta, z)`.
    pub fn at(&self, t: R) -> (R, R) {
        let dtheta = wrap_angle(self.theta_b - self.theta_a);
        (
            wrap_angle(self.theta_a + dtheta * t),
            self.z_a + (self.z_b - self.z_a) * t,
        )
    }
}

/// Geometry and appearance of the synthetic pen.
#[derive(Debug, Clone, PartialEq)]
pub struct PenWorld<R> {
    /// Pen radius, meters.
    pub pen_radius: R,
    /// Net depth below the surface, meters.
    pub pen_depth: R,
    /// Net mesh pitch, meters.
    pub grid_cell: R,
    /// Twine thickness on the surface, meters.
    pub twine_width: R,
    /// Ropes on the cylinder surface.
    pub rope_segments: Vec<RopeSegment<R>>,
    /// Light attenuation, 1/meters.
    pub water_attenuation: R,
}

impl<R: Real> PenWorld<R> {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.pen_radius <= R::one() {
            return Err(SimError::InvalidConfig(format!(
                "pen radius {} must exceed 1 m",
                self.pen_radius.as_f64()
            )));
        }
        if !(self.grid_cell > R::zero() && self.grid_cell < R::from_config(0.1)) {
            return Err(SimError::InvalidConfig(format!(
                "grid cell {} outside (0, 0.1) m",
                self.grid_cell.as_f64()
            )));
        }
        if !(self.twine_width > R::zero() && self.twine_width < self.grid_cell) {
            return Err(SimError::InvalidConfig(
                "twine width must be positive and below the grid cell".into(),
            ));
        }
        if self.pen_depth <= R::zero() || self.water_attenuation < R::zero() {
            return Err(SimError::InvalidConfig(
                "pen depth must be positive and attenuation non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Ground-truth pose facing the net exactly outward-radially at the
    /// given net distance.
    pub fn outward_pose(&self, net_distance: R, theta: R, depth: R, t: R) -> crate::globalpose::GlobalPose<R> {
        crate::globalpose::GlobalPose {
            r: self.pen_radius - net_distance,
            theta,
            z: depth,
            psi: theta,
            t,
        }
    }
}

/// Sensor noise magnitudes; the fish-hit probability drives the acoustic
/// outlier mechanism. Values are validated once at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorNoise<R> {
    pub dvl_velocity_sigma: R,
    pub dvl_range_sigma: R,
    pub echo_sigma: R,
    pub pressure_sigma: R,
    /// Deterministic IMU yaw drift, rad/s.
    pub imu_yaw_drift_rate: R,
    /// Per beam per frame probability of returning a fish range instead of
    /// the net range.
    pub fish_hit_probability: R,
    /// Additive image noise, in [0, 1] luminance units.
    pub pixel_sigma: R,
}

impl<R: Real> SensorNoise<R> {
    pub fn noiseless() -> Self {
        Self {
            dvl_velocity_sigma: R::zero(),
            dvl_range_sigma: R::zero(),
            echo_sigma: R::zero(),
            pressure_sigma: R::zero(),
            imu_yaw_drift_rate: R::zero(),
            fish_hit_probability: R::zero(),
            pixel_sigma: R::zero(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let sigmas = [
            self.dvl_velocity_sigma,
            self.dvl_range_sigma,
            self.echo_sigma,
            self.pressure_sigma,
            self.pixel_sigma,
        ];
        if sigmas.iter().any(|s| *s < R::zero()) {
            return Err(SimError::InvalidConfig("noise sigmas must be >= 0".into()));
        }
        let p = self.fish_hit_probability;
        if p < R::zero() || p > R::one() {
            return Err(SimError::InvalidConfig(
                "fish_hit_probability outside [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rope_surface_distance_basics() {
        let rope = RopeSegment::vertical(0.0f64, 0.0, 10.0, 0.05);
        // Point on the rope line.
        assert!(rope.surface_distance(0.0, 5.0, 25.0) < 1e-12);
        // 0.1 rad away at radius 25 m: 2.5 m of arc.
        let d = rope.surface_distance(0.1, 5.0, 25.0);
        approx::assert_relative_eq!(d, 2.5, epsilon = 1e-9);
        // Beyond the end cap.
        let d = rope.surface_distance(0.0, 11.0, 25.0);
        approx::assert_relative_eq!(d, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_rope_points_stay_on_cylinder() {
        let rope = RopeSegment {
            theta_a: -0.1f64,
            z_a: 2.0,
            theta_b: 0.4,
            z_b: 9.0,
            width: 0.05,
        };
        for i in 0..=10 {
            let (theta, z) = rope.at(i as f64 / 10.0);
            let p = crate::geometry::cyl_to_cart(25.0, theta);
            let r = p.norm();
            assert!((r - 25.0).abs() < 1e-6);
            assert!((2.0..=9.0).contains(&z));
        }
    }

    #[test]
    fn world_validation() {
        let mut world = PenWorld {
            pen_radius: 25.0f64,
            pen_depth: 20.0,
            grid_cell: 0.02,
            twine_width: 0.004,
            rope_segments: vec![],
            water_attenuation: 0.25,
        };
        assert!(world.validate().is_ok());
        world.grid_cell = 0.2;
        assert!(world.validate().is_err());
        world.grid_cell = 0.02;
        world.pen_radius = 0.5;
        assert!(world.validate().is_err());
    }

    #[test]
    fn noise_validation() {
        let mut noise = SensorNoise::<f64>::noiseless();
        assert!(noise.validate().is_ok());
        noise.fish_hit_probability = 1.5;
        assert!(noise.validate().is_err());
        noise.fish_hit_probability = 0.2;
        noise.echo_sigma = -0.1;
        assert!(noise.validate().is_err());
    }
}
