//! Sensor simulation: DVL beams and velocity, echosounder, pressure, IMU
//! yaw, plus analytic net-relative ground truth per frame.

use image::RgbImage;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{render_frame, FishField, PenWorld, SensorNoise, SimError};
use crate::geometry::{ray_cylinder_first_hit, wrap_angle, CameraIntrinsics};
use crate::globalpose::{camera_axes, camera_position, BodyVelocity, GlobalPose};
use crate::relpose::{DvlBeamGeometry, NetRelativePose};
use crate::scalar::Real;

/// Everything the vehicle records at one instant, plus ground truth.
#[derive(Debug, Clone)]
pub struct SensorFrame<R> {
    pub t: R,
    pub rgb: RgbImage,
    /// Beam ranges `[port, starboard, up, down]`, meters.
    pub dvl_beams: [R; 4],
    pub dvl_velocity: BodyVelocity<R>,
    pub echo_range: R,
    pub pressure_depth: R,
    pub imu_yaw: R,
    pub truth_global: GlobalPose<R>,
    pub truth_relative: NetRelativePose<R>,
}

/// Analytic net-relative pose of a camera pose inside the pen: axial
/// distance along the optical axis and the relative angles of the inward
/// surface normal at the axis hit point.
pub fn net_relative_truth<R: Real>(
    world: &PenWorld<R>,
    pose: &GlobalPose<R>,
) -> Result<NetRelativePose<R>, SimError> {
    if pose.r >= world.pen_radius {
        return Err(SimError::PoseOutsidePen(
            pose.r.as_f64(),
            world.pen_radius.as_f64(),
        ));
    }
    let axes = camera_axes(pose);
    let origin = camera_position(pose);
    let t = ray_cylinder_first_hit(origin, axes[2], world.pen_radius)
        .expect("horizontal axis ray inside the pen always meets the wall");
    let hit = origin.to_vector() + axes[2] * t;
    let horiz = hit.xy().norm();
    // Inward normal at the hit point, expressed in the camera frame.
    let n_pen = nalgebra::Vector3::new(-hit.x / horiz, -hit.y / horiz, R::zero());
    let n_cam_x = n_pen.dot(&axes[0]);
    let n_cam_y = n_pen.dot(&axes[1]);
    let n_cam_z = n_pen.dot(&axes[2]);
    Ok(NetRelativePose {
        distance: t,
        yaw_rel: n_cam_x.atan2(-n_cam_z),
        pitch_rel: n_cam_y.atan2(-n_cam_z),
    })
}

/// Exact acoustic ranges of the four DVL beams against the net cylinder
/// (no fish, no noise).
pub fn dvl_beam_truth<R: Real>(
    world: &PenWorld<R>,
    pose: &GlobalPose<R>,
    geometry: &DvlBeamGeometry<R>,
) -> [R; 4] {
    let axes = camera_axes(pose);
    let origin = camera_position(pose);
    let far = R::from_config(1e3);
    let mut out = [far; 4];
    for (i, dir_cam) in geometry.beam_dirs().iter().enumerate() {
        let dir_pen = axes[0] * dir_cam.x + axes[1] * dir_cam.y + axes[2] * dir_cam.z;
        if let Some(t) = ray_cylinder_first_hit(origin, dir_pen, world.pen_radius) {
            out[i] = t;
        }
    }
    out
}

/// Simulate one frame of sensor readings at the true pose and velocity.
///
/// Acoustic outliers: with probability `fish_hit_probability` a beam (or the
/// echosounder) returns the range to a randomly sampled fish instead of the
/// net. All randomness flows from `rng`, so identical seeds give identical
/// frames.
#[allow(clippy::too_many_arguments)]
pub fn sample_sensors<R: Real>(
    world: &PenWorld<R>,
    fish: &FishField<R>,
    true_pose: &GlobalPose<R>,
    true_velocity: &BodyVelocity<R>,
    noise: &SensorNoise<R>,
    k: &CameraIntrinsics<R>,
    rng: &mut impl Rng,
) -> Result<SensorFrame<R>, SimError> {
    noise.validate()?;
    let rgb = render_frame(world, fish, true_pose, k, noise.pixel_sigma, rng)?;
    let origin = camera_position(true_pose);
    let t_sim = true_pose.t;

    let gauss = |sigma: R, rng: &mut dyn rand::RngCore| -> f64 {
        let s = sigma.as_f64();
        if s > 0.0 {
            Normal::new(0.0, s).expect("finite sigma").sample(rng)
        } else {
            0.0
        }
    };
    let fish_range = |rng: &mut dyn rand::RngCore| -> Option<f64> {
        if fish.occluders.is_empty() {
            return None;
        }
        let idx = rng.gen_range(0..fish.occluders.len());
        let c = fish.occluders[idx].center(t_sim);
        Some((c - origin).norm().as_f64())
    };
    let hit_prob = noise.fish_hit_probability.as_f64();

    let geometry = DvlBeamGeometry::standard();
    let truth_beams = dvl_beam_truth(world, true_pose, &geometry);
    let mut dvl_beams = [R::zero(); 4];
    for (i, truth) in truth_beams.iter().enumerate() {
        let base = if hit_prob > 0.0 && rng.gen_bool(hit_prob) {
            fish_range(rng).unwrap_or(truth.as_f64())
        } else {
            truth.as_f64()
        };
        let sample = base + gauss(noise.dvl_range_sigma, rng);
        dvl_beams[i] = R::from_config(sample.max(0.01));
    }

    let echo_truth = {
        let axes = camera_axes(true_pose);
        ray_cylinder_first_hit(origin, axes[2], world.pen_radius)
            .map(|t| t.as_f64())
            .unwrap_or(1e3)
    };
    let echo_base = if hit_prob > 0.0 && rng.gen_bool(hit_prob) {
        fish_range(rng).unwrap_or(echo_truth)
    } else {
        echo_truth
    };
    let echo_range = R::from_config((echo_base + gauss(noise.echo_sigma, rng)).max(0.01));

    let pressure_depth =
        R::from_config(true_pose.z.as_f64() + gauss(noise.pressure_sigma, rng));
    let imu_yaw = wrap_angle(true_pose.psi + noise.imu_yaw_drift_rate * t_sim);
    let dvl_velocity = BodyVelocity {
        vx: true_velocity.vx + R::from_config(gauss(noise.dvl_velocity_sigma, rng)),
        vy: true_velocity.vy + R::from_config(gauss(noise.dvl_velocity_sigma, rng)),
        t: true_pose.t,
    };
    let truth_relative = net_relative_truth(world, true_pose)?;

    Ok(SensorFrame {
        t: true_pose.t,
        rgb,
        dvl_beams,
        dvl_velocity,
        echo_range,
        pressure_depth,
        imu_yaw,
        truth_global: *true_pose,
        truth_relative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_world() -> PenWorld<f64> {
        PenWorld {
            pen_radius: 25.0,
            pen_depth: 20.0,
            grid_cell: 0.02,
            twine_width: 0.004,
            rope_segments: vec![],
            water_attenuation: 0.25,
        }
    }

    fn small_k() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(80.0, 80.0, 32.0, 24.0, 64, 48).unwrap()
    }

    #[test]
    fn outward_truth_matches_geometry() {
        let world = test_world();
        let pose = world.outward_pose(1.5, 0.4, 6.0, 0.0);
        let rel = net_relative_truth(&world, &pose).unwrap();
        assert_relative_eq!(rel.distance, 1.5, epsilon = 1e-9);
        assert_relative_eq!(rel.yaw_rel, 0.0, epsilon = 1e-12);
        assert_relative_eq!(rel.pitch_rel, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn yawed_pose_truth_reports_the_offset() {
        let world = test_world();
        let mut pose = world.outward_pose(1.0, 0.0, 5.0, 0.0);
        let delta = 5f64.to_radians();
        pose.psi += delta;
        let rel = net_relative_truth(&world, &pose).unwrap();
        // Yawing the camera by +delta is a -delta rotation of the scene, so
        // yaw_rel reports +delta, shaved slightly by the wall's curvature.
        assert!(rel.yaw_rel > 0.0);
        assert!((rel.yaw_rel - delta).abs() < 1.5f64.to_radians());
        assert!(rel.distance > 1.0);
    }

    #[test]
    fn noiseless_sensors_equal_truth() {
        let world = test_world();
        let pose = world.outward_pose(1.0, 0.2, 5.0, 3.0);
        let vel = BodyVelocity {
            vx: 0.1,
            vy: 0.2,
            t: 3.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let frame = sample_sensors(
            &world,
            &FishField::empty(),
            &pose,
            &vel,
            &SensorNoise::noiseless(),
            &small_k(),
            &mut rng,
        )
        .unwrap();
        let geom = DvlBeamGeometry::standard();
        let truth = dvl_beam_truth(&world, &pose, &geom);
        for (got, want) in frame.dvl_beams.iter().zip(truth) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
        assert_relative_eq!(frame.echo_range, 1.0, epsilon = 1e-9);
        assert_eq!(frame.pressure_depth, 5.0);
        assert_eq!(frame.imu_yaw, pose.psi);
        assert_eq!(frame.dvl_velocity, vel);
        assert_eq!(frame.truth_global, pose);
    }

    #[test]
    fn forced_fish_hits_read_fish_range() {
        let world = test_world();
        let pose = world.outward_pose(2.0, 0.0, 5.0, 0.0);
        // One stationary fish 0.3 m ahead of the camera.
        let fish = FishField {
            occluders: vec![crate::simpen::FishOccluder {
                orbit_radius: 23.3,
                theta0: 0.0,
                angular_speed: 0.0,
                depth: 5.0,
                semi_axes: [0.2, 0.06, 0.1],
            }],
        };
        let noise = SensorNoise {
            fish_hit_probability: 1.0,
            ..SensorNoise::noiseless()
        };
        let vel = BodyVelocity {
            vx: 0.0,
            vy: 0.0,
            t: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let frame =
            sample_sensors(&world, &fish, &pose, &vel, &noise, &small_k(), &mut rng).unwrap();
        for beam in frame.dvl_beams {
            assert_relative_eq!(beam, 0.3, epsilon = 1e-9);
        }
        assert_relative_eq!(frame.echo_range, 0.3, epsilon = 1e-9);
    }

    #[test]
    fn outlier_rate_matches_binomial_statistics() {
        let world = test_world();
        let pose = world.outward_pose(1.5, 0.0, 5.0, 0.0);
        let fish = FishField {
            occluders: vec![crate::simpen::FishOccluder {
                orbit_radius: 20.0,
                theta0: 0.5,
                angular_speed: 0.02,
                depth: 5.0,
                semi_axes: [0.2, 0.06, 0.1],
            }],
        };
        let noise = SensorNoise {
            fish_hit_probability: 0.2,
            ..SensorNoise::noiseless()
        };
        let vel = BodyVelocity {
            vx: 0.0,
            vy: 0.0,
            t: 0.0,
        };
        // Tiny camera keeps the render cost negligible.
        let k = CameraIntrinsics::new(20.0, 20.0, 8.0, 6.0, 16, 12).unwrap();
        let geom = DvlBeamGeometry::standard();
        let truth = dvl_beam_truth(&world, &pose, &geom);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut outliers = [0usize; 4];
        let n = 1000;
        for _ in 0..n {
            let frame =
                sample_sensors(&world, &fish, &pose, &vel, &noise, &k, &mut rng).unwrap();
            for (i, beam) in frame.dvl_beams.iter().enumerate() {
                if (beam - truth[i]).abs() > 0.5 {
                    outliers[i] += 1;
                }
            }
        }
        for count in outliers {
            let fraction = count as f64 / n as f64;
            assert!(
                (fraction - 0.2).abs() <= 0.03,
                "outlier fraction {fraction}"
            );
        }
    }
}
