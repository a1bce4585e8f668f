//! Shared fixtures for the simulation-backed integration tests.

use netpen_core::geometry::CameraIntrinsics;
use netpen_core::globalpose::{camera_axes, camera_position, GlobalPose};
use netpen_core::image::DepthImage;
use netpen_core::simpen::PenWorld;

pub fn world() -> PenWorld<f64> {
    PenWorld {
        pen_radius: 25.0,
        pen_depth: 20.0,
        grid_cell: 0.02,
        twine_width: 0.004,
        rope_segments: vec![],
        water_attenuation: 0.25,
    }
}

pub fn vga_camera() -> CameraIntrinsics<f64> {
    CameraIntrinsics::new(800.0, 800.0, 320.0, 240.0, 640, 480).unwrap()
}

/// Analytic z-depth of the pen wall along the pixel ray of `(u, v)`.
pub fn cylinder_pixel_depth(
    world: &PenWorld<f64>,
    pose: &GlobalPose<f64>,
    k: &CameraIntrinsics<f64>,
    u: f64,
    v: f64,
) -> f64 {
    let axes = camera_axes(pose);
    let origin = camera_position(pose);
    let dir_cam = nalgebra::Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
    let dir_pen = axes[0] * dir_cam.x + axes[1] * dir_cam.y + axes[2] * dir_cam.z;
    netpen_core::geometry::ray_cylinder_first_hit(origin, dir_pen, world.pen_radius)
        .expect("pixel ray meets the pen wall")
}

/// Ideal dense depth image of the pen wall (every pixel valid).
#[allow(dead_code)] // not every integration test uses the dense variant
pub fn cylinder_depth_image(
    world: &PenWorld<f64>,
    pose: &GlobalPose<f64>,
    k: &CameraIntrinsics<f64>,
) -> DepthImage<f64> {
    DepthImage::from_fn(k.width, k.height, |u, v| {
        cylinder_pixel_depth(world, pose, k, u as f64, v as f64)
    })
}
