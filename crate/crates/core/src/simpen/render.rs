//! Analytic ray-cast renderer for the synthetic pen.

use image::{Rgb, RgbImage};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{FishField, PenWorld, SimError};
use crate::geometry::{ray_cylinder_first_hit, CameraIntrinsics};
use crate::globalpose::{camera_axes, camera_position, GlobalPose};
use crate::scalar::Real;

const BACKGROUND: [f64; 3] = [60.0, 95.0, 115.0];
const TWINE: [f64; 3] = [25.0, 32.0, 36.0];
const ROPE: [f64; 3] = [10.0, 14.0, 16.0];
const FISH: [f64; 3] = [120.0, 130.0, 135.0];

#[inline]
fn fmod_pos<R: Real>(x: R, m: R) -> R {
    x - (x / m).floor() * m
}

/// Render one RGB frame of the pen from the given pose.
///
/// Per pixel: cast the ray; a fish in front of the net shades flat fish
/// color, otherwise the cylinder hit shades net texture (dark twine on the
/// mesh lattice, ropes as thick dark bands, open water through the holes),
/// attenuated by `exp(-attenuation * range)`. Additive Gaussian pixel noise
/// comes from `rng`; with `pixel_sigma = 0` the output depends only on the
/// inputs, so repeated calls are bit-identical.
pub fn render_frame<R: Real>(
    world: &PenWorld<R>,
    fish: &FishField<R>,
    pose: &GlobalPose<R>,
    k: &CameraIntrinsics<R>,
    pixel_sigma: R,
    rng: &mut impl Rng,
) -> Result<RgbImage, SimError> {
    if pose.r >= world.pen_radius {
        return Err(SimError::PoseOutsidePen(
            pose.r.as_f64(),
            world.pen_radius.as_f64(),
        ));
    }
    let axes = camera_axes(pose);
    let origin = camera_position(pose);
    let att = world.water_attenuation;
    let t_sim = pose.t;
    let sigma = pixel_sigma.as_f64() * 255.0;
    let noise = if sigma > 0.0 {
        Some(Normal::new(0.0, sigma).expect("finite sigma"))
    } else {
        None
    };

    let mut img = RgbImage::new(k.width, k.height);
    for y in 0..k.height {
        for x in 0..k.width {
            let dir_cam = nalgebra::Vector3::new(
                (R::from_count(x as usize) - k.cx) / k.fx,
                (R::from_count(y as usize) - k.cy) / k.fy,
                R::one(),
            );
            let dir_pen = axes[0] * dir_cam.x + axes[1] * dir_cam.y + axes[2] * dir_cam.z;
            let dir_norm = dir_pen.norm();

            let t_net = ray_cylinder_first_hit(origin, dir_pen, world.pen_radius);
            let t_fish = fish.first_hit(origin, dir_pen, t_sim);

            let mut color = BACKGROUND;
            if let Some((tf, _)) = t_fish {
                if t_net.is_none_or(|tn| tf < tn) {
                    let range = (tf * dir_norm).as_f64();
                    let fade = (-att.as_f64() * range).exp();
                    color = [FISH[0] * fade, FISH[1] * fade, FISH[2] * fade];
                    put(&mut img, x, y, color, &noise, rng);
                    continue;
                }
            }
            if let Some(tn) = t_net {
                let hit = origin.to_vector() + dir_pen * tn;
                let z_hit = hit.z;
                if z_hit >= R::zero() && z_hit <= world.pen_depth {
                    let theta = hit.y.atan2(hit.x);
                    let arc = theta * world.pen_radius;
                    let range = (tn * dir_norm).as_f64();
                    let fade = (-att.as_f64() * range).exp();

                    let on_rope = world.rope_segments.iter().any(|rope| {
                        rope.surface_distance(theta, z_hit, world.pen_radius)
                            < rope.width / R::from_config(2.0)
                    });
                    if on_rope {
                        color = [ROPE[0] * fade, ROPE[1] * fade, ROPE[2] * fade];
                    } else {
                        let fu = fmod_pos(arc, world.grid_cell);
                        let fv = fmod_pos(z_hit, world.grid_cell);
                        let on_twine = fu < world.twine_width || fv < world.twine_width;
                        if on_twine {
                            color = [TWINE[0] * fade, TWINE[1] * fade, TWINE[2] * fade];
                        }
                        // else: open water behind the mesh hole.
                    }
                }
            }
            put(&mut img, x, y, color, &noise, rng);
        }
    }
    Ok(img)
}

#[inline]
fn put(
    img: &mut RgbImage,
    x: u32,
    y: u32,
    color: [f64; 3],
    noise: &Option<Normal<f64>>,
    rng: &mut impl Rng,
) {
    let mut px = [0u8; 3];
    for (i, c) in color.iter().enumerate() {
        let v = match noise {
            Some(n) => c + n.sample(rng),
            None => *c,
        };
        px[i] = v.round().clamp(0.0, 255.0) as u8;
    }
    img.put_pixel(x, y, Rgb(px));
}
