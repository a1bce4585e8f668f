//! Coordinate frames, pinhole camera model, and cylindrical/Cartesian
//! conversions shared by all other modules.
//!
//! # Frame conventions
//!
//! * **Camera frame**: `x` right, `y` down, `z` forward along the optical
//!   axis.
//! * **Pen frame**: origin on the pen axis at the water surface, `z` down
//!   (so `z` equals pressure-sensor depth directly). The angular coordinate
//!   of a horizontal position `(x, y)` is `theta = atan2(y, x)`, measured
//!   from the pen-frame x-axis toward the y-axis and wrapped to `(-pi, pi]`.
//! * The vehicle's global yaw `psi` is the horizontal direction of the
//!   optical axis in the pen frame; a camera facing the net exactly
//!   outward-radially has `psi = theta`.
//!
//! There is no lens distortion model: the simulator renders an ideal
//! pinhole, which keeps the vision math exactly invertible. All angles are
//! radians; [`wrap_angle`] is the single source of truth for angle
//! normalization and [`angle_diff`] for wrapped subtraction.

use nalgebra::Vector3;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("pixel ({u:.2}, {v:.2}) outside image bounds {width}x{height}")]
    PixelOutOfBounds {
        u: f64,
        v: f64,
        width: u32,
        height: u32,
    },
    #[error("point with z = {0} is behind the camera")]
    BehindCamera(f64),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
}

/// 2D point in meters on a horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2<R> {
    pub x: R,
    pub y: R,
}

impl<R: Real> Point2<R> {
    pub fn new(x: R, y: R) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> R {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Self) -> R {
        self.x * other.x + self.y * other.y
    }
}

impl<R: Real> std::ops::Add for Point2<R> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<R: Real> std::ops::Sub for Point2<R> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<R: Real> std::ops::Mul<R> for Point2<R> {
    type Output = Self;
    fn mul(self, rhs: R) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

/// 3D point in meters (camera or pen frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3<R> {
    pub x: R,
    pub y: R,
    pub z: R,
}

impl<R: Real> Point3<R> {
    pub fn new(x: R, y: R, z: R) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<R> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vector3<R>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn norm(self) -> R {
        self.to_vector().norm()
    }

    /// Horizontal (x, y) component, used by pen-frame cylindrical math.
    pub fn horizontal(self) -> Point2<R> {
        Point2::new(self.x, self.y)
    }
}

impl<R: Real> std::ops::Add for Point3<R> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<R: Real> std::ops::Sub for Point3<R> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<R: Real> std::ops::Mul<R> for Point3<R> {
    type Output = Self;
    fn mul(self, rhs: R) -> Self {
        Self::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

/// Pinhole camera intrinsics in pixels; no distortion model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics<R> {
    pub fx: R,
    pub fy: R,
    pub cx: R,
    pub cy: R,
    pub width: u32,
    pub height: u32,
}

impl<R: Real> CameraIntrinsics<R> {
    /// Validated constructor: `fx, fy > 0` and the principal point inside
    /// the image.
    pub fn new(fx: R, fy: R, cx: R, cy: R, width: u32, height: u32) -> Result<Self, GeometryError> {
        if fx <= R::zero() || fy <= R::zero() {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={}, fy={})",
                fx.as_f64(),
                fy.as_f64()
            )));
        }
        let w = R::from_count(width as usize);
        let h = R::from_count(height as usize);
        if cx < R::zero() || cx >= w || cy < R::zero() || cy >= h {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{} image",
                cx.as_f64(),
                cy.as_f64(),
                width,
                height
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn contains_pixel(&self, u: R, v: R) -> bool {
        u >= R::zero()
            && v >= R::zero()
            && u < R::from_count(self.width as usize)
            && v < R::from_count(self.height as usize)
    }
}

/// Back-project pixel `(u, v)` at a given z-depth into the camera frame.
pub fn backproject<R: Real>(
    k: &CameraIntrinsics<R>,
    u: R,
    v: R,
    depth: R,
) -> Result<Point3<R>, GeometryError> {
    if depth <= R::zero() {
        return Err(GeometryError::NonPositiveDepth(depth.as_f64()));
    }
    if !k.contains_pixel(u, v) {
        return Err(GeometryError::PixelOutOfBounds {
            u: u.as_f64(),
            v: v.as_f64(),
            width: k.width,
            height: k.height,
        });
    }
    Ok(Point3::new(
        (u - k.cx) * depth / k.fx,
        (v - k.cy) * depth / k.fy,
        depth,
    ))
}

/// Project a camera-frame point to pixel coordinates. The result may lie
/// outside the image bounds; callers filter.
pub fn project<R: Real>(k: &CameraIntrinsics<R>, p: Point3<R>) -> Result<(R, R), GeometryError> {
    if p.z <= R::zero() {
        return Err(GeometryError::BehindCamera(p.z.as_f64()));
    }
    Ok((k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}

/// Cartesian to cylindrical: `(r, theta)` with `theta in (-pi, pi]` and
/// `theta = 0` at `r = 0`.
pub fn cart_to_cyl<R: Real>(p: Point2<R>) -> (R, R) {
    let r = p.norm();
    if r == R::zero() {
        return (R::zero(), R::zero());
    }
    (r, wrap_angle(p.y.atan2(p.x)))
}

/// Cylindrical to Cartesian, exact inverse of [`cart_to_cyl`].
pub fn cyl_to_cart<R: Real>(r: R, theta: R) -> Point2<R> {
    Point2::new(r * theta.cos(), r * theta.sin())
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle<R: Real>(a: R) -> R {
    let two_pi = R::two_pi();
    let wrapped = a - two_pi * ((a - R::pi()) / two_pi).ceil();
    // Guard the half-open boundary against rounding in the division above.
    if wrapped > R::pi() {
        wrapped - two_pi
    } else if wrapped <= -R::pi() {
        wrapped + two_pi
    } else {
        wrapped
    }
}

/// Wrapped angle difference `a - b`, in `(-pi, pi]`.
pub fn angle_diff<R: Real>(a: R, b: R) -> R {
    wrap_angle(a - b)
}

/// First positive parameter `t` at which the ray `origin + t * dir` meets
/// the infinite cylinder of the given radius about the pen z-axis, or `None`
/// if the ray misses it (e.g. runs parallel to the axis).
pub fn ray_cylinder_first_hit<R: Real>(
    origin: Point3<R>,
    dir: Vector3<R>,
    radius: R,
) -> Option<R> {
    let a = dir.x * dir.x + dir.y * dir.y;
    if a == R::zero() {
        return None;
    }
    let b = R::from_config(2.0) * (origin.x * dir.x + origin.y * dir.y);
    let c = origin.x * origin.x + origin.y * origin.y - radius * radius;
    let disc = b * b - R::from_config(4.0) * a * c;
    if disc < R::zero() {
        return None;
    }
    let sq = disc.sqrt();
    let two_a = R::from_config(2.0) * a;
    let t0 = (-b - sq) / two_a;
    let t1 = (-b + sq) / two_a;
    if t0 > R::zero() {
        Some(t0)
    } else if t1 > R::zero() {
        Some(t1)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn test_k() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(800.0, 800.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn backproject_principal_point() {
        let p = backproject(&test_k(), 320.0, 240.0, 1.0).unwrap();
        assert_eq!(p, Point3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn backproject_off_axis() {
        let p = backproject(&test_k(), 400.0, 240.0, 2.0).unwrap();
        assert_relative_eq!(p.x, 0.2, max_relative = 1e-12);
        assert_eq!(p.y, 0.0);
        assert_eq!(p.z, 2.0);
    }

    #[test]
    fn backproject_rejects_zero_depth() {
        assert!(matches!(
            backproject(&test_k(), 320.0, 240.0, 0.0),
            Err(GeometryError::NonPositiveDepth(_))
        ));
    }

    #[test]
    fn backproject_rejects_out_of_bounds() {
        assert!(matches!(
            backproject(&test_k(), 700.0, 240.0, 1.0),
            Err(GeometryError::PixelOutOfBounds { .. })
        ));
    }

    #[test]
    fn project_known_points() {
        assert_eq!(project(&test_k(), Point3::new(0.0, 0.0, 1.0)).unwrap(), (320.0, 240.0));
        let (u, v) = project(&test_k(), Point3::new(0.2, 0.0, 2.0)).unwrap();
        assert_relative_eq!(u, 400.0, max_relative = 1e-12);
        assert_relative_eq!(v, 240.0, max_relative = 1e-12);
    }

    #[test]
    fn project_rejects_points_behind_camera() {
        assert!(matches!(
            project(&test_k(), Point3::new(0.0, 0.0, -1.0)),
            Err(GeometryError::BehindCamera(_))
        ));
    }

    #[test]
    fn cylindrical_examples() {
        let (r, th) = cart_to_cyl(Point2::new(1.0, 0.0));
        assert_eq!((r, th), (1.0, 0.0));
        let (r, th) = cart_to_cyl(Point2::new(0.0, 2.0));
        assert_eq!(r, 2.0);
        assert_relative_eq!(th, std::f64::consts::FRAC_PI_2, max_relative = 1e-15);
        // theta at the origin is defined as 0
        assert_eq!(cart_to_cyl(Point2::new(0.0, 0.0)), (0.0, 0.0));
    }

    #[test]
    fn cylindrical_round_trip() {
        let p = Point2::new(-3.7, 1.2);
        let (r, th) = cart_to_cyl(p);
        let q = cyl_to_cart(r, th);
        assert_relative_eq!(q.x, p.x, epsilon = 1e-12);
        assert_relative_eq!(q.y, p.y, epsilon = 1e-12);
    }

    #[test]
    fn wrap_angle_boundaries() {
        let pi = std::f64::consts::PI;
        assert_eq!(wrap_angle(pi), pi);
        assert_eq!(wrap_angle(-pi), pi);
        assert_relative_eq!(wrap_angle(3.0 * pi), pi, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(-2.5 * pi), -0.5 * pi, epsilon = 1e-12);
        assert_eq!(wrap_angle(0.0), 0.0);
    }

    #[test]
    fn ray_cylinder_inside_looking_out() {
        // Camera 1 m from a 25 m cylinder wall, looking radially outward.
        let origin = Point3::new(24.0, 0.0, 5.0);
        let t = ray_cylinder_first_hit(origin, Vector3::new(1.0, 0.0, 0.0), 25.0).unwrap();
        assert_relative_eq!(t, 1.0, epsilon = 1e-12);
        // Parallel to the axis: no hit.
        assert!(ray_cylinder_first_hit(origin, Vector3::new(0.0, 0.0, 1.0), 25.0).is_none());
    }

    #[test]
    fn generic_scalar_compiles_for_f32() {
        let k = CameraIntrinsics::<f32>::new(800.0, 800.0, 320.0, 240.0, 640, 480).unwrap();
        let p = backproject(&k, 400.0f32, 240.0, 2.0).unwrap();
        let (u, v) = project(&k, p).unwrap();
        assert_relative_eq!(u, 400.0f32, epsilon = 1e-3);
        assert_relative_eq!(v, 240.0f32, epsilon = 1e-3);
    }

    proptest! {
        #[test]
        fn project_backproject_identity(
            u in 0.0f64..639.0,
            v in 0.0f64..479.0,
            depth in 0.05f64..50.0,
        ) {
            let k = test_k();
            let p = backproject(&k, u, v, depth).unwrap();
            let (u2, v2) = project(&k, p).unwrap();
            prop_assert!((u2 - u).abs() < 1e-9);
            prop_assert!((v2 - v).abs() < 1e-9);
        }

        #[test]
        fn cyl_cart_identity(x in -100.0f64..100.0, y in -100.0f64..100.0) {
            let (r, th) = cart_to_cyl(Point2::new(x, y));
            let p = cyl_to_cart(r, th);
            prop_assert!((p.x - x).abs() < 1e-12 * (1.0 + x.abs()));
            prop_assert!((p.y - y).abs() < 1e-12 * (1.0 + y.abs()));
        }

        #[test]
        fn wrapped_angles_stay_in_range(a in -1000.0f64..1000.0) {
            let w = wrap_angle(a);
            prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
        }
    }
}
