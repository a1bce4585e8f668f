//! Ellipsoidal fish occluders swimming deterministic orbits inside the pen.

use nalgebra::Vector3;
use rand::Rng;

use crate::geometry::Point3;
use crate::scalar::Real;

/// One fish: an axis-aligned-to-swim-direction ellipsoid whose center
/// orbits the pen axis at fixed radius and depth, so it stays inside the
/// pen at every time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FishOccluder<R> {
    /// Orbit radius around the pen axis, meters.
    pub orbit_radius: R,
    /// Angular position at t = 0, radians.
    pub theta0: R,
    /// Orbit angular speed, rad/s (sign gives the swim direction).
    pub angular_speed: R,
    /// Swim depth, meters.
    pub depth: R,
    /// Semi-axes: along swim direction, radial, vertical; meters.
    pub semi_axes: [R; 3],
}

impl<R: Real> FishOccluder<R> {
    fn theta(&self, t: R) -> R {
        self.theta0 + self.angular_speed * t
    }

    /// Center position in the pen frame at time `t`.
    pub fn center(&self, t: R) -> Point3<R> {
        let th = self.theta(t);
        Point3::new(
            self.orbit_radius * th.cos(),
            self.orbit_radius * th.sin(),
            self.depth,
        )
    }

    /// Swim-velocity magnitude, m/s.
    pub fn speed(&self) -> R {
        (self.angular_speed * self.orbit_radius).abs()
    }

    /// First positive ray parameter at which `origin + t_ray * dir` enters
    /// the ellipsoid at simulation time `t`, if any.
    pub fn ray_hit(&self, origin: Point3<R>, dir: Vector3<R>, t: R) -> Option<R> {
        let th = self.theta(t);
        // Local orthonormal frame: swim (tangential), radial, vertical.
        let sign = if self.angular_speed < R::zero() {
            -R::one()
        } else {
            R::one()
        };
        let swim = Vector3::new(-th.sin() * sign, th.cos() * sign, R::zero());
        let radial = Vector3::new(th.cos(), th.sin(), R::zero());
        let vertical = Vector3::new(R::zero(), R::zero(), R::one());

        let rel = origin - self.center(t);
        let rel = rel.to_vector();
        let o = Vector3::new(
            rel.dot(&swim) / self.semi_axes[0],
            rel.dot(&radial) / self.semi_axes[1],
            rel.dot(&vertical) / self.semi_axes[2],
        );
        let d = Vector3::new(
            dir.dot(&swim) / self.semi_axes[0],
            dir.dot(&radial) / self.semi_axes[1],
            dir.dot(&vertical) / self.semi_axes[2],
        );

        let a = d.norm_squared();
        if a == R::zero() {
            return None;
        }
        let b = R::from_config(2.0) * o.dot(&d);
        let c = o.norm_squared() - R::one();
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
}

/// All occluders of a scenario; deterministic given the generator's seed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FishField<R> {
    pub occluders: Vec<FishOccluder<R>>,
}

impl<R: Real> FishField<R> {
    pub fn empty() -> Self {
        Self {
            occluders: Vec::new(),
        }
    }

    /// Spawn `count` fish in the band between the inspection trajectory and
    /// the net, near the given angular position and depth, so occlusions
    /// actually occur during a run.
    pub fn generate(
        count: usize,
        pen_radius: R,
        theta_center: R,
        depth_center: R,
        mean_half_length: R,
        mean_speed: R,
        rng: &mut impl Rng,
    ) -> Self {
        let mut occluders = Vec::with_capacity(count);
        for _ in 0..count {
            let orbit = pen_radius.as_f64() - rng.gen_range(0.4..2.4);
            let theta0 = theta_center.as_f64() + rng.gen_range(-0.2..0.8);
            let depth = depth_center.as_f64() + rng.gen_range(-1.5..1.5);
            let speed = mean_speed.as_f64() * rng.gen_range(0.6..1.4);
            let direction = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let half_len = mean_half_length.as_f64() * rng.gen_range(0.8..1.3);
            occluders.push(FishOccluder {
                orbit_radius: R::from_config(orbit.max(0.5)),
                theta0: R::from_config(theta0),
                angular_speed: R::from_config(direction * speed / orbit.max(0.5)),
                depth: R::from_config(depth.max(0.5)),
                semi_axes: [
                    R::from_config(half_len),
                    R::from_config(0.06),
                    R::from_config(half_len * 0.45),
                ],
            });
        }
        Self { occluders }
    }

    /// Nearest fish intersection along a ray, as `(ray parameter, index)`.
    pub fn first_hit(&self, origin: Point3<R>, dir: Vector3<R>, t: R) -> Option<(R, usize)> {
        let mut best: Option<(R, usize)> = None;
        for (i, fish) in self.occluders.iter().enumerate() {
            if let Some(hit) = fish.ray_hit(origin, dir, t) {
                if best.is_none_or(|(b, _)| hit < b) {
                    best = Some((hit, i));
                }
            }
        }
        best
    }
}
