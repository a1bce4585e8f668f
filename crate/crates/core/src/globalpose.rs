//! Global cylindrical pose of the vehicle inside the pen.
//!
//! The problem is reduced to 2D (roll and pitch are controlled to zero, the
//! vertical coordinate is decoupled through the pressure sensor): the global
//! radial coordinate comes from fitting a circle of the known pen radius to
//! the detector's 3D points projected onto the camera's horizontal plane,
//! the angular coordinate evolves by integrating DVL velocities one
//! time-step at a time, and the global heading is the sum of the angular
//! coordinate and the relative heading.
//!
//! Every frame the dead-reckoned radius is replaced by the circle-fit
//! radius; only the angular coordinate keeps the integrated value. Frames
//! whose fit fails degrade to pure dead reckoning and are flagged.
//!
//! Horizontal-plane points here use [`Point2`] with `x` = camera x (right)
//! and `y` = camera z (forward).

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angle_diff, cart_to_cyl, cyl_to_cart, wrap_angle, Point2, Point3};
use crate::relpose::fit_plane;
use crate::scalar::Real;

const MAX_ITERATIONS: u32 = 50;
const STEP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GlobalPoseError {
    #[error("need at least 3 points for a circle fit, got {0}")]
    InsufficientPoints(usize),
    #[error("pen radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("circle fit did not converge")]
    NotConverged,
    #[error("fit center within {0} m of the camera: bearing undefined")]
    DegenerateCenter(f64),
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {reason}")]
    Parse {
        path: std::path::PathBuf,
        line: usize,
        reason: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GlobalPoseError + '_ {
    move |source| GlobalPoseError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Cylindrical pen-frame pose of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalPose<R> {
    /// Radial distance from the pen axis, meters.
    pub r: R,
    /// Angular coordinate, radians in `(-pi, pi]`.
    pub theta: R,
    /// Depth below the surface, meters (positive down).
    pub z: R,
    /// Global yaw of the optical axis, radians in `(-pi, pi]`.
    pub psi: R,
    /// Timestamp, seconds.
    pub t: R,
}

impl<R: Real> GlobalPose<R> {
    /// Horizontal pen-frame position.
    pub fn position(&self) -> Point2<R> {
        cyl_to_cart(self.r, self.theta)
    }

    /// Relative heading: horizontal angle between the optical axis and the
    /// outward radial direction.
    pub fn beta(&self) -> R {
        angle_diff(self.psi, self.theta)
    }
}

/// Orthonormal camera axes `[x_cam, y_cam, z_cam]` in the pen frame for a
/// zero-roll, zero-pitch pose: the optical axis is horizontal along `psi`
/// and camera y points straight down.
pub fn camera_axes<R: Real>(pose: &GlobalPose<R>) -> [Vector3<R>; 3] {
    let (s, c) = (pose.psi.sin(), pose.psi.cos());
    [
        Vector3::new(-s, c, R::zero()),
        Vector3::new(R::zero(), R::zero(), R::one()),
        Vector3::new(c, s, R::zero()),
    ]
}

/// Camera position in the pen frame.
pub fn camera_position<R: Real>(pose: &GlobalPose<R>) -> Point3<R> {
    let p = pose.position();
    Point3::new(p.x, p.y, pose.z)
}

/// Result of a fixed-radius circle fit.
#[derive(Debug, Clone, Copy)]
pub struct CircleFit<R> {
    /// Pen-axis position in the camera horizontal frame (x right, y forward).
    pub center: Point2<R>,
    /// RMS of radial residuals, meters.
    pub rms_residual: R,
    /// Gauss-Newton iterations used.
    pub iterations: u32,
    /// Whether the step tolerance was reached within the iteration budget.
    pub converged: bool,
}

/// Horizontal body-frame velocity from the DVL (x surge, y sway).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyVelocity<R> {
    pub vx: R,
    pub vy: R,
    /// Measurement timestamp, seconds.
    pub t: R,
}

fn circle_rms<R: Real>(points: &[Point2<R>], center: Point2<R>, radius: R) -> R {
    let mut sum = R::zero();
    for p in points {
        let r = (*p - center).norm() - radius;
        sum += r * r;
    }
    (sum / R::from_count(points.len())).sqrt()
}

/// Gauss-Newton minimization of `sum_i (|p_i - c| - R)^2` over the center
/// only; the radius is the known pen radius. A fit that exhausts the
/// iteration budget is returned with `converged = false` rather than as an
/// error.
pub fn fit_circle_fixed_radius<R: Real>(
    points: &[Point2<R>],
    radius: R,
    init: Point2<R>,
) -> Result<CircleFit<R>, GlobalPoseError> {
    if points.len() < 3 {
        return Err(GlobalPoseError::InsufficientPoints(points.len()));
    }
    if radius <= R::zero() {
        return Err(GlobalPoseError::NonPositiveRadius(radius.as_f64()));
    }
    let tol = R::from_config(STEP_TOLERANCE);
    let mut center = init;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = Matrix2::<R>::zeros();
        let mut jtr = Vector2::<R>::zeros();
        for p in points {
            let d = *p - center;
            let dist = d.norm();
            if dist < tol {
                continue;
            }
            let res = dist - radius;
            // d res / d center = -(p - c) / |p - c|
            let j = Vector2::new(-d.x / dist, -d.y / dist);
            jtj += j * j.transpose();
            jtr += j * res;
        }
        let det = jtj[(0, 0)] * jtj[(1, 1)] - jtj[(0, 1)] * jtj[(1, 0)];
        if det.abs() < R::from_config(1e-18) {
            break;
        }
        let step = Vector2::new(
            (-jtr[0] * jtj[(1, 1)] + jtr[1] * jtj[(0, 1)]) / det,
            (-jtr[1] * jtj[(0, 0)] + jtr[0] * jtj[(1, 0)]) / det,
        );
        center = Point2::new(center.x + step[0], center.y + step[1]);
        if step.norm() < tol {
            converged = true;
            break;
        }
    }
    Ok(CircleFit {
        center,
        rms_residual: circle_rms(points, center, radius),
        iterations,
        converged,
    })
}

/// Unweighted algebraic circle fit with free radius (Kasa method).
///
/// Diagnostic only: with the short arcs seen by the camera, estimating the
/// radius simultaneously is ill-conditioned, so the pipeline always uses
/// [`fit_circle_fixed_radius`]. Returns `(center, radius)`.
pub fn fit_circle_free<R: Real>(points: &[Point2<R>]) -> Result<(Point2<R>, R), GlobalPoseError> {
    if points.len() < 3 {
        return Err(GlobalPoseError::InsufficientPoints(points.len()));
    }
    // Solve x^2 + y^2 = 2 a x + 2 b y + c in least squares.
    let mut m = nalgebra::Matrix3::<R>::zeros();
    let mut rhs = Vector3::<R>::zeros();
    for p in points {
        let row = Vector3::new(R::from_config(2.0) * p.x, R::from_config(2.0) * p.y, R::one());
        let val = p.x * p.x + p.y * p.y;
        m += row * row.transpose();
        rhs += row * val;
    }
    let sol = m.lu().solve(&rhs).ok_or(GlobalPoseError::NotConverged)?;
    let center = Point2::new(sol[0], sol[1]);
    let radius_sq = sol[2] + center.dot(center);
    if radius_sq <= R::zero() {
        return Err(GlobalPoseError::NotConverged);
    }
    Ok((center, radius_sq.sqrt()))
}

/// Camera radial coordinate and relative heading from a converged fit.
///
/// `r_cam = |center|`; `beta = atan2(center.x, -center.y)` is zero when the
/// pen axis sits straight behind the camera (outward-facing).
pub fn camera_pose_from_fit<R: Real>(
    fit: &CircleFit<R>,
    _pen_radius: R,
) -> Result<(R, R), GlobalPoseError> {
    if !fit.converged {
        return Err(GlobalPoseError::NotConverged);
    }
    let r_cam = fit.center.norm();
    if r_cam < R::from_config(1e-6) {
        return Err(GlobalPoseError::DegenerateCenter(r_cam.as_f64()));
    }
    let beta = fit.center.x.atan2(-fit.center.y);
    Ok((r_cam, beta))
}

/// One dead-reckoning step: rotate the body velocity by the previous global
/// yaw, advance the Cartesian position, and convert back to cylindrical.
/// Returns `(r_pred, theta_next)`.
pub fn dead_reckon_step<R: Real>(
    prev: &GlobalPose<R>,
    v: &BodyVelocity<R>,
    dt: R,
) -> Result<(R, R), GlobalPoseError> {
    if dt <= R::zero() {
        return Err(GlobalPoseError::NonPositiveDt(dt.as_f64()));
    }
    let (s, c) = (prev.psi.sin(), prev.psi.cos());
    let dx = (v.vx * c - v.vy * s) * dt;
    let dy = (v.vx * s + v.vy * c) * dt;
    let pos = prev.position() + Point2::new(dx, dy);
    let (r_pred, theta_next) = cart_to_cyl(pos);
    Ok((r_pred, theta_next))
}

/// Outcome of one frame of pose fusion.
#[derive(Debug, Clone)]
pub struct FuseOutcome<R> {
    pub pose: GlobalPose<R>,
    /// Circle fit of this frame, when at least 3 points were available.
    pub fit: Option<CircleFit<R>>,
    /// Dead-reckoned radius before replacement (diagnostic series).
    pub r_pred: R,
    /// True when the frame fell back to pure dead reckoning.
    pub degraded: bool,
}

/// Fuse one frame: dead-reckon the angular coordinate, replace the radius
/// with the circle-fit value, take depth from the pressure sensor, and sum
/// angular coordinate and relative heading into the global yaw.
///
/// `points` are camera-frame 3D detections of the current frame. When the
/// circle fit fails (too few points, no convergence, degenerate center, or
/// a center that would put the vehicle outside the pen) the frame degrades
/// to pure dead reckoning, keeps the previous relative heading, and is
/// flagged; a run never aborts on a bad frame.
pub fn fuse_frame<R: Real>(
    prev: &GlobalPose<R>,
    v: &BodyVelocity<R>,
    points: &[Point3<R>],
    pressure_z: R,
    pen_radius: R,
    dt: R,
) -> Result<FuseOutcome<R>, GlobalPoseError> {
    let (r_pred, theta_next) = dead_reckon_step(prev, v, dt)?;
    let t_next = prev.t + dt;

    // Horizontal projection in the camera frame: (x right, z forward).
    let projected: Vec<Point2<R>> = points.iter().map(|p| Point2::new(p.x, p.z)).collect();

    let mut fit = None;
    let mut fused: Option<(R, R)> = None;
    if projected.len() >= 3 {
        let n = R::from_count(projected.len());
        let centroid = projected
            .iter()
            .fold(Point2::new(R::zero(), R::zero()), |a, p| a + *p)
            * (R::one() / n);
        // Initialize the center one pen radius behind the detected surface,
        // along the outward surface normal when the plane fit provides one.
        let outward = fit_plane(points, None)
            .ok()
            .and_then(|plane| {
                let h = Point2::new(-plane.normal.x, -plane.normal.z);
                let norm = h.norm();
                (norm > R::from_config(1e-9)).then(|| h * (R::one() / norm))
            })
            .or_else(|| {
                let norm = centroid.norm();
                (norm > R::from_config(1e-9)).then(|| centroid * (R::one() / norm))
            });
        if let Some(outward) = outward {
            let init = centroid - outward * pen_radius;
            let f = fit_circle_fixed_radius(&projected, pen_radius, init)?;
            if let Ok((r_cam, beta)) = camera_pose_from_fit(&f, pen_radius) {
                if r_cam < pen_radius {
                    fused = Some((r_cam, beta));
                }
            }
            fit = Some(f);
        }
    }

    let (r, psi, degraded) = match fused {
        Some((r_cam, beta)) => (r_cam, wrap_angle(theta_next + beta), false),
        None => {
            // Pure dead reckoning; carry the previous relative heading.
            let beta_prev = prev.beta();
            let r = r_pred.max(R::zero()).min(pen_radius);
            (r, wrap_angle(theta_next + beta_prev), true)
        }
    };
    Ok(FuseOutcome {
        pose: GlobalPose {
            r,
            theta: wrap_angle(theta_next),
            z: pressure_z,
            psi,
            t: t_next,
        },
        fit,
        r_pred,
        degraded,
    })
}

/// One serialized trajectory sample; `fit_residual` is absent on frames
/// without a usable circle fit.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PoseRecord {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
    pub z: f64,
    pub psi: f64,
    pub fit_residual: Option<f64>,
    pub degraded: bool,
}

impl PoseRecord {
    pub fn from_outcome<R: Real>(outcome: &FuseOutcome<R>) -> Self {
        Self {
            t: outcome.pose.t.as_f64(),
            r: outcome.pose.r.as_f64(),
            theta: outcome.pose.theta.as_f64(),
            z: outcome.pose.z.as_f64(),
            psi: outcome.pose.psi.as_f64(),
            fit_residual: outcome.fit.as_ref().map(|f| f.rms_residual.as_f64()),
            degraded: outcome.degraded,
        }
    }
}

/// Write a trajectory as CSV with a header row.
pub fn write_pose_csv(path: &Path, records: &[PoseRecord]) -> Result<(), GlobalPoseError> {
    let mut out = String::from("t,r,theta,z,psi,fit_residual,degraded\n");
    for rec in records {
        let residual = rec
            .fit_residual
            .map(|v| format!("{v}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            rec.t, rec.r, rec.theta, rec.z, rec.psi, residual, rec.degraded
        ));
    }
    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    file.write_all(out.as_bytes()).map_err(io_err(path))
}

/// Read a trajectory CSV written by [`write_pose_csv`].
pub fn read_pose_csv(path: &Path) -> Result<Vec<PoseRecord>, GlobalPoseError> {
    let parse_err = |line: usize, reason: &str| GlobalPoseError::Parse {
        path: path.to_path_buf(),
        line,
        reason: reason.to_string(),
    };
    let content = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, "t,r,theta,z,psi,fit_residual,degraded")) => {}
        _ => return Err(parse_err(1, "missing or malformed header row")),
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(parse_err(idx + 1, "expected 7 fields"));
        }
        let num = |s: &str| -> Result<f64, GlobalPoseError> {
            s.parse().map_err(|_| parse_err(idx + 1, "bad number"))
        };
        records.push(PoseRecord {
            t: num(fields[0])?,
            r: num(fields[1])?,
            theta: num(fields[2])?,
            z: num(fields[3])?,
            psi: num(fields[4])?,
            fit_residual: if fields[5].is_empty() {
                None
            } else {
                Some(num(fields[5])?)
            },
            degraded: fields[6]
                .parse()
                .map_err(|_| parse_err(idx + 1, "bad bool"))?,
        });
    }
    Ok(records)
}

/// Write a trajectory as JSON Lines.
pub fn write_pose_jsonl(path: &Path, records: &[PoseRecord]) -> Result<(), GlobalPoseError> {
    let mut out = String::new();
    for rec in records {
        out.push_str(&serde_json::to_string(rec).expect("pose record serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Read a trajectory written by [`write_pose_jsonl`].
pub fn read_pose_jsonl(path: &Path) -> Result<Vec<PoseRecord>, GlobalPoseError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line).map_err(|e| GlobalPoseError::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: e.to_string(),
            })?,
        );
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Points on the circle of the given radius and center spanning an arc.
    fn arc_points(
        center: Point2<f64>,
        radius: f64,
        arc_deg: f64,
        n: usize,
        facing: f64,
    ) -> Vec<Point2<f64>> {
        (0..n)
            .map(|i| {
                let a = facing + (i as f64 / (n - 1) as f64 - 0.5) * arc_deg.to_radians();
                Point2::new(center.x + radius * a.sin(), center.y + radius * a.cos())
            })
            .collect()
    }

    #[test]
    fn exact_arc_recovers_center() {
        let center = Point2::new(0.0, -24.0);
        let pts = arc_points(center, 25.0, 10.0, 10, 0.0);
        let fit = fit_circle_fixed_radius(&pts, 25.0, Point2::new(0.3, -23.0)).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.center.x, 0.0, epsilon = 1e-9);
        assert_relative_eq!(fit.center.y, -24.0, epsilon = 1e-9);
        assert!(fit.rms_residual < 1e-9);
    }

    #[test]
    fn two_points_are_insufficient() {
        let pts = vec![Point2::new(0.0, 1.0), Point2::new(0.1, 1.0)];
        assert!(matches!(
            fit_circle_fixed_radius(&pts, 25.0, Point2::new(0.0, -24.0)),
            Err(GlobalPoseError::InsufficientPoints(2))
        ));
    }

    #[test]
    fn free_radius_diagnostic_on_full_circle() {
        let center = Point2::new(3.0, -2.0);
        let pts = arc_points(center, 5.0, 360.0, 64, 0.0);
        let (c, r) = fit_circle_free(&pts).unwrap();
        assert_relative_eq!(c.x, 3.0, epsilon = 1e-9);
        assert_relative_eq!(c.y, -2.0, epsilon = 1e-9);
        assert_relative_eq!(r, 5.0, epsilon = 1e-9);
    }

    #[test]
    fn camera_pose_outward_and_rotated() {
        let fit = CircleFit {
            center: Point2::new(0.0, -24.0),
            rms_residual: 0.0,
            iterations: 3,
            converged: true,
        };
        let (r, beta) = camera_pose_from_fit(&fit, 25.0).unwrap();
        assert_relative_eq!(r, 24.0, epsilon = 1e-12);
        assert_eq!(beta, 0.0);

        let a = 5f64.to_radians();
        let fit = CircleFit {
            center: Point2::new(24.0 * a.sin(), -24.0 * a.cos()),
            ..fit
        };
        let (r, beta) = camera_pose_from_fit(&fit, 25.0).unwrap();
        assert_relative_eq!(r, 24.0, epsilon = 1e-12);
        assert_relative_eq!(beta, a, epsilon = 1e-12);
    }

    #[test]
    fn camera_pose_requires_convergence_and_offset_center() {
        let fit = CircleFit {
            center: Point2::new(0.0, -24.0),
            rms_residual: 0.0,
            iterations: 50,
            converged: false,
        };
        assert!(matches!(
            camera_pose_from_fit(&fit, 25.0),
            Err(GlobalPoseError::NotConverged)
        ));
        let degenerate = CircleFit {
            center: Point2::new(1e-9, 0.0),
            converged: true,
            ..fit
        };
        assert!(matches!(
            camera_pose_from_fit(&degenerate, 25.0),
            Err(GlobalPoseError::DegenerateCenter(_))
        ));
    }

    fn pose(r: f64, theta: f64, z: f64, psi: f64, t: f64) -> GlobalPose<f64> {
        GlobalPose { r, theta, z, psi, t }
    }

    #[test]
    fn dead_reckon_stationary() {
        let prev = pose(24.0, 0.7, 5.0, 0.7, 10.0);
        let v = BodyVelocity {
            vx: 0.0,
            vy: 0.0,
            t: 10.0,
        };
        let (r, theta) = dead_reckon_step(&prev, &v, 0.1).unwrap();
        assert_eq!(r, 24.0);
        assert_relative_eq!(theta, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn dead_reckon_pure_sway() {
        let prev = pose(24.0, 0.0, 5.0, 0.0, 0.0);
        let v = BodyVelocity {
            vx: 0.0,
            vy: 0.24,
            t: 0.0,
        };
        let (r, theta) = dead_reckon_step(&prev, &v, 1.0).unwrap();
        assert_relative_eq!(theta, (0.24f64).atan2(24.0), epsilon = 1e-12);
        assert_relative_eq!(r, (24.0f64.powi(2) + 0.24f64.powi(2)).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn dead_reckon_rejects_bad_dt() {
        let prev = pose(24.0, 0.0, 5.0, 0.0, 0.0);
        let v = BodyVelocity {
            vx: 0.0,
            vy: 0.0,
            t: 0.0,
        };
        assert!(matches!(
            dead_reckon_step(&prev, &v, 0.0),
            Err(GlobalPoseError::NonPositiveDt(_))
        ));
    }

    /// Camera-frame cylinder points for a pose inside a pen of radius `pen_r`.
    fn cylinder_points(pose_: &GlobalPose<f64>, pen_r: f64) -> Vec<Point3<f64>> {
        let axes = camera_axes(pose_);
        let origin = camera_position(pose_);
        let mut pts = Vec::new();
        for iy in -1..=1 {
            for ix in -2..=2 {
                let dir_cam = Vector3::new(ix as f64 * 0.1, iy as f64 * 0.1, 1.0);
                let dir_pen = axes[0] * dir_cam.x + axes[1] * dir_cam.y + axes[2] * dir_cam.z;
                let t = crate::geometry::ray_cylinder_first_hit(origin, dir_pen, pen_r)
                    .expect("ray hits pen wall");
                pts.push(Point3::new(
                    dir_cam.x * t,
                    dir_cam.y * t,
                    dir_cam.z * t,
                ));
            }
        }
        pts
    }

    #[test]
    fn fuse_stationary_replaces_radius_and_tracks_pressure() {
        let pen_r = 25.0;
        let prev = pose(24.0, 0.3, 5.0, 0.3, 0.0);
        let v = BodyVelocity {
            vx: 0.0,
            vy: 0.0,
            t: 0.0,
        };
        let pts = cylinder_points(&prev, pen_r);
        let out = fuse_frame(&prev, &v, &pts, 5.5, pen_r, 0.1).unwrap();
        assert!(!out.degraded);
        assert_relative_eq!(out.pose.r, 24.0, epsilon = 1e-6);
        assert_relative_eq!(out.pose.theta, 0.3, epsilon = 1e-9);
        // "summing the angular coordinate and the relative heading": facing
        // outward means beta = 0, so psi = theta.
        assert_relative_eq!(out.pose.psi, 0.3, epsilon = 1e-6);
        assert_eq!(out.pose.z, 5.5); // exact pressure passthrough
        assert_relative_eq!(out.pose.t, 0.1, epsilon = 1e-12);
        // Radius replacement is literal: fit radius, never r_pred.
        let (r_cam, _) = camera_pose_from_fit(out.fit.as_ref().unwrap(), pen_r).unwrap();
        assert_eq!(out.pose.r, r_cam);
    }

    #[test]
    fn fuse_degrades_without_points() {
        let prev = pose(24.0, 0.3, 5.0, 0.35, 0.0);
        let v = BodyVelocity {
            vx: 0.1,
            vy: 0.0,
            t: 0.0,
        };
        let out = fuse_frame(&prev, &v, &[], 5.0, 25.0, 0.1).unwrap();
        assert!(out.degraded);
        assert!(out.fit.is_none());
        assert_eq!(out.pose.r, out.r_pred);
        // Previous relative heading carried through.
        assert_relative_eq!(
            angle_diff(out.pose.psi, out.pose.theta),
            0.05,
            epsilon = 1e-9
        );
    }

    #[test]
    fn fuse_rotational_symmetry() {
        // Rotating the previous pose by alpha shifts theta and psi by alpha
        // and changes nothing else: the camera-frame points are unchanged.
        let pen_r = 25.0;
        let alpha = 0.9;
        let prev = pose(23.5, 0.2, 4.0, 0.25, 0.0);
        let v = BodyVelocity {
            vx: 0.05,
            vy: 0.2,
            t: 0.0,
        };
        let pts = cylinder_points(&prev, pen_r);
        let base = fuse_frame(&prev, &v, &pts, 4.1, pen_r, 0.1).unwrap();

        let rotated_prev = pose(23.5, 0.2 + alpha, 4.0, 0.25 + alpha, 0.0);
        let rot = fuse_frame(&rotated_prev, &v, &pts, 4.1, pen_r, 0.1).unwrap();
        assert_relative_eq!(rot.pose.r, base.pose.r, epsilon = 1e-6);
        assert_relative_eq!(
            angle_diff(rot.pose.theta, base.pose.theta),
            alpha,
            epsilon = 1e-6
        );
        assert_relative_eq!(
            angle_diff(rot.pose.psi, base.pose.psi),
            alpha,
            epsilon = 1e-6
        );
        assert_eq!(rot.pose.z, base.pose.z);
    }

    #[test]
    fn fuse_output_angles_are_wrapped() {
        let pen_r = 25.0;
        let prev = pose(24.0, 3.1, 5.0, 3.1, 0.0);
        let v = BodyVelocity {
            vx: 0.0,
            vy: 1.2,
            t: 0.0,
        };
        let pts = cylinder_points(&prev, pen_r);
        let out = fuse_frame(&prev, &v, &pts, 5.0, pen_r, 1.0).unwrap();
        let pi = std::f64::consts::PI;
        assert!(out.pose.theta > -pi && out.pose.theta <= pi);
        assert!(out.pose.psi > -pi && out.pose.psi <= pi);
    }

    #[test]
    fn noisy_arc_fit_stays_near_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let center = Point2::new(0.0, -24.0);
        let mut pts = arc_points(center, 25.0, 12.0, 15, 0.0);
        for p in &mut pts {
            p.x += 0.01 * rng.gen_range(-1.0..1.0);
            p.y += 0.01 * rng.gen_range(-1.0..1.0);
        }
        let fit = fit_circle_fixed_radius(&pts, 25.0, Point2::new(0.2, -23.5)).unwrap();
        assert!(fit.converged);
        // Along-view component is well constrained; the arc is short so the
        // cross component is looser.
        assert!((fit.center.y - center.y).abs() < 0.05);
    }

    #[test]
    fn pose_records_round_trip_csv_and_jsonl() {
        let records = vec![
            PoseRecord {
                t: 0.0,
                r: 24.0,
                theta: 0.0,
                z: 5.0,
                psi: 0.01,
                fit_residual: Some(0.003),
                degraded: false,
            },
            PoseRecord {
                t: 0.1,
                r: 23.9,
                theta: 0.002,
                z: 5.01,
                psi: 0.012,
                fit_residual: None,
                degraded: true,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("poses.csv");
        write_pose_csv(&csv, &records).unwrap();
        assert_eq!(read_pose_csv(&csv).unwrap(), records);
        let jsonl = dir.path().join("poses.jsonl");
        write_pose_jsonl(&jsonl, &records).unwrap();
        assert_eq!(read_pose_jsonl(&jsonl).unwrap(), records);
    }
}
