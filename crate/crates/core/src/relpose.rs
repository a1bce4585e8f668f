//! Net-relative pose estimation: plane and quadratic surface fitting of 3D
//! points, the depth-map path, and the DVL-beam reference pose.
//!
//! Sign conventions: the fitted plane normal is oriented to face the camera
//! (negative z-component), so `yaw_rel = atan2(n.x, -n.z)` and
//! `pitch_rel = atan2(n.y, -n.z)` are unambiguous. Distance is measured
//! along the optical axis (not perpendicular to the net).

use nalgebra::{Matrix3, SymmetricEigen, Vector3, Vector6};
use thiserror::Error;

use crate::geometry::{backproject, CameraIntrinsics, GeometryError, Point3};
use crate::image::DepthImage;
use crate::scalar::Real;

/// Condition-number guard for the quadratic normal matrix; beyond this the
/// six-parameter fit is considered fragile and callers fall back to a plane.
const QUAD_CONDITION_LIMIT: f64 = 1e8;

#[derive(Debug, Error)]
pub enum RelPoseError {
    #[error("need at least {need} points, got {got}")]
    InsufficientPoints { need: usize, got: usize },
    #[error("points are degenerate (collinear or coincident)")]
    DegeneratePoints,
    #[error("quadratic normal matrix is ill-conditioned (cond {0:.2e})")]
    IllConditioned(f64),
    #[error("weights length {got} does not match point count {want}")]
    WeightMismatch { got: usize, want: usize },
    #[error("weights must be non-negative with a positive sum")]
    InvalidWeights,
    #[error("fitted surface has non-positive axial distance {0:.3}")]
    NonPositiveDistance(f64),
    #[error("fewer than 3 valid depth pixels after striding (got {0})")]
    TooFewValidPixels(usize),
    #[error("DVL range must be positive, got {0}")]
    NonPositiveRange(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Net-relative pose: axial distance plus relative yaw/pitch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetRelativePose<R> {
    /// Distance to the net surface along the optical axis, meters.
    pub distance: R,
    /// Rotation about the camera y-axis needed to face the net normal.
    pub yaw_rel: R,
    /// Rotation about the camera x-axis.
    pub pitch_rel: R,
}

/// Total-least-squares plane fit.
#[derive(Debug, Clone, Copy)]
pub struct PlaneFit<R> {
    /// Unit normal oriented toward the camera (`normal.z < 0` whenever the
    /// viewing geometry allows it).
    pub normal: Vector3<R>,
    /// Plane offset: the plane is `normal . p = offset`.
    pub offset: R,
    /// RMS of depth (z) residuals of the fitted plane, meters. Reporting
    /// residuals along z keeps it directly comparable with
    /// [`QuadFit::rms_residual`], whose model predicts z.
    pub rms_residual: R,
}

/// Least-squares quadratic surface `z = a + b*x + c*y + d*x^2 + e*x*y + f*y^2`.
#[derive(Debug, Clone, Copy)]
pub struct QuadFit<R> {
    /// Coefficients `(a, b, c, d, e, f)`.
    pub coeffs: [R; 6],
    /// RMS of depth (z) residuals, meters. Never exceeds the plane fit's
    /// residual on the same points: planes are contained in this model class
    /// and this fit minimizes the same z-residual metric.
    pub rms_residual: R,
}

impl<R: Real> QuadFit<R> {
    /// Evaluate the surface height at `(x, y)`.
    pub fn eval(&self, x: R, y: R) -> R {
        let [a, b, c, d, e, f] = self.coeffs;
        a + b * x + c * y + d * x * x + e * x * y + f * y * y
    }
}

fn checked_weights<'a, R: Real>(
    points_len: usize,
    weights: Option<&'a [R]>,
) -> Result<Box<dyn Fn(usize) -> R + 'a>, RelPoseError> {
    match weights {
        None => Ok(Box::new(|_| R::one())),
        Some(w) => {
            if w.len() != points_len {
                return Err(RelPoseError::WeightMismatch {
                    got: w.len(),
                    want: points_len,
                });
            }
            let sum = w.iter().fold(R::zero(), |a, b| a + *b);
            if w.iter().any(|v| *v < R::zero()) || sum <= R::zero() || !sum.is_finite() {
                return Err(RelPoseError::InvalidWeights);
            }
            Ok(Box::new(move |i| w[i]))
        }
    }
}

/// Weighted z-residual RMS against a plane `normal . p = offset`.
fn plane_z_rms<R: Real>(
    points: &[Point3<R>],
    weight: &dyn Fn(usize) -> R,
    normal: Vector3<R>,
    offset: R,
) -> R {
    if normal.z == R::zero() {
        return R::from_config(f64::INFINITY);
    }
    let mut num = R::zero();
    let mut den = R::zero();
    for (i, p) in points.iter().enumerate() {
        let w = weight(i);
        let z_plane = (offset - normal.x * p.x - normal.y * p.y) / normal.z;
        let r = p.z - z_plane;
        num += w * r * r;
        den += w;
    }
    (num / den).sqrt()
}

/// Weighted total-least-squares plane through 3D points.
///
/// Exactly coplanar-horizontal input (all z equal) short-circuits to the
/// exact solution so that constant depth maps produce zero relative angles
/// bit-exactly.
pub fn fit_plane<R: Real>(
    points: &[Point3<R>],
    weights: Option<&[R]>,
) -> Result<PlaneFit<R>, RelPoseError> {
    if points.len() < 3 {
        return Err(RelPoseError::InsufficientPoints {
            need: 3,
            got: points.len(),
        });
    }
    let weight = checked_weights(points.len(), weights)?;

    let all_z_equal = points.iter().all(|p| p.z == points[0].z);
    if all_z_equal {
        // Degenerate only if the horizontal footprint is a line or a point.
        let n = R::from_count(points.len());
        let mx = points.iter().fold(R::zero(), |a, p| a + p.x) / n;
        let my = points.iter().fold(R::zero(), |a, p| a + p.y) / n;
        let (mut sxx, mut sxy, mut syy) = (R::zero(), R::zero(), R::zero());
        for p in points {
            let dx = p.x - mx;
            let dy = p.y - my;
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
        }
        let det = sxx * syy - sxy * sxy;
        let scale = (sxx + syy) * (sxx + syy);
        if det <= scale * R::from_config(1e-18) {
            return Err(RelPoseError::DegeneratePoints);
        }
        return Ok(PlaneFit {
            normal: Vector3::new(R::zero(), R::zero(), -R::one()),
            offset: -points[0].z,
            rms_residual: R::zero(),
        });
    }

    // Weighted centroid and scatter matrix.
    let mut wsum = R::zero();
    let mut centroid = Vector3::zeros();
    for (i, p) in points.iter().enumerate() {
        let w = weight(i);
        wsum += w;
        centroid += p.to_vector() * w;
    }
    centroid /= wsum;
    let mut scatter = Matrix3::zeros();
    for (i, p) in points.iter().enumerate() {
        let d = p.to_vector() - centroid;
        scatter += d * d.transpose() * weight(i);
    }

    let eig = SymmetricEigen::new(scatter);
    let mut order = [0usize, 1, 2];
    order.sort_by(|a, b| {
        eig.eigenvalues[*a]
            .partial_cmp(&eig.eigenvalues[*b])
            .expect("finite eigenvalues")
    });
    let lambda_mid = eig.eigenvalues[order[1]];
    let lambda_max = eig.eigenvalues[order[2]];
    // Collinear when the second principal spread vanishes: relative to the
    // dominant spread or below 1e-9 m RMS in absolute terms.
    let mid_rms = (lambda_mid.max(R::zero()) / wsum).sqrt();
    if lambda_max <= R::zero()
        || lambda_mid <= lambda_max * R::from_config(1e-12)
        || mid_rms <= R::from_config(1e-9)
    {
        return Err(RelPoseError::DegeneratePoints);
    }

    let mut normal = eig.eigenvectors.column(order[0]).into_owned();
    normal /= normal.norm();
    // Orient toward the camera.
    if normal.z > R::zero()
        || (normal.z == R::zero()
            && (normal.x < R::zero() || (normal.x == R::zero() && normal.y < R::zero())))
    {
        normal = -normal;
    }
    let offset = normal.dot(&centroid);
    let rms = plane_z_rms(points, weight.as_ref(), normal, offset);
    Ok(PlaneFit {
        normal,
        offset,
        rms_residual: rms,
    })
}

/// Weighted least squares on the six quadratic monomials.
pub fn fit_quadratic<R: Real>(
    points: &[Point3<R>],
    weights: Option<&[R]>,
) -> Result<QuadFit<R>, RelPoseError> {
    if points.len() < 6 {
        return Err(RelPoseError::InsufficientPoints {
            need: 6,
            got: points.len(),
        });
    }
    let weight = checked_weights(points.len(), weights)?;

    let mut a = nalgebra::Matrix6::<R>::zeros();
    let mut b = Vector6::<R>::zeros();
    let mut wsum = R::zero();
    for (i, p) in points.iter().enumerate() {
        let w = weight(i);
        let phi = Vector6::new(R::one(), p.x, p.y, p.x * p.x, p.x * p.y, p.y * p.y);
        a += phi * phi.transpose() * w;
        b += phi * (w * p.z);
        wsum += w;
    }
    // Normalize by the weight sum so the condition measure is invariant to
    // uniform weight scaling and point count.
    a /= wsum;
    b /= wsum;

    let eig = SymmetricEigen::new(a);
    let lambda_max = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(R::zero(), |m, v| m.max(v));
    let lambda_min = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(R::from_config(f64::INFINITY), |m, v| m.min(v));
    if lambda_min <= R::zero() {
        return Err(RelPoseError::IllConditioned(f64::INFINITY));
    }
    let cond = (lambda_max / lambda_min).as_f64();
    if cond > QUAD_CONDITION_LIMIT {
        return Err(RelPoseError::IllConditioned(cond));
    }

    let coeffs = a
        .lu()
        .solve(&b)
        .ok_or(RelPoseError::IllConditioned(f64::INFINITY))?;
    let fit = QuadFit {
        coeffs: [
            coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4], coeffs[5],
        ],
        rms_residual: R::zero(),
    };
    let mut num = R::zero();
    for (i, p) in points.iter().enumerate() {
        let r = p.z - fit.eval(p.x, p.y);
        num += weight(i) * r * r;
    }
    Ok(QuadFit {
        rms_residual: (num / wsum).sqrt(),
        ..fit
    })
}

/// Net-relative pose from camera-frame 3D points.
///
/// Angles come from the plane normal; distance is the quadratic surface
/// evaluated on the optical axis when that fit is well-conditioned, and the
/// plane / optical-axis intersection otherwise.
pub fn relpose_from_points<R: Real>(
    points: &[Point3<R>],
    weights: Option<&[R]>,
) -> Result<NetRelativePose<R>, RelPoseError> {
    let plane = fit_plane(points, weights)?;
    let yaw_rel = plane.normal.x.atan2(-plane.normal.z);
    let pitch_rel = plane.normal.y.atan2(-plane.normal.z);

    let quad_distance = if points.len() >= 6 {
        fit_quadratic(points, weights)
            .ok()
            .map(|q| q.coeffs[0])
            .filter(|d| *d > R::zero() && d.is_finite())
    } else {
        None
    };
    let distance = match quad_distance {
        Some(d) => d,
        None => {
            if plane.normal.z == R::zero() {
                return Err(RelPoseError::DegeneratePoints);
            }
            plane.offset / plane.normal.z
        }
    };
    if distance <= R::zero() {
        return Err(RelPoseError::NonPositiveDistance(distance.as_f64()));
    }
    Ok(NetRelativePose {
        distance,
        yaw_rel,
        pitch_rel,
    })
}

/// Net-relative pose from a dense depth map: back-project every
/// `sample_stride`-th valid pixel and delegate to [`relpose_from_points`].
pub fn relpose_from_depthmap<R: Real>(
    depth: &DepthImage<R>,
    k: &CameraIntrinsics<R>,
    sample_stride: u32,
) -> Result<NetRelativePose<R>, RelPoseError> {
    let stride = sample_stride.max(1);
    let mut points = Vec::new();
    let mut y = 0;
    while y < depth.height() {
        let mut x = 0;
        while x < depth.width() {
            if let Some(d) = depth.get(x, y) {
                points.push(backproject(
                    k,
                    R::from_count(x as usize),
                    R::from_count(y as usize),
                    d,
                )?);
            }
            x += stride;
        }
        y += stride;
    }
    if points.len() < 3 {
        return Err(RelPoseError::TooFewValidPixels(points.len()));
    }
    relpose_from_points(&points, None)
}

/// Geometry of a four-beam Janus DVL: two orthogonal beam pairs tilted by
/// `tilt` radians away from the forward axis.
///
/// Beam order is `[port, starboard, up, down]` in the camera frame
/// (x right, y down, z forward): port tilts toward -x, starboard toward +x,
/// up toward -y, down toward +y.
#[derive(Debug, Clone, Copy)]
pub struct DvlBeamGeometry<R> {
    pub tilt: R,
}

impl<R: Real> DvlBeamGeometry<R> {
    /// Conventional 30-degree Janus arrangement.
    pub fn standard() -> Self {
        Self {
            tilt: R::from_config(30f64.to_radians()),
        }
    }

    /// Unit beam directions in the camera frame, `[port, starboard, up, down]`.
    pub fn beam_dirs(&self) -> [Vector3<R>; 4] {
        let s = self.tilt.sin();
        let c = self.tilt.cos();
        [
            Vector3::new(-s, R::zero(), c),
            Vector3::new(s, R::zero(), c),
            Vector3::new(R::zero(), -s, c),
            Vector3::new(R::zero(), s, c),
        ]
    }
}

/// Net-relative pose from four DVL beam ranges against a locally planar net.
///
/// Closed form from the ray-plane model: with inverse ranges `qi = 1/ri`,
/// `tan(yaw) = (q_port - q_star) / ((q_port + q_star) * tan(tilt))`, pitch
/// analogously from the vertical pair, and the axial distance is
/// `4 cos(tilt) / sum(qi)`, which is exact independent of yaw and pitch.
pub fn relpose_from_dvl_beams<R: Real>(
    ranges: [R; 4],
    geometry: &DvlBeamGeometry<R>,
) -> Result<NetRelativePose<R>, RelPoseError> {
    for r in ranges {
        if r <= R::zero() {
            return Err(RelPoseError::NonPositiveRange(r.as_f64()));
        }
    }
    let q: Vec<R> = ranges.iter().map(|r| R::one() / *r).collect();
    let tan_tilt = geometry.tilt.tan();
    let yaw_rel = ((q[0] - q[1]) / ((q[0] + q[1]) * tan_tilt)).atan();
    let pitch_rel = ((q[2] - q[3]) / ((q[2] + q[3]) * tan_tilt)).atan();
    let qsum = q[0] + q[1] + q[2] + q[3];
    let distance = R::from_config(4.0) * geometry.tilt.cos() / qsum;
    Ok(NetRelativePose {
        distance,
        yaw_rel,
        pitch_rel,
    })
}
