//! Sparse-prior to dense metric depth completion.
//!
//! Deterministic, pluggable stand-ins for a learned completion network. The
//! strategy enum is the seam where such a model would integrate without
//! touching callers. Depth is stored as z-depth (distance along the optical
//! axis), consistent with the spectral detector's output interpretation.
//! Priors come from the net only, so completed depth describes the net
//! surface even under occluders.

use thiserror::Error;

use crate::geometry::{backproject, CameraIntrinsics, GeometryError};
use crate::image::DepthImage;
use crate::netfft::SparseDepthPrior;
use crate::relpose::{fit_quadratic, QuadFit, RelPoseError};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum DepthFillError {
    #[error("no priors supplied")]
    NoPriors,
    #[error("invalid strategy parameters: {0}")]
    InvalidStrategy(String),
    #[error("depth images differ in size: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("no pixel is valid in both depth images")]
    NoOverlap,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Fit(#[from] RelPoseError),
}

/// Completion behavior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompletionStrategy<R> {
    /// Fit a quadratic surface to the back-projected priors and intersect
    /// each pixel ray with it. Matches the curved-net model; falls back to
    /// inverse-distance weighting when fewer than 6 priors are available or
    /// the fit is ill-conditioned.
    QuadraticSurface,
    /// Shepard interpolation of prior depths in pixel space. `power` must
    /// lie in `[1, 4]`; `neighbors` limits the interpolation support
    /// (0 means all priors).
    InverseDistanceWeighting { power: R, neighbors: usize },
    /// Every pixel set to the confidence-weighted mean prior depth. Destroys
    /// orientation observability by construction while preserving mean
    /// distance.
    ConstantMean,
}

impl<R: Real> CompletionStrategy<R> {
    /// Default inverse-distance fallback (power 2, 8 neighbors).
    pub fn idw_fallback() -> Self {
        Self::InverseDistanceWeighting {
            power: R::from_config(2.0),
            neighbors: 8,
        }
    }
}

/// Intersect the pixel ray `z * (a, b, 1)` with the surface
/// `z = q(x, y)`; substituting `x = a z`, `y = b z` yields a scalar
/// quadratic in z. Picks the positive root closest to the axial distance
/// `q(0, 0)` (the root that degenerates to the plane solution).
fn quad_depth_along_ray<R: Real>(fit: &QuadFit<R>, a: R, b: R) -> R {
    let [c0, c1, c2, c3, c4, c5] = fit.coeffs;
    let alpha = c3 * a * a + c4 * a * b + c5 * b * b;
    let beta = c1 * a + c2 * b - R::one();
    // alpha z^2 + beta z + c0 = 0
    let tiny = R::from_config(1e-12);
    if alpha.abs() < tiny {
        if beta.abs() < tiny {
            return c0;
        }
        return -c0 / beta;
    }
    let disc = beta * beta - R::from_config(4.0) * alpha * c0;
    if disc < R::zero() {
        // Ray misses the curved branch; use the linearized (plane) solution.
        return if beta.abs() < tiny { c0 } else { -c0 / beta };
    }
    let sq = disc.sqrt();
    let two = R::from_config(2.0);
    let r1 = (-beta + sq) / (two * alpha);
    let r2 = (-beta - sq) / (two * alpha);
    let target = c0;
    let d1 = if r1 > R::zero() {
        (r1 - target).abs()
    } else {
        R::from_config(f64::INFINITY)
    };
    let d2 = if r2 > R::zero() {
        (r2 - target).abs()
    } else {
        R::from_config(f64::INFINITY)
    };
    if d1 <= d2 {
        if r1 > R::zero() {
            r1
        } else {
            target
        }
    } else {
        r2
    }
}

/// Complete a dense depth image from sparse priors. Every output pixel is
/// valid.
pub fn complete_depth<R: Real>(
    width: u32,
    height: u32,
    priors: &[SparseDepthPrior<R>],
    k: &CameraIntrinsics<R>,
    strategy: &CompletionStrategy<R>,
) -> Result<DepthImage<R>, DepthFillError> {
    if priors.is_empty() {
        return Err(DepthFillError::NoPriors);
    }
    match strategy {
        CompletionStrategy::QuadraticSurface => {
            if priors.len() >= 6 {
                let mut points = Vec::with_capacity(priors.len());
                let mut weights = Vec::with_capacity(priors.len());
                for p in priors {
                    points.push(backproject(k, p.u, p.v, p.depth)?);
                    weights.push(p.confidence);
                }
                match fit_quadratic(&points, Some(&weights)) {
                    Ok(fit) => {
                        let img = DepthImage::from_fn(width, height, |u, v| {
                            let a = (R::from_count(u as usize) - k.cx) / k.fx;
                            let b = (R::from_count(v as usize) - k.cy) / k.fy;
                            quad_depth_along_ray(&fit, a, b)
                        });
                        return Ok(img);
                    }
                    Err(RelPoseError::IllConditioned(_)) => {
                        // fall through to IDW
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            complete_depth(width, height, priors, k, &CompletionStrategy::idw_fallback())
        }
        CompletionStrategy::InverseDistanceWeighting { power, neighbors } => {
            let p = *power;
            if p < R::one() || p > R::from_config(4.0) {
                return Err(DepthFillError::InvalidStrategy(format!(
                    "IDW power {} outside [1, 4]",
                    p.as_f64()
                )));
            }
            let k_n = if *neighbors == 0 || *neighbors >= priors.len() {
                priors.len()
            } else {
                *neighbors
            };
            let half_power = p / R::from_config(2.0);
            let mut dist_sq: Vec<(usize, R)> = Vec::with_capacity(priors.len());
            let img = DepthImage::from_fn(width, height, |u, v| {
                let uu = R::from_count(u as usize);
                let vv = R::from_count(v as usize);
                dist_sq.clear();
                for (i, pr) in priors.iter().enumerate() {
                    let du = uu - pr.u;
                    let dv = vv - pr.v;
                    let d2 = du * du + dv * dv;
                    if d2 == R::zero() {
                        // Exact prior pixel: interpolation must reproduce it.
                        return pr.depth;
                    }
                    dist_sq.push((i, d2));
                }
                dist_sq.sort_by(|a, b| {
                    a.1.partial_cmp(&b.1)
                        .expect("finite distances")
                        .then(a.0.cmp(&b.0))
                });
                let mut num = R::zero();
                let mut den = R::zero();
                for &(i, d2) in dist_sq.iter().take(k_n) {
                    let w = priors[i].confidence / d2.powf(half_power);
                    num += w * priors[i].depth;
                    den += w;
                }
                num / den
            });
            Ok(img)
        }
        CompletionStrategy::ConstantMean => {
            let mut num = R::zero();
            let mut den = R::zero();
            for pr in priors {
                num += pr.confidence * pr.depth;
                den += pr.confidence;
            }
            if den <= R::zero() || !den.is_finite() {
                return Err(DepthFillError::InvalidStrategy(
                    "confidence weights sum to zero".into(),
                ));
            }
            Ok(DepthImage::uniform(width, height, num / den))
        }
    }
}

/// Root-mean-square difference over pixels valid in both images.
pub fn depth_rmse<R: Real>(a: &DepthImage<R>, b: &DepthImage<R>) -> Result<R, DepthFillError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(DepthFillError::DimensionMismatch(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ));
    }
    let mut num = R::zero();
    let mut count = 0usize;
    for (x, y, da) in a.iter_valid() {
        if let Some(db) = b.get(x, y) {
            let d = da - db;
            num += d * d;
            count += 1;
        }
    }
    if count == 0 {
        return Err(DepthFillError::NoOverlap);
    }
    Ok((num / R::from_count(count)).sqrt())
}
