//! Patch-wise spectral distance estimation on the periodic net mesh.
//!
//! A net of known mesh pitch `L` imaged at z-depth `d` by a camera with
//! focal length `f` shows a pixel period `p = f * L / d`, so `d = f * L / p`.
//! Each image patch is Hann-windowed, transformed with a 2D DFT, and the
//! chosen in-band magnitude peak is refined to sub-bin accuracy with a
//! quadratic fit of log-magnitude over its 3x3 neighborhood. Of the mesh's
//! two fundamentals the vertical-dominant one is preferred (it measures
//! pure 1/z under the zero-pitch assumption, immune to yaw foreshortening),
//! falling back to the strongest peak; the focal length along the peak's
//! dominant axis converts period to depth (`fx` for near-horizontal
//! frequency vectors, `fy` for near-vertical). The returned depth is depth
//! along the optical axis.
//!
//! Confidence is the peak magnitude divided by the median in-band magnitude;
//! patches below the configured threshold (occlusion, blur, no net) yield no
//! estimate. DC suppression excludes a 3-bin disk from the peak search but
//! the raw spectrum is kept for refinement, so peaks adjacent to the disk
//! are refined without bias.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::geometry::{backproject, CameraIntrinsics, GeometryError, Point3};
use crate::image::GrayImage;
use crate::scalar::Real;

/// Bins around DC excluded from the peak search.
const DC_SUPPRESSION_RADIUS: f64 = 3.0;

#[derive(Debug, Error)]
pub enum NetFftError {
    #[error("patch is {got_w}x{got_h}, expected {want}x{want}")]
    BadPatchSize { got_w: u32, got_h: u32, want: u32 },
    #[error("image {width}x{height} smaller than one {patch} px patch")]
    ImageTooSmall { width: u32, height: u32, patch: u32 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Configuration of the spectral patch detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FftConfig<R> {
    /// Patch side in pixels; power of two, at least 32.
    pub patch_size: u32,
    /// Horizontal/vertical step between patch origins in pixels.
    pub patch_stride: u32,
    /// Physical net mesh pitch in meters.
    pub grid_cell: R,
    /// Smallest plausible pixel period of the mesh.
    pub min_period_px: R,
    /// Largest plausible pixel period of the mesh.
    pub max_period_px: R,
    /// Peak-to-median magnitude ratio below which a patch is rejected.
    pub confidence_threshold: R,
}

impl<R: Real> FftConfig<R> {
    pub fn new(
        patch_size: u32,
        patch_stride: u32,
        grid_cell: R,
        min_period_px: R,
        max_period_px: R,
        confidence_threshold: R,
    ) -> Result<Self, NetFftError> {
        if patch_size < 32 || !patch_size.is_power_of_two() {
            return Err(NetFftError::InvalidConfig(format!(
                "patch_size {patch_size} must be a power of two >= 32"
            )));
        }
        if patch_stride == 0 {
            return Err(NetFftError::InvalidConfig("patch_stride must be positive".into()));
        }
        if grid_cell <= R::zero() {
            return Err(NetFftError::InvalidConfig("grid_cell must be positive".into()));
        }
        let half = R::from_count(patch_size as usize / 2);
        if !(min_period_px > R::from_config(2.0)
            && min_period_px < max_period_px
            && max_period_px < half)
        {
            return Err(NetFftError::InvalidConfig(format!(
                "period band ({}, {}) must satisfy 2 < min < max < patch_size/2",
                min_period_px.as_f64(),
                max_period_px.as_f64()
            )));
        }
        if confidence_threshold <= R::zero() {
            return Err(NetFftError::InvalidConfig(
                "confidence_threshold must be positive".into(),
            ));
        }
        Ok(Self {
            patch_size,
            patch_stride,
            grid_cell,
            min_period_px,
            max_period_px,
            confidence_threshold,
        })
    }
}

impl<R: Real> Default for FftConfig<R> {
    /// 128 px non-overlapping patches on a 20 mm mesh, period band 5..48 px.
    fn default() -> Self {
        Self::new(
            128,
            128,
            R::from_config(0.02),
            R::from_config(5.0),
            R::from_config(48.0),
            R::from_config(8.0),
        )
        .expect("default config is valid")
    }
}

/// Metric depth estimate at a known pixel location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseDepthPrior<R> {
    /// Pixel location (patch center).
    pub u: R,
    pub v: R,
    /// z-depth in meters.
    pub depth: R,
    /// Peak-to-median spectral ratio; larger is more trustworthy.
    pub confidence: R,
}

/// In-place 2D FFT of a row-major square buffer.
fn fft2d(buf: &mut [Complex<f64>], n: usize) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
    for row in buf.chunks_exact_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
    // Transpose, transform rows again (i.e. the original columns), transpose back.
    let mut t = vec![Complex::default(); n * n];
    for y in 0..n {
        for x in 0..n {
            t[x * n + y] = buf[y * n + x];
        }
    }
    for row in t.chunks_exact_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
    for y in 0..n {
        for x in 0..n {
            buf[y * n + x] = t[x * n + y];
        }
    }
}

/// Signed frequency (cycles per patch) of an unshifted FFT bin index.
#[inline]
fn signed_freq(idx: usize, n: usize) -> f64 {
    if idx <= n / 2 {
        idx as f64
    } else {
        idx as f64 - n as f64
    }
}

/// Estimate the net z-depth from one square patch.
///
/// Returns `Ok(None)` when no sufficiently dominant in-band peak exists
/// (uniform patch, occluder, blur).
pub fn estimate_patch_distance<R: Real>(
    patch: &GrayImage<R>,
    k: &CameraIntrinsics<R>,
    cfg: &FftConfig<R>,
) -> Result<Option<(R, R)>, NetFftError> {
    let n = cfg.patch_size as usize;
    if patch.width() != cfg.patch_size || patch.height() != cfg.patch_size {
        return Err(NetFftError::BadPatchSize {
            got_w: patch.width(),
            got_h: patch.height(),
            want: cfg.patch_size,
        });
    }

    // Mean-subtract and Hann-window to suppress spectral leakage.
    let pixels: Vec<f64> = patch.pixels().iter().map(|p| p.as_f64()).collect();
    let mean = pixels.iter().sum::<f64>() / (pixels.len() as f64);
    let rms_contrast = (pixels.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>()
        / pixels.len() as f64)
        .sqrt();
    if rms_contrast < 1e-6 {
        // Featureless patch; the residual is numerical noise, not texture.
        return Ok(None);
    }
    let window: Vec<f64> = (0..n)
        .map(|i| {
            let phase = 2.0 * std::f64::consts::PI * i as f64 / (n as f64 - 1.0);
            0.5 * (1.0 - phase.cos())
        })
        .collect();
    let mut buf: Vec<Complex<f64>> = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            let w = window[y] * window[x];
            buf.push(Complex::new((pixels[y * n + x] - mean) * w, 0.0));
        }
    }
    fft2d(&mut buf, n);
    let mags: Vec<f64> = buf.iter().map(|c| c.norm_sqr().sqrt()).collect();

    // Peak search restricted to the plausible period band, outside the DC disk.
    let freq_lo = (n as f64 / cfg.max_period_px.as_f64()).max(DC_SUPPRESSION_RADIUS);
    let freq_hi = n as f64 / cfg.min_period_px.as_f64();
    let mut band = Vec::new();
    let mut best: Option<(usize, usize, f64)> = None;
    let mut best_vertical: Option<(usize, usize, f64)> = None;
    let mut sub_band_max = 0.0f64;
    for ky_idx in 0..n {
        let ky = signed_freq(ky_idx, n);
        for kx_idx in 0..n {
            let kx = signed_freq(kx_idx, n);
            let rho = kx.hypot(ky);
            if rho > 1.0 && rho <= freq_lo {
                // Smooth shading (occluder silhouettes, attenuation ramps)
                // lives below the band; a legitimate mesh peak must beat it.
                sub_band_max = sub_band_max.max(mags[ky_idx * n + kx_idx]);
                continue;
            }
            if rho <= freq_lo || rho > freq_hi {
                continue;
            }
            let m = mags[ky_idx * n + kx_idx];
            band.push(m);
            if best.is_none_or(|(_, _, b)| m > b) {
                best = Some((kx_idx, ky_idx, m));
            }
            if ky.abs() >= kx.abs() && best_vertical.is_none_or(|(_, _, b)| m > b) {
                best_vertical = Some((kx_idx, ky_idx, m));
            }
        }
    }
    let Some((_, _, strongest_mag)) = best else {
        return Ok(None);
    };
    if strongest_mag <= sub_band_max {
        return Ok(None);
    }
    // A square mesh carries two near-orthogonal fundamentals. The vertical
    // frequency measures pure 1/z: a horizontal depth gradient (yaw, wall
    // curvature) rescales the horizontal period quadratically in z but
    // leaves the vertical one untouched, and pitch is zero by the 2D
    // reduction. Prefer the vertical-dominant peak whenever it is a real
    // peak in its own right.
    let (px_idx, py_idx, peak_mag) = match best_vertical {
        Some((x, y, m)) if m >= 0.25 * strongest_mag => (x, y, m),
        _ => best.expect("checked above"),
    };
    band.sort_by(|a, b| a.partial_cmp(b).expect("finite magnitudes"));
    let median = if band.len() % 2 == 1 {
        band[band.len() / 2]
    } else {
        0.5 * (band[band.len() / 2 - 1] + band[band.len() / 2])
    };
    let confidence = peak_mag / median;
    if !(confidence.is_finite() && confidence >= cfg.confidence_threshold.as_f64()) {
        return Ok(None);
    }

    // Sub-bin refinement: quadratic fit of log-magnitude over the 3x3
    // neighborhood (wrapped indices; the spectrum is periodic).
    let log_at = |dx: i64, dy: i64| -> f64 {
        let x = (px_idx as i64 + dx).rem_euclid(n as i64) as usize;
        let y = (py_idx as i64 + dy).rem_euclid(n as i64) as usize;
        mags[y * n + x].max(f64::MIN_POSITIVE).ln()
    };
    let (mut off_x, mut off_y) = (0.0, 0.0);
    let gx = 0.5 * (log_at(1, 0) - log_at(-1, 0));
    let gy = 0.5 * (log_at(0, 1) - log_at(0, -1));
    let hxx = log_at(1, 0) - 2.0 * log_at(0, 0) + log_at(-1, 0);
    let hyy = log_at(0, 1) - 2.0 * log_at(0, 0) + log_at(0, -1);
    let hxy = 0.25 * (log_at(1, 1) - log_at(1, -1) - log_at(-1, 1) + log_at(-1, -1));
    let det = hxx * hyy - hxy * hxy;
    if det.abs() > 1e-12 && det.is_finite() {
        let sx = -(hyy * gx - hxy * gy) / det;
        let sy = -(hxx * gy - hxy * gx) / det;
        if sx.is_finite() && sy.is_finite() {
            off_x = sx.clamp(-0.5, 0.5);
            off_y = sy.clamp(-0.5, 0.5);
        }
    }

    let kx = signed_freq(px_idx, n) + off_x;
    let ky = signed_freq(py_idx, n) + off_y;
    let rho = kx.hypot(ky);
    if rho <= 0.0 {
        return Ok(None);
    }
    let period = n as f64 / rho;
    let focal = if kx.abs() >= ky.abs() { k.fx } else { k.fy };
    let depth = focal.as_f64() * cfg.grid_cell.as_f64() / period;
    Ok(Some((R::from_config(depth), R::from_config(confidence))))
}

/// Tile the image into patches and emit one prior per accepted patch at the
/// patch-center pixel, in row-major patch order.
pub fn extract_priors<R: Real>(
    image: &GrayImage<R>,
    k: &CameraIntrinsics<R>,
    cfg: &FftConfig<R>,
) -> Result<Vec<SparseDepthPrior<R>>, NetFftError> {
    let p = cfg.patch_size;
    if image.width() < p || image.height() < p {
        return Err(NetFftError::ImageTooSmall {
            width: image.width(),
            height: image.height(),
            patch: p,
        });
    }
    let mut priors = Vec::new();
    let mut y0 = 0;
    while y0 + p <= image.height() {
        let mut x0 = 0;
        while x0 + p <= image.width() {
            let patch = image.patch(x0, y0, p).expect("tile bounds checked");
            if let Some((depth, confidence)) = estimate_patch_distance(&patch, k, cfg)? {
                priors.push(SparseDepthPrior {
                    u: R::from_count((x0 + p / 2) as usize),
                    v: R::from_count((y0 + p / 2) as usize),
                    depth,
                    confidence,
                });
            }
            x0 += cfg.patch_stride;
        }
        y0 += cfg.patch_stride;
    }
    Ok(priors)
}

/// Back-project priors into camera-frame 3D points, carrying confidences
/// alongside for weighted fitting.
pub fn priors_to_points<R: Real>(
    priors: &[SparseDepthPrior<R>],
    k: &CameraIntrinsics<R>,
) -> Result<Vec<(Point3<R>, R)>, NetFftError> {
    priors
        .iter()
        .map(|p| Ok((backproject(k, p.u, p.v, p.depth)?, p.confidence)))
        .collect()
}
