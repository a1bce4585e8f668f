//! Sliding-window smoothing filter applied to the relative distance and
//! orientation plot series.

use crate::PipelineError;

/// Centered moving average with an odd window. Near the boundaries the
/// window shrinks symmetrically, so the output has the input's length and a
/// constant series passes through unchanged.
pub fn smooth(series: &[f64], window: usize) -> Result<Vec<f64>, PipelineError> {
    if window.is_multiple_of(2) {
        return Err(PipelineError::Config(format!(
            "smoothing window must be odd, got {window}"
        )));
    }
    if window > series.len() {
        return Err(PipelineError::Config(format!(
            "smoothing window {window} exceeds series length {}",
            series.len()
        )));
    }
    let half = window / 2;
    let n = series.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let h = half.min(i).min(n - 1 - i);
        let lo = i - h;
        let hi = i + h;
        let sum: f64 = series[lo..=hi].iter().sum();
        out.push(sum / (hi - lo + 1) as f64);
    }
    Ok(out)
}

/// Smoothing over a series with gaps: missing entries (NaN) are excluded
/// from each window's average and stay missing in the output. On a gap-free
/// series this equals [`smooth`].
pub fn smooth_sparse(series: &[f64], window: usize) -> Result<Vec<f64>, PipelineError> {
    if window.is_multiple_of(2) {
        return Err(PipelineError::Config(format!(
            "smoothing window must be odd, got {window}"
        )));
    }
    if window > series.len() {
        return Err(PipelineError::Config(format!(
            "smoothing window {window} exceeds series length {}",
            series.len()
        )));
    }
    let half = window / 2;
    let n = series.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if series[i].is_nan() {
            out.push(f64::NAN);
            continue;
        }
        let h = half.min(i).min(n - 1 - i);
        let mut sum = 0.0;
        let mut count = 0usize;
        for v in &series[i - h..=i + h] {
            if !v.is_nan() {
                sum += v;
                count += 1;
            }
        }
        out.push(sum / count as f64);
    }
    Ok(out)
}
