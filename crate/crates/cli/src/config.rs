//! Pipeline configuration: a TOML schema with sane defaults for every
//! section, so a minimal file (or an empty one) runs the full pipeline.

use std::path::Path;

use serde::{Deserialize, Serialize};

use netpen_core::depthfill::CompletionStrategy;
use netpen_core::netfft::FftConfig;

use crate::{io_err, PipelineError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FftSection {
    pub patch_size: u32,
    pub patch_stride: u32,
    pub grid_cell: f64,
    pub min_period_px: f64,
    pub max_period_px: f64,
    pub confidence_threshold: f64,
}

impl Default for FftSection {
    fn default() -> Self {
        Self {
            patch_size: 128,
            patch_stride: 128,
            grid_cell: 0.02,
            min_period_px: 5.0,
            max_period_px: 48.0,
            confidence_threshold: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionSection {
    /// `quadratic`, `idw`, or `constant-mean`.
    pub strategy: String,
    pub idw_power: f64,
    pub idw_neighbors: usize,
}

impl Default for CompletionSection {
    fn default() -> Self {
        Self {
            strategy: "quadratic".into(),
            idw_power: 2.0,
            idw_neighbors: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseSection {
    /// Pixel stride when sampling dense depth for the comparison pose.
    pub depthmap_sample_stride: u32,
}

impl Default for PoseSection {
    fn default() -> Self {
        Self {
            depthmap_sample_stride: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapSection {
    pub enabled: bool,
    pub leaf_resolution: f64,
    pub ray_stride: u32,
    pub hit_logodds: f64,
    pub miss_logodds: f64,
    pub max_ray_range: f64,
    /// Hits required before a leaf counts as occupied in exports.
    pub min_hits_occupied: u32,
}

impl Default for MapSection {
    fn default() -> Self {
        Self {
            enabled: true,
            leaf_resolution: 0.05,
            ray_stride: 8,
            hit_logodds: 0.85,
            miss_logodds: -0.4,
            max_ray_range: 8.0,
            min_hits_occupied: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CloudSection {
    pub enabled: bool,
    pub pixel_stride: u32,
}

impl Default for CloudSection {
    fn default() -> Self {
        Self {
            enabled: true,
            pixel_stride: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub smoothing_window: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            smoothing_window: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct OutputSection {
    /// Write per-frame depth rasters alongside the other artifacts.
    pub depth_rasters: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    pub fft: FftSection,
    pub completion: CompletionSection,
    pub pose: PoseSection,
    pub map: MapSection,
    pub cloud: CloudSection,
    pub eval: EvalSection,
    pub output: OutputSection,
    /// Skip map insertion and cloud stacking on degraded frames.
    pub exclude_degraded: bool,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn fft_config(&self) -> Result<FftConfig<f64>, PipelineError> {
        FftConfig::new(
            self.fft.patch_size,
            self.fft.patch_stride,
            self.fft.grid_cell,
            self.fft.min_period_px,
            self.fft.max_period_px,
            self.fft.confidence_threshold,
        )
        .map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn completion_strategy(&self) -> Result<CompletionStrategy<f64>, PipelineError> {
        match self.completion.strategy.as_str() {
            "quadratic" => Ok(CompletionStrategy::QuadraticSurface),
            "idw" => Ok(CompletionStrategy::InverseDistanceWeighting {
                power: self.completion.idw_power,
                neighbors: self.completion.idw_neighbors,
            }),
            "constant-mean" => Ok(CompletionStrategy::ConstantMean),
            other => Err(PipelineError::Config(format!(
                "unknown completion strategy '{other}' (expected quadratic, idw, or constant-mean)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_toml_string();
        let back = PipelineConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert!(cfg.fft_config().is_ok());
        assert!(matches!(
            cfg.completion_strategy().unwrap(),
            CompletionStrategy::QuadraticSurface
        ));
    }

    #[test]
    fn empty_toml_means_defaults() {
        let cfg = PipelineConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
    }

    #[test]
    fn bad_strategy_is_a_config_error() {
        let cfg = PipelineConfig::from_toml_str("[completion]\nstrategy = \"magic\"\n").unwrap();
        assert!(matches!(
            cfg.completion_strategy(),
            Err(PipelineError::Config(_))
        ));
    }

    #[test]
    fn bad_fft_band_is_a_config_error() {
        let cfg =
            PipelineConfig::from_toml_str("[fft]\nmin_period_px = 60.0\nmax_period_px = 40.0\n")
                .unwrap();
        assert!(matches!(cfg.fft_config(), Err(PipelineError::Config(_))));
    }
}
