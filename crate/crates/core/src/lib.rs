//! Localization and mapping toolkit for underwater vehicles operating inside
//! cylindrical fish-net pens.
//!
//! The crate estimates net-relative pose from the periodic net texture seen
//! by a monocular camera, completes dense metric depth from the sparse
//! spectral priors, fuses vision with dead reckoning into a global
//! cylindrical pose, and builds 3D maps of the pen. A synthetic net-pen
//! simulator ([`simpen`]) provides ground truth for every stage.
//!
//! Module map:
//!
//! * [`geometry`] — frames, pinhole camera, cylindrical conversions.
//! * [`netfft`] — patch-wise spectral distance estimation on the net mesh.
//! * [`relpose`] — net-relative pose from 3D points, depth maps, DVL beams.
//! * [`depthfill`] — sparse-prior to dense depth completion.
//! * [`globalpose`] — circle fitting, dead reckoning, pose fusion.
//! * [`mapping`] — RGB point-cloud stacking and octree occupancy mapping.
//! * [`simpen`] — synthetic world, renderer, sensor models, datasets.
//!
//! All numeric code is generic over the scalar type via [`scalar::Real`]
//! (`f32` or `f64`); the aliases below pin the default `f64` precision used
//! by the pipeline and the CLI.

pub mod depthfill;
pub mod geometry;
pub mod globalpose;
pub mod image;
pub mod mapping;
pub mod netfft;
pub mod relpose;
pub mod scalar;
pub mod simpen;

pub use scalar::Real;

/// 2D point (horizontal plane), default precision.
pub type Point2 = geometry::Point2<f64>;
/// 3D point (camera or pen frame), default precision.
pub type Point3 = geometry::Point3<f64>;
/// Pinhole camera intrinsics, default precision.
pub type CameraIntrinsics = geometry::CameraIntrinsics<f64>;
/// Float-valued grayscale raster, default precision.
pub type GrayImage = image::GrayImage<f64>;
/// Metric depth raster with validity mask, default precision.
pub type DepthImage = image::DepthImage<f64>;
/// Spectral patch detector configuration, default precision.
pub type FftConfig = netfft::FftConfig<f64>;
/// Metric depth prior at a known pixel, default precision.
pub type SparseDepthPrior = netfft::SparseDepthPrior<f64>;
/// Net-relative pose (distance, relative yaw/pitch), default precision.
pub type NetRelativePose = relpose::NetRelativePose<f64>;
/// Completion strategy selector, default precision.
pub type CompletionStrategy = depthfill::CompletionStrategy<f64>;
/// Global cylindrical pen-frame pose, default precision.
pub type GlobalPose = globalpose::GlobalPose<f64>;
/// Body-frame horizontal velocity, default precision.
pub type BodyVelocity = globalpose::BodyVelocity<f64>;
/// Fixed-radius circle fit result, default precision.
pub type CircleFit = globalpose::CircleFit<f64>;
/// Octree occupancy map, default precision.
pub type OccupancyMap = mapping::OccupancyMap<f64>;
/// Colored point cloud in the pen frame, default precision.
pub type ColoredPointCloud = mapping::ColoredPointCloud<f64>;
/// Synthetic pen world description, default precision.
pub type PenWorld = simpen::PenWorld<f64>;
