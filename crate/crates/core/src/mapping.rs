//! Mapping products: cylinder-projected RGB point-cloud stacking and a
//! multi-resolution octree occupancy map built from depth images and global
//! poses.
//!
//! The occupancy map stores clamped log-odds per leaf voxel and maintains a
//! max-aggregate per coarser level, so a level-k query answers "the largest
//! leaf log-odds in this 2^k block" with unobserved leaves counting as 0
//! (the prior). Max-aggregation is conservative for navigation queries.
//!
//! Concurrency contract: queries take `&self` and insertion takes
//! `&mut self`, so the borrow checker enforces many-readers-or-one-writer.
//!
//! File formats (PLY point clouds and the versioned binary map dump) are
//! documented field-by-field in `docs/formats.md`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::geometry::{ray_cylinder_first_hit, Point3};
use crate::globalpose::{camera_axes, camera_position, GlobalPose};
use crate::image::{DepthImage, RgbImage};
use crate::scalar::Real;
use crate::geometry::CameraIntrinsics;

/// Log-odds clamp bounds applied to every node.
pub const LOG_ODDS_CLAMP: (f64, f64) = (-4.0, 4.0);
/// Magic header of the binary map dump, version 1.
pub const MAP_DUMP_MAGIC: [u8; 8] = *b"NPENMAP1";

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("pose at r = {0} is outside the pen of radius {1}")]
    PoseOutsidePen(f64, f64),
    #[error("depth image {0}x{1} does not match camera {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("point ({0:.2}, {1:.2}, {2:.2}) outside the mapped volume")]
    OutOfVolume(f64, f64, f64),
    #[error("query level {0} exceeds tree depth {1}")]
    InvalidLevel(u32, u32),
    #[error("invalid map parameters: {0}")]
    InvalidParameters(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format {
        path: std::path::PathBuf,
        reason: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MappingError + '_ {
    move |source| MappingError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> MappingError {
    MappingError::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// One colored point with per-point frame provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColoredPoint<R> {
    pub position: Point3<R>,
    pub color: [u8; 3],
    pub frame_id: u32,
}

/// Colored point cloud in the pen frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColoredPointCloud<R> {
    pub points: Vec<ColoredPoint<R>>,
}

impl<R: Real> ColoredPointCloud<R> {
    pub fn new() -> Self {
        Self { points: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn extend(&mut self, other: ColoredPointCloud<R>) {
        self.points.extend(other.points);
    }
}

/// Hit/miss log-odds increments and the ray truncation range.
#[derive(Debug, Clone, Copy)]
pub struct InverseSensorModel<R> {
    pub hit_logodds: R,
    pub miss_logodds: R,
    pub max_ray_range: R,
}

impl<R: Real> Default for InverseSensorModel<R> {
    fn default() -> Self {
        Self {
            hit_logodds: R::from_config(0.85),
            miss_logodds: R::from_config(-0.4),
            max_ray_range: R::from_config(10.0),
        }
    }
}

impl<R: Real> InverseSensorModel<R> {
    pub fn validate(&self) -> Result<(), MappingError> {
        if !(self.hit_logodds > R::zero() && self.miss_logodds < R::zero()) {
            return Err(MappingError::InvalidParameters(
                "need hit_logodds > 0 > miss_logodds".into(),
            ));
        }
        if self.max_ray_range <= R::zero() {
            return Err(MappingError::InvalidParameters(
                "max_ray_range must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LeafCell<R> {
    logodds: R,
    hits: u32,
}

/// Copyable grid geometry of a map, so traversal can run while the map's
/// cell storage is mutated.
#[derive(Debug, Clone, Copy)]
struct Grid<R> {
    min_corner: Point3<R>,
    leaf_resolution: R,
    side_cells: u32,
}

impl<R: Real> Grid<R> {
    fn cell_of(&self, p: Point3<R>) -> Result<(u32, u32, u32), MappingError> {
        let rel = p - self.min_corner;
        let side = R::from_count(self.side_cells as usize) * self.leaf_resolution;
        if rel.x < R::zero()
            || rel.y < R::zero()
            || rel.z < R::zero()
            || rel.x >= side
            || rel.y >= side
            || rel.z >= side
        {
            return Err(MappingError::OutOfVolume(
                p.x.as_f64(),
                p.y.as_f64(),
                p.z.as_f64(),
            ));
        }
        let ix = (rel.x / self.leaf_resolution).floor().as_f64() as u32;
        let iy = (rel.y / self.leaf_resolution).floor().as_f64() as u32;
        let iz = (rel.z / self.leaf_resolution).floor().as_f64() as u32;
        let max = self.side_cells - 1;
        Ok((ix.min(max), iy.min(max), iz.min(max)))
    }
}

/// Sparse octree of log-odds occupancy over an axis-aligned cube.
///
/// `levels` halvings take the cube side down to the leaf resolution: the
/// volume spans `2^levels` leaves per axis starting at `min_corner`.
#[derive(Debug, Clone)]
pub struct OccupancyMap<R> {
    min_corner: Point3<R>,
    leaf_resolution: R,
    levels: u32,
    leaves: HashMap<u64, LeafCell<R>>,
    /// Aggregates indexed by level (1 = 2x2x2 leaves, ..., `levels` = root).
    aggregates: Vec<HashMap<u64, R>>,
}

fn pack_key(ix: u32, iy: u32, iz: u32) -> u64 {
    debug_assert!(ix < (1 << 21) && iy < (1 << 21) && iz < (1 << 21));
    (ix as u64) | ((iy as u64) << 21) | ((iz as u64) << 42)
}

fn unpack_key(key: u64) -> (u32, u32, u32) {
    (
        (key & 0x1F_FFFF) as u32,
        ((key >> 21) & 0x1F_FFFF) as u32,
        ((key >> 42) & 0x1F_FFFF) as u32,
    )
}

impl<R: Real> OccupancyMap<R> {
    pub fn new(min_corner: Point3<R>, leaf_resolution: R, levels: u32) -> Result<Self, MappingError> {
        if leaf_resolution <= R::zero() {
            return Err(MappingError::InvalidParameters(
                "leaf resolution must be positive".into(),
            ));
        }
        if levels == 0 || levels > 20 {
            return Err(MappingError::InvalidParameters(format!(
                "levels {levels} outside 1..=20"
            )));
        }
        Ok(Self {
            min_corner,
            leaf_resolution,
            levels,
            leaves: HashMap::new(),
            aggregates: (0..levels).map(|_| HashMap::new()).collect(),
        })
    }

    /// Map sized for a pen: covers the full cylinder footprint plus margin
    /// and the depth range, with the requested leaf resolution.
    pub fn for_pen(pen_radius: R, pen_depth: R, leaf_resolution: R) -> Result<Self, MappingError> {
        let margin = R::from_config(1.0);
        let span = (pen_radius + margin) * R::from_config(2.0);
        let vertical = pen_depth + margin * R::from_config(2.0);
        let needed = if span > vertical { span } else { vertical };
        let cells = (needed / leaf_resolution).as_f64().ceil().max(2.0);
        let levels = (cells.log2().ceil() as u32).clamp(1, 20);
        let half = R::from_config(2f64.powi(levels as i32) / 2.0) * leaf_resolution;
        Self::new(
            Point3::new(-half, -half, -margin),
            leaf_resolution,
            levels,
        )
    }

    pub fn leaf_resolution(&self) -> R {
        self.leaf_resolution
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn min_corner(&self) -> Point3<R> {
        self.min_corner
    }

    /// Number of leaves per axis.
    pub fn side_cells(&self) -> u32 {
        1 << self.levels
    }

    fn grid(&self) -> Grid<R> {
        Grid {
            min_corner: self.min_corner,
            leaf_resolution: self.leaf_resolution,
            side_cells: self.side_cells(),
        }
    }

    fn cell_of(&self, p: Point3<R>) -> Result<(u32, u32, u32), MappingError> {
        self.grid().cell_of(p)
    }

    /// Center of a leaf cell.
    pub fn leaf_center(&self, ix: u32, iy: u32, iz: u32) -> Point3<R> {
        let half = R::from_config(0.5);
        Point3::new(
            self.min_corner.x + (R::from_count(ix as usize) + half) * self.leaf_resolution,
            self.min_corner.y + (R::from_count(iy as usize) + half) * self.leaf_resolution,
            self.min_corner.z + (R::from_count(iz as usize) + half) * self.leaf_resolution,
        )
    }

    fn apply_leaf_delta(&mut self, key: u64, delta: R, is_hit: bool) {
        let clamp_lo = R::from_config(LOG_ODDS_CLAMP.0);
        let clamp_hi = R::from_config(LOG_ODDS_CLAMP.1);
        let cell = self.leaves.entry(key).or_insert(LeafCell {
            logodds: R::zero(),
            hits: 0,
        });
        cell.logodds = (cell.logodds + delta).clamp(clamp_lo, clamp_hi);
        if is_hit {
            cell.hits += 1;
        }
    }

    /// Recompute max-aggregates bottom-up for the touched leaves. A missing
    /// child counts as log-odds 0 (unobserved), so aggregates answer the
    /// same question as a brute-force scan over all leaf slots of a block.
    fn reaggregate(&mut self, touched_leaves: &[u64]) {
        let mut touched: Vec<u64> = touched_leaves.to_vec();
        for level in 1..=self.levels {
            let mut parents: Vec<u64> = touched
                .iter()
                .map(|key| {
                    let (x, y, z) = unpack_key(*key);
                    pack_key(x >> 1, y >> 1, z >> 1)
                })
                .collect();
            parents.sort_unstable();
            parents.dedup();
            for &pkey in &parents {
                let (px, py, pz) = unpack_key(pkey);
                let mut best = R::zero();
                let mut any = false;
                for dz in 0..2u32 {
                    for dy in 0..2u32 {
                        for dx in 0..2u32 {
                            let ckey = pack_key(px * 2 + dx, py * 2 + dy, pz * 2 + dz);
                            let child = if level == 1 {
                                self.leaves.get(&ckey).map(|c| c.logodds)
                            } else {
                                self.aggregates[level as usize - 2].get(&ckey).copied()
                            };
                            // A missing child block is unobserved: prior
                            // log-odds 0, which `best` already starts at.
                            if let Some(v) = child {
                                any = true;
                                if v > best {
                                    best = v;
                                }
                            }
                        }
                    }
                }
                debug_assert!(any, "parent aggregation reached without children");
                self.aggregates[level as usize - 1].insert(pkey, best);
            }
            touched = parents;
        }
    }

    /// Log-odds occupancy at `p`. Level 0 reads the leaf (0 if unobserved);
    /// level k reads the max-aggregate of the containing 2^k block.
    pub fn query_occupancy(&self, p: Point3<R>, level: u32) -> Result<R, MappingError> {
        if level > self.levels {
            return Err(MappingError::InvalidLevel(level, self.levels));
        }
        let (ix, iy, iz) = self.cell_of(p)?;
        let key = pack_key(ix >> level, iy >> level, iz >> level);
        let value = if level == 0 {
            self.leaves.get(&key).map(|c| c.logodds)
        } else {
            self.aggregates[level as usize - 1].get(&key).copied()
        };
        Ok(value.unwrap_or(R::zero()))
    }

    /// Iterate stored leaves as `(ix, iy, iz, logodds, hits)`.
    pub fn iter_leaves(&self) -> impl Iterator<Item = (u32, u32, u32, R, u32)> + '_ {
        self.leaves.iter().map(|(k, c)| {
            let (x, y, z) = unpack_key(*k);
            (x, y, z, c.logodds, c.hits)
        })
    }

    /// Occupied leaves: positive log-odds with at least `min_hits` hit
    /// observations.
    pub fn occupied_leaves(&self, min_hits: u32) -> Vec<(Point3<R>, R)> {
        let mut out: Vec<(u64, R)> = self
            .leaves
            .iter()
            .filter(|(_, c)| c.logodds > R::zero() && c.hits >= min_hits)
            .map(|(k, c)| (*k, c.logodds))
            .collect();
        out.sort_unstable_by_key(|(k, _)| *k);
        out.into_iter()
            .map(|(k, v)| {
                let (x, y, z) = unpack_key(k);
                (self.leaf_center(x, y, z), v)
            })
            .collect()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }
}

/// Amanatides-Woo style voxel traversal from `from` to `to` in leaf grid
/// coordinates; calls `visit(ix, iy, iz)` for every cell strictly before the
/// endpoint cell. Both endpoints must already lie inside the volume.
fn traverse_leaf_cells<R: Real>(
    grid: Grid<R>,
    from: Point3<R>,
    to: Point3<R>,
    mut visit: impl FnMut(u32, u32, u32),
) -> Result<(u32, u32, u32), MappingError> {
    let start = grid.cell_of(from)?;
    let end = grid.cell_of(to)?;
    let res = grid.leaf_resolution;
    let dir = to - from;
    let mut cell = [start.0 as i64, start.1 as i64, start.2 as i64];
    let end_cell = [end.0 as i64, end.1 as i64, end.2 as i64];
    let d = [dir.x, dir.y, dir.z];
    let rel = from - grid.min_corner;
    let pos = [rel.x, rel.y, rel.z];

    let mut step = [0i64; 3];
    let mut t_max = [R::from_config(f64::INFINITY); 3];
    let mut t_delta = [R::from_config(f64::INFINITY); 3];
    for a in 0..3 {
        if d[a] > R::zero() {
            step[a] = 1;
            let boundary = R::from_count(cell[a] as usize + 1) * res;
            t_max[a] = (boundary - pos[a]) / d[a];
            t_delta[a] = res / d[a];
        } else if d[a] < R::zero() {
            step[a] = -1;
            let boundary = R::from_count(cell[a] as usize) * res;
            t_max[a] = (boundary - pos[a]) / d[a];
            t_delta[a] = -res / d[a];
        }
    }

    let max_steps = 3 * (grid.side_cells as usize + 2);
    for _ in 0..max_steps {
        if cell == end_cell {
            break;
        }
        visit(cell[0] as u32, cell[1] as u32, cell[2] as u32);
        let axis = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
            0
        } else if t_max[1] <= t_max[2] {
            1
        } else {
            2
        };
        cell[axis] += step[axis];
        t_max[axis] += t_delta[axis];
        if cell[axis] < 0 || cell[axis] >= grid.side_cells as i64 {
            break;
        }
    }
    Ok(end)
}

/// Integrate one depth image into the map: every `ray_stride`-th valid pixel
/// casts a ray from the camera, traversed voxels receive the miss update and
/// the endpoint voxel the hit update. Rays longer than the sensor model's
/// `max_ray_range` are truncated to free-space-only updates. Aggregates are
/// re-established before returning, so the update is atomic per call.
pub fn insert_depth_image<R: Real>(
    map: &mut OccupancyMap<R>,
    pose: &GlobalPose<R>,
    depth: &DepthImage<R>,
    k: &CameraIntrinsics<R>,
    model: &InverseSensorModel<R>,
    ray_stride: u32,
) -> Result<(), MappingError> {
    model.validate()?;
    if depth.width() != k.width || depth.height() != k.height {
        return Err(MappingError::DimensionMismatch(
            depth.width(),
            depth.height(),
            k.width,
            k.height,
        ));
    }
    let stride = ray_stride.max(1);
    let axes = camera_axes(pose);
    let origin = camera_position(pose);
    if map.cell_of(origin).is_err() {
        return Err(MappingError::OutOfVolume(
            origin.x.as_f64(),
            origin.y.as_f64(),
            origin.z.as_f64(),
        ));
    }

    let mut touched: Vec<u64> = Vec::new();
    let mut y = 0;
    while y < depth.height() {
        let mut x = 0;
        while x < depth.width() {
            if let Some(z) = depth.get(x, y) {
                let dir_cam = nalgebra::Vector3::new(
                    (R::from_count(x as usize) - k.cx) / k.fx,
                    (R::from_count(y as usize) - k.cy) / k.fy,
                    R::one(),
                );
                let dir_pen = axes[0] * dir_cam.x + axes[1] * dir_cam.y + axes[2] * dir_cam.z;
                let endpoint_full = Point3::from_vector(origin.to_vector() + dir_pen * z);
                let range = (endpoint_full - origin).norm();
                let truncated = range > model.max_ray_range;
                let endpoint = if truncated {
                    let scale = model.max_ray_range / range;
                    Point3::from_vector(origin.to_vector() + dir_pen * (z * scale))
                } else {
                    endpoint_full
                };
                // Clip rays leaving the mapped volume to free-space updates
                // on the inside portion.
                let endpoint_in = map.cell_of(endpoint).is_ok();
                if endpoint_in {
                    let grid = map.grid();
                    let end_cell =
                        traverse_leaf_cells(grid, origin, endpoint, |ix, iy, iz| {
                            let key = pack_key(ix, iy, iz);
                            map.apply_leaf_delta(key, model.miss_logodds, false);
                            touched.push(key);
                        })?;
                    let end_key = pack_key(end_cell.0, end_cell.1, end_cell.2);
                    if truncated {
                        map.apply_leaf_delta(end_key, model.miss_logodds, false);
                    } else {
                        map.apply_leaf_delta(end_key, model.hit_logodds, true);
                    }
                    touched.push(end_key);
                }
            }
            x += stride;
        }
        y += stride;
    }
    touched.sort_unstable();
    touched.dedup();
    map.reaggregate(&touched);
    Ok(())
}

/// Project every `stride`-th pixel onto the pen cylinder of radius
/// `pen_radius` and color the intersection with the pixel color. Rays that
/// miss the cylinder are skipped.
pub fn project_to_cylinder<R: Real>(
    image: &RgbImage,
    pose: &GlobalPose<R>,
    k: &CameraIntrinsics<R>,
    pen_radius: R,
    stride: u32,
    frame_id: u32,
) -> Result<ColoredPointCloud<R>, MappingError> {
    if pose.r >= pen_radius {
        return Err(MappingError::PoseOutsidePen(
            pose.r.as_f64(),
            pen_radius.as_f64(),
        ));
    }
    let stride = stride.max(1);
    let axes = camera_axes(pose);
    let origin = camera_position(pose);
    let mut cloud = ColoredPointCloud::new();
    let mut y = 0;
    while y < image.height() {
        let mut x = 0;
        while x < image.width() {
            let dir_cam = nalgebra::Vector3::new(
                (R::from_count(x as usize) - k.cx) / k.fx,
                (R::from_count(y as usize) - k.cy) / k.fy,
                R::one(),
            );
            let dir_pen = axes[0] * dir_cam.x + axes[1] * dir_cam.y + axes[2] * dir_cam.z;
            if let Some(t) = ray_cylinder_first_hit(origin, dir_pen, pen_radius) {
                let p = Point3::from_vector(origin.to_vector() + dir_pen * t);
                let c = image.get_pixel(x, y);
                cloud.points.push(ColoredPoint {
                    position: p,
                    color: [c[0], c[1], c[2]],
                    frame_id,
                });
            }
            x += stride;
        }
        y += stride;
    }
    Ok(cloud)
}

/// Occupied-leaf centers as a point cloud, colored by a blue-to-red depth
/// gradient over the pen depth range.
pub fn map_to_cloud<R: Real>(
    map: &OccupancyMap<R>,
    min_hits: u32,
    z_range: (R, R),
) -> ColoredPointCloud<R> {
    let (z0, z1) = z_range;
    let span = (z1 - z0).max(R::from_config(1e-9));
    let points = map
        .occupied_leaves(min_hits)
        .into_iter()
        .map(|(p, _)| {
            let s = ((p.z - z0) / span).clamp(R::zero(), R::one()).as_f64();
            let color = [
                (255.0 * s) as u8,
                (64.0 + 96.0 * (1.0 - (2.0 * s - 1.0).abs())) as u8,
                (255.0 * (1.0 - s)) as u8,
            ];
            ColoredPoint {
                position: p,
                color,
                frame_id: 0,
            }
        })
        .collect();
    ColoredPointCloud { points }
}

/// PLY flavor for [`write_ply`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

/// Write a colored cloud as PLY (`float` x/y/z plus `uchar` RGB). Frame
/// provenance is not part of the PLY payload.
pub fn write_ply<R: Real>(
    cloud: &ColoredPointCloud<R>,
    path: &Path,
    format: PlyFormat,
) -> Result<(), MappingError> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    let fmt_line = match format {
        PlyFormat::Ascii => "format ascii 1.0",
        PlyFormat::BinaryLittleEndian => "format binary_little_endian 1.0",
    };
    write!(
        w,
        "ply\n{fmt_line}\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        cloud.points.len()
    )
    .map_err(io_err(path))?;
    match format {
        PlyFormat::Ascii => {
            for p in &cloud.points {
                writeln!(
                    w,
                    "{} {} {} {} {} {}",
                    p.position.x.as_f64() as f32,
                    p.position.y.as_f64() as f32,
                    p.position.z.as_f64() as f32,
                    p.color[0],
                    p.color[1],
                    p.color[2]
                )
                .map_err(io_err(path))?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for p in &cloud.points {
                for v in [p.position.x, p.position.y, p.position.z] {
                    w.write_all(&(v.as_f64() as f32).to_le_bytes())
                        .map_err(io_err(path))?;
                }
                w.write_all(&p.color).map_err(io_err(path))?;
            }
        }
    }
    w.flush().map_err(io_err(path))
}

/// Read a PLY file written by [`write_ply`] (both flavors). `frame_id` is 0
/// on every parsed point.
pub fn read_ply<R: Real>(path: &Path) -> Result<ColoredPointCloud<R>, MappingError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let header_end = bytes
        .windows(11)
        .position(|w| w == b"end_header\n")
        .ok_or_else(|| format_err(path, "missing end_header"))?
        + 11;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| format_err(path, "non-utf8 header"))?;
    let mut format = None;
    let mut count: Option<usize> = None;
    for line in header.lines() {
        if let Some(rest) = line.strip_prefix("format ") {
            format = Some(match rest {
                "ascii 1.0" => PlyFormat::Ascii,
                "binary_little_endian 1.0" => PlyFormat::BinaryLittleEndian,
                other => return Err(format_err(path, format!("unsupported format {other}"))),
            });
        }
        if let Some(rest) = line.strip_prefix("element vertex ") {
            count = Some(
                rest.parse()
                    .map_err(|_| format_err(path, "bad vertex count"))?,
            );
        }
    }
    let format = format.ok_or_else(|| format_err(path, "missing format line"))?;
    let count = count.ok_or_else(|| format_err(path, "missing vertex element"))?;
    let mut points = Vec::with_capacity(count);
    match format {
        PlyFormat::Ascii => {
            let body = std::str::from_utf8(&bytes[header_end..])
                .map_err(|_| format_err(path, "non-utf8 body"))?;
            for line in body.lines().take(count) {
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() != 6 {
                    return Err(format_err(path, "expected 6 vertex fields"));
                }
                let num = |s: &str| -> Result<f64, MappingError> {
                    s.parse().map_err(|_| format_err(path, "bad float"))
                };
                points.push(ColoredPoint {
                    position: Point3::new(
                        R::from_config(num(f[0])?),
                        R::from_config(num(f[1])?),
                        R::from_config(num(f[2])?),
                    ),
                    color: [
                        f[3].parse().map_err(|_| format_err(path, "bad color"))?,
                        f[4].parse().map_err(|_| format_err(path, "bad color"))?,
                        f[5].parse().map_err(|_| format_err(path, "bad color"))?,
                    ],
                    frame_id: 0,
                });
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let mut cursor = &bytes[header_end..];
            for _ in 0..count {
                let mut xyz = [0f32; 3];
                for v in &mut xyz {
                    let mut b = [0u8; 4];
                    cursor.read_exact(&mut b).map_err(io_err(path))?;
                    *v = f32::from_le_bytes(b);
                }
                let mut color = [0u8; 3];
                cursor.read_exact(&mut color).map_err(io_err(path))?;
                points.push(ColoredPoint {
                    position: Point3::new(
                        R::from_config(xyz[0] as f64),
                        R::from_config(xyz[1] as f64),
                        R::from_config(xyz[2] as f64),
                    ),
                    color,
                    frame_id: 0,
                });
            }
        }
    }
    if points.len() != count {
        return Err(format_err(path, "vertex count mismatch"));
    }
    Ok(ColoredPointCloud { points })
}

/// Serialize the map as the versioned binary dump (little-endian).
pub fn export_map<R: Real>(map: &OccupancyMap<R>, path: &Path) -> Result<(), MappingError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&MAP_DUMP_MAGIC);
    for v in [
        map.min_corner.x.as_f64(),
        map.min_corner.y.as_f64(),
        map.min_corner.z.as_f64(),
        map.leaf_resolution.as_f64(),
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&map.levels.to_le_bytes());

    let mut leaves: Vec<(u64, LeafCell<R>)> =
        map.leaves.iter().map(|(k, c)| (*k, *c)).collect();
    leaves.sort_unstable_by_key(|(k, _)| *k);
    buf.extend_from_slice(&(leaves.len() as u64).to_le_bytes());
    for (key, cell) in leaves {
        let (x, y, z) = unpack_key(key);
        buf.extend_from_slice(&x.to_le_bytes());
        buf.extend_from_slice(&y.to_le_bytes());
        buf.extend_from_slice(&z.to_le_bytes());
        buf.extend_from_slice(&cell.logodds.as_f64().to_le_bytes());
        buf.extend_from_slice(&cell.hits.to_le_bytes());
    }
    std::fs::write(path, buf).map_err(io_err(path))
}

/// Load a map dump written by [`export_map`]; aggregates are rebuilt, so
/// queries answer identically to the exported map.
pub fn import_map<R: Real>(path: &Path) -> Result<OccupancyMap<R>, MappingError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let mut cursor = bytes.as_slice();
    let mut magic = [0u8; 8];
    cursor.read_exact(&mut magic).map_err(io_err(path))?;
    if magic != MAP_DUMP_MAGIC {
        return Err(format_err(path, "bad magic"));
    }
    let mut f64_buf = [0u8; 8];
    let mut read_f64 = |cursor: &mut &[u8]| -> Result<f64, MappingError> {
        cursor.read_exact(&mut f64_buf).map_err(io_err(path))?;
        Ok(f64::from_le_bytes(f64_buf))
    };
    let min_x = read_f64(&mut cursor)?;
    let min_y = read_f64(&mut cursor)?;
    let min_z = read_f64(&mut cursor)?;
    let leaf = read_f64(&mut cursor)?;
    let mut u32_buf = [0u8; 4];
    cursor.read_exact(&mut u32_buf).map_err(io_err(path))?;
    let levels = u32::from_le_bytes(u32_buf);
    let mut map = OccupancyMap::new(
        Point3::new(
            R::from_config(min_x),
            R::from_config(min_y),
            R::from_config(min_z),
        ),
        R::from_config(leaf),
        levels,
    )?;
    let mut u64_buf = [0u8; 8];
    cursor.read_exact(&mut u64_buf).map_err(io_err(path))?;
    let count = u64::from_le_bytes(u64_buf);
    let mut touched = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let mut coords = [0u32; 3];
        for c in &mut coords {
            cursor.read_exact(&mut u32_buf).map_err(io_err(path))?;
            *c = u32::from_le_bytes(u32_buf);
        }
        cursor.read_exact(&mut f64_buf).map_err(io_err(path))?;
        let logodds = f64::from_le_bytes(f64_buf);
        cursor.read_exact(&mut u32_buf).map_err(io_err(path))?;
        let hits = u32::from_le_bytes(u32_buf);
        let key = pack_key(coords[0], coords[1], coords[2]);
        map.leaves.insert(
            key,
            LeafCell {
                logodds: R::from_config(logodds),
                hits,
            },
        );
        touched.push(key);
    }
    map.reaggregate(&touched);
    Ok(map)
}
