//! Raster types: float-valued grayscale images and metric depth images.
//!
//! RGB frames reuse [`image::RgbImage`] (row-major, origin top-left), which
//! is also what the simulator writes as PNG. Depth images serialize to a
//! 32-bit float binary raster with an 8-byte header plus a sidecar validity
//! bitmask, and export as 16-bit PNG in millimeters for inspection; see
//! `docs/formats.md` for the field-by-field layout.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use image::RgbImage;

use crate::scalar::Real;

/// Magic bytes of the depth raster format, version 1.
pub const DEPTH_RASTER_MAGIC: [u8; 4] = *b"NPD1";

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image dimensions {width}x{height} are invalid: {reason}")]
    BadDimensions {
        width: u32,
        height: u32,
        reason: String,
    },
    #[error("pixel ({x}, {y}) outside {width}x{height} raster")]
    OutOfBounds { x: u32, y: u32, width: u32, height: u32 },
    #[error("dimensions {0}x{1} exceed the depth raster format limit of 65535")]
    TooLargeForFormat(u32, u32),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a depth raster (bad magic)")]
    BadMagic { path: PathBuf },
    #[error("{path}: truncated or inconsistent raster payload")]
    Corrupt { path: PathBuf },
    #[error("png encode failed: {0}")]
    Png(#[from] image::ImageError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RasterError + '_ {
    move |source| RasterError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Row-major float grayscale raster, origin top-left.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage<R> {
    width: u32,
    height: u32,
    data: Vec<R>,
}

impl<R: Real> GrayImage<R> {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![R::zero(); (width as usize) * (height as usize)],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> R) -> Self {
        let mut img = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                img.data[(y * width + x) as usize] = f(x, y);
            }
        }
        img
    }

    /// Luma conversion of an RGB frame (Rec. 601 weights), scaled to [0, 1].
    pub fn from_rgb_luma(rgb: &RgbImage) -> Self {
        let scale = R::from_config(1.0 / 255.0);
        let wr = R::from_config(0.299);
        let wg = R::from_config(0.587);
        let wb = R::from_config(0.114);
        Self::from_fn(rgb.width(), rgb.height(), |x, y| {
            let p = rgb.get_pixel(x, y);
            (wr * R::from_config(p[0] as f64)
                + wg * R::from_config(p[1] as f64)
                + wb * R::from_config(p[2] as f64))
                * scale
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> R {
        self.data[(y * self.width + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: R) {
        self.data[(y * self.width + x) as usize] = v;
    }

    pub fn pixels(&self) -> &[R] {
        &self.data
    }

    /// Copy out a square patch whose top-left corner is `(x0, y0)`.
    pub fn patch(&self, x0: u32, y0: u32, size: u32) -> Result<GrayImage<R>, RasterError> {
        if x0 + size > self.width || y0 + size > self.height {
            return Err(RasterError::OutOfBounds {
                x: x0 + size,
                y: y0 + size,
                width: self.width,
                height: self.height,
            });
        }
        let mut out = GrayImage::new(size, size);
        for row in 0..size {
            let src = ((y0 + row) * self.width + x0) as usize;
            let dst = (row * size) as usize;
            out.data[dst..dst + size as usize].copy_from_slice(&self.data[src..src + size as usize]);
        }
        Ok(out)
    }
}

/// Metric depth raster: per-pixel z-depth in meters plus a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage<R> {
    width: u32,
    height: u32,
    values: Vec<R>,
    valid: Vec<bool>,
}

impl<R: Real> DepthImage<R> {
    /// All-invalid image of the given size.
    pub fn new_invalid(width: u32, height: u32) -> Self {
        let n = (width as usize) * (height as usize);
        Self {
            width,
            height,
            values: vec![R::zero(); n],
            valid: vec![false; n],
        }
    }

    /// All-valid image produced by evaluating `f` per pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> R) -> Self {
        let mut img = Self::new_invalid(width, height);
        for y in 0..height {
            for x in 0..width {
                img.set(x, y, f(x, y));
            }
        }
        img
    }

    /// Uniform all-valid image.
    pub fn uniform(width: u32, height: u32, depth: R) -> Self {
        let n = (width as usize) * (height as usize);
        Self {
            width,
            height,
            values: vec![depth; n],
            valid: vec![true; n],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    fn idx(&self, x: u32, y: u32) -> usize {
        (y * self.width + x) as usize
    }

    #[inline]
    pub fn is_valid(&self, x: u32, y: u32) -> bool {
        self.valid[self.idx(x, y)]
    }

    /// Depth at `(x, y)` if that pixel is valid.
    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Option<R> {
        let i = self.idx(x, y);
        self.valid[i].then(|| self.values[i])
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, depth: R) {
        let i = self.idx(x, y);
        self.values[i] = depth;
        self.valid[i] = true;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Iterator over `(x, y, depth)` of valid pixels, row-major.
    pub fn iter_valid(&self) -> impl Iterator<Item = (u32, u32, R)> + '_ {
        (0..self.height).flat_map(move |y| {
            (0..self.width).filter_map(move |x| self.get(x, y).map(|d| (x, y, d)))
        })
    }

    /// Write the binary raster (`f32` little-endian) and its `.mask` sidecar.
    pub fn write_raster(&self, path: &Path) -> Result<(), RasterError> {
        if self.width > u16::MAX as u32 || self.height > u16::MAX as u32 {
            return Err(RasterError::TooLargeForFormat(self.width, self.height));
        }
        let mut buf = Vec::with_capacity(8 + self.values.len() * 4);
        buf.extend_from_slice(&DEPTH_RASTER_MAGIC);
        buf.extend_from_slice(&(self.width as u16).to_le_bytes());
        buf.extend_from_slice(&(self.height as u16).to_le_bytes());
        for v in &self.values {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        fs::write(path, &buf).map_err(io_err(path))?;

        let mask_path = mask_path_for(path);
        let mut mask = vec![0u8; self.valid.len().div_ceil(8)];
        for (i, v) in self.valid.iter().enumerate() {
            if *v {
                mask[i / 8] |= 1 << (i % 8);
            }
        }
        fs::write(&mask_path, &mask).map_err(io_err(&mask_path))?;
        Ok(())
    }

    /// Read a raster written by [`DepthImage::write_raster`].
    pub fn read_raster(path: &Path) -> Result<Self, RasterError> {
        let mut file = fs::File::open(path).map_err(io_err(path))?;
        let mut header = [0u8; 8];
        file.read_exact(&mut header).map_err(io_err(path))?;
        if header[0..4] != DEPTH_RASTER_MAGIC {
            return Err(RasterError::BadMagic {
                path: path.to_path_buf(),
            });
        }
        let width = u16::from_le_bytes([header[4], header[5]]) as u32;
        let height = u16::from_le_bytes([header[6], header[7]]) as u32;
        let n = (width as usize) * (height as usize);
        let mut payload = Vec::new();
        file.read_to_end(&mut payload).map_err(io_err(path))?;
        if payload.len() != n * 4 {
            return Err(RasterError::Corrupt {
                path: path.to_path_buf(),
            });
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| R::from_config(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect();

        let mask_path = mask_path_for(path);
        let mask = fs::read(&mask_path).map_err(io_err(&mask_path))?;
        if mask.len() != n.div_ceil(8) {
            return Err(RasterError::Corrupt { path: mask_path });
        }
        let valid = (0..n).map(|i| mask[i / 8] & (1 << (i % 8)) != 0).collect();
        Ok(Self {
            width,
            height,
            values,
            valid,
        })
    }

    /// Export as 16-bit PNG in millimeters (invalid pixels become 0).
    pub fn write_png16(&self, path: &Path) -> Result<(), RasterError> {
        let mut img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let mm = match self.get(x, y) {
                    Some(d) => (d.as_f64() * 1000.0).round().clamp(0.0, 65535.0) as u16,
                    None => 0,
                };
                img.put_pixel(x, y, image::Luma([mm]));
            }
        }
        img.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }
}

/// Sidecar validity bitmask path: the raster path with `.mask` appended.
pub fn mask_path_for(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".mask");
    PathBuf::from(os)
}

/// Save an RGB frame as PNG (deterministic bytes for identical pixels).
pub fn save_png(rgb: &RgbImage, path: &Path) -> Result<(), RasterError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut writer = std::io::BufWriter::new(file);
    let encoder = image::codecs::png::PngEncoder::new(&mut writer);
    image::ImageEncoder::write_image(
        encoder,
        rgb.as_raw(),
        rgb.width(),
        rgb.height(),
        image::ExtendedColorType::Rgb8,
    )?;
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

/// Load an RGB PNG frame.
pub fn load_png(path: &Path) -> Result<RgbImage, RasterError> {
    let img = image::open(path)?;
    Ok(img.into_rgb8())
}
