//! Raster containers shared by every pipeline stage.
//!
//! All four types are plain row-major buffers. They are value objects:
//! operations elsewhere in the crate take them by reference and return new
//! buffers, so instances can be shared freely across threads.

mod io;

pub use io::{
    label_to_image, load_image, load_label_map, mask_from_image, mask_to_image, save_image,
    save_label_map, write_atomic,
};

use crate::error::{Error, Result};

fn check_dims(width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidGeometry(format!(
            "dimensions must be at least 1x1, got {width}x{height}"
        )));
    }
    Ok(())
}

/// Interleaved 8-bit raster with 1 (gray) or 3 (RGB) channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidGeometry(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::InvalidGeometry(format!(
                "buffer length {} does not match {width}x{height}x{channels} = {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// A constant-valued image.
    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Result<Self> {
        let len = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, vec![value; len])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize
    }

    /// The channel samples of one pixel.
    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let o = self.offset(x, y);
        &self.data[o..o + self.channels as usize]
    }

    #[inline]
    pub fn sample(&self, x: u32, y: u32, channel: u8) -> u8 {
        self.data[self.offset(x, y) + channel as usize]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, value: &[u8]) {
        let o = self.offset(x, y);
        self.data[o..o + self.channels as usize].copy_from_slice(value);
    }

    pub fn require_channels(&self, expected: u8) -> Result<()> {
        if self.channels != expected {
            return Err(Error::WrongChannelCount {
                expected,
                actual: self.channels,
            });
        }
        Ok(())
    }

    /// Crop to the rectangle `(x, y, w, h)`; the rectangle must lie inside
    /// the image.
    pub fn crop(&self, x: u32, y: u32, w: u32, h: u32) -> Result<RasterImage> {
        if x + w > self.width || y + h > self.height {
            return Err(Error::InvalidGeometry(format!(
                "crop ({x},{y},{w},{h}) exceeds {}x{}",
                self.width, self.height
            )));
        }
        check_dims(w, h)?;
        let ch = self.channels as usize;
        let mut data = Vec::with_capacity(w as usize * h as usize * ch);
        for row in y..y + h {
            let start = self.offset(x, row);
            data.extend_from_slice(&self.data[start..start + w as usize * ch]);
        }
        RasterImage::new(w, h, self.channels, data)
    }
}

/// Row-major plane of finite `f64` samples.
///
/// Carries the C/M/Y/K and L*/a*/b* planes before 8-bit quantization, and
/// distance-transform surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatPlane {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl FloatPlane {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width as usize * height as usize {
            return Err(Error::InvalidGeometry(format!(
                "buffer length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: f64) {
        self.data[y as usize * self.width as usize + x as usize] = value;
    }

    /// Pointwise negation (used to turn a distance transform into a
    /// flooding surface).
    pub fn negated(&self) -> FloatPlane {
        FloatPlane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| -v).collect(),
        }
    }
}

/// Per-pixel boolean region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, data: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width as usize * height as usize {
            return Err(Error::InvalidGeometry(format!(
                "buffer length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.data[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    /// Coordinates of true pixels in raster order.
    pub fn iter_true(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(move |(i, _)| ((i as u32) % w, (i as u32) / w))
    }

    pub fn same_dims<T: Dimensioned>(&self, other: &T) -> Result<()> {
        if self.width != other.dims().0 || self.height != other.dims().1 {
            return Err(Error::DimensionMismatch {
                a_width: self.width,
                a_height: self.height,
                b_width: other.dims().0,
                b_height: other.dims().1,
            });
        }
        Ok(())
    }
}

/// Per-pixel non-negative labels; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: u32,
    height: u32,
    data: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: u32, height: u32, data: Vec<u32>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width as usize * height as usize {
            return Err(Error::InvalidGeometry(format!(
                "buffer length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeroed(width: u32, height: u32) -> Result<Self> {
        Self::new(width, height, vec![0; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u32) {
        self.data[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn max_label(&self) -> u32 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    /// Mask of pixels carrying `label`.
    pub fn mask_of(&self, label: u32) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v == label).collect(),
        }
    }

    /// Mask of all labeled (nonzero) pixels.
    pub fn foreground(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v != 0).collect(),
        }
    }

    /// Renumber labels into the gap-free set `{0, 1, .., L}`, keeping the
    /// order of first encounter in raster scan.
    pub fn compacted(&self) -> LabelMap {
        let mut remap = std::collections::HashMap::new();
        let mut next = 1u32;
        let data = self
            .data
            .iter()
            .map(|&v| {
                if v == 0 {
                    0
                } else {
                    *remap.entry(v).or_insert_with(|| {
                        let id = next;
                        next += 1;
                        id
                    })
                }
            })
            .collect();
        LabelMap {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// True when label values form `{0..=L}` with no gaps.
    pub fn is_compact(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        for &v in &self.data {
            if v != 0 {
                seen.insert(v);
            }
        }
        let max = seen.iter().copied().max().unwrap_or(0);
        seen.len() as u32 == max
    }
}

/// Anything with pixel dimensions; lets mask utilities check shape
/// compatibility across container types.
pub trait Dimensioned {
    fn dims(&self) -> (u32, u32);
}

impl Dimensioned for RasterImage {
    fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

impl Dimensioned for FloatPlane {
    fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

impl Dimensioned for BinaryMask {
    fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

impl Dimensioned for LabelMap {
    fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}
