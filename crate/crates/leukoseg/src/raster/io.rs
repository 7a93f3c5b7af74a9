//! File formats and rendering helpers for the raster containers.
//!
//! Images travel as 8-bit PNG, binary PPM (P6), or binary PGM (P5); label
//! maps as 16-bit grayscale PNG so instance ids survive a round trip. All
//! writers encode in memory and then publish the file atomically, so a
//! crashed or concurrent run never leaves a truncated artifact behind.

use std::io::Write;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, ImageReader, Luma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, LabelMap, RasterImage};

fn io_error(path: &Path, e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::NotFound {
        Error::FileNotFound(path.to_path_buf())
    } else {
        Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
    }
}

fn decode_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => io_error(path, io),
        image::ImageError::Unsupported(_) => Error::UnsupportedFormat(path.to_path_buf()),
        other => Error::CorruptStream {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    }
}

/// Write `bytes` to `path` through a temporary file in the same directory,
/// creating parent directories as needed. The rename at the end makes the
/// update atomic on the local filesystem.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| io_error(path, e))?;
    let mut tmp = tempfile::Builder::new()
        .prefix(".leukoseg-")
        .tempfile_in(dir)
        .map_err(|e| io_error(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

/// Load an 8-bit image from PNG/PPM/PGM. Grayscale sources stay single
/// channel; everything else (including images with an alpha channel, which
/// is discarded) is returned as RGB.
pub fn load_image(path: &Path) -> Result<RasterImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| io_error(path, e))?
        .with_guessed_format()
        .map_err(|e| io_error(path, e))?;
    let decoded = reader.decode().map_err(|e| decode_error(path, e))?;
    let (w, h) = (decoded.width(), decoded.height());
    if decoded.color().has_color() {
        RasterImage::new(w, h, 3, decoded.to_rgb8().into_raw())
    } else {
        RasterImage::new(w, h, 1, decoded.to_luma8().into_raw())
    }
}

fn format_for(path: &Path, channels: u8) -> Result<ImageFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "png" => Ok(ImageFormat::Png),
        "ppm" => {
            if channels != 3 {
                return Err(Error::WrongChannelCount {
                    expected: 3,
                    actual: channels,
                });
            }
            Ok(ImageFormat::Pnm)
        }
        "pgm" => {
            if channels != 1 {
                return Err(Error::WrongChannelCount {
                    expected: 1,
                    actual: channels,
                });
            }
            Ok(ImageFormat::Pnm)
        }
        _ => Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
}

/// Save an image, picking the container from the file extension
/// (`.png`, `.ppm` for RGB, `.pgm` for grayscale).
pub fn save_image(path: &Path, img: &RasterImage) -> Result<()> {
    let format = format_for(path, img.channels())?;
    let color = if img.channels() == 3 {
        image::ExtendedColorType::Rgb8
    } else {
        image::ExtendedColorType::L8
    };
    let mut bytes = std::io::Cursor::new(Vec::new());
    image::write_buffer_with_format(
        &mut bytes,
        img.data(),
        img.width(),
        img.height(),
        color,
        format,
    )
    .map_err(|e| decode_error(path, e))?;
    write_atomic(path, bytes.get_ref())
}

/// Save a label map as a 16-bit grayscale PNG. Fails with
/// [`Error::LabelOverflow`] if any label exceeds the 16-bit range.
pub fn save_label_map(path: &Path, labels: &LabelMap) -> Result<()> {
    let max = labels.max_label();
    if max > u16::MAX as u32 {
        return Err(Error::LabelOverflow(max));
    }
    let raw: Vec<u16> = labels.data().iter().map(|&v| v as u16).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(labels.width(), labels.height(), raw)
            .expect("label buffer length matches dimensions");
    let mut bytes = std::io::Cursor::new(Vec::new());
    DynamicImage::ImageLuma16(buf)
        .write_to(&mut bytes, ImageFormat::Png)
        .map_err(|e| decode_error(path, e))?;
    write_atomic(path, bytes.get_ref())
}

/// Load a label map from a 16-bit grayscale PNG written by
/// [`save_label_map`].
pub fn load_label_map(path: &Path) -> Result<LabelMap> {
    let reader = ImageReader::open(path)
        .map_err(|e| io_error(path, e))?
        .with_guessed_format()
        .map_err(|e| io_error(path, e))?;
    let decoded = reader.decode().map_err(|e| decode_error(path, e))?;
    match decoded {
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = (buf.width(), buf.height());
            LabelMap::new(w, h, buf.into_raw().iter().map(|&v| v as u32).collect())
        }
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = (buf.width(), buf.height());
            LabelMap::new(w, h, buf.into_raw().iter().map(|&v| v as u32).collect())
        }
        _ => Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
}

/// Render a label map as an RGB image: background stays black and every
/// label gets its own color drawn from a generator seeded with `seed`, so
/// the palette is reproducible across runs.
pub fn label_to_image(labels: &LabelMap, seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max = labels.max_label();
    let mut palette: Vec<[u8; 3]> = Vec::with_capacity(max as usize + 1);
    palette.push([0, 0, 0]);
    for _ in 0..max {
        loop {
            let c = [rng.gen::<u8>(), rng.gen::<u8>(), rng.gen::<u8>()];
            // Skip colors that collide with the background or an earlier
            // label, and very dark ones that would read as background.
            let brightness = c[0] as u16 + c[1] as u16 + c[2] as u16;
            if brightness >= 96 && !palette.contains(&c) {
                palette.push(c);
                break;
            }
        }
    }
    let mut data = Vec::with_capacity(labels.data().len() * 3);
    for &v in labels.data() {
        data.extend_from_slice(&palette[v as usize]);
    }
    RasterImage::new(labels.width(), labels.height(), 3, data)
        .expect("palette render preserves dimensions")
}

/// Recover a mask from a grayscale rendering; any nonzero sample counts
/// as foreground.
pub fn mask_from_image(img: &RasterImage) -> Result<BinaryMask> {
    img.require_channels(1)?;
    BinaryMask::new(
        img.width(),
        img.height(),
        img.data().iter().map(|&v| v > 0).collect(),
    )
}

/// Render a mask as an 8-bit grayscale image (false -> 0, true -> 255).
pub fn mask_to_image(mask: &BinaryMask) -> RasterImage {
    let data = mask.data().iter().map(|&v| if v { 255 } else { 0 }).collect();
    RasterImage::new(mask.width(), mask.height(), 1, data)
        .expect("mask render preserves dimensions")
}
