//! Classical image operations used by stage 1 and shared by later stages:
//! histogram equalization, contrast stretching, Otsu thresholding, binary
//! morphology, mask algebra, connected components, and the exact Euclidean
//! distance transform.

mod components;
mod distance;

pub use components::{connected_components, Connectivity};
pub use distance::distance_transform;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;
use crate::raster::{BinaryMask, RasterImage};

// ---------------------------------------------------------------------------
// Structuring elements
// ---------------------------------------------------------------------------

/// Neighborhood shape for morphological operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeShape {
    /// All offsets with max(|dx|, |dy|) ≤ radius.
    Square,
    /// All offsets with dx² + dy² ≤ radius² (a discrete disk).
    Ellipse,
}

/// A symmetric neighborhood around the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    shape: SeShape,
    radius: u32,
    offsets: Vec<(i32, i32)>,
}

impl StructuringElement {
    pub fn new(shape: SeShape, radius: u32) -> Result<Self> {
        if radius < 1 {
            return Err(Error::InvalidGeometry(
                "structuring element radius must be at least 1".into(),
            ));
        }
        let r = radius as i32;
        let mut offsets = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                let keep = match shape {
                    SeShape::Square => true,
                    SeShape::Ellipse => dx * dx + dy * dy <= r * r,
                };
                if keep {
                    offsets.push((dx, dy));
                }
            }
        }
        Ok(Self {
            shape,
            radius,
            offsets,
        })
    }

    pub fn shape(&self) -> SeShape {
        self.shape
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }
}

// ---------------------------------------------------------------------------
// Histograms, equalization, stretching
// ---------------------------------------------------------------------------

/// Intensity histogram of an 8-bit single-channel image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram256 {
    pub bins: [u64; 256],
}

impl Histogram256 {
    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }
}

/// Count intensities of a single-channel image.
pub fn histogram(img: &RasterImage) -> Result<Histogram256> {
    img.require_channels(1)?;
    let mut bins = [0u64; 256];
    for &v in img.data() {
        bins[v as usize] += 1;
    }
    Ok(Histogram256 { bins })
}

/// Histogram equalization via the cumulative distribution:
/// `v ↦ round(255 · (cdf(v) − cdf_min) / (N − cdf_min))` where `cdf_min`
/// is the smallest nonzero cumulative count. Constant images pass through
/// unchanged (the formula would be 0/0).
pub fn equalize_histogram(img: &RasterImage) -> Result<RasterImage> {
    let hist = histogram(img)?;
    let n = img.pixel_count() as u64;
    let mut cdf = [0u64; 256];
    let mut acc = 0u64;
    for (v, &count) in hist.bins.iter().enumerate() {
        acc += count;
        cdf[v] = acc;
    }
    let cdf_min = hist
        .bins
        .iter()
        .zip(cdf.iter())
        .find(|(&count, _)| count > 0)
        .map(|(_, &c)| c)
        .unwrap_or(0);
    if cdf_min == n {
        // Single intensity: the histogram is degenerate, keep the image.
        return Ok(img.clone());
    }
    let denom = (n - cdf_min) as f64;
    let mut lut = [0u8; 256];
    for v in 0..256 {
        let shifted = cdf[v].saturating_sub(cdf_min) as f64;
        lut[v] = (255.0 * shifted / denom).round() as u8;
    }
    let data = img.data().iter().map(|&v| lut[v as usize]).collect();
    RasterImage::new(img.width(), img.height(), 1, data)
}

/// Result of a percentile contrast stretch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stretched {
    pub image: RasterImage,
    /// True when the two percentile values coincided, in which case the
    /// image is constant 0 and carries no usable contrast.
    pub degenerate: bool,
}

/// Sorted-order value at the nearest-rank percentile `p` of a histogram.
fn percentile_value(hist: &Histogram256, n: u64, p: f64) -> u8 {
    let rank = (p * (n as f64 - 1.0)).round() as u64;
    let mut acc = 0u64;
    for (v, &count) in hist.bins.iter().enumerate() {
        acc += count;
        if acc > rank {
            return v as u8;
        }
    }
    255
}

/// Linear contrast stretch between the `low` and `high` percentile values:
/// values at or below the low value map to 0, at or above the high value
/// to 255, linearly (with rounding) in between. When both percentiles land
/// on the same value the stretch is undefined; a constant-0 image with the
/// degenerate flag set is returned instead.
pub fn stretch_contrast(img: &RasterImage, low: f64, high: f64) -> Result<Stretched> {
    if !(0.0..=1.0).contains(&low) || !(0.0..=1.0).contains(&high) || low >= high {
        return Err(Error::InvalidPercentiles { low, high });
    }
    let hist = histogram(img)?;
    let n = img.pixel_count() as u64;
    let lo = percentile_value(&hist, n, low);
    let hi = percentile_value(&hist, n, high);
    if hi <= lo {
        return Ok(Stretched {
            image: RasterImage::filled(img.width(), img.height(), 1, 0)?,
            degenerate: true,
        });
    }
    let span = (hi - lo) as f64;
    let mut lut = [0u8; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        let v = v as u8;
        *slot = if v <= lo {
            0
        } else if v >= hi {
            255
        } else {
            (255.0 * (v - lo) as f64 / span).round() as u8
        };
    }
    let data = img.data().iter().map(|&v| lut[v as usize]).collect();
    Ok(Stretched {
        image: RasterImage::new(img.width(), img.height(), 1, data)?,
        degenerate: false,
    })
}

// ---------------------------------------------------------------------------
// Thresholding
// ---------------------------------------------------------------------------

/// Which side of a threshold becomes mask foreground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Foreground where value > t.
    Above,
    /// Foreground where value ≤ t.
    Below,
}

/// Compare two between-class variance fractions `a/b` and `c/d` exactly.
///
/// The straightforward cross-multiplication `a·d` can overflow even u128
/// for large images, so the comparison walks the continued-fraction
/// expansion instead: compare integer parts, then recurse on the flipped
/// remainders (Euclid's algorithm), where every operand strictly shrinks.
fn cmp_fractions(a: u128, b: u128, c: u128, d: u128) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    let (q1, q2) = (a / b, c / d);
    if q1 != q2 {
        return q1.cmp(&q2);
    }
    let (r1, r2) = (a % b, c % d);
    match (r1 == 0, r2 == 0) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        // a/b vs c/d now reduces to r1/b vs r2/d; taking reciprocals
        // flips the comparison to d/r2 vs b/r1.
        (false, false) => cmp_fractions(d, r2, b, r1),
    }
}

/// Otsu's automatic threshold: the split `{≤t, >t}` maximizing
/// between-class variance, computed in exact integer arithmetic so the
/// argmax matches a brute-force oracle bit for bit. Ties break toward the
/// smallest t; a constant image returns its single intensity.
pub fn otsu_threshold(img: &RasterImage) -> Result<u8> {
    let hist = histogram(img)?;
    let n: u64 = hist.total();
    let s: u64 = hist
        .bins
        .iter()
        .enumerate()
        .map(|(v, &c)| v as u64 * c)
        .sum();
    let mut best: Option<(u8, u128, u128)> = None;
    let mut n0 = 0u64;
    let mut s0 = 0u64;
    for t in 0..=255u8 {
        n0 += hist.bins[t as usize];
        s0 += t as u64 * hist.bins[t as usize];
        let n1 = n - n0;
        let s1 = s - s0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        // Between-class variance ∝ (s0·n1 − s1·n0)² / (n0·n1).
        let diff = (s0 as u128 * n1 as u128).abs_diff(s1 as u128 * n0 as u128);
        let num = diff
            .checked_mul(diff)
            .expect("between-class variance numerator exceeds 128 bits");
        let den = n0 as u128 * n1 as u128;
        let better = match &best {
            None => true,
            Some((_, bn, bd)) => cmp_fractions(num, den, *bn, *bd).is_gt(),
        };
        if better {
            best = Some((t, num, den));
        }
    }
    match best {
        Some((t, _, _)) => Ok(t),
        // Constant image: every split leaves one class empty.
        None => Ok(hist
            .bins
            .iter()
            .position(|&c| c > 0)
            .map(|v| v as u8)
            .unwrap_or(0)),
    }
}

/// Binarize against a fixed threshold.
pub fn threshold(img: &RasterImage, t: u8, polarity: Polarity) -> Result<BinaryMask> {
    img.require_channels(1)?;
    let data = img
        .data()
        .iter()
        .map(|&v| match polarity {
            Polarity::Above => v > t,
            Polarity::Below => v <= t,
        })
        .collect();
    BinaryMask::new(img.width(), img.height(), data)
}

// ---------------------------------------------------------------------------
// Morphology
// ---------------------------------------------------------------------------

/// Dilation on the image canvas; neighborhoods reaching outside the frame
/// contribute background.
pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    morph(mask, se, false)
}

/// Erosion on the image canvas; neighborhoods reaching outside the frame
/// see background, so foreground touching the border erodes away.
pub fn erode(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    morph(mask, se, true)
}

fn morph(mask: &BinaryMask, se: &StructuringElement, all: bool) -> BinaryMask {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut out = vec![false; mask.data().len()];
    parallel::for_each_row_mut(&mut out, mask.width() as usize, |y, row| {
        for (x, slot) in row.iter_mut().enumerate() {
            let mut acc = all;
            for &(dx, dy) in se.offsets() {
                let nx = x as i64 + dx as i64;
                let ny = y as i64 + dy as i64;
                let v = nx >= 0 && ny >= 0 && nx < w && ny < h && mask.get(nx as u32, ny as u32);
                if all {
                    if !v {
                        acc = false;
                        break;
                    }
                } else if v {
                    acc = true;
                    break;
                }
            }
            *slot = acc;
        }
    });
    BinaryMask::new(mask.width(), mask.height(), out).expect("morphology preserves dimensions")
}

/// Morphological closing: dilation followed by erosion.
///
/// The two passes run on a canvas padded by the element radius and the
/// result is cropped back. Dilated pixels that would fall just outside the
/// frame are thereby kept alive for the erosion pass; clipping them
/// instead would erode border-touching regions below their input extent
/// and break the closing laws (extensivity, idempotence). Input pixels
/// beyond the frame are still background — padding adds nothing that the
/// dilation did not produce.
pub fn close(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let r = se.radius();
    let (w, h) = (mask.width(), mask.height());
    let mut padded = BinaryMask::filled(w + 2 * r, h + 2 * r, false)
        .expect("padded canvas dimensions are valid");
    for (x, y) in mask.iter_true() {
        padded.set(x + r, y + r, true);
    }
    let closed = erode(&dilate(&padded, se), se);
    let mut out = BinaryMask::filled(w, h, false).expect("canvas dimensions are valid");
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, closed.get(x + r, y + r));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Mask algebra
// ---------------------------------------------------------------------------

fn zip_masks(
    a: &BinaryMask,
    b: &BinaryMask,
    f: impl Fn(bool, bool) -> bool,
) -> Result<BinaryMask> {
    a.same_dims(b)?;
    let data = a
        .data()
        .iter()
        .zip(b.data().iter())
        .map(|(&x, &y)| f(x, y))
        .collect();
    BinaryMask::new(a.width(), a.height(), data)
}

/// Pixel-wise conjunction.
pub fn mask_and(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    zip_masks(a, b, |x, y| x && y)
}

/// Pixel-wise disjunction.
pub fn mask_or(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    zip_masks(a, b, |x, y| x || y)
}

/// Pixel-wise complement.
pub fn mask_not(a: &BinaryMask) -> BinaryMask {
    let data = a.data().iter().map(|&v| !v).collect();
    BinaryMask::new(a.width(), a.height(), data).expect("complement preserves dimensions")
}

/// Pixels in `a` but not in `b`.
pub fn mask_diff(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    zip_masks(a, b, |x, y| x && !y)
}
