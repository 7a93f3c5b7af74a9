//! Pixel-wise color-space conversions.
//!
//! Three conversions feed the pipeline: RGB→CMYK (the yellow plane has the
//! weakest cell contrast and the magenta plane the strongest, which stage 1
//! exploits), RGB→CIELAB (the a* plane is the clustering feature of
//! stage 2), and RGB→grayscale (the rough nucleus mask). All conversions
//! are pure and pixel-local, so they parallelize over rows without any
//! effect on the result.

use crate::error::{Error, Result};
use crate::parallel;
use crate::raster::{FloatPlane, RasterImage};

// ---------------------------------------------------------------------------
// CMYK
// ---------------------------------------------------------------------------

/// The four subtractive planes of an RGB image, each sample in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CmykPlanes {
    pub c: FloatPlane,
    pub m: FloatPlane,
    pub y: FloatPlane,
    pub k: FloatPlane,
}

impl CmykPlanes {
    /// Bundle four planes, checking shared dimensions and the `[0, 1]`
    /// sample range.
    pub fn new(c: FloatPlane, m: FloatPlane, y: FloatPlane, k: FloatPlane) -> Result<Self> {
        for plane in [&m, &y, &k] {
            if plane.width() != c.width() || plane.height() != c.height() {
                return Err(Error::DimensionMismatch {
                    a_width: c.width(),
                    a_height: c.height(),
                    b_width: plane.width(),
                    b_height: plane.height(),
                });
            }
        }
        for plane in [&c, &m, &y, &k] {
            if let Some(&v) = plane.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::OutOfRangeSample { value: v });
            }
        }
        Ok(Self { c, m, y, k })
    }
}

/// One RGB pixel to (C, M, Y, K).
///
/// With normalized channels `R' = R/255` (likewise G', B'):
/// `K = 1 − max(R', G', B')`, and each ink is the channel deficit rescaled
/// by the non-black part, e.g. `C = (1 − R' − K) / (1 − K)`. Pure black
/// (`K = 1`) makes the quotients 0/0; the standard limit convention
/// `C = M = Y = 0` applies.
#[inline]
pub fn rgb_pixel_to_cmyk(r: u8, g: u8, b: u8) -> (f64, f64, f64, f64) {
    let rp = r as f64 / 255.0;
    let gp = g as f64 / 255.0;
    let bp = b as f64 / 255.0;
    let k = 1.0 - rp.max(gp).max(bp);
    if k >= 1.0 {
        return (0.0, 0.0, 0.0, 1.0);
    }
    let c = (1.0 - rp - k) / (1.0 - k);
    let m = (1.0 - gp - k) / (1.0 - k);
    let y = (1.0 - bp - k) / (1.0 - k);
    (c, m, y, k)
}

/// Convert a 3-channel image to its four CMYK planes.
pub fn rgb_to_cmyk(img: &RasterImage) -> Result<CmykPlanes> {
    img.require_channels(3)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let rows = parallel::map_rows(h, |row| {
        let mut c = Vec::with_capacity(w);
        let mut m = Vec::with_capacity(w);
        let mut y = Vec::with_capacity(w);
        let mut k = Vec::with_capacity(w);
        for x in 0..w {
            let px = img.pixel(x as u32, row as u32);
            let (pc, pm, py, pk) = rgb_pixel_to_cmyk(px[0], px[1], px[2]);
            c.push(pc);
            m.push(pm);
            y.push(py);
            k.push(pk);
        }
        (c, m, y, k)
    });
    let mut c = Vec::with_capacity(w * h);
    let mut m = Vec::with_capacity(w * h);
    let mut y = Vec::with_capacity(w * h);
    let mut k = Vec::with_capacity(w * h);
    for (rc, rm, ry, rk) in rows {
        c.extend(rc);
        m.extend(rm);
        y.extend(ry);
        k.extend(rk);
    }
    let wd = img.width();
    let ht = img.height();
    CmykPlanes::new(
        FloatPlane::new(wd, ht, c)?,
        FloatPlane::new(wd, ht, m)?,
        FloatPlane::new(wd, ht, y)?,
        FloatPlane::new(wd, ht, k)?,
    )
}

/// Materialize a `[0, 1]` plane as an 8-bit image via `round(255 · s)`
/// (half rounds up).
pub fn cmyk_plane_to_gray(plane: &FloatPlane) -> Result<RasterImage> {
    if let Some(&v) = plane.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::OutOfRangeSample { value: v });
    }
    let data = plane.data().iter().map(|&v| (v * 255.0).round() as u8).collect();
    RasterImage::new(plane.width(), plane.height(), 1, data)
}

// ---------------------------------------------------------------------------
// CIELAB
// ---------------------------------------------------------------------------

/// The L*, a*, b* planes of an RGB image. `l` lies in `[0, 100]`; `a` and
/// `b` stay within `[-128, 127]` for any 8-bit input.
#[derive(Debug, Clone, PartialEq)]
pub struct LabPlanes {
    pub l: FloatPlane,
    pub a: FloatPlane,
    pub b: FloatPlane,
}

// sRGB linear-light to XYZ (D65), 4-digit coefficients.
const XYZ_FROM_RGB: [[f64; 3]; 3] = [
    [0.4124, 0.3576, 0.1805],
    [0.2126, 0.7152, 0.0722],
    [0.0193, 0.1192, 0.9505],
];

// Normalizing by the matrix row sums (the XYZ of pure white under this
// exact matrix) instead of the textbook D65 constants keeps every gray
// pixel perfectly achromatic: (v,v,v) gives X/Xn = Y/Yn = Z/Zn and hence
// a* = b* = 0 to the last bit.
const WHITE: [f64; 3] = [
    XYZ_FROM_RGB[0][0] + XYZ_FROM_RGB[0][1] + XYZ_FROM_RGB[0][2],
    XYZ_FROM_RGB[1][0] + XYZ_FROM_RGB[1][1] + XYZ_FROM_RGB[1][2],
    XYZ_FROM_RGB[2][0] + XYZ_FROM_RGB[2][1] + XYZ_FROM_RGB[2][2],
];

#[inline]
fn srgb_expand(v: u8) -> f64 {
    let c = v as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// One RGB pixel to (L*, a*, b*).
#[inline]
pub fn rgb_pixel_to_lab(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let lin = [srgb_expand(r), srgb_expand(g), srgb_expand(b)];
    let mut f = [0.0; 3];
    for i in 0..3 {
        let tristim = XYZ_FROM_RGB[i][0] * lin[0]
            + XYZ_FROM_RGB[i][1] * lin[1]
            + XYZ_FROM_RGB[i][2] * lin[2];
        f[i] = lab_f(tristim / WHITE[i]);
    }
    let l = 116.0 * f[1] - 16.0;
    let a = 500.0 * (f[0] - f[1]);
    let bb = 200.0 * (f[1] - f[2]);
    (l, a, bb)
}

/// Convert a 3-channel image to its L*, a*, b* planes.
pub fn rgb_to_lab(img: &RasterImage) -> Result<LabPlanes> {
    img.require_channels(3)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let rows = parallel::map_rows(h, |row| {
        let mut l = Vec::with_capacity(w);
        let mut a = Vec::with_capacity(w);
        let mut b = Vec::with_capacity(w);
        for x in 0..w {
            let px = img.pixel(x as u32, row as u32);
            let (pl, pa, pb) = rgb_pixel_to_lab(px[0], px[1], px[2]);
            l.push(pl);
            a.push(pa);
            b.push(pb);
        }
        (l, a, b)
    });
    let mut l = Vec::with_capacity(w * h);
    let mut a = Vec::with_capacity(w * h);
    let mut b = Vec::with_capacity(w * h);
    for (rl, ra, rb) in rows {
        l.extend(rl);
        a.extend(ra);
        b.extend(rb);
    }
    Ok(LabPlanes {
        l: FloatPlane::new(img.width(), img.height(), l)?,
        a: FloatPlane::new(img.width(), img.height(), a)?,
        b: FloatPlane::new(img.width(), img.height(), b)?,
    })
}

// ---------------------------------------------------------------------------
// Grayscale
// ---------------------------------------------------------------------------

/// One RGB pixel to its BT.601 luma, `round(0.299R + 0.587G + 0.114B)`.
#[inline]
pub fn rgb_pixel_to_gray(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round() as u8
}

/// Convert a 3-channel image to single-channel luma.
pub fn rgb_to_gray(img: &RasterImage) -> Result<RasterImage> {
    img.require_channels(3)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut out = vec![0u8; w * h];
    parallel::for_each_row_mut(&mut out, w, |y, row| {
        for (x, slot) in row.iter_mut().enumerate() {
            let px = img.pixel(x as u32, y as u32);
            *slot = rgb_pixel_to_gray(px[0], px[1], px[2]);
        }
    });
    RasterImage::new(img.width(), img.height(), 1, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_pixel(r: u8, g: u8, b: u8) -> RasterImage {
        RasterImage::new(1, 1, 3, vec![r, g, b]).unwrap()
    }

    #[test]
    fn cmyk_white_black_and_midtone() {
        assert_eq!(rgb_pixel_to_cmyk(255, 255, 255), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(rgb_pixel_to_cmyk(0, 0, 0), (0.0, 0.0, 0.0, 1.0));
        let (c, m, y, k) = rgb_pixel_to_cmyk(128, 64, 32);
        assert!((k - 0.4980392156862745).abs() < 1e-6);
        assert!((c - 0.0).abs() < 1e-6);
        assert!((m - 0.5).abs() < 1e-6);
        assert!((y - 0.75).abs() < 1e-6);
    }

    #[test]
    fn cmyk_range_and_inverse_on_random_pixels() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let (r, g, b) = (rng.gen::<u8>(), rng.gen::<u8>(), rng.gen::<u8>());
            let (c, m, y, k) = rgb_pixel_to_cmyk(r, g, b);
            for v in [c, m, y, k] {
                assert!((0.0..=1.0).contains(&v), "({r},{g},{b}) -> {v}");
            }
            if k < 1.0 {
                assert!(((1.0 - c) * (1.0 - k) - r as f64 / 255.0).abs() < 1e-9);
                assert!(((1.0 - m) * (1.0 - k) - g as f64 / 255.0).abs() < 1e-9);
                assert!(((1.0 - y) * (1.0 - k) - b as f64 / 255.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cmyk_planes_from_image() {
        let img = RasterImage::new(2, 1, 3, vec![255, 255, 255, 128, 64, 32]).unwrap();
        let planes = rgb_to_cmyk(&img).unwrap();
        assert_eq!(planes.k.get(0, 0), 0.0);
        assert!((planes.m.get(1, 0) - 0.5).abs() < 1e-9);
        let gray = rgb_to_gray(&one_pixel(1, 2, 3)).unwrap();
        assert_eq!(gray.channels(), 1);
    }

    #[test]
    fn cmyk_rejects_gray_input() {
        let gray = RasterImage::filled(2, 2, 1, 7).unwrap();
        assert!(matches!(
            rgb_to_cmyk(&gray),
            Err(Error::WrongChannelCount { expected: 3, actual: 1 })
        ));
    }

    #[test]
    fn plane_quantization_rounds_half_up() {
        let plane = FloatPlane::new(3, 1, vec![0.0, 0.5, 1.0]).unwrap();
        let img = cmyk_plane_to_gray(&plane).unwrap();
        assert_eq!(img.data(), &[0, 128, 255]);
        let bad = FloatPlane::new(1, 1, vec![1.5]).unwrap();
        assert!(matches!(
            cmyk_plane_to_gray(&bad),
            Err(Error::OutOfRangeSample { .. })
        ));
    }

    #[test]
    fn lab_reference_points() {
        let (l, a, b) = rgb_pixel_to_lab(0, 0, 0);
        assert_eq!((l, a, b), (0.0, 0.0, 0.0));
        let (l, a, b) = rgb_pixel_to_lab(255, 255, 255);
        assert!((l - 100.0).abs() < 1e-9);
        assert!(a.abs() < 1e-9 && b.abs() < 1e-9);
        let (l, a, b) = rgb_pixel_to_lab(255, 0, 0);
        assert!((l - 53.24).abs() < 0.1, "L*={l}");
        assert!((a - 80.09).abs() < 0.1, "a*={a}");
        assert!((b - 67.20).abs() < 0.1, "b*={b}");
    }

    #[test]
    fn lab_gray_axis_is_achromatic() {
        for v in 0..=255u8 {
            let (_, a, b) = rgb_pixel_to_lab(v, v, v);
            assert!(a.abs() < 0.01 && b.abs() < 0.01, "v={v}: a*={a} b*={b}");
        }
    }

    #[test]
    fn lab_planes_within_declared_ranges() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let (l, a, b) = rgb_pixel_to_lab(rng.gen(), rng.gen(), rng.gen());
            assert!((0.0..=100.0 + 1e-9).contains(&l));
            assert!((-128.0..=127.0).contains(&a));
            assert!((-128.0..=127.0).contains(&b));
        }
    }

    #[test]
    fn gray_luma_oracle() {
        assert_eq!(rgb_pixel_to_gray(255, 255, 255), 255);
        assert_eq!(rgb_pixel_to_gray(0, 0, 0), 0);
        assert_eq!(rgb_pixel_to_gray(100, 150, 200), 141);
    }
}
