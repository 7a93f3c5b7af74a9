//! Exact Euclidean distance transform.

use crate::raster::{BinaryMask, FloatPlane};

/// Squared-distance transform of one row/column: lower envelope of the
/// parabolas rooted at each sample (the Felzenszwalb–Huttenlocher
/// two-pass construction). `f` holds squared distances so far; `d`
/// receives the updated ones.
fn dt1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64))
                / (2.0 * q as f64 - 2.0 * p as f64);
            if s <= z[k] {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        d[q] = ((q as isize - p as isize) * (q as isize - p as isize)) as f64 + f[p];
    }
}

/// Per foreground pixel, the exact Euclidean distance to the nearest
/// background pixel; background pixels map to 0. Everything beyond the
/// image border counts as background, so foreground touching the border
/// gets distance 1.
///
/// The computation pads the grid with a single background ring (the
/// nearest out-of-frame pixel is always axis-perpendicular, so one ring
/// captures the border rule exactly), runs the two-pass exact squared
/// transform, and takes square roots at the end. All intermediate values
/// are integers below 2^53, so the result matches brute force bit for
/// bit.
pub fn distance_transform(mask: &BinaryMask) -> FloatPlane {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let (pw, ph) = (w + 2, h + 2);
    // Finite stand-in for "no background in sight"; larger than any real
    // squared distance in the padded grid, and safe in the envelope math
    // where infinity would produce NaN.
    let large = ((pw * pw + ph * ph) as f64) + 1.0;
    let mut grid = vec![0.0f64; pw * ph];
    for y in 0..h {
        for x in 0..w {
            if mask.get(x as u32, y as u32) {
                grid[(y + 1) * pw + (x + 1)] = large;
            }
        }
    }

    let longest = pw.max(ph);
    let mut f = vec![0.0f64; longest];
    let mut d = vec![0.0f64; longest];
    let mut v = vec![0usize; longest];
    let mut z = vec![0.0f64; longest + 1];

    // Columns first: every padded column contains background (the top and
    // bottom rings), so this pass leaves only finite values.
    for x in 0..pw {
        for y in 0..ph {
            f[y] = grid[y * pw + x];
        }
        dt1d(&f[..ph], &mut d[..ph], &mut v[..ph], &mut z[..ph + 1]);
        for y in 0..ph {
            grid[y * pw + x] = d[y];
        }
    }
    for y in 0..ph {
        f[..pw].copy_from_slice(&grid[y * pw..(y + 1) * pw]);
        dt1d(&f[..pw], &mut d[..pw], &mut v[..pw], &mut z[..pw + 1]);
        for x in 0..pw {
            grid[y * pw + x] = d[x];
        }
    }

    let mut out = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = grid[(y + 1) * pw + (x + 1)].sqrt();
        }
    }
    FloatPlane::new(mask.width(), mask.height(), out).expect("mask dimensions are valid")
}
