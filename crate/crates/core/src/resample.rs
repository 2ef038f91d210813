//! Plain (non edge-aware) resampling on pixel-center aligned grids.
//!
//! Output pixel `x` samples the source at `(x + 0.5) / s - 0.5` with
//! `s = out_len / in_len`, clamped to the source extent.

use crate::color_space::{ChromaPlanes, Plane};
use crate::{Error, Result};

#[inline]
pub(crate) fn source_coord(x: usize, scale: f64) -> f64 {
    (x as f64 + 0.5) / scale - 0.5
}

fn check_target(w: usize, h: usize) -> Result<()> {
    if w == 0 || h == 0 {
        return Err(Error::invalid("target size must be non-zero"));
    }
    Ok(())
}

fn linear_taps(len_in: usize, len_out: usize) -> Vec<(usize, usize, f64)> {
    let scale = len_out as f64 / len_in as f64;
    (0..len_out)
        .map(|x| {
            let s = source_coord(x, scale).clamp(0.0, (len_in - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(len_in - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

pub fn bilinear(src: &[f64], w: usize, h: usize, out_w: usize, out_h: usize) -> Result<Vec<f64>> {
    check_target(out_w, out_h)?;
    if src.len() != w * h || w == 0 || h == 0 {
        return Err(Error::shape("bilinear source size mismatch"));
    }
    let xs = linear_taps(w, out_w);
    let ys = linear_taps(h, out_h);
    let mut out = Vec::with_capacity(out_w * out_h);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
            let bot = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    Ok(out)
}

/// Keys cubic convolution kernel with `a = -0.5`.
fn cubic(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (A + 2.0) * t * t * t - (A + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        A * (t * t * t - 5.0 * t * t + 8.0 * t - 4.0)
    } else {
        0.0
    }
}

fn cubic_taps(len_in: usize, len_out: usize) -> Vec<[(usize, f64); 4]> {
    let scale = len_out as f64 / len_in as f64;
    let last = len_in as i64 - 1;
    (0..len_out)
        .map(|x| {
            let s = source_coord(x, scale).clamp(0.0, last as f64);
            let base = s.floor() as i64;
            let mut taps = [(0usize, 0.0); 4];
            for (k, tap) in taps.iter_mut().enumerate() {
                let i = base - 1 + k as i64;
                *tap = (i.clamp(0, last) as usize, cubic(s - i as f64));
            }
            taps
        })
        .collect()
}

pub fn bicubic(src: &[f64], w: usize, h: usize, out_w: usize, out_h: usize) -> Result<Vec<f64>> {
    check_target(out_w, out_h)?;
    if src.len() != w * h || w == 0 || h == 0 {
        return Err(Error::shape("bicubic source size mismatch"));
    }
    let xs = cubic_taps(w, out_w);
    let ys = cubic_taps(h, out_h);
    let mut out = Vec::with_capacity(out_w * out_h);
    for ty in &ys {
        for tx in &xs {
            let mut v = 0.0;
            for &(yi, wy) in ty {
                for &(xi, wx) in tx {
                    v += src[yi * w + xi] * wy * wx;
                }
            }
            out.push(v);
        }
    }
    Ok(out)
}

/// Box-filter weights mapping `len_in` source cells onto `len_out` target cells.
fn area_taps(len_in: usize, len_out: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = len_in as f64 / len_out as f64;
    (0..len_out)
        .map(|x| {
            let lo = x as f64 * ratio;
            let hi = lo + ratio;
            let mut taps = Vec::new();
            let mut i = lo.floor() as usize;
            while (i as f64) < hi && i < len_in {
                let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                if overlap > 0.0 {
                    taps.push((i, overlap / ratio));
                }
                i += 1;
            }
            taps
        })
        .collect()
}

/// Area-averaging resize, intended for downscaling.
pub fn area(src: &[f64], w: usize, h: usize, out_w: usize, out_h: usize) -> Result<Vec<f64>> {
    check_target(out_w, out_h)?;
    if src.len() != w * h || w == 0 || h == 0 {
        return Err(Error::shape("area source size mismatch"));
    }
    let xs = area_taps(w, out_w);
    let ys = area_taps(h, out_h);
    let mut out = Vec::with_capacity(out_w * out_h);
    for ty in &ys {
        for tx in &xs {
            let mut v = 0.0;
            for &(yi, wy) in ty {
                for &(xi, wx) in tx {
                    v += src[yi * w + xi] * wy * wx;
                }
            }
            out.push(v);
        }
    }
    Ok(out)
}

pub fn bilinear_plane(p: &Plane, out_w: usize, out_h: usize) -> Result<Plane> {
    Plane::new(out_w, out_h, bilinear(&p.data, p.width, p.height, out_w, out_h)?)
}

pub fn area_plane(p: &Plane, out_w: usize, out_h: usize) -> Result<Plane> {
    Plane::new(out_w, out_h, area(&p.data, p.width, p.height, out_w, out_h)?)
}

pub fn bilinear_chroma(c: &ChromaPlanes, out_w: usize, out_h: usize) -> Result<ChromaPlanes> {
    ChromaPlanes::new(
        out_w,
        out_h,
        bilinear(&c.a, c.width, c.height, out_w, out_h)?,
        bilinear(&c.b, c.width, c.height, out_w, out_h)?,
    )
}

pub fn bicubic_chroma(c: &ChromaPlanes, out_w: usize, out_h: usize) -> Result<ChromaPlanes> {
    ChromaPlanes::new(
        out_w,
        out_h,
        bicubic(&c.a, c.width, c.height, out_w, out_h)?,
        bicubic(&c.b, c.width, c.height, out_w, out_h)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_at_scale_one() {
        let src: Vec<f64> = (0..12).map(|v| v as f64 * 1.5).collect();
        assert_eq!(bilinear(&src, 4, 3, 4, 3).unwrap(), src);
        let bc = bicubic(&src, 4, 3, 4, 3).unwrap();
        for (a, b) in bc.iter().zip(&src) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(area(&src, 4, 3, 4, 3).unwrap(), src);
    }

    #[test]
    fn area_averages_blocks() {
        let src: Vec<f64> = (0..16).map(|v| v as f64).collect();
        let out = area(&src, 4, 4, 2, 2).unwrap();
        assert_eq!(out, vec![2.5, 4.5, 10.5, 12.5]);
        // non-integer ratio keeps the mean
        let src: Vec<f64> = (0..25).map(|v| (v * 7 % 11) as f64).collect();
        let out = area(&src, 5, 5, 3, 3).unwrap();
        let m_in = src.iter().sum::<f64>() / 25.0;
        let m_out = out.iter().sum::<f64>() / 9.0;
        assert!((m_in - m_out).abs() < 1e-12);
    }

    #[test]
    fn bilinear_constant_and_ramp() {
        let out = bilinear(&[3.0; 6], 3, 2, 12, 8).unwrap();
        assert!(out.iter().all(|v| (*v - 3.0).abs() < 1e-12));
        let out = bilinear(&[0.0, 4.0], 2, 1, 4, 1).unwrap();
        assert_eq!(out, vec![0.0, 1.0, 3.0, 4.0]);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(bilinear(&[1.0; 3], 2, 2, 4, 4).is_err());
        assert!(bicubic(&[1.0; 4], 2, 2, 0, 4).is_err());
    }
}
