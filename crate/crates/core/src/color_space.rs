//! sRGB <-> CIE Lab conversion and lightness/chroma plane handling.
//!
//! Conversions use the IEC 61966-2-1 transfer curve, the sRGB primaries and a
//! D65 reference white taken as the row sums of the RGB->XYZ matrix, so that
//! sRGB white lands exactly on L=100, a=b=0.

use crate::{Error, Result};

const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

/// A single real-valued image plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape(format!(
                "plane {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// The a and b chroma planes of a Lab image.
#[derive(Debug, Clone, PartialEq)]
pub struct ChromaPlanes {
    pub width: usize,
    pub height: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl ChromaPlanes {
    pub fn new(width: usize, height: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let n = width * height;
        if a.len() != n || b.len() != n {
            return Err(Error::shape(format!(
                "chroma planes {width}x{height} need {n} values each, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        Ok(Self {
            width,
            height,
            a,
            b,
        })
    }

    pub fn filled(width: usize, height: usize, a: f64, b: f64) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            a: vec![a; n],
            b: vec![b; n],
        }
    }

    pub fn channels(&self) -> [&[f64]; 2] {
        [&self.a, &self.b]
    }
}

/// 8-bit sRGB image, row-major interleaved `r, g, b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::shape(format!(
                "rgb image {width}x{height} needs {} bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_gray(width: usize, height: usize, gray: &[u8]) -> Result<Self> {
        if gray.len() != width * height {
            return Err(Error::shape(format!(
                "gray image {width}x{height} needs {} bytes, got {}",
                width * height,
                gray.len()
            )));
        }
        let data = gray.iter().flat_map(|&g| [g, g, g]).collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn is_grayscale(&self) -> bool {
        self.data.chunks_exact(3).all(|p| p[0] == p[1] && p[1] == p[2])
    }
}

/// CIE Lab image stored as three planes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    pub width: usize,
    pub height: usize,
    pub l: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl LabImage {
    /// Validates plane lengths and the nominal ranges (L in [0,100], a/b in [-128,128]).
    pub fn new(width: usize, height: usize, l: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let n = width * height;
        if l.len() != n || a.len() != n || b.len() != n {
            return Err(Error::shape(format!(
                "lab image {width}x{height} needs {n} values per plane"
            )));
        }
        const TOL: f64 = 1e-9;
        if let Some(v) = l.iter().find(|v| !(-TOL..=100.0 + TOL).contains(*v)) {
            return Err(Error::invalid(format!("lightness {v} outside [0,100]")));
        }
        if let Some(v) = a
            .iter()
            .chain(&b)
            .find(|v| !(-128.0 - TOL..=128.0 + TOL).contains(*v))
        {
            return Err(Error::invalid(format!("chroma {v} outside [-128,128]")));
        }
        Ok(Self {
            width,
            height,
            l,
            a,
            b,
        })
    }

    pub fn len(&self) -> usize {
        self.l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l.is_empty()
    }
}

#[inline]
fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

#[inline]
fn lab_f_inv(f: f64) -> f64 {
    let f3 = f * f * f;
    if f3 > EPSILON {
        f3
    } else {
        (116.0 * f - 16.0) / KAPPA
    }
}

fn white_point() -> [f64; 3] {
    RGB_TO_XYZ.map(|row| row[0] + row[1] + row[2])
}

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let inv_det = 1.0 / det;
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            // cofactor of (j, i)
            let (r0, r1) = match j {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (c0, c1) = match i {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let minor = m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            *v = sign * minor * inv_det;
        }
    }
    out
}

/// Converts one 8-bit sRGB triple to `[L, a, b]`.
pub fn rgb_pixel_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    rgb_unit_to_lab(rgb.map(|c| c as f64 / 255.0))
}

/// Converts a gamma-encoded sRGB triple with components in [0,1] to `[L, a, b]`.
pub fn rgb_unit_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let white = white_point();
    let mut f = [0.0; 3];
    for (k, row) in RGB_TO_XYZ.iter().enumerate() {
        let xyz = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
        f[k] = lab_f(xyz / white[k]);
    }
    [116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])]
}

/// Converts Lab to linear RGB without clamping; components may leave [0,1].
pub fn lab_pixel_to_linear_rgb(lab: [f64; 3]) -> [f64; 3] {
    lab_to_linear_with(lab, &invert3(&RGB_TO_XYZ), &white_point())
}

fn lab_to_linear_with(lab: [f64; 3], inv: &[[f64; 3]; 3], white: &[f64; 3]) -> [f64; 3] {
    let [l, a, b] = lab;
    let fy = (l + 16.0) / 116.0;
    let fx = fy + a / 500.0;
    let fz = fy - b / 200.0;
    let y = if l > KAPPA * EPSILON {
        fy * fy * fy
    } else {
        l / KAPPA
    };
    let xyz = [lab_f_inv(fx) * white[0], y * white[1], lab_f_inv(fz) * white[2]];
    inv.map(|row| row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2])
}

fn quantize(linear: f64) -> u8 {
    let c = linear_to_srgb(linear.clamp(0.0, 1.0));
    (c * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Converts Lab to 8-bit sRGB, clamping out-of-gamut colors in linear RGB.
pub fn lab_pixel_to_rgb(lab: [f64; 3]) -> [u8; 3] {
    lab_pixel_to_linear_rgb(lab).map(quantize)
}

/// Lightness of the neutral gray `(g, g, g)`.
pub fn gray_to_lightness(g: u8) -> f64 {
    rgb_pixel_to_lab([g, g, g])[0]
}

pub fn rgb_to_lab(img: &RgbImage) -> LabImage {
    let n = img.width * img.height;
    let mut l = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for px in img.data.chunks_exact(3) {
        let lab = rgb_pixel_to_lab([px[0], px[1], px[2]]);
        l.push(lab[0]);
        a.push(lab[1]);
        b.push(lab[2]);
    }
    LabImage {
        width: img.width,
        height: img.height,
        l,
        a,
        b,
    }
}

pub fn lab_to_rgb(img: &LabImage) -> RgbImage {
    let inv = invert3(&RGB_TO_XYZ);
    let white = white_point();
    let mut data = Vec::with_capacity(img.len() * 3);
    for i in 0..img.len() {
        let lin = lab_to_linear_with([img.l[i], img.a[i], img.b[i]], &inv, &white);
        data.extend(lin.map(quantize));
    }
    RgbImage {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Lightness plane of an RGB image (the luminance-derived L channel).
pub fn lightness_of(img: &RgbImage) -> Plane {
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| rgb_pixel_to_lab([p[0], p[1], p[2]])[0])
        .collect();
    Plane {
        width: img.width,
        height: img.height,
        data,
    }
}

pub fn split_channels(img: &LabImage) -> (Plane, ChromaPlanes) {
    (
        Plane {
            width: img.width,
            height: img.height,
            data: img.l.clone(),
        },
        ChromaPlanes {
            width: img.width,
            height: img.height,
            a: img.a.clone(),
            b: img.b.clone(),
        },
    )
}

pub fn merge_channels(lightness: &Plane, chroma: &ChromaPlanes) -> Result<LabImage> {
    if lightness.width != chroma.width || lightness.height != chroma.height {
        return Err(Error::shape(format!(
            "lightness {}x{} vs chroma {}x{}",
            lightness.width, lightness.height, chroma.width, chroma.height
        )));
    }
    Ok(LabImage {
        width: lightness.width,
        height: lightness.height,
        l: lightness.data.clone(),
        a: chroma.a.clone(),
        b: chroma.b.clone(),
    })
}
