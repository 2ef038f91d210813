//! Deterministic inputs shared by the benchmarks.

use semcolor_core::{ChromaPlanes, GuideImage, Plane};

/// Smooth pseudo-random values in `[lo, hi]`.
fn pattern(n: usize, phase: f64, lo: f64, hi: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = (i as f64 * 0.7548776662 + phase).sin() * 43758.5453;
            lo + (hi - lo) * (t - t.floor())
        })
        .collect()
}

pub fn chroma(width: usize, height: usize) -> ChromaPlanes {
    let n = width * height;
    ChromaPlanes::new(width, height, pattern(n, 0.1, -80.0, 80.0), pattern(n, 0.7, -80.0, 80.0))
        .expect("sizes match")
}

pub fn lightness(width: usize, height: usize) -> Plane {
    Plane::new(width, height, pattern(width * height, 1.3, 0.0, 100.0)).expect("sizes match")
}

pub fn guide(width: usize, height: usize) -> GuideImage {
    GuideImage::from_lightness(&lightness(width, height))
}
