//! Seeded synthetic shapes corpus in which color follows object class.
//!
//! Class 0 is background; classes 1..=3 are circle, square and triangle. With
//! `lightness_overlap` every object (background included) draws its lightness
//! from the same uniform distribution on [40, 60], so lightness alone says
//! nothing about class and the color of a region is only predictable from its
//! shape.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::color_space::{lab_pixel_to_linear_rgb, ChromaPlanes, Plane};
use crate::loss::SegLabelMap;
use crate::{Error, LabImage, Result};

pub const DEFAULT_CLASS_CHROMA: [[f64; 2]; 4] = [[0.0, 0.0], [40.0, 20.0], [-35.0, 30.0], [10.0, -45.0]];

const PLACEMENT_RETRIES: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_images: usize,
    pub size: usize,
    pub n_classes: usize,
    pub class_chroma: Vec<[f64; 2]>,
    pub lightness_overlap: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_images: 100,
            size: 32,
            n_classes: 4,
            class_chroma: DEFAULT_CLASS_CHROMA.to_vec(),
            lightness_overlap: true,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.n_classes) {
            return Err(Error::invalid(format!(
                "n_classes must be 2..=4 (background plus up to three shapes), got {}",
                self.n_classes
            )));
        }
        if self.class_chroma.len() != self.n_classes {
            return Err(Error::invalid(format!(
                "{} class colors for {} classes",
                self.class_chroma.len(),
                self.n_classes
            )));
        }
        if self.size < 8 {
            return Err(Error::invalid("image size must be at least 8"));
        }
        for ab in &self.class_chroma {
            let lin = lab_pixel_to_linear_rgb([50.0, ab[0], ab[1]]);
            if lin.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::invalid(format!("class color {ab:?} is out of gamut at L=50")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub lab: LabImage,
    pub labels: SegLabelMap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ShapeKind {
    Circle,
    Square,
    Triangle,
}

impl ShapeKind {
    fn for_class(class: usize) -> Self {
        match class {
            1 => ShapeKind::Circle,
            2 => ShapeKind::Square,
            _ => ShapeKind::Triangle,
        }
    }

    /// Half-extent that gives the shape the requested area.
    fn half_extent(self, area: f64) -> f64 {
        match self {
            ShapeKind::Circle => (area / std::f64::consts::PI).sqrt(),
            ShapeKind::Square => area.sqrt() / 2.0,
            // upward isosceles triangle, base 2h, height 2h
            ShapeKind::Triangle => (area / 2.0).sqrt(),
        }
    }

    fn contains(self, dx: f64, dy: f64, e: f64) -> bool {
        match self {
            ShapeKind::Circle => dx * dx + dy * dy <= e * e,
            ShapeKind::Square => dx.abs() <= e && dy.abs() <= e,
            ShapeKind::Triangle => dy >= -e && dy <= e && dx.abs() <= (dy + e) / 2.0,
        }
    }
}

struct Placed {
    class: usize,
    kind: ShapeKind,
    cx: f64,
    cy: f64,
    extent: f64,
}

fn draw_lightness(rng: &mut ChaCha8Rng, class: usize, overlap: bool) -> f64 {
    if overlap {
        rng.gen_range(40.0..=60.0)
    } else {
        let base = 20.0 + 18.0 * class as f64;
        rng.gen_range(base..=base + 10.0)
    }
}

fn render(spec: &SynthSpec, index: usize) -> SynthSample {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let size = spec.size;
    let s = size as f64;

    let bg_l = draw_lightness(&mut rng, 0, spec.lightness_overlap);
    let n_shapes = rng.gen_range(1..=3usize);
    let mut placed: Vec<Placed> = Vec::new();
    for _ in 0..n_shapes {
        let class = rng.gen_range(1..spec.n_classes);
        let kind = ShapeKind::for_class(class);
        let side = rng.gen_range(0.2 * s..=0.34 * s);
        let extent = kind.half_extent(side * side);
        for _ in 0..PLACEMENT_RETRIES {
            let cx = rng.gen_range(extent..=s - 1.0 - extent);
            let cy = rng.gen_range(extent..=s - 1.0 - extent);
            let clear = placed.iter().all(|p| {
                let gap = p.extent + extent + 1.0;
                (p.cx - cx).abs() > gap || (p.cy - cy).abs() > gap
            });
            if clear {
                placed.push(Placed {
                    class,
                    kind,
                    cx,
                    cy,
                    extent,
                });
                break;
            }
        }
    }
    let shape_l: Vec<f64> = placed
        .iter()
        .map(|p| draw_lightness(&mut rng, p.class, spec.lightness_overlap))
        .collect();

    let n = size * size;
    let mut labels = vec![0usize; n];
    let mut l = vec![bg_l; n];
    for y in 0..size {
        for x in 0..size {
            for (p, &pl) in placed.iter().zip(&shape_l) {
                if p.kind.contains(x as f64 - p.cx, y as f64 - p.cy, p.extent) {
                    labels[y * size + x] = p.class;
                    l[y * size + x] = pl;
                }
            }
        }
    }
    let a = labels.iter().map(|&c| spec.class_chroma[c][0]).collect();
    let b = labels.iter().map(|&c| spec.class_chroma[c][1]).collect();
    SynthSample {
        lab: LabImage {
            width: size,
            height: size,
            l,
            a,
            b,
        },
        labels: SegLabelMap {
            width: size,
            height: size,
            labels,
        },
    }
}

/// Generates the corpus; each image uses its own stream of the seeded generator.
pub fn generate(spec: &SynthSpec) -> Result<Vec<SynthSample>> {
    spec.validate()?;
    Ok((0..spec.n_images).map(|i| render(spec, i)).collect())
}

/// Checks that every pixel's chroma is within `tol` of its class color.
pub fn check_sample(lab: &LabImage, labels: &SegLabelMap, class_chroma: &[[f64; 2]], tol: f64) -> Result<()> {
    if lab.width != labels.width || lab.height != labels.height {
        return Err(Error::shape("image and label map sizes differ"));
    }
    labels.check_classes(class_chroma.len())?;
    for (i, &c) in labels.labels.iter().enumerate() {
        let want = class_chroma[c];
        if (lab.a[i] - want[0]).abs() > tol || (lab.b[i] - want[1]).abs() > tol {
            return Err(Error::invalid(format!(
                "pixel {i} of class {c} has chroma ({:.2}, {:.2}), expected {want:?}",
                lab.a[i], lab.b[i]
            )));
        }
    }
    Ok(())
}

/// A vertical step edge: dark achromatic left half, bright colored right half.
#[derive(Debug, Clone)]
pub struct StepEdgeScene {
    pub lightness: Plane,
    pub chroma: ChromaPlanes,
    pub low_chroma: ChromaPlanes,
    /// Chroma `a` on the left and right of the edge.
    pub a_step: (f64, f64),
}

/// `width` must be a multiple of `2 * scale`; the edge falls on a low-res cell boundary.
pub fn step_edge_scene(width: usize, height: usize, scale: usize) -> Result<StepEdgeScene> {
    if scale == 0 || width % (2 * scale) != 0 || height % scale != 0 {
        return Err(Error::invalid("step edge scene needs width divisible by 2*scale and height by scale"));
    }
    const LEFT: (f64, [f64; 2]) = (20.0, [0.0, 0.0]);
    const RIGHT: (f64, [f64; 2]) = (80.0, [60.0, 20.0]);
    let half = width / 2;
    let pick = |x: usize| if x < half { LEFT } else { RIGHT };
    let lightness = (0..width * height).map(|i| pick(i % width).0).collect();
    let a = (0..width * height).map(|i| pick(i % width).1[0]).collect();
    let b = (0..width * height).map(|i| pick(i % width).1[1]).collect();
    let (lw, lh) = (width / scale, height / scale);
    let low_pick = |x: usize| if x < lw / 2 { LEFT } else { RIGHT };
    let la = (0..lw * lh).map(|i| low_pick(i % lw).1[0]).collect();
    let lb = (0..lw * lh).map(|i| low_pick(i % lw).1[1]).collect();
    Ok(StepEdgeScene {
        lightness: Plane::new(width, height, lightness)?,
        chroma: ChromaPlanes::new(width, height, a, b)?,
        low_chroma: ChromaPlanes::new(lw, lh, la, lb)?,
        a_step: (LEFT.1[0], RIGHT.1[0]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, seed: u64) -> SynthSpec {
        SynthSpec {
            n_images: n,
            seed,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&spec(20, 7)).unwrap();
        let b = generate(&spec(20, 7)).unwrap();
        assert_eq!(a, b);
        let c = generate(&spec(20, 8)).unwrap();
        assert_ne!(a, c);
        // image i does not depend on how many images are generated
        let short = generate(&spec(5, 7)).unwrap();
        assert_eq!(&a[..5], &short[..]);
    }

    #[test]
    fn chroma_follows_labels() {
        let s = spec(50, 3);
        for sample in generate(&s).unwrap() {
            check_sample(&sample.lab, &sample.labels, &s.class_chroma, 0.5).unwrap();
            assert!(sample.labels.labels.iter().any(|&c| c != 0), "every image has a shape");
            for &l in &sample.lab.l {
                assert!((40.0..=60.0).contains(&l));
            }
        }
    }

    #[test]
    fn class_colors_in_gamut_across_lightness_band() {
        for ab in DEFAULT_CLASS_CHROMA {
            for l in [40.0, 50.0, 60.0] {
                let lin = lab_pixel_to_linear_rgb([l, ab[0], ab[1]]);
                assert!(lin.iter().all(|c| (0.0..=1.0).contains(c)), "{ab:?} at {l}");
            }
        }
    }

    fn min_pairwise_overlap(corpus: &[SynthSample], bins: usize) -> f64 {
        let mut hist = vec![vec![0.0f64; bins]; 4];
        for s in corpus {
            for (&l, &c) in s.lab.l.iter().zip(&s.labels.labels) {
                let bin = (((l - 40.0) / 20.0 * bins as f64) as usize).min(bins - 1);
                hist[c][bin] += 1.0;
            }
        }
        for h in hist.iter_mut() {
            let total: f64 = h.iter().sum();
            h.iter_mut().for_each(|v| *v /= total);
        }
        let mut worst: f64 = 1.0;
        for i in 0..4 {
            for j in i + 1..4 {
                worst = worst.min((0..bins).map(|k| hist[i][k].min(hist[j][k])).sum());
            }
        }
        worst
    }

    #[test]
    fn lightness_does_not_separate_classes() {
        // Each class sees only a few hundred independent lightness draws in
        // 500 images, so the histogram uses bins five L units wide.
        let overlap = min_pairwise_overlap(&generate(&spec(500, 1)).unwrap(), 4);
        assert!(overlap > 0.9, "overlap {overlap}");
        // With more draws the per-class histograms converge at a finer binning.
        let overlap = min_pairwise_overlap(&generate(&spec(5000, 1)).unwrap(), 10);
        assert!(overlap > 0.9, "overlap {overlap}");
    }

    #[test]
    fn shape_classes_are_balanced() {
        let corpus = generate(&spec(500, 2)).unwrap();
        let mut pixels = [0.0f64; 4];
        for s in &corpus {
            for &c in &s.labels.labels {
                pixels[c] += 1.0;
            }
        }
        let mean = (pixels[1] + pixels[2] + pixels[3]) / 3.0;
        for c in 1..4 {
            assert!((pixels[c] / mean - 1.0).abs() <= 0.2, "{pixels:?}");
        }
    }

    #[test]
    fn separated_lightness_mode() {
        let s = SynthSpec {
            lightness_overlap: false,
            ..spec(10, 4)
        };
        for sample in generate(&s).unwrap() {
            for (&l, &c) in sample.lab.l.iter().zip(&sample.labels.labels) {
                let base = 20.0 + 18.0 * c as f64;
                assert!(l >= base && l <= base + 10.0);
            }
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&SynthSpec { n_classes: 5, ..spec(1, 0) }).is_err());
        assert!(generate(&SynthSpec { class_chroma: vec![[0.0, 0.0]; 3], ..spec(1, 0) }).is_err());
        assert!(generate(&SynthSpec { class_chroma: vec![[0.0, 0.0], [120.0, 0.0], [0.0, 0.0], [0.0, 0.0]], ..spec(1, 0) }).is_err());
    }

    #[test]
    fn step_edge_layout() {
        let s = step_edge_scene(64, 16, 4).unwrap();
        assert_eq!((s.low_chroma.width, s.low_chroma.height), (16, 4));
        assert_eq!(s.lightness.get(31, 0), 20.0);
        assert_eq!(s.lightness.get(32, 0), 80.0);
        assert_eq!(s.low_chroma.a[7], 0.0);
        assert_eq!(s.low_chroma.a[8], 60.0);
        assert!(step_edge_scene(30, 16, 4).is_err());
    }
}
