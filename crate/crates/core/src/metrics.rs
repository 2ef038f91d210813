//! PSNR and mean intersection-over-union.

use std::fmt;

use crate::loss::SegLabelMap;
use crate::{Error, Result, RgbImage};

/// PSNR in decibels; identical images saturate instead of producing a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    pub fn value(self) -> f64 {
        match self {
            Psnr::Finite(v) => v,
            Psnr::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "psnr {v:.6}"),
            Psnr::Infinite => f.write_str("psnr inf"),
        }
    }
}

/// `10·log10(255² / MSE)` over every channel of every pixel.
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<Psnr> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::shape(format!(
            "images are {}x{} and {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let sse: u64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(Psnr::Infinite);
    }
    let mse = sse as f64 / a.data.len() as f64;
    Ok(Psnr::Finite(10.0 * (255.0 * 255.0 / mse).log10()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IoUReport {
    /// `None` for classes absent from both maps.
    pub per_class_iou: Vec<Option<f64>>,
    pub mean_iou: f64,
}

impl fmt::Display for IoUReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (c, iou) in self.per_class_iou.iter().enumerate() {
            if let Some(v) = iou {
                writeln!(f, "iou {c} {v:.6}")?;
            }
        }
        write!(f, "miou {:.6}", self.mean_iou)
    }
}

/// Intersection and union pixel counts per class, accumulated over any number of maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub intersection: Vec<u64>,
    pub union: Vec<u64>,
}

impl ConfusionCounts {
    pub fn new(n_classes: usize) -> Self {
        Self {
            intersection: vec![0; n_classes],
            union: vec![0; n_classes],
        }
    }

    pub fn add(&mut self, pred: &SegLabelMap, gt: &SegLabelMap) -> Result<()> {
        if pred.width != gt.width || pred.height != gt.height {
            return Err(Error::shape(format!(
                "label maps are {}x{} and {}x{}",
                pred.width, pred.height, gt.width, gt.height
            )));
        }
        let n = self.union.len();
        pred.check_classes(n)?;
        gt.check_classes(n)?;
        for (&p, &g) in pred.labels.iter().zip(&gt.labels) {
            if p == g {
                self.intersection[p] += 1;
                self.union[p] += 1;
            } else {
                self.union[p] += 1;
                self.union[g] += 1;
            }
        }
        Ok(())
    }

    pub fn report(&self) -> IoUReport {
        let per_class_iou: Vec<Option<f64>> = self
            .intersection
            .iter()
            .zip(&self.union)
            .map(|(&i, &u)| (u > 0).then(|| i as f64 / u as f64))
            .collect();
        let present: Vec<f64> = per_class_iou.iter().flatten().copied().collect();
        let mean_iou = if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        };
        IoUReport {
            per_class_iou,
            mean_iou,
        }
    }
}

pub fn mean_iou(pred: &SegLabelMap, gt: &SegLabelMap, n_classes: usize) -> Result<IoUReport> {
    let mut counts = ConfusionCounts::new(n_classes);
    counts.add(pred, gt)?;
    Ok(counts.report())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn psnr_cases() {
        let a = RgbImage::filled(3, 2, [10, 20, 30]);
        assert_eq!(psnr(&a, &a).unwrap(), Psnr::Infinite);
        let black = RgbImage::filled(4, 4, [0, 0, 0]);
        let white = RgbImage::filled(4, 4, [255, 255, 255]);
        assert_eq!(psnr(&black, &white).unwrap(), Psnr::Finite(0.0));
        assert!(psnr(&black, &RgbImage::filled(4, 3, [0, 0, 0])).is_err());
        assert_eq!(Psnr::Infinite.to_string(), "psnr inf");
    }

    #[test]
    fn psnr_matches_direct_mse() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = RgbImage::new(7, 5, (0..105).map(|_| rng.gen()).collect()).unwrap();
        let b = RgbImage::new(7, 5, (0..105).map(|_| rng.gen()).collect()).unwrap();
        let mut mse = 0.0;
        for i in 0..105 {
            mse += (a.data[i] as f64 - b.data[i] as f64).powi(2);
        }
        mse /= 105.0;
        let want = 10.0 * (65025.0 / mse).log10();
        let got = psnr(&a, &b).unwrap().value();
        assert!((got - want).abs() < 1e-9);
        assert_eq!(psnr(&b, &a).unwrap().value(), got);
    }

    #[test]
    fn psnr_decreases_with_error() {
        let base = RgbImage::filled(4, 4, [100, 100, 100]);
        let mut prev = f64::INFINITY;
        for e in 1..20u8 {
            let other = RgbImage::filled(4, 4, [100 + e, 100, 100]);
            let v = psnr(&base, &other).unwrap().value();
            assert!(v < prev);
            prev = v;
        }
    }

    fn map(labels: &[usize], w: usize) -> SegLabelMap {
        SegLabelMap::new(w, labels.len() / w, labels.to_vec()).unwrap()
    }

    #[test]
    fn iou_cases() {
        let gt = map(&[0, 1, 1, 0, 2, 2], 3);
        let r = mean_iou(&gt, &gt, 4).unwrap();
        assert_eq!(r.mean_iou, 1.0);
        assert_eq!(r.per_class_iou[3], None);

        let pred = map(&[1, 1, 0, 0], 2);
        let gt = map(&[0, 0, 1, 1], 2);
        let r = mean_iou(&pred, &gt, 2).unwrap();
        assert_eq!(r.per_class_iou, vec![Some(0.0), Some(0.0)]);
        assert_eq!(r.mean_iou, 0.0);

        assert!(mean_iou(&map(&[0, 0], 2), &map(&[0, 0, 0, 0], 2), 2).is_err());
        assert!(mean_iou(&map(&[0, 5], 2), &map(&[0, 0], 2), 2).is_err());
    }

    #[test]
    fn iou_half_overlap_fixture() {
        // 4x4, gt foreground = left two columns, pred foreground = top two rows.
        let gt: Vec<usize> = (0..16).map(|i| usize::from(i % 4 < 2)).collect();
        let pred: Vec<usize> = (0..16).map(|i| usize::from(i / 4 < 2)).collect();
        // enumerate: fg ∩ = 4, fg ∪ = 12; bg ∩ = 4, bg ∪ = 12
        let mut inter = [0; 2];
        let mut uni = [0; 2];
        for i in 0..16 {
            for c in 0..2 {
                let (p, g) = (pred[i] == c, gt[i] == c);
                inter[c] += usize::from(p && g);
                uni[c] += usize::from(p || g);
            }
        }
        let r = mean_iou(&map(&pred, 4), &map(&gt, 4), 2).unwrap();
        for c in 0..2 {
            assert_eq!(r.per_class_iou[c], Some(inter[c] as f64 / uni[c] as f64));
        }
        assert!((r.mean_iou - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.to_string(), "iou 0 0.333333\niou 1 0.333333\nmiou 0.333333");
    }

    proptest! {
        #[test]
        fn iou_bounds_and_permutation(
            pred in proptest::collection::vec(0usize..3, 12),
            gt in proptest::collection::vec(0usize..3, 12),
        ) {
            let r = mean_iou(&map(&pred, 4), &map(&gt, 4), 3).unwrap();
            for v in r.per_class_iou.iter().flatten() {
                prop_assert!((0.0..=1.0).contains(v));
            }
            prop_assert!((0.0..=1.0).contains(&r.mean_iou));
            let perm = [2usize, 0, 1];
            let pp: Vec<usize> = pred.iter().map(|&l| perm[l]).collect();
            let gp: Vec<usize> = gt.iter().map(|&l| perm[l]).collect();
            let rp = mean_iou(&map(&pp, 4), &map(&gp, 4), 3).unwrap();
            for c in 0..3 {
                prop_assert_eq!(r.per_class_iou[c], rp.per_class_iou[perm[c]]);
            }
        }
    }
}
