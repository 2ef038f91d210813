//! On-disk synthetic corpus: paired `NNNN_rgb.png` / `NNNN_label.png` files
//! plus a `manifest.txt`.
//!
//! ```text
//! semcolor-corpus seed=7 n=100 size=32 classes=4 overlap=true
//! 0000_rgb.png 0000_label.png
//! ...
//! ```

use std::fs;
use std::path::Path;

use crate::color_space::{lab_to_rgb, rgb_to_lab};
use crate::loss::SegLabelMap;
use crate::png_io::{read_png, write_gray_png, write_rgb_png, PngImage};
use crate::synth::{check_sample, SynthSample, SynthSpec, DEFAULT_CLASS_CHROMA};
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.txt";
const TAG: &str = "semcolor-corpus";

/// Chroma tolerance for samples that went through 8-bit RGB.
pub const DISK_CHROMA_TOLERANCE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub spec: SynthSpec,
    pub samples: Vec<SynthSample>,
}

fn file_names(index: usize) -> (String, String) {
    (format!("{index:04}_rgb.png"), format!("{index:04}_label.png"))
}

fn header(spec: &SynthSpec) -> String {
    format!(
        "{TAG} seed={} n={} size={} classes={} overlap={}",
        spec.seed, spec.n_images, spec.size, spec.n_classes, spec.lightness_overlap
    )
}

fn parse_header(line: &str) -> Result<SynthSpec> {
    let bad = || Error::Format(format!("bad manifest header {line:?}"));
    let mut words = line.split_whitespace();
    if words.next() != Some(TAG) {
        return Err(bad());
    }
    let mut spec = SynthSpec::default();
    let mut seen = 0;
    for word in words {
        let (key, value) = word.split_once('=').ok_or_else(bad)?;
        match key {
            "seed" => spec.seed = value.parse().map_err(|_| bad())?,
            "n" => spec.n_images = value.parse().map_err(|_| bad())?,
            "size" => spec.size = value.parse().map_err(|_| bad())?,
            "classes" => spec.n_classes = value.parse().map_err(|_| bad())?,
            "overlap" => spec.lightness_overlap = value.parse().map_err(|_| bad())?,
            _ => return Err(bad()),
        }
        seen += 1;
    }
    if seen != 5 {
        return Err(bad());
    }
    if !(2..=DEFAULT_CLASS_CHROMA.len()).contains(&spec.n_classes) {
        return Err(bad());
    }
    spec.class_chroma = DEFAULT_CLASS_CHROMA[..spec.n_classes].to_vec();
    Ok(spec)
}

/// Writes `samples` and a manifest into `dir`, creating it if needed.
pub fn write_corpus(dir: impl AsRef<Path>, spec: &SynthSpec, samples: &[SynthSample]) -> Result<()> {
    let dir = dir.as_ref();
    if samples.len() != spec.n_images {
        return Err(Error::invalid(format!(
            "spec asks for {} images, got {}",
            spec.n_images,
            samples.len()
        )));
    }
    fs::create_dir_all(dir)?;
    let mut manifest = header(spec);
    manifest.push('\n');
    for (i, s) in samples.iter().enumerate() {
        let (rgb_name, label_name) = file_names(i);
        write_rgb_png(dir.join(&rgb_name), &lab_to_rgb(&s.lab))?;
        let labels: Vec<u8> = s.labels.labels.iter().map(|&c| c as u8).collect();
        write_gray_png(dir.join(&label_name), s.labels.width, s.labels.height, &labels)?;
        manifest.push_str(&format!("{rgb_name} {label_name}\n"));
    }
    fs::write(dir.join(MANIFEST), manifest)?;
    Ok(())
}

pub fn read_label_png(path: impl AsRef<Path>) -> Result<SegLabelMap> {
    let path = path.as_ref();
    match read_png(path)? {
        PngImage::Gray { width, height, data } => {
            SegLabelMap::new(width, height, data.into_iter().map(usize::from).collect())
        }
        PngImage::Rgb(_) => Err(Error::Format(format!(
            "{} is not a single-channel label image",
            path.display()
        ))),
    }
}

/// Reads a corpus back. Chroma is recovered from the 8-bit RGB files, so it
/// carries quantization error.
pub fn read_corpus(dir: impl AsRef<Path>) -> Result<Corpus> {
    let dir = dir.as_ref();
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let mut lines = text.lines();
    let spec = parse_header(lines.next().unwrap_or_default())?;
    let mut samples = Vec::with_capacity(spec.n_images);
    for (i, line) in lines.enumerate() {
        let (rgb_name, label_name) = line
            .split_once(' ')
            .ok_or_else(|| Error::Format(format!("bad manifest entry {line:?}")))?;
        if (rgb_name.to_string(), label_name.to_string()) != file_names(i) {
            return Err(Error::Format(format!("manifest entry {i} names {line:?}")));
        }
        let rgb = read_png(dir.join(rgb_name))?.into_rgb();
        let labels = read_label_png(dir.join(label_name))?;
        if (rgb.width, rgb.height) != (spec.size, spec.size) || (labels.width, labels.height) != (spec.size, spec.size) {
            return Err(Error::shape(format!("{rgb_name} or {label_name} is not {0}x{0}", spec.size)));
        }
        labels.check_classes(spec.n_classes)?;
        samples.push(SynthSample {
            lab: rgb_to_lab(&rgb),
            labels,
        });
    }
    if samples.len() != spec.n_images {
        return Err(Error::Format(format!(
            "manifest header says {} images, lists {}",
            spec.n_images,
            samples.len()
        )));
    }
    Ok(Corpus { spec, samples })
}

impl Corpus {
    /// Re-verifies the per-pixel chroma/label invariant on every sample.
    pub fn check(&self, tol: f64) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            check_sample(&s.lab, &s.labels, &self.spec.class_chroma, tol)
                .map_err(|e| Error::invalid(format!("sample {i}: {e}")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::generate;

    fn small_spec() -> SynthSpec {
        SynthSpec {
            n_images: 6,
            size: 16,
            seed: 3,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn roundtrip_keeps_labels_and_class_colors() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small_spec();
        let samples = generate(&spec).unwrap();
        write_corpus(dir.path(), &spec, &samples).unwrap();
        let manifest = fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
        assert_eq!(manifest.lines().count(), spec.n_images + 1);
        let back = read_corpus(dir.path()).unwrap();
        assert_eq!(back.spec, spec);
        for (a, b) in samples.iter().zip(&back.samples) {
            assert_eq!(a.labels, b.labels);
            for (x, y) in a.lab.l.iter().zip(&b.lab.l) {
                assert!((x - y).abs() < 1.0);
            }
        }
        back.check(DISK_CHROMA_TOLERANCE).unwrap();
    }

    #[test]
    fn detects_broken_corpora() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small_spec();
        let samples = generate(&spec).unwrap();
        write_corpus(dir.path(), &spec, &samples).unwrap();
        let manifest_path = dir.path().join(MANIFEST);
        let manifest = fs::read_to_string(&manifest_path).unwrap();

        fs::write(&manifest_path, manifest.replace("n=6", "n=7")).unwrap();
        assert!(read_corpus(dir.path()).is_err());
        fs::write(&manifest_path, manifest.replace("0003_rgb", "0004_rgb")).unwrap();
        assert!(read_corpus(dir.path()).is_err());
        fs::write(&manifest_path, &manifest).unwrap();

        // a label image that disagrees with the colors fails the check
        let first = &samples[0].labels;
        let flipped: Vec<u8> = first.labels.iter().map(|&c| if c == 0 { 1 } else { 0 }).collect();
        write_gray_png(dir.path().join("0000_label.png"), first.width, first.height, &flipped).unwrap();
        assert!(read_corpus(dir.path()).unwrap().check(DISK_CHROMA_TOLERANCE).is_err());

        fs::remove_file(dir.path().join("0001_rgb.png")).unwrap();
        assert!(read_corpus(dir.path()).is_err());
    }

    #[test]
    fn rejects_bad_headers() {
        for line in [
            "",
            "other seed=1 n=1 size=8 classes=4 overlap=true",
            "semcolor-corpus seed=1 n=1 size=8 classes=4",
            "semcolor-corpus seed=1 n=1 size=8 classes=9 overlap=true",
            "semcolor-corpus seed=x n=1 size=8 classes=4 overlap=true",
        ] {
            assert!(parse_header(line).is_err(), "{line}");
        }
    }
}
