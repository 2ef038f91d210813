use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use semcolor_core::bilateral::{joint_bilateral_filter, joint_bilateral_upsample};
use semcolor_core::color_space::{gray_to_lightness, lab_to_rgb, lightness_of, merge_channels, rgb_to_lab, split_channels};
use semcolor_core::corpus::{read_corpus, read_label_png, write_corpus};
use semcolor_core::metrics::{mean_iou, psnr};
use semcolor_core::pipeline::train_run;
use semcolor_core::png_io::{read_png, write_rgb_png, PngImage};
use semcolor_core::synth::{generate, DEFAULT_CLASS_CHROMA};
use semcolor_core::toynet::infer_color;
use semcolor_core::{BilateralParams, ChromaGrid, ChromaPlanes, GuideImage, Plane, RunConfig, SynthSpec, Tensor, ToyNet};

use crate::{BilateralArgs, CheckArgs, ColorizeArgs, EvalArgs, GridArgs, Metric, SigmaArgs, SynthArgs, TrainArgs};

pub fn synth(a: SynthArgs) -> Result<()> {
    ensure!(
        (2..=DEFAULT_CLASS_CHROMA.len()).contains(&a.classes),
        "--classes must be between 2 and {}",
        DEFAULT_CLASS_CHROMA.len()
    );
    let spec = SynthSpec {
        n_images: a.n,
        size: a.size,
        n_classes: a.classes,
        class_chroma: DEFAULT_CLASS_CHROMA[..a.classes].to_vec(),
        lightness_overlap: !a.separate_lightness,
        seed: a.seed,
    };
    let samples = generate(&spec)?;
    write_corpus(&a.out, &spec, &samples).with_context(|| format!("writing corpus to {}", a.out.display()))?;
    println!("wrote {} images to {}", a.n, a.out.display());
    Ok(())
}

pub fn check(a: CheckArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus).with_context(|| format!("reading corpus {}", a.corpus.display()))?;
    corpus.check(a.tol)?;
    // the manifest's spec must regenerate the same geometry
    let expected = generate(&corpus.spec)?;
    for (i, (got, want)) in corpus.samples.iter().zip(&expected).enumerate() {
        ensure!(got.labels == want.labels, "sample {i}: labels differ from the generator");
        let worst = got.lab.l.iter().zip(&want.lab.l).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        ensure!(worst <= 1.0, "sample {i}: lightness differs from the generator by {worst:.3}");
    }
    println!("ok {} images", corpus.samples.len());
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("reading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.lr {
        cfg.lr = v;
    }
    if let Some(v) = a.lambda_c {
        cfg.lambda_c = v;
    }
    if let Some(v) = a.lambda_s {
        cfg.lambda_s = v;
    }
    cfg.validate()?;
    let corpus = read_corpus(&a.corpus).with_context(|| format!("reading corpus {}", a.corpus.display()))?;
    let n = corpus.samples.len();
    ensure!(a.holdout < n, "--holdout {} leaves no training images out of {n}", a.holdout);
    let (train_set, held_out) = corpus.samples.split_at(n - a.holdout);
    let (net, report) = train_run(&cfg, corpus.spec.n_classes, train_set, held_out)?;

    net.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let report_path = a.report.unwrap_or_else(|| report_path_for(&a.out));
    fs::write(&report_path, report.table()).with_context(|| format!("writing {}", report_path.display()))?;
    if let Some(last) = report.epochs.last() {
        println!("epoch {} total {:.6}", last.epoch, last.total);
    }
    if let Some(eval) = &report.held_out {
        println!("held_out color_ce {:.6}", eval.color_ce);
        println!("{}", eval.iou);
    }
    Ok(())
}

fn report_path_for(model: &Path) -> PathBuf {
    let mut name = model.file_name().unwrap_or_default().to_os_string();
    name.push(".report.txt");
    model.with_file_name(name)
}

/// Lightness of a PNG. Color input is reduced to its luminance-derived L.
fn read_lightness(path: &Path) -> Result<Plane> {
    match read_png(path).with_context(|| format!("reading {}", path.display()))? {
        PngImage::Gray { width, height, data } => {
            Ok(Plane::new(width, height, data.iter().map(|&g| gray_to_lightness(g)).collect())?)
        }
        PngImage::Rgb(img) => {
            if !img.is_grayscale() {
                eprintln!(
                    "warning: {} is not grayscale; using its luminance",
                    path.display()
                );
            }
            Ok(lightness_of(&img))
        }
    }
}

pub fn colorize(a: ColorizeArgs) -> Result<()> {
    let net = ToyNet::load(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    let lightness = read_lightness(&a.input)?;
    let cfg = RunConfig {
        decode_mode: a.decode,
        temperature: a.temperature,
        sigma_s: a.bilateral.sigma_s,
        sigma_r: a.bilateral.sigma_r,
        ..RunConfig::default()
    };
    let opts = cfg.infer_options(!a.no_jbu)?;
    let grid = ChromaGrid::default_grid();
    let lab = infer_color(&net, &lightness, &grid, &opts)?;
    write_rgb_png(&a.out, &lab_to_rgb(&lab)).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    match a.metric {
        Metric::Psnr => {
            let pred = read_png(&a.pred).with_context(|| format!("reading {}", a.pred.display()))?;
            let reference = read_png(&a.reference).with_context(|| format!("reading {}", a.reference.display()))?;
            println!("{}", psnr(&pred.into_rgb(), &reference.into_rgb())?);
        }
        Metric::Miou => {
            let pred = read_label_png(&a.pred).with_context(|| format!("reading {}", a.pred.display()))?;
            let reference = read_label_png(&a.reference).with_context(|| format!("reading {}", a.reference.display()))?;
            println!("{}", mean_iou(&pred, &reference, a.classes)?);
        }
    }
    Ok(())
}

fn is_png(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

fn read_chroma(path: &Path) -> Result<ChromaPlanes> {
    if is_png(path) {
        let img = read_png(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(split_channels(&rgb_to_lab(&img.into_rgb())).1);
    }
    let t = Tensor::load(path).with_context(|| format!("reading {}", path.display()))?;
    let [2, h, w] = t.dims[..] else {
        bail!("{}: chroma tensor must have dims [2, h, w], got {:?}", path.display(), t.dims);
    };
    let data = t.to_f64();
    let (a, b) = data.split_at(h * w);
    Ok(ChromaPlanes::new(w, h, a.to_vec(), b.to_vec())?)
}

/// Guide intensities on the 8-bit scale, plus the matching lightness.
fn read_guide(path: &Path) -> Result<(GuideImage, Plane)> {
    match read_png(path).with_context(|| format!("reading {}", path.display()))? {
        PngImage::Gray { width, height, data } => {
            let l = Plane::new(width, height, data.iter().map(|&g| gray_to_lightness(g)).collect())?;
            Ok((GuideImage::from_gray_u8(width, height, &data)?, l))
        }
        PngImage::Rgb(img) => {
            if !img.is_grayscale() {
                eprintln!("warning: guide {} is not grayscale; using its luminance", path.display());
            }
            let l = lightness_of(&img);
            Ok((GuideImage::from_lightness(&l), l))
        }
    }
}

fn bilateral_params(s: SigmaArgs) -> Result<BilateralParams> {
    Ok(BilateralParams::new(s.sigma_s, s.sigma_r)?)
}

pub fn bilateral(a: BilateralArgs, upsample: bool) -> Result<()> {
    let chroma = read_chroma(&a.chroma)?;
    let (guide, lightness) = read_guide(&a.guide)?;
    let params = bilateral_params(a.sigma)?;
    let out = if upsample {
        joint_bilateral_upsample(&chroma, &guide, &params)?
    } else {
        joint_bilateral_filter(&chroma, &guide, &params)?
    };
    if is_png(&a.out) {
        let lab = merge_channels(&lightness, &out)?;
        write_rgb_png(&a.out, &lab_to_rgb(&lab))?;
    } else {
        let mut data = out.a.clone();
        data.extend_from_slice(&out.b);
        Tensor::from_f64(vec![2, out.height, out.width], &data)?
            .save(&a.out)
            .with_context(|| format!("writing {}", a.out.display()))?;
    }
    Ok(())
}

pub fn grid(a: GridArgs) -> Result<()> {
    let grid = ChromaGrid::default_grid();
    fs::write(&a.out, grid.to_text()).with_context(|| format!("writing {}", a.out.display()))?;
    println!("q {}", grid.q());
    Ok(())
}
