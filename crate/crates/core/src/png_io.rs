//! 8-bit PNG input and output.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use crate::{Error, Result, RgbImage};

/// A decoded PNG, either single-channel or RGB.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PngImage {
    Gray {
        width: usize,
        height: usize,
        data: Vec<u8>,
    },
    Rgb(RgbImage),
}

impl PngImage {
    pub fn dimensions(&self) -> (usize, usize) {
        match self {
            PngImage::Gray { width, height, .. } => (*width, *height),
            PngImage::Rgb(img) => (img.width, img.height),
        }
    }

    pub fn into_rgb(self) -> RgbImage {
        match self {
            PngImage::Gray {
                width,
                height,
                data,
            } => RgbImage::from_gray(width, height, &data).expect("decoder sizes are consistent"),
            PngImage::Rgb(img) => img,
        }
    }
}

/// Decodes a PNG. Palette and low bit depths are expanded, 16-bit samples are
/// truncated to 8 bits and alpha is dropped.
pub fn decode_png(bytes: &[u8]) -> Result<PngImage> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(Transformations::EXPAND | Transformations::STRIP_16);
    let mut reader = decoder.read_info()?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("png image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf)?;
    buf.truncate(info.buffer_size());
    let (width, height) = (info.width as usize, info.height as usize);
    if info.bit_depth != BitDepth::Eight {
        return Err(Error::Format(format!("unsupported bit depth {:?}", info.bit_depth)));
    }
    let channels = match info.color_type {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        ColorType::Rgb => 3,
        ColorType::Rgba => 4,
        ColorType::Indexed => return Err(Error::Format("unexpanded palette image".into())),
    };
    let px = buf.chunks_exact(channels);
    Ok(match channels {
        1 | 2 => PngImage::Gray {
            width,
            height,
            data: px.map(|p| p[0]).collect(),
        },
        _ => PngImage::Rgb(RgbImage::new(width, height, px.flat_map(|p| [p[0], p[1], p[2]]).collect())?),
    })
}

pub fn read_png(path: impl AsRef<Path>) -> Result<PngImage> {
    decode_png(&fs::read(path)?)
}

fn encode(width: usize, height: usize, color: ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(BitDepth::Eight);
        let mut writer = enc.write_header()?;
        writer.write_image_data(data)?;
    }
    Ok(out)
}

pub fn encode_rgb_png(img: &RgbImage) -> Result<Vec<u8>> {
    encode(img.width, img.height, ColorType::Rgb, &img.data)
}

pub fn encode_gray_png(width: usize, height: usize, data: &[u8]) -> Result<Vec<u8>> {
    if data.len() != width * height {
        return Err(Error::shape("gray buffer does not match dimensions"));
    }
    encode(width, height, ColorType::Grayscale, data)
}

pub fn write_rgb_png(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    fs::write(path, encode_rgb_png(img)?)?;
    Ok(())
}

pub fn write_gray_png(path: impl AsRef<Path>, width: usize, height: usize, data: &[u8]) -> Result<()> {
    fs::write(path, encode_gray_png(width, height, data)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_and_gray_roundtrip() {
        let img = RgbImage::new(3, 2, (0..18).map(|v| v * 13).collect()).unwrap();
        let bytes = encode_rgb_png(&img).unwrap();
        assert_eq!(decode_png(&bytes).unwrap(), PngImage::Rgb(img.clone()));
        assert_eq!(encode_rgb_png(&img).unwrap(), bytes, "encoding is deterministic");

        let gray: Vec<u8> = (0..12).map(|v| v * 20).collect();
        let bytes = encode_gray_png(4, 3, &gray).unwrap();
        let back = decode_png(&bytes).unwrap();
        assert_eq!(back.dimensions(), (4, 3));
        assert_eq!(back.into_rgb(), RgbImage::from_gray(4, 3, &gray).unwrap());
    }

    #[test]
    fn garbage_is_an_error() {
        assert!(decode_png(b"not a png").is_err());
    }
}
