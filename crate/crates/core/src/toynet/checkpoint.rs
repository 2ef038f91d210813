//! Checkpoint container: a text header describing the architecture followed
//! by one named tensor record per parameter.
//!
//! ```text
//! semcolor-toynet 1
//! input_size = 32
//! ...
//! params = 26
//! <name>\n<tensor record>
//! ...
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{ToyNet, ToyNetConfig};
use crate::tensorfile::Tensor;
use crate::{Error, Result};

const HEADER: &str = "semcolor-toynet 1";

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

impl ToyNetConfig {
    fn write_header(&self, w: &mut impl Write, n_params: usize) -> Result<()> {
        let channels: Vec<String> = self.channels.iter().map(|c| c.to_string()).collect();
        writeln!(w, "{HEADER}")?;
        writeln!(w, "input_size = {}", self.input_size)?;
        writeln!(w, "channels = {}", channels.join(","))?;
        writeln!(w, "seg_channels = {}", self.seg_channels)?;
        writeln!(w, "color_channels = {}", self.color_channels)?;
        writeln!(w, "color_head_stride = {}", self.color_head_stride)?;
        writeln!(w, "deconv_kernel_factor = {}", self.deconv_kernel_factor)?;
        writeln!(w, "n_classes = {}", self.n_classes)?;
        writeln!(w, "q = {}", self.q)?;
        writeln!(w, "seed = {}", self.seed)?;
        writeln!(w, "params = {n_params}")?;
        Ok(())
    }
}

fn read_line(r: &mut impl BufRead) -> Result<String> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(fmt_err("unexpected end of checkpoint"));
    }
    Ok(line.trim_end_matches('\n').to_string())
}

fn read_field<T: std::str::FromStr>(r: &mut impl BufRead, key: &str) -> Result<T> {
    let line = read_line(r)?;
    let value = line
        .split_once('=')
        .filter(|(k, _)| k.trim() == key)
        .map(|(_, v)| v.trim())
        .ok_or_else(|| fmt_err(format!("expected {key} = ..., got {line:?}")))?;
    value
        .parse()
        .map_err(|_| fmt_err(format!("bad value for {key}: {value:?}")))
}

impl ToyNet {
    pub fn write_checkpoint(&self, mut w: impl Write) -> Result<()> {
        let params = self.named_params();
        self.config.write_header(&mut w, params.len())?;
        for (name, dims, values) in params {
            writeln!(w, "{name}")?;
            Tensor::from_f64(dims, values)?.write_to(&mut w)?;
        }
        Ok(())
    }

    /// Parameters are stored as f32, so a reload rounds them.
    pub fn read_checkpoint(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        if read_line(&mut r)? != HEADER {
            return Err(fmt_err("not a toynet checkpoint"));
        }
        let input_size = read_field(&mut r, "input_size")?;
        let channels_text: String = read_field(&mut r, "channels")?;
        let channels_vec = channels_text
            .split(',')
            .map(|c| c.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| fmt_err(format!("bad channel list {channels_text:?}")))?;
        let channels = channels_vec
            .try_into()
            .map_err(|_| fmt_err("channel list must have seven entries"))?;
        let config = ToyNetConfig {
            input_size,
            channels,
            seg_channels: read_field(&mut r, "seg_channels")?,
            color_channels: read_field(&mut r, "color_channels")?,
            color_head_stride: read_field(&mut r, "color_head_stride")?,
            deconv_kernel_factor: read_field(&mut r, "deconv_kernel_factor")?,
            n_classes: read_field(&mut r, "n_classes")?,
            q: read_field(&mut r, "q")?,
            seed: read_field(&mut r, "seed")?,
        };
        let n_params: usize = read_field(&mut r, "params")?;
        let mut net = ToyNet::build(config)?;
        let expected: Vec<(String, Vec<usize>)> = net
            .named_params()
            .into_iter()
            .map(|(n, d, _)| (n, d))
            .collect();
        if n_params != expected.len() {
            return Err(fmt_err(format!(
                "checkpoint has {n_params} tensors, architecture needs {}",
                expected.len()
            )));
        }
        for (i, (name, dims)) in expected.into_iter().enumerate() {
            let got = read_line(&mut r)?;
            if got != name {
                return Err(fmt_err(format!("expected tensor {name}, found {got:?}")));
            }
            let t = Tensor::read_from(&mut r)?;
            if t.dims != dims {
                return Err(fmt_err(format!("{name} has dims {:?}, expected {dims:?}", t.dims)));
            }
            let layer = &mut net.layers[i / 2];
            let dst = if i % 2 == 0 { &mut layer.weight } else { &mut layer.bias };
            *dst = t.to_f64();
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(fmt_err("trailing bytes after the last tensor"));
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_checkpoint(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_checkpoint(std::fs::File::open(path)?)
    }
}
