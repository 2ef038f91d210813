//! `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys and
//! repeated keys are errors.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::bilateral::{BilateralParams, DEFAULT_SIGMA_R, DEFAULT_SIGMA_S};
use crate::chroma::{DecodeMode, EncodeParams, DEFAULT_TEMPERATURE};
use crate::loss::LossWeights;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub input_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub lambda_c: f64,
    pub lambda_s: f64,
    pub sigma_s: f64,
    pub sigma_r: f64,
    pub decode_mode: DecodeMode,
    pub temperature: f64,
    pub k_neighbors: usize,
    pub encode_sigma: f64,
    pub mix_lambda: f64,
}

pub const DEFAULT_EPOCHS: usize = 100;
pub const DEFAULT_LR: f64 = 0.0007;

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            input_size: 32,
            epochs: DEFAULT_EPOCHS,
            lr: DEFAULT_LR,
            lambda_c: 1.0,
            lambda_s: 100.0,
            sigma_s: DEFAULT_SIGMA_S,
            sigma_r: DEFAULT_SIGMA_R,
            decode_mode: DecodeMode::Annealed,
            temperature: DEFAULT_TEMPERATURE,
            k_neighbors: 5,
            encode_sigma: 5.0,
            mix_lambda: 0.5,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Format(format!("bad value {value:?} for {key}")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Format(format!("line {}: expected key = value", lineno + 1)));
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Format(format!("line {}: duplicate key {key}", lineno + 1)));
            }
            match key {
                "seed" => cfg.seed = parse(key, value)?,
                "input_size" => cfg.input_size = parse(key, value)?,
                "epochs" => cfg.epochs = parse(key, value)?,
                "lr" => cfg.lr = parse(key, value)?,
                "lambda_c" => cfg.lambda_c = parse(key, value)?,
                "lambda_s" => cfg.lambda_s = parse(key, value)?,
                "sigma_s" => cfg.sigma_s = parse(key, value)?,
                "sigma_r" => cfg.sigma_r = parse(key, value)?,
                "decode_mode" => cfg.decode_mode = value.parse()?,
                "temperature" => cfg.temperature = parse(key, value)?,
                "k_neighbors" => cfg.k_neighbors = parse(key, value)?,
                "encode_sigma" => cfg.encode_sigma = parse(key, value)?,
                "mix_lambda" => cfg.mix_lambda = parse(key, value)?,
                other => {
                    return Err(Error::Format(format!("line {}: unknown key {other}", lineno + 1)));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.input_size % 8 != 0 {
            return Err(Error::invalid(format!(
                "input_size must be a positive multiple of 8, got {}",
                self.input_size
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.mix_lambda >= 0.0 && self.mix_lambda <= 1.0) {
            return Err(Error::invalid(format!("mix_lambda must be in [0, 1], got {}", self.mix_lambda)));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        self.loss_weights()?;
        self.encode_params()?;
        self.bilateral_params()?;
        Ok(())
    }

    pub fn loss_weights(&self) -> Result<LossWeights> {
        LossWeights::new(self.lambda_c, self.lambda_s)
    }

    pub fn encode_params(&self) -> Result<EncodeParams> {
        EncodeParams::new(self.k_neighbors, self.encode_sigma)
    }

    pub fn bilateral_params(&self) -> Result<BilateralParams> {
        BilateralParams::new(self.sigma_s, self.sigma_r)
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "input_size = {}", self.input_size)?;
        writeln!(f, "epochs = {}", self.epochs)?;
        writeln!(f, "lr = {}", self.lr)?;
        writeln!(f, "lambda_c = {}", self.lambda_c)?;
        writeln!(f, "lambda_s = {}", self.lambda_s)?;
        writeln!(f, "sigma_s = {}", self.sigma_s)?;
        writeln!(f, "sigma_r = {}", self.sigma_r)?;
        writeln!(f, "decode_mode = {}", self.decode_mode)?;
        writeln!(f, "temperature = {}", self.temperature)?;
        writeln!(f, "k_neighbors = {}", self.k_neighbors)?;
        writeln!(f, "encode_sigma = {}", self.encode_sigma)?;
        writeln!(f, "mix_lambda = {}", self.mix_lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_roundtrip() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.lambda_s, 100.0);
        assert_eq!(cfg.decode_mode, DecodeMode::Annealed);
        assert_eq!(RunConfig::parse(&cfg.to_string()).unwrap(), cfg);
        assert_eq!(RunConfig::parse("").unwrap(), cfg);
    }

    #[test]
    fn parses_overrides_and_comments() {
        let cfg = RunConfig::parse("# ablation arm\nlambda_s = 0\n\n seed=7 \ndecode_mode = mode\n").unwrap();
        assert_eq!(cfg.lambda_s, 0.0);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.decode_mode, DecodeMode::Mode);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "colour = 3",
            "seed = x",
            "seed 3",
            "seed = 1\nseed = 2",
            "input_size = 12",
            "lambda_c = -1",
            "k_neighbors = 0",
            "mix_lambda = 2",
            "decode_mode = median",
            "sigma_r = 0",
        ] {
            assert!(RunConfig::parse(text).is_err(), "{text}");
        }
    }
}
