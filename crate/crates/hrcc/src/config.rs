//! Run configuration files.
//!
//! A config is a JSON object with `code`, `channel` and `decoder` sections
//! plus optional sweep, stop-rule, list-cap and output settings. Unknown
//! fields are rejected and every error names the offending field path.

use std::fs;
use std::path::Path;

use hrcc_core::algebra::{parse_poly, BinaryPolynomial, Radix};
use hrcc_core::encoder::{CodeConfig, Mode, ParityCheck};
use serde::{Deserialize, Serialize};

use crate::sim::{ChannelConfig, StopRule, Variant};
use crate::Error;

/// Termination mode as written in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Zt,
    Tb,
}

impl From<ModeName> for Mode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Zt => Mode::ZeroTerminated,
            ModeName::Tb => Mode::TailBiting,
        }
    }
}

/// The `code` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSection {
    pub n: usize,
    pub v: usize,
    /// Octal parity polynomials, highest rail first, e.g. "33,25,37,31".
    #[serde(rename = "H")]
    pub h: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub m: usize,
    /// Hex CRC polynomial, e.g. "0x9".
    pub crc: String,
    pub mode: ModeName,
}

/// Simulation output destinations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// CSV path; standard output when absent.
    #[serde(default)]
    pub csv: Option<String>,
    /// JSON-lines per-trial log path.
    #[serde(default)]
    pub trial_log: Option<String>,
}

/// A complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub code: CodeSection,
    pub channel: ChannelConfig,
    pub decoder: Variant,
    /// SNR sweep in dB; defaults to the single channel SNR.
    #[serde(default)]
    pub snr_points: Vec<f64>,
    #[serde(default)]
    pub stop: StopRule,
    /// Maximum list rank; unbounded when absent.
    #[serde(default)]
    pub list_cap: Option<u64>,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    /// Parses and validates JSON text.
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { String::new() } else { path };
            Error::config(path, e.inner().to_string())
        })?;
        if cfg.snr_points.is_empty() {
            cfg.snr_points.push(cfg.channel.snr_db);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical JSON form, with defaults filled in.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every cross-field invariant.
    pub fn validate(&self) -> Result<(), Error> {
        self.code_config()?;
        let zt = self.code.mode == ModeName::Zt;
        if zt != (self.decoder == Variant::Zt) {
            return Err(Error::config(
                "decoder",
                format!(
                    "variant {} does not match mode {}",
                    self.decoder.name(),
                    if zt { "zt" } else { "tb" }
                ),
            ));
        }
        for (i, s) in self.snr_points.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::config(format!("snr_points[{i}]"), "must be finite"));
            }
        }
        if !self.channel.snr_db.is_finite() {
            return Err(Error::config("channel.snr_db", "must be finite"));
        }
        if self.stop.min_errors == 0 {
            return Err(Error::config("stop.min_errors", "must be at least 1"));
        }
        if self.stop.max_trials == 0 {
            return Err(Error::config("stop.max_trials", "must be at least 1"));
        }
        if self.list_cap == Some(0) {
            return Err(Error::config("list_cap", "must be at least 1"));
        }
        Ok(())
    }

    /// The validated code configuration.
    pub fn code_config(&self) -> Result<CodeConfig, Error> {
        code_config(&self.code)
    }
}

/// Parses the parity-check matrix and checks it against `n` and `v`.
pub fn parity_check(h: &str, n: usize, v: usize, field: &str) -> Result<ParityCheck, Error> {
    let pc = ParityCheck::from_octal(h).map_err(|e| Error::config(field, e.to_string()))?;
    if pc.n() != n {
        return Err(Error::config(field, format!("has {} polynomials but n = {n}", pc.n())));
    }
    if pc.v() != v {
        return Err(Error::config(
            field,
            format!("has maximum degree {} but v = {v}", pc.v()),
        ));
    }
    Ok(pc)
}

/// Parses a hex CRC and checks its degree.
pub fn crc_poly(text: &str, m: usize, field: &str) -> Result<BinaryPolynomial, Error> {
    let p = parse_poly(text, Radix::Hex).map_err(|e| Error::config(field, e.to_string()))?;
    if p.degree() != Some(m) {
        return Err(Error::config(
            field,
            format!("{} has degree {:?}, expected m = {m}", p.to_hex(), p.degree()),
        ));
    }
    Ok(p)
}

/// Builds a [`CodeConfig`] from a `code` section.
pub fn code_config(code: &CodeSection) -> Result<CodeConfig, Error> {
    if code.n < 2 {
        return Err(Error::config("code.n", "must be at least 2"));
    }
    let pc = parity_check(&code.h, code.n, code.v, "code.H")?;
    let crc = crc_poly(&code.crc, code.m, "code.crc")?;
    if code.k == 0 {
        return Err(Error::config("code.K", "must be positive"));
    }
    if !(code.k + code.m).is_multiple_of(code.n - 1) {
        return Err(Error::config(
            "code.K",
            format!(
                "K + m = {} must be divisible by n - 1 = {} so that N = (K + m) n/(n-1) (+ termination) is an integer",
                code.k + code.m,
                code.n - 1
            ),
        ));
    }
    CodeConfig::new(pc, code.k, &crc, code.mode.into()).map_err(|e| Error::config("code", e.to_string()))
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<RunConfig, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    RunConfig::from_json(&text)
}
