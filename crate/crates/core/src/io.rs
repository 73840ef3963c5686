//! File formats: signal CSV and raw binary, FRF and propagation tables,
//! TOML configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SfwrError};
use crate::fault_analysis::{LocationPoint, PropagationEntry, PropagationTable};
use crate::frf_estimator::FrfEstimate;
use crate::line_model::FrfSamples;

const TWO_PI: f64 = std::f64::consts::TAU;

/// A uniformly sampled signal starting at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub sample_rate_hz: f64,
    pub samples: Vec<f64>,
}

/// `t_s,v` CSV with shortest round-trip decimal formatting.
pub fn signal_csv(samples: &[f64], sample_rate_hz: f64) -> String {
    let mut out = String::with_capacity(samples.len() * 28 + 8);
    out.push_str("t_s,v\n");
    for (n, v) in samples.iter().enumerate() {
        out.push_str(&format!("{},{}\n", n as f64 / sample_rate_hz, v));
    }
    out
}

pub fn parse_signal_csv(text: &str) -> Result<Signal> {
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("t_s,v") => {}
        other => return Err(SfwrError::Format(format!("expected header t_s,v, found {other:?}"))),
    }
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let (Some(t), Some(v), None) = (it.next(), it.next(), it.next()) else {
            return Err(SfwrError::Format(format!("line {}: expected two fields", k + 2)));
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| SfwrError::Format(format!("line {}: {e}", k + 2)))
        };
        times.push(parse(t)?);
        samples.push(parse(v)?);
    }
    if samples.len() < 2 {
        return Err(SfwrError::Format("signal needs at least two samples".into()));
    }
    let span = times[times.len() - 1] - times[0];
    if !(span > 0.0) {
        return Err(SfwrError::Format("time column must increase".into()));
    }
    let mut fs = (times.len() - 1) as f64 / span;
    if (fs - fs.round()).abs() < 1e-6 * fs {
        fs = fs.round();
    }
    Ok(Signal {
        sample_rate_hz: fs,
        samples,
    })
}

pub fn write_signal_csv(path: &Path, samples: &[f64], sample_rate_hz: f64) -> Result<()> {
    fs::write(path, signal_csv(samples, sample_rate_hz))?;
    Ok(())
}

pub fn read_signal_csv(path: &Path) -> Result<Signal> {
    parse_signal_csv(&fs::read_to_string(path)?)
}

/// Descriptor written next to a raw binary signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySidecar {
    pub format: String,
    pub sample_rate_hz: f64,
    pub n_samples: usize,
    pub t0_s: f64,
}

/// Path of the sidecar for a binary signal file (`name.bin` → `name.bin.json`).
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".json");
    PathBuf::from(s)
}

/// Raw little-endian f64 samples plus a JSON sidecar.
pub fn write_signal_bin(path: &Path, samples: &[f64], sample_rate_hz: f64) -> Result<()> {
    let bytes: Vec<u8> = samples.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    let side = BinarySidecar {
        format: "f64le".into(),
        sample_rate_hz,
        n_samples: samples.len(),
        t0_s: 0.0,
    };
    let json = serde_json::to_string_pretty(&side).map_err(|e| SfwrError::Format(e.to_string()))?;
    fs::write(sidecar_path(path), json)?;
    Ok(())
}

pub fn read_signal_bin(path: &Path) -> Result<Signal> {
    let side: BinarySidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)
        .map_err(|e| SfwrError::Format(format!("sidecar: {e}")))?;
    if side.format != "f64le" {
        return Err(SfwrError::Format(format!("unsupported sample format {}", side.format)));
    }
    let bytes = fs::read(path)?;
    if bytes.len() != side.n_samples * 8 {
        return Err(SfwrError::Format(format!(
            "binary holds {} bytes, sidecar declares {} samples",
            bytes.len(),
            side.n_samples
        )));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Signal {
        sample_rate_hz: side.sample_rate_hz,
        samples,
    })
}

/// Reads a signal by extension: `.bin` as raw binary, anything else as CSV.
pub fn read_signal(path: &Path) -> Result<Signal> {
    if path.extension().is_some_and(|e| e == "bin") {
        read_signal_bin(path)
    } else {
        read_signal_csv(path)
    }
}

pub fn frf_samples_csv(frf: &FrfSamples) -> String {
    let mut out = String::from("f_hz,h_mag,h_phase_rad_unwrapped,alpha_np_per_m,beta_rad_per_m\n");
    for s in &frf.samples {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.omega / TWO_PI,
            s.magnitude,
            s.phase,
            s.alpha,
            s.beta
        ));
    }
    out
}

pub fn frf_estimate_csv(frf: &FrfEstimate) -> String {
    let mut out = String::from("f_hz,h_mag,h_phase_rad_unwrapped,tau_d_s,raw_lag_samples\n");
    for r in &frf.records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.omega / TWO_PI,
            r.h_mag,
            r.phase,
            r.tau_d,
            r.raw_lag_samples
        ));
    }
    out
}

pub fn propagation_csv(table: &PropagationTable) -> String {
    let mut out = String::from("f_hz,alpha_np_per_m,beta_rad_per_m\n");
    for e in &table.entries {
        out.push_str(&format!("{},{},{}\n", e.omega / TWO_PI, e.alpha, e.beta));
    }
    out
}

/// Parses a propagation table. Frequencies are converted to rad/s, so grids
/// must later be matched with a relative tolerance.
pub fn parse_propagation_csv(text: &str) -> Result<PropagationTable> {
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("f_hz,alpha_np_per_m,beta_rad_per_m") => {}
        other => return Err(SfwrError::Format(format!("unexpected propagation header {other:?}"))),
    }
    let mut entries = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| SfwrError::Format(format!("line {}: {e}", k + 2)))?;
        if vals.len() != 3 {
            return Err(SfwrError::Format(format!("line {}: expected 3 fields", k + 2)));
        }
        entries.push(PropagationEntry {
            omega: TWO_PI * vals[0],
            alpha: vals[1],
            beta: vals[2],
        });
    }
    Ok(PropagationTable {
        reference_length: None,
        entries,
    })
}

pub fn location_curve_csv(curve: &[LocationPoint]) -> String {
    let mut out = String::from("f_hz,position_m,gamma_mag\n");
    for p in curve {
        out.push_str(&format!("{},{},{}\n", p.omega / TWO_PI, p.position_m, p.gamma_mag));
    }
    out
}

pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| SfwrError::Format(format!("{}: {e}", path.display())))
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string_pretty(value).map_err(|e| SfwrError::Format(e.to_string()))
}
