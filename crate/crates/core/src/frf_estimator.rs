//! FRF estimation from burst pairs.
//!
//! For every segment: find the integer lag of the reflected burst by
//! cross-correlation, advance the reflected window by that lag, fit a plain
//! sinusoid to the transmitted burst and a sinusoid plus constant plus linear
//! trend to the late part of the aligned reflected burst, then restore the
//! removed delay in the phase.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SfwrError};
use crate::phase::wrap;
use crate::waveform::{segment, BurstPair, SfwrPlan};

/// Default fit condition-number limit. The regressors are O(1) on the
/// window, so this only trips on genuinely degenerate windows.
pub const DEFAULT_CONDITION_LIMIT: f64 = 1e6;

/// Result of a least-squares sine fit, model c + m·t + d·sin(ωt + φ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineFitResult {
    pub amplitude: f64,
    /// In (−π, π].
    pub phase: f64,
    /// c (V), referred to local time t = 0.
    pub offset: f64,
    /// m (V/s).
    pub trend_slope: f64,
    pub residual_rms: f64,
    /// Ratio of extreme singular values of the design matrix.
    pub condition: f64,
}

/// Sample range [ceil(lo·n), floor(hi·n)) of an n-sample burst.
pub fn fraction_window(burst_samples: usize, lo: f64, hi: f64) -> Range<usize> {
    let n = burst_samples as f64;
    let start = (lo * n - 1e-9).ceil().max(0.0) as usize;
    let end = ((hi * n + 1e-9).floor() as usize).min(burst_samples);
    start..end
}

/// OLS fit of x ≈ A·sin(ωt) + B·cos(ωt) over `window`, with t = n/fs.
pub fn fit_plain_sine(x: &[f64], omega: f64, fs: f64, window: Range<usize>) -> Result<SineFitResult> {
    fit(x, omega, fs, window, false, DEFAULT_CONDITION_LIMIT)
}

/// OLS fit of z ≈ c + m·t + A·sin(ωt) + B·cos(ωt) over `window`.
pub fn fit_modified_sine(z: &[f64], omega: f64, fs: f64, window: Range<usize>) -> Result<SineFitResult> {
    fit(z, omega, fs, window, true, DEFAULT_CONDITION_LIMIT)
}

fn fit(
    data: &[f64],
    omega: f64,
    fs: f64,
    window: Range<usize>,
    trend: bool,
    condition_limit: f64,
) -> Result<SineFitResult> {
    let cols = if trend { 4 } else { 2 };
    if window.end > data.len() || window.len() < cols {
        return Err(SfwrError::InvalidPlan(format!(
            "fit window {:?} invalid for {} samples",
            window,
            data.len()
        )));
    }
    let v = &data[window.clone()];
    if v.iter().all(|&s| s == 0.0) {
        return Err(SfwrError::ZeroSignal);
    }
    let times: Vec<f64> = window.clone().map(|n| n as f64 / fs).collect();
    let t_mid = 0.5 * (times[0] + times[times.len() - 1]);
    let span = times[times.len() - 1] - times[0];
    let rows = v.len();
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    for (r, &t) in times.iter().enumerate() {
        let mut c = 0;
        if trend {
            a[(r, 0)] = 1.0;
            a[(r, 1)] = (t - t_mid) / span;
            c = 2;
        }
        a[(r, c)] = (omega * t).sin();
        a[(r, c + 1)] = (omega * t).cos();
    }
    let b = DVector::from_column_slice(v);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-13) {
        return Err(SfwrError::RankDeficient { omega });
    }
    let condition = smax / smin;
    if condition > condition_limit {
        return Err(SfwrError::IllConditioned { omega, condition });
    }
    let coef = svd.solve(&b, 0.0).map_err(|_| SfwrError::RankDeficient { omega })?;
    let resid = &b - &a * &coef;
    let residual_rms = (resid.norm_squared() / rows as f64).sqrt();
    let (offset, trend_slope, sa, cb) = if trend {
        let m = coef[1] / span;
        (coef[0] - m * t_mid, m, coef[2], coef[3])
    } else {
        (0.0, 0.0, coef[0], coef[1])
    };
    Ok(SineFitResult {
        amplitude: sa.hypot(cb),
        phase: cb.atan2(sa),
        offset,
        trend_slope,
        residual_rms,
        condition,
    })
}

/// Integer lag of the reflected burst.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawDelay {
    /// Lag m within the reflected window (samples).
    pub lag: usize,
    /// Physical delay from the transmitted burst start, (m + τ·fs)·T_s.
    pub delay_s: f64,
    pub peak: f64,
}

/// How to decide that a reflected window holds no echo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DetectionFloor {
    /// Rounding-level floor for noiseless data.
    Noiseless,
    /// Additive noise with this standard deviation (V).
    Noise(f64),
}

/// Lag maximising r[m] = Σ y[n+m]·x[n] over m ≥ 0.
pub fn raw_delay(pair: &BurstPair, floor: DetectionFloor) -> Result<RawDelay> {
    let x = &pair.x;
    let y = &pair.y;
    let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if x_norm == 0.0 {
        return Err(SfwrError::ZeroSignal);
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    let mut peak_abs = 0.0f64;
    for m in 0..y.len() {
        let r: f64 = y[m..].iter().zip(x).map(|(a, b)| a * b).sum();
        if r > best.1 {
            best = (m, r);
        }
        peak_abs = peak_abs.max(r.abs());
    }
    let threshold = match floor {
        DetectionFloor::Noiseless => {
            let x_max = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            10.0 * f64::EPSILON * x_max * x_norm * (y.len() as f64).sqrt()
        }
        DetectionFloor::Noise(sigma) => 5.0 * sigma * x_norm,
    };
    if !(peak_abs >= threshold) || !(best.1 > 0.0) {
        return Err(SfwrError::NoReflection {
            index: pair.index,
            peak: peak_abs,
            floor: threshold,
        });
    }
    Ok(RawDelay {
        lag: best.0,
        delay_s: (best.0 + x.len()) as f64 / pair.sample_rate_hz,
        peak: best.1,
    })
}

/// Estimator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Fit window for the aligned reflected burst, as fractions of τ.
    pub window: (f64, f64),
    pub condition_limit: f64,
    pub floor: DetectionFloor,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            window: (0.5, 0.95),
            condition_limit: DEFAULT_CONDITION_LIMIT,
            floor: DetectionFloor::Noiseless,
        }
    }
}

/// Estimated FRF at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrfRecord {
    pub index: usize,
    pub omega: f64,
    pub h_mag: f64,
    /// Unwrapped phase of Ĥ (rad).
    pub phase: f64,
    /// −phase/ω (s).
    pub tau_d: f64,
    /// Physical raw delay in samples, m + τ·fs.
    pub raw_lag_samples: usize,
    pub transmitted: SineFitResult,
    pub reflected: SineFitResult,
}

impl FrfRecord {
    fn set_phase(&mut self, phase: f64) {
        self.phase = phase;
        self.tau_d = -phase / self.omega;
    }
}

/// Runs the per-segment estimation for one burst pair.
pub fn estimate_frf(pair: &BurstPair, plan: &SfwrPlan, cfg: &EstimatorConfig) -> Result<FrfRecord> {
    let fs = pair.sample_rate_hz;
    let omega = pair.omega;
    let raw = raw_delay(pair, cfg.floor)?;
    let z: Vec<f64> = (0..plan.burst_samples)
        .map(|n| pair.y.get(n + raw.lag).copied().unwrap_or(0.0))
        .collect();
    let transmitted = fit(&pair.x, omega, fs, 0..pair.x.len(), false, cfg.condition_limit)?;
    let window = fraction_window(plan.burst_samples, cfg.window.0, cfg.window.1);
    let reflected = fit(&z, omega, fs, window, true, cfg.condition_limit)?;
    let raw_lag_samples = raw.lag + pair.x.len();
    let phase = wrap(reflected.phase - transmitted.phase) - omega * raw.delay_s;
    let mut rec = FrfRecord {
        index: pair.index,
        omega,
        h_mag: reflected.amplitude / transmitted.amplitude,
        phase: 0.0,
        tau_d: 0.0,
        raw_lag_samples,
        transmitted,
        reflected,
    };
    rec.set_phase(phase);
    Ok(rec)
}

/// Frequency-ordered FRF estimate over a whole plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrfEstimate {
    pub sample_rate_hz: f64,
    pub records: Vec<FrfRecord>,
}

impl FrfEstimate {
    pub fn omegas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.omega).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Re-unwraps the phase along the grid, starting from the lowest
    /// frequency: each phase is moved by whole turns to the value closest to
    /// φ_{i−1}·ω_i/ω_{i−1}. The stored delays are updated to match.
    pub fn enforce_phase_continuity(&mut self) {
        for i in 1..self.records.len() {
            let prev = self.records[i - 1];
            let cur = &mut self.records[i];
            let predicted = prev.phase * cur.omega / prev.omega;
            let turns = ((predicted - cur.phase) / std::f64::consts::TAU).round();
            if turns != 0.0 {
                let phase = cur.phase + turns * std::f64::consts::TAU;
                cur.set_phase(phase);
            }
        }
    }
}

/// Estimates every burst pair in parallel, keeping frequency order.
pub fn estimate_pairs(pairs: &[BurstPair], plan: &SfwrPlan, cfg: &EstimatorConfig) -> Result<FrfEstimate> {
    let records = pairs
        .par_iter()
        .map(|p| estimate_frf(p, plan, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut est = FrfEstimate {
        sample_rate_hz: plan.sample_rate_hz,
        records,
    };
    est.enforce_phase_continuity();
    Ok(est)
}

/// Segments a full acquisition (transmitted plus reflected, as seen at the
/// cable input) and estimates the FRF.
pub fn estimate_acquisition(acquisition: &[f64], plan: &SfwrPlan, cfg: &EstimatorConfig) -> Result<FrfEstimate> {
    let pairs = segment(acquisition, plan)?;
    estimate_pairs(&pairs, plan, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(n: usize, w: f64, fs: f64, d: f64, phi: f64) -> Vec<f64> {
        (0..n).map(|k| d * (w * k as f64 / fs + phi).sin()).collect()
    }

    #[test]
    fn plain_fit_exact_model() {
        let w = 2.0 * PI * 1e7;
        let x = sine(200, w, 1e9, 1.0, 0.3);
        let f = fit_plain_sine(&x, w, 1e9, 0..200).unwrap();
        assert!((f.amplitude - 1.0).abs() < 1e-9);
        assert!((f.phase - 0.3).abs() < 1e-9);
        assert!(f.residual_rms < 1e-12);
    }

    #[test]
    fn plain_fit_rejects_zeros() {
        let w = 2.0 * PI * 1e7;
        assert!(matches!(
            fit_plain_sine(&[0.0; 200], w, 1e9, 0..200),
            Err(SfwrError::ZeroSignal)
        ));
    }

    #[test]
    fn plain_fit_ignores_offset_over_whole_periods() {
        let w = 2.0 * PI * 1e7;
        let x: Vec<f64> = sine(200, w, 1e9, 1.0, 0.3).iter().map(|v| v + 0.1).collect();
        let f = fit_plain_sine(&x, w, 1e9, 0..200).unwrap();
        assert!((f.amplitude - 1.0).abs() < 1e-3);
    }

    #[test]
    fn nyquist_frequency_is_rank_deficient() {
        let x = vec![1.0; 200];
        assert!(matches!(
            fit_plain_sine(&x, PI * 1e9, 1e9, 0..200),
            Err(SfwrError::RankDeficient { .. })
        ));
    }

    #[test]
    fn tiny_window_is_ill_conditioned() {
        let w = 2.0 * PI * 1e6;
        let z = sine(200, w, 1e9, 1.0, 0.0);
        assert!(matches!(
            fit_modified_sine(&z, w, 1e9, 100..110),
            Err(SfwrError::IllConditioned { .. })
        ));
    }

    #[test]
    fn modified_fit_absorbs_ramp() {
        let w = 2.0 * PI * 3e7;
        let fs = 1e9;
        let z: Vec<f64> = sine(200, w, fs, 0.7, -1.1)
            .iter()
            .enumerate()
            .map(|(n, v)| v + 0.5e6 * n as f64 / fs + 0.02)
            .collect();
        let f = fit_modified_sine(&z, w, fs, fraction_window(200, 0.5, 0.95)).unwrap();
        assert!((f.amplitude - 0.7).abs() < 1e-9);
        assert!((f.phase + 1.1).abs() < 1e-9);
        assert!((f.trend_slope - 0.5e6).abs() < 1e-3);
        assert!((f.offset - 0.02).abs() < 1e-9);
    }

    #[test]
    fn window_rounding() {
        assert_eq!(fraction_window(200, 0.5, 0.95), 100..190);
        assert_eq!(fraction_window(201, 0.5, 0.95), 101..190);
    }

    fn pair_from(x: Vec<f64>, y: Vec<f64>, w: f64) -> BurstPair {
        BurstPair {
            index: 0,
            omega: w,
            x,
            y,
            sample_rate_hz: 1e9,
        }
    }

    #[test]
    fn raw_delay_of_shifted_copy() {
        let w = 2.0 * PI * 1e7;
        let x = sine(200, w, 1e9, 1.0, 0.0);
        let mut y = vec![0.0; 1800];
        y[40..240].copy_from_slice(&x);
        let d = raw_delay(&pair_from(x, y, w), DetectionFloor::Noiseless).unwrap();
        assert_eq!(d.lag, 40);
        assert!((d.delay_s - 240e-9).abs() < 1e-18);
    }

    #[test]
    fn raw_delay_of_inverted_copy_within_half_period() {
        let w = 2.0 * PI * 1e7;
        let x = sine(200, w, 1e9, 1.0, 0.0);
        let mut y = vec![0.0; 1800];
        for (k, v) in x.iter().enumerate() {
            y[40 + k] = -v;
        }
        let d = raw_delay(&pair_from(x, y, w), DetectionFloor::Noiseless).unwrap();
        // half a carrier period is 50 samples
        assert!((d.lag as i64 - 40).abs() <= 50, "lag {}", d.lag);
    }

    #[test]
    fn silent_reflection_detected() {
        let w = 2.0 * PI * 1e7;
        let x = sine(200, w, 1e9, 1.0, 0.0);
        let y = vec![1e-18; 1800];
        assert!(matches!(
            raw_delay(&pair_from(x.clone(), y, w), DetectionFloor::Noiseless),
            Err(SfwrError::NoReflection { .. })
        ));
        let mut y = vec![0.0; 1800];
        y[10] = 1e-3;
        assert!(raw_delay(&pair_from(x, y, w), DetectionFloor::Noise(1.0)).is_err());
    }

    #[test]
    fn continuity_pass_removes_turns() {
        let rec = |i: usize, w: f64, ph: f64| FrfRecord {
            index: i,
            omega: w,
            h_mag: 1.0,
            phase: ph,
            tau_d: -ph / w,
            raw_lag_samples: 0,
            transmitted: fit_plain_sine(&sine(200, w, 1e9, 1.0, 0.0), w, 1e9, 0..200).unwrap(),
            reflected: fit_plain_sine(&sine(200, w, 1e9, 1.0, 0.0), w, 1e9, 0..200).unwrap(),
        };
        let ws: Vec<f64> = (0..10).map(|i| 2.0 * PI * (1e7 + 5e5 * i as f64)).collect();
        let truth: Vec<f64> = ws.iter().map(|w| -w * 1e-6).collect();
        let mut est = FrfEstimate {
            sample_rate_hz: 1e9,
            records: ws
                .iter()
                .zip(&truth)
                .enumerate()
                .map(|(i, (&w, &p))| rec(i, w, p + if i % 3 == 1 { 2.0 * PI } else { 0.0 }))
                .collect(),
        };
        est.enforce_phase_continuity();
        for (r, t) in est.records.iter().zip(&truth) {
            assert!((r.phase - t).abs() < 1e-9);
            assert_eq!(r.tau_d, -r.phase / r.omega);
        }
    }
}
