//! Reflected-signal simulation through a known frequency response, plus the
//! analytic burst response of a first-order low-pass used as a fitting oracle.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SfwrError};
use crate::line_model::{frf_point, Line, Reflector};

/// A linear time-invariant channel described by its frequency response.
pub trait FrequencyResponse: Sync {
    /// Complex gain at `omega` (rad/s). A non-finite value at ω = 0 is
    /// replaced during simulation by the real part of the response just
    /// above DC, or of the first non-zero bin if that is not finite either.
    fn response(&self, omega: f64) -> Result<Complex64>;

    /// Rough upper bound on the group delay (s), used to size zero padding.
    fn delay_hint(&self) -> f64;
}

/// H ≡ 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl FrequencyResponse for Identity {
    fn response(&self, _omega: f64) -> Result<Complex64> {
        Ok(Complex64::new(1.0, 0.0))
    }

    fn delay_hint(&self) -> f64 {
        0.0
    }
}

/// H = g·e^(−jωτ_d).
#[derive(Debug, Clone, Copy)]
pub struct PureDelay {
    pub gain: f64,
    pub delay: f64,
}

impl FrequencyResponse for PureDelay {
    fn response(&self, omega: f64) -> Result<Complex64> {
        Ok(Complex64::from_polar(self.gain, -omega * self.delay))
    }

    fn delay_hint(&self) -> f64 {
        self.delay
    }
}

/// Reflection seen at the input of a line of `length` metres ending in (or
/// interrupted by) `reflector`.
#[derive(Debug, Clone)]
pub struct LineChannel<L> {
    pub line: L,
    pub reflector: Reflector,
    pub length: f64,
}

impl<L: Line> LineChannel<L> {
    pub fn new(line: L, reflector: Reflector, length: f64) -> Self {
        Self {
            line,
            reflector,
            length,
        }
    }
}

impl<L: Line> FrequencyResponse for LineChannel<L> {
    fn response(&self, omega: f64) -> Result<Complex64> {
        if omega == 0.0 {
            // γ and Z₀ are 0/0 here; the caller takes the limit.
            return Ok(Complex64::new(f64::NAN, f64::NAN));
        }
        frf_point(&self.line, &self.reflector, self.length, omega)
    }

    fn delay_hint(&self) -> f64 {
        let vp = self.line.propagation(2.0 * PI * 1e6).vp;
        2.0 * self.length / vp
    }
}

/// First-order low-pass H_LP(s) = 1/(1 + sτ_c).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderLp {
    pub time_constant: f64,
}

impl FirstOrderLp {
    pub fn new(time_constant: f64) -> Result<Self> {
        if !(time_constant > 0.0 && time_constant.is_finite()) {
            return Err(SfwrError::InvalidPlan(format!(
                "time constant must be positive, got {time_constant}"
            )));
        }
        Ok(Self { time_constant })
    }

    /// ω_c = 1/τ_c.
    pub fn cutoff(&self) -> f64 {
        1.0 / self.time_constant
    }

    /// |H_LP(jω)|.
    pub fn gain(&self, omega: f64) -> f64 {
        1.0 / (1.0 + (omega * self.time_constant).powi(2)).sqrt()
    }

    /// ∠H_LP(jω).
    pub fn phase(&self, omega: f64) -> f64 {
        -(omega * self.time_constant).atan()
    }
}

impl FrequencyResponse for FirstOrderLp {
    fn response(&self, omega: f64) -> Result<Complex64> {
        Ok(Complex64::new(1.0, 0.0) / Complex64::new(1.0, omega * self.time_constant))
    }

    fn delay_hint(&self) -> f64 {
        // ~ 25 time constants for the exponential tail to vanish in f64
        40.0 * self.time_constant
    }
}

/// Response of a first-order low-pass to the burst d·sin(ωt + φ) on [0, τ).
///
/// Steady-state windowed sinusoid, minus a decaying exponential that cancels
/// it at t = 0, plus one started at t = τ that carries the state left when
/// the burst switches off.
pub fn first_order_burst_response(
    lp: &FirstOrderLp,
    omega: f64,
    tau: f64,
    amplitude: f64,
    phase: f64,
    t_grid: &[f64],
) -> Vec<f64> {
    let h = lp.gain(omega);
    let phi = phase + lp.phase(omega);
    let tc = lp.time_constant;
    let start = h * amplitude * phi.sin();
    let stop = h * amplitude * (omega * tau + phi).sin();
    t_grid
        .iter()
        .map(|&t| {
            if t < 0.0 {
                0.0
            } else if t < tau {
                h * amplitude * (omega * t + phi).sin() - start * (-t / tc).exp()
            } else {
                -start * (-t / tc).exp() + stop * (-(t - tau) / tc).exp()
            }
        })
        .collect()
}

/// Additive white Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub std_dev: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(std_dev: f64, seed: u64) -> Result<Self> {
        if !(std_dev >= 0.0 && std_dev.is_finite()) {
            return Err(SfwrError::InvalidPlan(format!(
                "noise std_dev must be >= 0, got {std_dev}"
            )));
        }
        Ok(Self { std_dev, seed })
    }

    /// Adds noise to `signal` in place. Deterministic for a given seed.
    pub fn apply(&self, signal: &mut [f64]) {
        if self.std_dev == 0.0 {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = Normal::new(0.0, self.std_dev).expect("validated std_dev");
        for v in signal {
            *v += normal.sample(&mut rng);
        }
    }
}

/// Settings for [`reflect`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectOptions {
    pub sample_rate_hz: f64,
    pub noise: Option<NoiseSpec>,
    /// Largest accepted wrap-around energy fraction.
    pub wrap_tolerance: f64,
    /// Upper limit for the automatically grown FFT length.
    pub max_fft_len: usize,
}

impl ReflectOptions {
    pub fn new(sample_rate_hz: f64) -> Self {
        Self {
            sample_rate_hz,
            noise: None,
            wrap_tolerance: 1e-9,
            max_fft_len: 1 << 24,
        }
    }

    pub fn with_wrap_tolerance(mut self, tol: f64) -> Self {
        self.wrap_tolerance = tol;
        self
    }

    pub fn with_noise(mut self, noise: Option<NoiseSpec>) -> Self {
        self.noise = noise;
        self
    }
}

/// Output of [`reflect`].
#[derive(Debug, Clone)]
pub struct Reflection {
    /// Reflected signal, same length as the input.
    pub signal: Vec<f64>,
    /// FFT length finally used.
    pub fft_len: usize,
    /// Fraction of output energy found in the back half of the padding.
    pub wrap_fraction: f64,
}

/// Passes `transmitted` through `channel` by zero-padded FFT filtering.
///
/// The FFT length starts at the next power of two above 2n + 8·delay·fs and
/// doubles until the energy in the trailing half of the padding is below the
/// tolerance.
pub fn reflect<C: FrequencyResponse + ?Sized>(
    transmitted: &[f64],
    channel: &C,
    opts: &ReflectOptions,
) -> Result<Reflection> {
    let n = transmitted.len();
    let fs = opts.sample_rate_hz;
    if !(fs > 0.0) {
        return Err(SfwrError::InvalidPlan("sample rate must be positive".into()));
    }
    if n == 0 {
        return Ok(Reflection {
            signal: Vec::new(),
            fft_len: 0,
            wrap_fraction: 0.0,
        });
    }
    let pad = (8.0 * channel.delay_hint().max(0.0) * fs).ceil() as usize;
    let mut fft_len = (2 * n + pad).max(16).next_power_of_two();
    loop {
        let (full, fraction) = filter(transmitted, channel, fs, fft_len)?;
        if fraction <= opts.wrap_tolerance {
            let mut signal = full[..n].to_vec();
            if let Some(noise) = &opts.noise {
                noise.apply(&mut signal);
            }
            return Ok(Reflection {
                signal,
                fft_len,
                wrap_fraction: fraction,
            });
        }
        if fft_len * 2 > opts.max_fft_len {
            return Err(SfwrError::PaddingInsufficient {
                fraction,
                tolerance: opts.wrap_tolerance,
            });
        }
        fft_len *= 2;
    }
}

/// Fraction of the bin spacing at which a response singular at DC is probed.
const DC_PROBE: f64 = 1e-9;

fn filter<C: FrequencyResponse + ?Sized>(x: &[f64], channel: &C, fs: f64, fft_len: usize) -> Result<(Vec<f64>, f64)> {
    let n = x.len();
    let half = fft_len / 2;
    let bin = 2.0 * PI * fs / fft_len as f64;
    let mut h: Vec<Complex64> = (0..=half)
        .into_par_iter()
        .map(|k| channel.response(k as f64 * bin))
        .collect::<Result<_>>()?;
    if !h[0].is_finite() {
        // limit ω → 0 of the closed form; the linear phase term vanishes there
        let near = channel.response(DC_PROBE * bin)?;
        h[0] = if near.is_finite() { near } else { h[1] };
    }
    h[0] = Complex64::new(h[0].re, 0.0);
    h[half] = Complex64::new(h[half].re, 0.0);
    if h.iter().any(|v| !v.is_finite()) {
        return Err(SfwrError::InvalidPlan("channel response is not finite".into()));
    }

    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = x
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(fft_len)
        .collect();
    planner.plan_fft_forward(fft_len).process(&mut buf);
    buf[0] *= h[0];
    buf[half] *= h[half];
    for k in 1..half {
        buf[k] *= h[k];
        buf[fft_len - k] *= h[k].conj();
    }
    planner.plan_fft_inverse(fft_len).process(&mut buf);
    let scale = 1.0 / fft_len as f64;
    let out: Vec<f64> = buf.iter().map(|c| c.re * scale).collect();

    let total: f64 = out.iter().map(|v| v * v).sum();
    let tail_start = n + (fft_len - n) / 2;
    let tail: f64 = out[tail_start..].iter().map(|v| v * v).sum();
    let fraction = if total > 0.0 { tail / total } else { 0.0 };
    Ok((out, fraction))
}
