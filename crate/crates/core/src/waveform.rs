//! Burst-train design, synthesis and segmentation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SfwrError};

/// Default acquisition sample rate (Hz).
pub const DEFAULT_SAMPLE_RATE: f64 = 1e9;
/// Default frequency step (Hz).
pub const DEFAULT_STEP_HZ: f64 = 500e3;

// Slack for float artefacts such as 2·20/2e8·1e9 = 200.00000000000003.
const SAMPLE_SLACK: f64 = 1e-9;

/// Timing and frequency plan of a stepped-frequency burst train.
///
/// Durations are stored as whole sample counts so that every window boundary
/// falls exactly on a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SfwrPlan {
    /// Burst duration τ in samples.
    pub burst_samples: usize,
    /// Segment period T in samples.
    pub period_samples: usize,
    /// First frequency f₀ (Hz).
    pub f0_hz: f64,
    /// Frequency step Δf (Hz).
    pub step_hz: f64,
    /// Number of frequencies N.
    pub n_freqs: usize,
    /// Sample rate fs (Hz).
    pub sample_rate_hz: f64,
    /// Burst amplitude d_tr (V).
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Burst initial phase φ_tr (rad).
    #[serde(default)]
    pub initial_phase: f64,
}

fn one() -> f64 {
    1.0
}

impl SfwrPlan {
    pub fn new(
        burst_samples: usize,
        period_samples: usize,
        f0_hz: f64,
        step_hz: f64,
        n_freqs: usize,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        let plan = Self {
            burst_samples,
            period_samples,
            f0_hz,
            step_hz,
            n_freqs,
            sample_rate_hz,
            amplitude: 1.0,
            initial_phase: 0.0,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// τ = 200 ns, T = 2 μs, f₀ = 10 MHz, Δf = 500 kHz, N = 101 at 1 GHz.
    pub fn reference() -> Self {
        Self::new(200, 2000, 10e6, DEFAULT_STEP_HZ, 101, DEFAULT_SAMPLE_RATE).expect("reference plan is valid")
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_initial_phase(mut self, phase: f64) -> Self {
        self.initial_phase = phase;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SfwrError::InvalidPlan(m));
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad("sample rate must be positive".into());
        }
        if self.burst_samples == 0 {
            return bad("burst must contain at least one sample".into());
        }
        if self.burst_samples >= self.period_samples {
            return bad(format!(
                "burst ({} samples) must be shorter than the period ({} samples)",
                self.burst_samples, self.period_samples
            ));
        }
        if self.n_freqs == 0 {
            return bad("at least one frequency is required".into());
        }
        if !(self.f0_hz > 0.0) || !(self.step_hz >= 0.0) || !self.f0_hz.is_finite() || !self.step_hz.is_finite() {
            return bad("f0 must be positive and the step non-negative".into());
        }
        if self.n_freqs > 1 && self.step_hz == 0.0 {
            return bad("frequency step must be positive when N > 1".into());
        }
        if self.f0_hz * self.tau() < 2.0 - SAMPLE_SLACK {
            return bad(format!(
                "f0 = {} Hz gives fewer than two periods per burst (needs f0 >= {} Hz)",
                self.f0_hz,
                2.0 / self.tau()
            ));
        }
        if 2.0 * self.f_last() >= self.sample_rate_hz {
            return bad(format!(
                "highest frequency {} Hz is not below Nyquist ({} Hz)",
                self.f_last(),
                self.sample_rate_hz / 2.0
            ));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) || !self.initial_phase.is_finite() {
            return bad("amplitude must be non-negative and phase finite".into());
        }
        Ok(())
    }

    /// Sample period T_s (s).
    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    /// Burst duration τ (s).
    pub fn tau(&self) -> f64 {
        self.burst_samples as f64 / self.sample_rate_hz
    }

    /// Segment period T (s).
    pub fn period(&self) -> f64 {
        self.period_samples as f64 / self.sample_rate_hz
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.f0_hz + i as f64 * self.step_hz
    }

    pub fn omega(&self, i: usize) -> f64 {
        2.0 * PI * self.frequency(i)
    }

    /// Highest frequency f_{N−1} (Hz).
    pub fn f_last(&self) -> f64 {
        self.frequency(self.n_freqs - 1)
    }

    /// Angular frequency grid ω_i.
    pub fn omegas(&self) -> Vec<f64> {
        (0..self.n_freqs).map(|i| self.omega(i)).collect()
    }

    /// Length of a full acquisition, N·T·fs.
    pub fn total_samples(&self) -> usize {
        self.n_freqs * self.period_samples
    }

    /// Round-trip delay range that keeps each reflected burst inside its own
    /// reflected window, [τ, T − τ] (s).
    pub fn delay_range(&self) -> (f64, f64) {
        (self.tau(), self.period() - self.tau())
    }
}

/// How the frequency grid is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    /// Fixed step Δf; N is the smallest count reaching f_max.
    Step(f64),
    /// Fixed count N; Δf is the smallest step reaching f_max.
    Count(usize),
}

/// Inputs to [`design_plan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignRequest {
    pub l_min: f64,
    pub l_max: f64,
    pub vp_est: f64,
    /// Target relative location error U_r.
    pub ur: f64,
    /// Largest expected reflection-coefficient phase |φ_Γ| (rad).
    pub phi_gamma_max: f64,
    pub sample_rate_hz: f64,
    pub grid: GridSpec,
}

impl DesignRequest {
    pub fn new(l_min: f64, l_max: f64, vp_est: f64, ur: f64) -> Self {
        Self {
            l_min,
            l_max,
            vp_est,
            ur,
            phi_gamma_max: 2.0 * PI,
            sample_rate_hz: DEFAULT_SAMPLE_RATE,
            grid: GridSpec::Step(DEFAULT_STEP_HZ),
        }
    }
}

/// A designed plan together with the frequency its grid had to reach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanDesign {
    pub plan: SfwrPlan,
    /// Minimum highest frequency for the requested error bound (Hz).
    pub f_max_required_hz: f64,
}

/// Designs a burst plan for the diagnostic range [l_min, l_max].
///
/// τ is the round trip to l_min (floored to a sample), T adds the round trip
/// to l_max (ceiled to a sample), f₀ is the smallest integer frequency giving
/// two periods per burst, and the grid is extended until the error bound
/// U_r holds at l_max.
pub fn design_plan(req: &DesignRequest) -> Result<PlanDesign> {
    let invalid = |m: &str| Err(SfwrError::InvalidPlan(m.to_string()));
    if !(req.l_min > 0.0 && req.l_max > req.l_min && req.l_max.is_finite()) {
        return invalid("need 0 < l_min < l_max");
    }
    if !(req.vp_est > 0.0 && req.vp_est.is_finite()) {
        return invalid("vp_est must be positive");
    }
    if !(req.ur > 0.0 && req.ur < 1.0) {
        return invalid("U_r must lie in (0, 1)");
    }
    if !(req.phi_gamma_max >= 0.0 && req.phi_gamma_max.is_finite()) {
        return invalid("phi_gamma_max must be non-negative");
    }
    if !(req.sample_rate_hz > 0.0 && req.sample_rate_hz.is_finite()) {
        return invalid("sample rate must be positive");
    }
    let fs = req.sample_rate_hz;
    let nyquist = fs / 2.0;

    let tau_exact = 2.0 * req.l_min / req.vp_est;
    let burst_samples = (tau_exact * fs + SAMPLE_SLACK).floor() as usize;
    if burst_samples == 0 {
        return Err(SfwrError::InfeasiblePlan(format!(
            "burst duration {tau_exact:e} s is shorter than one sample at {fs:e} Hz"
        )));
    }
    let tau = burst_samples as f64 / fs;
    let period_exact = 2.0 * req.l_max / req.vp_est + tau;
    let period_samples = (period_exact * fs - SAMPLE_SLACK).ceil() as usize;

    let f0 = ((2.0 / tau) * (1.0 - 1e-12)).ceil();
    if f0 >= nyquist {
        return Err(SfwrError::InfeasiblePlan(format!(
            "two periods in {burst_samples} samples need f0 = {f0:e} Hz, above Nyquist {nyquist:e} Hz"
        )));
    }
    let f_max = req.phi_gamma_max * req.vp_est / (4.0 * PI * req.l_max * req.ur);
    if f_max >= nyquist {
        return Err(SfwrError::InfeasiblePlan(format!(
            "error bound needs f_max = {f_max:e} Hz, above Nyquist {nyquist:e} Hz"
        )));
    }

    let (step_hz, n_freqs) = match req.grid {
        GridSpec::Step(df) => {
            if !(df > 0.0 && df.is_finite()) {
                return invalid("frequency step must be positive");
            }
            let n = if f_max <= f0 {
                1
            } else {
                ((f_max - f0) / df - SAMPLE_SLACK).ceil() as usize + 1
            };
            (df, n)
        }
        GridSpec::Count(n) => {
            if n == 0 {
                return invalid("N must be at least 1");
            }
            if n == 1 {
                if f_max > f0 {
                    return Err(SfwrError::InfeasiblePlan(
                        "a single frequency cannot reach the required f_max".into(),
                    ));
                }
                (0.0, 1)
            } else {
                ((f_max - f0).max(0.0) / (n - 1) as f64, n)
            }
        }
    };

    let plan = SfwrPlan {
        burst_samples,
        period_samples,
        f0_hz: f0,
        step_hz,
        n_freqs,
        sample_rate_hz: fs,
        amplitude: 1.0,
        initial_phase: 0.0,
    };
    plan.validate().map_err(|e| match e {
        SfwrError::InvalidPlan(m) => SfwrError::InfeasiblePlan(m),
        other => other,
    })?;
    Ok(PlanDesign {
        plan,
        f_max_required_hz: f_max,
    })
}

/// Synthesizes the full transmitted burst train.
pub fn generate(plan: &SfwrPlan) -> Vec<f64> {
    let mut out = vec![0.0; plan.total_samples()];
    let fs = plan.sample_rate_hz;
    for i in 0..plan.n_freqs {
        let w = plan.omega(i);
        let start = i * plan.period_samples;
        for (n, v) in out[start..start + plan.burst_samples].iter_mut().enumerate() {
            *v = plan.amplitude * (w * n as f64 / fs + plan.initial_phase).sin();
        }
    }
    out
}

/// Transmitted and reflected windows of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstPair {
    pub index: usize,
    pub omega: f64,
    /// Samples [iT, iT + τ), re-indexed from zero.
    pub x: Vec<f64>,
    /// Samples [iT + τ, (i+1)T), re-indexed from zero.
    pub y: Vec<f64>,
    pub sample_rate_hz: f64,
}

/// Splits an acquisition into per-frequency burst pairs. Samples beyond
/// N·T·fs are ignored.
pub fn segment(acquisition: &[f64], plan: &SfwrPlan) -> Result<Vec<BurstPair>> {
    let needed = plan.total_samples();
    if acquisition.len() < needed {
        return Err(SfwrError::Segmentation {
            needed,
            got: acquisition.len(),
        });
    }
    Ok(acquisition[..needed]
        .chunks_exact(plan.period_samples)
        .enumerate()
        .map(|(i, seg)| {
            let (x, y) = seg.split_at(plan.burst_samples);
            BurstPair {
                index: i,
                omega: plan.omega(i),
                x: x.to_vec(),
                y: y.to_vec(),
                sample_rate_hz: plan.sample_rate_hz,
            }
        })
        .collect())
}
