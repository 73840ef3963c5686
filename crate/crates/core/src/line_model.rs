//! Lossy coaxial line model.
//!
//! Per-unit-length primary parameters (R, L, G, C) of a coaxial cable with
//! skin-effect conductor losses and a constant dielectric loss tangent, the
//! derived propagation function γ = α + jβ and characteristic impedance Z₀,
//! and the reflection coefficients of terminations and point faults.
//!
//! Everything here is a closed-form ground truth; the estimators elsewhere in
//! the crate are judged against it.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SfwrError};
use crate::phase::unwrap_in_place;

/// Vacuum permeability (H/m).
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.854_187_812_8e-12;

/// Per-unit-length primary parameters at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimaryParams {
    /// Resistance (Ω/m).
    pub r: f64,
    /// Inductance (H/m).
    pub l: f64,
    /// Conductance (S/m).
    pub g: f64,
    /// Capacitance (F/m).
    pub c: f64,
}

impl PrimaryParams {
    /// Series impedance and shunt admittance per metre.
    pub fn impedance_admittance(&self, omega: f64) -> (Complex64, Complex64) {
        (
            Complex64::new(self.r, omega * self.l),
            Complex64::new(self.g, omega * self.c),
        )
    }

    /// Secondary parameters γ and Z₀ using principal-branch square roots.
    pub fn secondary(&self, omega: f64) -> SecondaryParams {
        let (z, y) = self.impedance_admittance(omega);
        let gamma = (z * y).sqrt();
        let z0 = (z / y).sqrt();
        SecondaryParams {
            frequency: omega,
            gamma,
            z0,
            vp: omega / gamma.im,
        }
    }
}

/// Propagation function and characteristic impedance at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondaryParams {
    /// Angular frequency (rad/s).
    pub frequency: f64,
    /// γ = α + jβ (1/m).
    pub gamma: Complex64,
    /// Characteristic impedance (Ω).
    pub z0: Complex64,
    /// Phase velocity ω/β (m/s).
    pub vp: f64,
}

impl SecondaryParams {
    /// Attenuation constant (Np/m).
    pub fn alpha(&self) -> f64 {
        self.gamma.re
    }

    /// Phase constant (rad/m).
    pub fn beta(&self) -> f64 {
        self.gamma.im
    }
}

/// Anything that can report its primary parameters at a given frequency.
pub trait Line: Send + Sync {
    fn primary(&self, omega: f64) -> PrimaryParams;

    fn propagation(&self, omega: f64) -> SecondaryParams {
        self.primary(omega).secondary(omega)
    }
}

/// Frequency-independent RLGC line. Mostly useful for idealised checks
/// (lossless or distortionless lines).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantRlgc(pub PrimaryParams);

impl ConstantRlgc {
    /// Lossless line with the given phase velocity and nominal impedance.
    pub fn lossless(vp: f64, z0: f64) -> Self {
        Self(PrimaryParams {
            r: 0.0,
            l: z0 / vp,
            g: 0.0,
            c: 1.0 / (z0 * vp),
        })
    }
}

impl Line for ConstantRlgc {
    fn primary(&self, _omega: f64) -> PrimaryParams {
        self.0
    }
}

/// Geometry and materials of a coaxial cable with a dispersive loss model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlgcProfile {
    /// Inner conductor radius a (m).
    pub conductor_inner_radius: f64,
    /// Inner radius of the shield b (m).
    pub shield_inner_radius: f64,
    /// Relative permittivity of the dielectric.
    pub relative_permittivity: f64,
    /// Conductor conductivity (S/m).
    pub conductor_conductivity: f64,
    /// Dielectric loss tangent.
    pub loss_tangent: f64,
    /// Low-frequency limit of the series resistance (Ω/m).
    pub dc_resistance_per_m: f64,
}

/// Target characteristic impedance used to calibrate a profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTarget {
    /// Calibration frequency (Hz).
    pub frequency_hz: f64,
    /// Desired |Z₀| (Ω).
    pub magnitude: f64,
    /// Desired ∠Z₀ (rad).
    pub angle: f64,
}

impl CalibrationTarget {
    /// |Z₀(1 MHz)| ≅ 49.5 Ω, ∠Z₀(1 MHz) ≅ −0.12 rad.
    pub const RG58: CalibrationTarget = CalibrationTarget {
        frequency_hz: 1e6,
        magnitude: 49.5,
        angle: -0.12,
    };
}

impl RlgcProfile {
    pub fn new(
        conductor_inner_radius: f64,
        shield_inner_radius: f64,
        relative_permittivity: f64,
        conductor_conductivity: f64,
        loss_tangent: f64,
        dc_resistance_per_m: f64,
    ) -> Result<Self> {
        let profile = Self {
            conductor_inner_radius,
            shield_inner_radius,
            relative_permittivity,
            conductor_conductivity,
            loss_tangent,
            dc_resistance_per_m,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Checks the physical invariants. Deserialized profiles must pass
    /// through here before use.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(SfwrError::InvalidProfile(msg.to_string()));
        let all = [
            self.conductor_inner_radius,
            self.shield_inner_radius,
            self.relative_permittivity,
            self.conductor_conductivity,
            self.loss_tangent,
            self.dc_resistance_per_m,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if self.conductor_inner_radius <= 0.0 {
            return bad("conductor radius must be positive");
        }
        if self.shield_inner_radius <= self.conductor_inner_radius {
            return bad("shield radius must exceed conductor radius");
        }
        if self.relative_permittivity < 1.0 {
            return bad("relative permittivity must be >= 1");
        }
        if self.conductor_conductivity <= 0.0 {
            return bad("conductivity must be positive");
        }
        if self.loss_tangent < 0.0 {
            return bad("loss tangent must be non-negative");
        }
        if self.dc_resistance_per_m < 0.0 {
            return bad("DC resistance must be non-negative");
        }
        Ok(())
    }

    /// Uncalibrated RG58-like starting point.
    pub fn rg58_nominal() -> Self {
        Self {
            conductor_inner_radius: 0.40e-3,
            shield_inner_radius: 1.47e-3,
            relative_permittivity: 2.25,
            conductor_conductivity: 5.8e7,
            loss_tangent: 2e-4,
            dc_resistance_per_m: 0.0395,
        }
    }

    /// The nominal RG58 profile calibrated to [`CalibrationTarget::RG58`].
    pub fn calibrated_rg58() -> Self {
        Self::rg58_nominal()
            .calibrate(&CalibrationTarget::RG58)
            .expect("built-in RG58 calibration converges")
    }

    fn log_ratio(&self) -> f64 {
        (self.shield_inner_radius / self.conductor_inner_radius).ln()
    }

    /// Capacitance per metre (F/m).
    pub fn capacitance(&self) -> f64 {
        2.0 * PI * EPS0 * self.relative_permittivity / self.log_ratio()
    }

    /// External (geometric) inductance per metre (H/m).
    pub fn external_inductance(&self) -> f64 {
        MU0 / (2.0 * PI) * self.log_ratio()
    }

    /// High-frequency skin-effect resistance 1/(σδ)·(1/2πa + 1/2πb).
    pub fn skin_resistance(&self, omega: f64) -> f64 {
        let sigma = self.conductor_conductivity;
        let surface = (omega * MU0 / (2.0 * sigma)).sqrt();
        surface / (2.0 * PI) * (1.0 / self.conductor_inner_radius + 1.0 / self.shield_inner_radius)
    }

    /// Internal series impedance of the conductors: √(R_dc² + ((1+j)·R_hf)²).
    ///
    /// Tends to R_dc at low frequency and to the surface impedance (1+j)·R_hf
    /// at high frequency. The analytic form keeps the line response causal.
    pub fn internal_impedance(&self, omega: f64) -> Complex64 {
        let rhf = self.skin_resistance(omega);
        let rdc = self.dc_resistance_per_m;
        Complex64::new(rdc * rdc, 2.0 * rhf * rhf).sqrt()
    }

    /// Adjusts b/a and the DC resistance so that Z₀ matches the target at
    /// the target frequency. Damped Newton iteration with a finite-difference
    /// Jacobian; the inner radius, permittivity, conductivity and loss tangent
    /// are left unchanged.
    pub fn calibrate(&self, target: &CalibrationTarget) -> Result<Self> {
        self.validate()?;
        let omega = 2.0 * PI * target.frequency_hz;
        let build = |x: [f64; 2]| -> RlgcProfile {
            RlgcProfile {
                shield_inner_radius: self.conductor_inner_radius * x[0].exp(),
                dc_resistance_per_m: x[1].max(0.0),
                ..*self
            }
        };
        let residual = |x: [f64; 2]| -> [f64; 2] {
            let z0 = build(x).propagation(omega).z0;
            [z0.norm() / target.magnitude - 1.0, z0.arg() - target.angle]
        };

        let mut x = [self.log_ratio(), self.dc_resistance_per_m];
        let mut f = residual(x);
        for _ in 0..100 {
            if f[0].abs() < 1e-13 && f[1].abs() < 1e-13 {
                let profile = build(x);
                profile.validate()?;
                return Ok(profile);
            }
            let steps = [1e-6 * x[0].abs().max(1e-3), 1e-6 * x[1].abs().max(1e-3)];
            let mut jac = [[0.0; 2]; 2];
            for k in 0..2 {
                let mut hi = x;
                let mut lo = x;
                hi[k] += steps[k];
                lo[k] -= steps[k];
                let (fh, fl) = (residual(hi), residual(lo));
                for i in 0..2 {
                    jac[i][k] = (fh[i] - fl[i]) / (2.0 * steps[k]);
                }
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det.abs() < 1e-300 || !det.is_finite() {
                return Err(SfwrError::Calibration("singular Jacobian".into()));
            }
            let dx = [
                (jac[1][1] * f[0] - jac[0][1] * f[1]) / det,
                (-jac[1][0] * f[0] + jac[0][0] * f[1]) / det,
            ];
            let norm = |r: [f64; 2]| r[0].hypot(r[1]);
            let mut lambda = 1.0;
            loop {
                let trial = [x[0] - lambda * dx[0], x[1] - lambda * dx[1]];
                let ft = residual(trial);
                if trial[0] > 0.0 && trial[1] >= 0.0 && norm(ft) < norm(f) {
                    x = trial;
                    f = ft;
                    break;
                }
                lambda *= 0.5;
                if lambda < 1e-8 {
                    return Err(SfwrError::Calibration("line search stalled".into()));
                }
            }
        }
        Err(SfwrError::Calibration("no convergence in 100 iterations".into()))
    }
}

impl Line for RlgcProfile {
    fn primary(&self, omega: f64) -> PrimaryParams {
        let c = self.capacitance();
        let zi = self.internal_impedance(omega);
        let internal_l = if omega > 0.0 {
            zi.im / omega
        } else {
            // Im(z_int) ≈ R_hf²/R_dc near DC, and R_hf² is linear in ω.
            let per_omega = MU0 / (2.0 * self.conductor_conductivity)
                * ((1.0 / self.conductor_inner_radius + 1.0 / self.shield_inner_radius) / (2.0 * PI)).powi(2);
            if self.dc_resistance_per_m > 0.0 {
                per_omega / self.dc_resistance_per_m
            } else {
                f64::INFINITY
            }
        };
        PrimaryParams {
            r: zi.re,
            l: self.external_inductance() + internal_l,
            g: omega * c * self.loss_tangent,
            c,
        }
    }
}

/// Lumped impedance of a termination or fault.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Impedance {
    /// Infinite impedance.
    Open,
    /// Zero impedance.
    Short,
    /// Equal to the line's own Z₀(ω).
    Matched,
    Resistor {
        ohms: f64,
    },
    Capacitor {
        farads: f64,
    },
    Inductor {
        henries: f64,
    },
    Fixed {
        re: f64,
        im: f64,
    },
}

impl Impedance {
    /// Value at `omega`; `None` stands for an infinite impedance.
    pub fn at(&self, omega: f64, z0: Complex64) -> Option<Complex64> {
        match *self {
            Impedance::Open => None,
            Impedance::Short => Some(Complex64::new(0.0, 0.0)),
            Impedance::Matched => Some(z0),
            Impedance::Resistor { ohms } => Some(Complex64::new(ohms, 0.0)),
            Impedance::Capacitor { farads } => {
                if omega == 0.0 {
                    None
                } else {
                    Some(Complex64::new(0.0, -1.0 / (omega * farads)))
                }
            }
            Impedance::Inductor { henries } => Some(Complex64::new(0.0, omega * henries)),
            Impedance::Fixed { re, im } => Some(Complex64::new(re, im)),
        }
    }

    /// True when the real part is non-negative at every frequency.
    pub fn is_passive(&self) -> bool {
        match *self {
            Impedance::Resistor { ohms } => ohms >= 0.0,
            Impedance::Capacitor { farads } => farads > 0.0,
            Impedance::Inductor { henries } => henries >= 0.0,
            Impedance::Fixed { re, .. } => re >= 0.0,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectorKind {
    /// Load at the end of the line.
    Termination,
    /// Point impedance in series with the inner conductor.
    SeriesFault,
    /// Point impedance between inner conductor and shield.
    ShuntFault,
}

/// A single impedance discontinuity on the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reflector {
    pub kind: ReflectorKind,
    pub impedance: Impedance,
}

impl Reflector {
    pub fn termination(impedance: Impedance) -> Self {
        Self {
            kind: ReflectorKind::Termination,
            impedance,
        }
    }

    pub fn series(impedance: Impedance) -> Self {
        Self {
            kind: ReflectorKind::SeriesFault,
            impedance,
        }
    }

    pub fn shunt(impedance: Impedance) -> Self {
        Self {
            kind: ReflectorKind::ShuntFault,
            impedance,
        }
    }

    pub fn open() -> Self {
        Self::termination(Impedance::Open)
    }
}

/// Reflection coefficient Γ̄ of `reflector` on a line with impedance `z0`.
///
/// Termination: (Z_L − Z₀)/(Z_L + Z₀). Series fault: Z_S/(Z_S + 2Z₀).
/// Shunt fault: −Z₀/(Z₀ + 2Z_P). Open and short limits are returned exactly.
pub fn reflection_coefficient(reflector: &Reflector, z0: Complex64, omega: f64) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let z = reflector.impedance.at(omega, z0);
    let ratio = |num: Complex64, den: Complex64| {
        if den.norm() == 0.0 || !den.is_finite() {
            Err(SfwrError::SingularReflector { omega })
        } else {
            Ok(num / den)
        }
    };
    match (reflector.kind, reflector.impedance, z) {
        (ReflectorKind::Termination, Impedance::Matched, _) => Ok(zero),
        (ReflectorKind::Termination, _, None) => Ok(one),
        (ReflectorKind::Termination, Impedance::Short, _) => Ok(-one),
        (ReflectorKind::Termination, _, Some(zl)) => ratio(zl - z0, zl + z0),
        (ReflectorKind::SeriesFault, _, None) => Ok(one),
        (ReflectorKind::SeriesFault, Impedance::Short, _) => Ok(zero),
        (ReflectorKind::SeriesFault, _, Some(zs)) => ratio(zs, zs + 2.0 * z0),
        (ReflectorKind::ShuntFault, _, None) => Ok(zero),
        (ReflectorKind::ShuntFault, Impedance::Short, _) => Ok(-one),
        (ReflectorKind::ShuntFault, _, Some(zp)) => ratio(-z0, z0 + 2.0 * zp),
    }
}

/// One frequency of the exact line FRF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrfSample {
    pub omega: f64,
    pub h: Complex64,
    pub magnitude: f64,
    /// Continuous phase, −2βl + ∠Γ̄ with ∠Γ̄ unwrapped along the grid.
    pub phase: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma_reflection: Complex64,
}

/// Exact FRF H̄(ω) = Γ̄(ω)·e^(−2γ(ω)l) sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrfSamples {
    pub length: f64,
    pub samples: Vec<FrfSample>,
}

impl FrfSamples {
    pub fn omegas(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.omega).collect()
    }
}

/// Evaluates H̄ = Γ̄·e^(−2γl) at one frequency.
pub fn frf_point<L: Line + ?Sized>(line: &L, reflector: &Reflector, length: f64, omega: f64) -> Result<Complex64> {
    let sec = line.propagation(omega);
    let gamma_r = reflection_coefficient(reflector, sec.z0, omega)?;
    Ok(gamma_r * (-2.0 * length * sec.gamma).exp())
}

/// Ground-truth FRF on a strictly increasing grid of angular frequencies.
pub fn frf<L: Line + ?Sized>(line: &L, reflector: &Reflector, length: f64, grid: &[f64]) -> Result<FrfSamples> {
    if !(length > 0.0) {
        return Err(SfwrError::GridMismatch(format!(
            "line length must be positive, got {length}"
        )));
    }
    validate_grid(grid)?;
    let mut samples = Vec::with_capacity(grid.len());
    let mut gamma_phase = Vec::with_capacity(grid.len());
    for &omega in grid {
        let sec = line.propagation(omega);
        let gamma_r = reflection_coefficient(reflector, sec.z0, omega)?;
        let h = gamma_r * (-2.0 * length * sec.gamma).exp();
        gamma_phase.push(gamma_r.arg());
        samples.push(FrfSample {
            omega,
            h,
            magnitude: h.norm(),
            phase: 0.0,
            alpha: sec.alpha(),
            beta: sec.beta(),
            gamma_reflection: gamma_r,
        });
    }
    unwrap_in_place(&mut gamma_phase);
    for (s, pg) in samples.iter_mut().zip(gamma_phase) {
        s.phase = -2.0 * length * s.beta + pg;
    }
    Ok(FrfSamples { length, samples })
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(SfwrError::GridMismatch("empty frequency grid".into()));
    }
    if grid.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(SfwrError::GridMismatch("grid frequencies must be positive".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SfwrError::GridMismatch("grid must be strictly increasing".into()));
    }
    Ok(())
}
