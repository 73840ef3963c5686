//! Cable characterization and fault location from FRF estimates.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SfwrError};
use crate::frf_estimator::FrfEstimate;
use crate::line_model::Line;
use crate::phase::{unwrap_in_place, wrap};

/// Below this |Γ̂| the reflection phase is reported but flagged unreliable.
pub const NEAR_MATCHED_THRESHOLD: f64 = 0.05;

const GRID_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationEntry {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// α(ω), β(ω) on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationTable {
    /// Length of the reference cable the table came from, if any (m).
    pub reference_length: Option<f64>,
    pub entries: Vec<PropagationEntry>,
}

impl PropagationTable {
    /// Exact α, β of a line model.
    pub fn from_line<L: Line + ?Sized>(line: &L, grid: &[f64]) -> Self {
        Self {
            reference_length: None,
            entries: grid
                .iter()
                .map(|&omega| {
                    let s = line.propagation(omega);
                    PropagationEntry {
                        omega,
                        alpha: s.alpha(),
                        beta: s.beta(),
                    }
                })
                .collect(),
        }
    }

    pub fn lookup(&self, omega: f64) -> Result<&PropagationEntry> {
        self.entries
            .iter()
            .find(|e| (e.omega - omega).abs() <= GRID_RTOL * omega.abs())
            .ok_or(SfwrError::MissingFrequency { omega })
    }

    fn aligned(&self, frf: &FrfEstimate) -> Result<Vec<PropagationEntry>> {
        frf.records.iter().map(|r| self.lookup(r.omega).copied()).collect()
    }

    /// Largest phase velocity ω/β over the table.
    pub fn vp_max(&self) -> f64 {
        self.entries.iter().map(|e| e.omega / e.beta).fold(0.0, f64::max)
    }
}

/// α̂ = −ln Ĥ/(2l), β̂ = −φ̂_H/(2l) for an open-ended reference cable.
pub fn characterize_reference(frf: &FrfEstimate, length: f64) -> Result<PropagationTable> {
    let ones = vec![Complex64::new(1.0, 0.0); frf.len()];
    characterize_with_termination(frf, length, &ones)
}

/// As [`characterize_reference`], dividing out a known termination Γ̄(ω_i)
/// (one value per FRF record) first.
pub fn characterize_with_termination(
    frf: &FrfEstimate,
    length: f64,
    termination: &[Complex64],
) -> Result<PropagationTable> {
    if !(length > 0.0) {
        return Err(SfwrError::GridMismatch(format!(
            "reference length must be positive, got {length}"
        )));
    }
    if termination.len() != frf.len() {
        return Err(SfwrError::GridMismatch(format!(
            "{} termination values for {} frequencies",
            termination.len(),
            frf.len()
        )));
    }
    let mut frf = frf.clone();
    frf.enforce_phase_continuity();
    let mut gamma_phase: Vec<f64> = termination.iter().map(|g| g.arg()).collect();
    unwrap_in_place(&mut gamma_phase);
    let entries = frf
        .records
        .iter()
        .zip(termination.iter().zip(&gamma_phase))
        .map(|(r, (g, pg))| {
            let ratio = r.h_mag / g.norm();
            if !(ratio > 0.0 && ratio.is_finite()) {
                return Err(SfwrError::InvalidMagnitude {
                    omega: r.omega,
                    value: r.h_mag,
                });
            }
            Ok(PropagationEntry {
                omega: r.omega,
                alpha: -ratio.ln() / (2.0 * length),
                beta: -(r.phase - pg) / (2.0 * length),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PropagationTable {
        reference_length: Some(length),
        entries,
    })
}

/// U_r = φΓ_max·vp_max/(2lω).
pub fn error_bound(phi_gamma_max: f64, vp_max: f64, length: f64, omega: f64) -> f64 {
    phi_gamma_max * vp_max / (2.0 * length * omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationMethod {
    Generic,
    ConstantGamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaMagnitude {
    Scalar(f64),
    PerFrequency(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultReport {
    pub method: LocationMethod,
    pub position_m: f64,
    pub position_error_bound_rel: Option<f64>,
    pub gamma_mag: GammaMagnitude,
    pub gamma_phase_deg: Option<f64>,
    pub flags: Vec<String>,
}

/// One point of the per-frequency location curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationPoint {
    pub omega: f64,
    /// −φ̂_H(ω)/(2β̂(ω)) (m).
    pub position_m: f64,
    /// Ĥ(ω)·e^(2α̂(ω)l̂) with l̂ from the selected frequency.
    pub gamma_mag: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenericLocation {
    pub report: FaultReport,
    pub curve: Vec<LocationPoint>,
}

/// Options for [`locate_generic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenericOptions {
    /// Frequency used for the position; `None` selects the highest.
    pub omega_sel: Option<f64>,
    /// Assumed |φ_Γ| bound for the reported error bound (rad).
    pub phi_gamma_max: f64,
}

impl Default for GenericOptions {
    fn default() -> Self {
        Self {
            omega_sel: None,
            phi_gamma_max: PI,
        }
    }
}

/// Locates a reflector treating its delay as pure propagation:
/// l̂ = −φ̂_H(ω_sel)/(2β̂(ω_sel)), then Γ̂(ω_i) = Ĥ(ω_i)·e^(2α̂(ω_i)·l̂).
pub fn locate_generic(frf: &FrfEstimate, prop: &PropagationTable, opts: &GenericOptions) -> Result<GenericLocation> {
    if frf.is_empty() {
        return Err(SfwrError::GridMismatch("empty FRF estimate".into()));
    }
    let mut frf = frf.clone();
    frf.enforce_phase_continuity();
    let table = prop.aligned(&frf)?;
    let sel = match opts.omega_sel {
        None => frf.len() - 1,
        Some(w) => frf
            .records
            .iter()
            .position(|r| (r.omega - w).abs() <= GRID_RTOL * w.abs())
            .ok_or(SfwrError::MissingFrequency { omega: w })?,
    };
    let beta_sel = table[sel].beta;
    if !(beta_sel > 0.0) {
        return Err(SfwrError::GridMismatch(format!(
            "non-positive phase constant {beta_sel} at {} rad/s",
            table[sel].omega
        )));
    }
    let position = -frf.records[sel].phase / (2.0 * beta_sel);
    let curve: Vec<LocationPoint> = frf
        .records
        .iter()
        .zip(&table)
        .map(|(r, e)| LocationPoint {
            omega: r.omega,
            position_m: -r.phase / (2.0 * e.beta),
            gamma_mag: r.h_mag * (2.0 * e.alpha * position).exp(),
        })
        .collect();
    let mut flags = vec!["gamma_phase_not_estimated".to_string()];
    if !(position > 0.0) {
        flags.push("non_positive_position".to_string());
    }
    let bound = error_bound(
        opts.phi_gamma_max,
        prop.vp_max(),
        position.abs(),
        frf.records[sel].omega,
    );
    Ok(GenericLocation {
        report: FaultReport {
            method: LocationMethod::Generic,
            position_m: position,
            position_error_bound_rel: Some(bound),
            gamma_mag: GammaMagnitude::PerFrequency(curve.iter().map(|p| p.gamma_mag).collect()),
            gamma_phase_deg: None,
            flags,
        },
        curve,
    })
}

/// Joint solution for a frequency-independent reflector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantGammaSolution {
    pub gamma_mag: f64,
    /// Wrapped to (−π, π].
    pub gamma_phase: f64,
    pub position_m: f64,
    /// Raw second unknown before wrapping.
    pub gamma_phase_unwrapped: f64,
}

/// Unweighted OLS of [ln Ĥ; φ̂_H] = M·[ln Γ; φ_Γ; l] with rows (1, 0, −2α̂)
/// and (0, 1, −2β̂).
pub fn solve_constant_gamma(frf: &FrfEstimate, prop: &PropagationTable) -> Result<ConstantGammaSolution> {
    let n = frf.len();
    if n < 2 {
        return Err(SfwrError::SingularSystem(format!(
            "need at least 2 frequencies, got {n}"
        )));
    }
    let mut frf = frf.clone();
    frf.enforce_phase_continuity();
    let table = prop.aligned(&frf)?;
    let mut m = DMatrix::<f64>::zeros(2 * n, 3);
    let mut rhs = DVector::<f64>::zeros(2 * n);
    for (i, (r, e)) in frf.records.iter().zip(&table).enumerate() {
        if !(r.h_mag > 0.0 && r.h_mag.is_finite()) {
            return Err(SfwrError::InvalidMagnitude {
                omega: r.omega,
                value: r.h_mag,
            });
        }
        m[(i, 0)] = 1.0;
        m[(i, 2)] = -2.0 * e.alpha;
        rhs[i] = r.h_mag.ln();
        m[(n + i, 1)] = 1.0;
        m[(n + i, 2)] = -2.0 * e.beta;
        rhs[n + i] = r.phase;
    }
    let svd = m.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(SfwrError::SingularSystem(format!(
            "design matrix is rank deficient (singular values {smin:e} / {smax:e})"
        )));
    }
    let x = svd
        .solve(&rhs, 0.0)
        .map_err(|e| SfwrError::SingularSystem(e.to_string()))?;
    Ok(ConstantGammaSolution {
        gamma_mag: x[0].exp(),
        gamma_phase: wrap(x[1]),
        position_m: x[2],
        gamma_phase_unwrapped: x[1],
    })
}

/// [`solve_constant_gamma`] packaged as a report.
pub fn locate_constant_gamma(frf: &FrfEstimate, prop: &PropagationTable) -> Result<FaultReport> {
    let s = solve_constant_gamma(frf, prop)?;
    let mut flags = Vec::new();
    if s.gamma_mag < NEAR_MATCHED_THRESHOLD {
        flags.push("near_matched".to_string());
        flags.push("gamma_phase_unreliable".to_string());
    }
    if !(s.position_m > 0.0) {
        flags.push("non_positive_position".to_string());
    }
    Ok(FaultReport {
        method: LocationMethod::ConstantGamma,
        position_m: s.position_m,
        position_error_bound_rel: None,
        gamma_mag: GammaMagnitude::Scalar(s.gamma_mag),
        gamma_phase_deg: Some(s.gamma_phase.to_degrees()),
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frf_estimator::{FrfRecord, SineFitResult};
    use crate::line_model::RlgcProfile;

    fn dummy_fit() -> SineFitResult {
        SineFitResult {
            amplitude: 1.0,
            phase: 0.0,
            offset: 0.0,
            trend_slope: 0.0,
            residual_rms: 0.0,
            condition: 1.0,
        }
    }

    pub(crate) fn synthetic(prop: &PropagationTable, gamma: f64, phi: f64, l: f64) -> FrfEstimate {
        FrfEstimate {
            sample_rate_hz: 1e9,
            records: prop
                .entries
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let phase = phi - 2.0 * e.beta * l;
                    FrfRecord {
                        index: i,
                        omega: e.omega,
                        h_mag: gamma * (-2.0 * e.alpha * l).exp(),
                        phase,
                        tau_d: -phase / e.omega,
                        raw_lag_samples: 0,
                        transmitted: dummy_fit(),
                        reflected: dummy_fit(),
                    }
                })
                .collect(),
        }
    }

    fn grid() -> Vec<f64> {
        (0..101).map(|i| 2.0 * PI * (1e7 + 5e5 * i as f64)).collect()
    }

    fn model_table() -> PropagationTable {
        PropagationTable::from_line(&RlgcProfile::calibrated_rg58(), &grid())
    }

    #[test]
    fn characterization_inverts_exactly() {
        let prop = model_table();
        let frf = synthetic(&prop, 1.0, 0.0, 50.0);
        let est = characterize_reference(&frf, 50.0).unwrap();
        for (a, b) in est.entries.iter().zip(&prop.entries) {
            assert!((a.alpha / b.alpha - 1.0).abs() < 1e-12);
            assert!((a.beta / b.beta - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_e_gives_one_percent_per_metre() {
        let prop = PropagationTable {
            reference_length: None,
            entries: vec![PropagationEntry {
                omega: 1e8,
                alpha: 0.01,
                beta: 1.0,
            }],
        };
        let frf = synthetic(&prop, 1.0, 0.0, 50.0);
        let est = characterize_reference(&frf, 50.0).unwrap();
        assert!((est.entries[0].alpha - 0.01).abs() < 1e-15);
    }

    #[test]
    fn known_termination_is_divided_out() {
        let prop = model_table();
        let frf = synthetic(&prop, 0.5, 2.0, 50.0);
        let term = vec![Complex64::from_polar(0.5, 2.0); frf.len()];
        let est = characterize_with_termination(&frf, 50.0, &term).unwrap();
        for (a, b) in est.entries.iter().zip(&prop.entries) {
            assert!((a.alpha / b.alpha - 1.0).abs() < 1e-10);
            assert!((a.beta / b.beta - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_positive_magnitude_rejected() {
        let prop = model_table();
        let mut frf = synthetic(&prop, 1.0, 0.0, 50.0);
        frf.records[3].h_mag = 0.0;
        assert!(matches!(
            characterize_reference(&frf, 50.0),
            Err(SfwrError::InvalidMagnitude { .. })
        ));
    }

    #[test]
    fn error_bound_examples() {
        let u = error_bound(2.0 * PI, 2e8, 180.0, 2.0 * PI * 55.6e6);
        assert!((u - 0.01).abs() < 1e-4, "{u}");
        assert_eq!(error_bound(0.0, 2e8, 180.0, 1e8), 0.0);
    }

    #[test]
    fn generic_location_of_pure_delay_is_exact() {
        let prop = model_table();
        let frf = synthetic(&prop, 0.8, 0.0, 70.0);
        let loc = locate_generic(&frf, &prop, &GenericOptions::default()).unwrap();
        assert!((loc.report.position_m / 70.0 - 1.0).abs() < 1e-9);
        for p in &loc.curve {
            assert!((p.gamma_mag - 0.8).abs() < 1e-9);
            assert!((p.position_m / 70.0 - 1.0).abs() < 1e-9);
        }
        assert!(loc.report.gamma_phase_deg.is_none());
    }

    #[test]
    fn generic_needs_selected_frequency_on_grid() {
        let prop = model_table();
        let frf = synthetic(&prop, 0.8, 0.0, 70.0);
        let opts = GenericOptions {
            omega_sel: Some(1.0),
            ..Default::default()
        };
        assert!(matches!(
            locate_generic(&frf, &prop, &opts),
            Err(SfwrError::MissingFrequency { .. })
        ));
    }

    #[test]
    fn constant_gamma_exact_recovery() {
        let prop = model_table();
        let frf = synthetic(&prop, 0.5, 0.0, 70.0);
        let s = solve_constant_gamma(&frf, &prop).unwrap();
        assert!((s.gamma_mag / 0.5 - 1.0).abs() < 1e-10);
        assert!(s.gamma_phase.abs() < 1e-10);
        assert!((s.position_m / 70.0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_gamma_wraps_phase() {
        let prop = model_table();
        let frf = synthetic(&prop, 0.9, PI, 30.0);
        let r = locate_constant_gamma(&frf, &prop).unwrap();
        let deg = r.gamma_phase_deg.unwrap();
        assert!(deg > -180.0 && deg <= 180.0);
        assert!((deg.abs() - 180.0).abs() < 1e-8);
    }

    #[test]
    fn near_matched_is_flagged() {
        let prop = model_table();
        let frf = synthetic(&prop, 0.01, 0.3, 100.0);
        let r = locate_constant_gamma(&frf, &prop).unwrap();
        assert!(r.flags.iter().any(|f| f == "near_matched"));
    }

    #[test]
    fn flat_propagation_is_singular() {
        let prop = PropagationTable {
            reference_length: None,
            entries: (0..5)
                .map(|i| PropagationEntry {
                    omega: 1e7 * (i + 1) as f64,
                    alpha: 0.01,
                    beta: 0.2,
                })
                .collect(),
        };
        let frf = synthetic(&prop, 0.5, 0.0, 10.0);
        assert!(matches!(
            solve_constant_gamma(&frf, &prop),
            Err(SfwrError::SingularSystem(_))
        ));
        let one = PropagationTable {
            reference_length: None,
            entries: prop.entries[..1].to_vec(),
        };
        let frf1 = synthetic(&one, 0.5, 0.0, 10.0);
        assert!(solve_constant_gamma(&frf1, &one).is_err());
    }

    #[test]
    fn report_json_fields() {
        let prop = model_table();
        let frf = synthetic(&prop, 0.5, 0.0, 70.0);
        let r = locate_constant_gamma(&frf, &prop).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in [
            "method",
            "position_m",
            "position_error_bound_rel",
            "gamma_mag",
            "gamma_phase_deg",
            "flags",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["method"], "constant_gamma");
        assert!(v["gamma_mag"].is_number());
    }
}
