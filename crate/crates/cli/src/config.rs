use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sfwr::channel_sim::NoiseSpec;
use sfwr::experiments::{Lab, PropagationSource, Scenario, Tolerances};
use sfwr::frf_estimator::EstimatorConfig;
use sfwr::line_model::{Line, RlgcProfile};
use sfwr::waveform::{DesignRequest, GridSpec, SfwrPlan, DEFAULT_SAMPLE_RATE, DEFAULT_STEP_HZ};

pub const DEFAULT_TOLERANCES: &str = include_str!("../tolerances.toml");

/// Plan-design inputs; any field may also come from the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub l_min: Option<f64>,
    pub l_max: Option<f64>,
    pub vp: Option<f64>,
    pub ur: Option<f64>,
    pub phi_gamma_max: Option<f64>,
    pub sample_rate_hz: Option<f64>,
    pub step_hz: Option<f64>,
    pub count: Option<usize>,
}

impl DesignSection {
    /// Fields set in `other` win.
    pub fn overlay(&self, other: &DesignSection) -> DesignSection {
        DesignSection {
            l_min: other.l_min.or(self.l_min),
            l_max: other.l_max.or(self.l_max),
            vp: other.vp.or(self.vp),
            ur: other.ur.or(self.ur),
            phi_gamma_max: other.phi_gamma_max.or(self.phi_gamma_max),
            sample_rate_hz: other.sample_rate_hz.or(self.sample_rate_hz),
            step_hz: other.step_hz.or(self.step_hz),
            count: other.count.or(self.count),
        }
    }

    pub fn request(&self) -> Result<DesignRequest> {
        let need = |v: Option<f64>, name: &str| v.with_context(|| format!("missing design parameter {name}"));
        let mut req = DesignRequest::new(
            need(self.l_min, "l_min")?,
            need(self.l_max, "l_max")?,
            need(self.vp, "vp")?,
            need(self.ur, "ur")?,
        );
        if let Some(p) = self.phi_gamma_max {
            req.phi_gamma_max = p;
        }
        req.sample_rate_hz = self.sample_rate_hz.unwrap_or(DEFAULT_SAMPLE_RATE);
        req.grid = match (self.step_hz, self.count) {
            (Some(_), Some(_)) => bail!("give either step_hz or count, not both"),
            (_, Some(n)) => GridSpec::Count(n),
            (step, None) => GridSpec::Step(step.unwrap_or(DEFAULT_STEP_HZ)),
        };
        Ok(req)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub std_dev: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Everything a run can be configured with. Missing sections fall back to
/// the calibrated RG58 profile, the 101-tone reference plan and a 50 m open
/// reference cable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: Option<RlgcProfile>,
    pub plan: Option<SfwrPlan>,
    pub scenario: Option<Scenario>,
    pub noise: Option<NoiseSection>,
    pub wrap_tolerance: Option<f64>,
    pub estimator: Option<EstimatorConfig>,
    pub propagation: Option<PropagationSource>,
    pub reference_length: Option<f64>,
    #[serde(default)]
    pub design: DesignSection,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
            }
        }
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario.unwrap_or(Scenario::Reference { length: 50.0 })
    }

    /// Experiment setup, with `seed` replacing the noise seed when given.
    pub fn lab(&self, seed: Option<u64>) -> Result<Lab> {
        let mut lab = Lab::default();
        if let Some(p) = self.profile {
            p.validate()?;
            lab.profile = p;
        }
        if let Some(p) = self.plan {
            p.validate()?;
            lab.plan = p;
        }
        if let Some(t) = self.wrap_tolerance {
            lab.wrap_tolerance = t;
        }
        if let Some(e) = self.estimator {
            lab.estimator = e;
        }
        if let Some(s) = self.propagation {
            lab.propagation = s;
        }
        if let Some(l) = self.reference_length {
            lab.reference_length = l;
        }
        lab.noise = match self.noise {
            Some(n) => Some(NoiseSpec::new(n.std_dev, seed.unwrap_or(n.seed))?),
            None => None,
        };
        Ok(lab)
    }
}

/// Rejects scenarios whose round trip falls outside the plan's reflected
/// window.
pub fn check_in_range(lab: &Lab, scenario: &Scenario) -> Result<()> {
    let (_, position) = scenario.reflector()?;
    let (lo, hi) = lab.plan.delay_range();
    let vp = lab.profile.propagation(lab.plan.omega(0)).vp;
    let delay = 2.0 * position / vp;
    if delay < lo || delay > hi {
        bail!(
            "reflector at {position} m gives a {:.1} ns round trip, outside the plan's [{:.1}, {:.1}] ns window",
            delay * 1e9,
            lo * 1e9,
            hi * 1e9
        );
    }
    Ok(())
}

pub fn tolerances(path: Option<&Path>) -> Result<Tolerances> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => DEFAULT_TOLERANCES.to_string(),
    };
    toml::from_str(&text).context("parsing tolerances")
}
