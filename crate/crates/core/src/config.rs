//! Experiment configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ArrayGeometry, UserProfile};
use crate::combiner::Architecture;
use crate::energy::{PowerAccounting, PowerProfile};
use crate::error::{Error, Result};
use crate::receivers::{Method, Receiver};
use crate::scenario::{self, Placement, Scenario};
use crate::scheduling::{SubarrayBounds, SubsetMode};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScenarioSpec {
    /// Uniform VR starts and AoAs.
    Random(Placement),
    /// Evenly staggered VR starts.
    PartialOverlap(Placement),
    /// Disjoint VRs on separate subarrays.
    NoOverlap(Placement),
    /// One profile shared by every user.
    CompletelyOverlapped(Placement),
    Explicit { users: Vec<UserProfile> },
}

impl ScenarioSpec {
    pub fn num_users(&self) -> usize {
        match self {
            ScenarioSpec::Random(p)
            | ScenarioSpec::PartialOverlap(p)
            | ScenarioSpec::NoOverlap(p)
            | ScenarioSpec::CompletelyOverlapped(p) => p.num_users,
            ScenarioSpec::Explicit { users } => users.len(),
        }
    }

    pub fn build(&self, geometry: &ArrayGeometry, seed: u64) -> Result<Scenario> {
        match self {
            ScenarioSpec::Random(p) => scenario::random_placement(geometry, p, seed),
            ScenarioSpec::PartialOverlap(p) => scenario::partial_overlap(geometry, p, seed),
            ScenarioSpec::NoOverlap(p) => scenario::no_overlap(geometry, p, seed),
            ScenarioSpec::CompletelyOverlapped(p) => scenario::completely_overlapped(geometry, p, seed),
            ScenarioSpec::Explicit { users } => {
                if users.is_empty() {
                    return Err(Error::config("scenario.users", "at least one user is required"));
                }
                Scenario::new(*geometry, users.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Greedy user selection, all subarrays on.
    #[default]
    User,
    /// Greedy joint user and subarray selection.
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    #[serde(default)]
    pub algorithm: Algorithm,
    pub n_u: usize,
    pub sub_min: Option<usize>,
    pub sub_max: Option<usize>,
    #[serde(default)]
    pub mode: SubsetMode,
}

impl ScheduleConfig {
    pub fn bounds(&self) -> Option<SubarrayBounds> {
        match self.algorithm {
            Algorithm::User => None,
            Algorithm::Joint => Some(SubarrayBounds {
                min: self.sub_min.unwrap_or(1),
                max: self.sub_max.unwrap_or(1),
            }),
        }
    }
}

fn default_seed() -> u64 {
    1
}

fn default_trials() -> usize {
    1000
}

fn default_bandwidth() -> f64 {
    20e6
}

fn default_methods() -> Vec<Method> {
    vec![Method::MonteCarlo, Method::ClosedForm]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub snr_db: Vec<f64>,
    pub receivers: Vec<Receiver>,
    pub architectures: Vec<Architecture>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default)]
    pub power_accounting: PowerAccounting,
    pub geometry: ArrayGeometry,
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub power: PowerProfile,
    pub schedule: Option<ScheduleConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let field = e
                .span()
                .and_then(|s| text.get(..s.start))
                .and_then(|head| head.lines().last())
                .map(|l| l.split('=').next().unwrap_or("").trim().trim_matches(['[', ']']).to_string())
                .filter(|f| !f.is_empty())
                .unwrap_or_else(|| "<document>".into());
            Error::config(field, message)
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Field-level checks that need no channel construction.
    pub fn validate(&self) -> Result<()> {
        if self.experiment.is_empty() || self.experiment.contains([',', '"', '\n']) {
            return Err(Error::config("experiment", "must be a non-empty name without commas or quotes"));
        }
        self.geometry
            .validate()
            .map_err(|e| Error::config("geometry", e.to_string()))?;
        if self.snr_db.is_empty() {
            return Err(Error::config("snr_db", "at least one SNR point is required"));
        }
        if let Some(bad) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::config("snr_db", format!("non-finite SNR {bad}")));
        }
        if self.receivers.is_empty() {
            return Err(Error::config("receivers", "at least one receiver is required"));
        }
        if self.architectures.is_empty() {
            return Err(Error::config("architectures", "at least one architecture is required"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "at least one method is required"));
        }
        if self.methods.contains(&Method::MonteCarlo) && self.trials == 0 {
            return Err(Error::config("trials", "Monte-Carlo needs at least one trial"));
        }
        if self.methods.contains(&Method::Exact) && !matches!(self.scenario, ScenarioSpec::CompletelyOverlapped(_)) {
            return Err(Error::config(
                "methods",
                "the exact method applies only to the completely-overlapped scenario",
            ));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::config("bandwidth_hz", "must be positive"));
        }
        self.power.validate()?;
        if self.scenario.num_users() == 0 {
            return Err(Error::config("scenario.num_users", "must be positive"));
        }
        if let Some(s) = &self.schedule {
            let k = self.scenario.num_users();
            if s.n_u > k {
                return Err(Error::config("schedule.n_u", format!("N_u = {} exceeds K = {k}", s.n_u)));
            }
            if let Some(b) = s.bounds() {
                let n = self.geometry.num_subarrays;
                if b.min == 0 || b.min > b.max || b.max > n {
                    return Err(Error::config(
                        "schedule.sub_min",
                        format!("need 1 <= sub_min <= sub_max <= {n}, got {} / {}", b.min, b.max),
                    ));
                }
                if s.n_u * b.min > n {
                    return Err(Error::config(
                        "schedule.n_u",
                        format!("n_u · sub_min = {} exceeds N = {n}", s.n_u * b.min),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Validate, then draw the scenario from the master seed.
    pub fn scenario(&self) -> Result<Scenario> {
        self.validate()?;
        self.scenario.build(&self.geometry, self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
experiment = "desk"
snr_db = [0.0, 10.0]
receivers = ["mrc", "lmmse"]
architectures = ["phase-shifter", "on-off"]

[geometry]
num_antennas = 64
num_subarrays = 8

[scenario]
kind = "random"
num_users = 3
vr_length = 16
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.seed, 1);
        assert_eq!(c.trials, 1000);
        assert_eq!(c.methods, default_methods());
        assert_eq!(c.geometry.element_spacing, 0.5);
        assert_eq!(c.power, PowerProfile::default());
        assert_eq!(c.power_accounting, PowerAccounting::Flat);
        let ScenarioSpec::Random(p) = c.scenario else { panic!() };
        assert_eq!(p.angular_std, crate::scenario::DEFAULT_ANGULAR_STD);
        c.scenario().unwrap();
    }

    #[test]
    fn errors_name_the_field() {
        let bad = MINIMAL.replace("num_subarrays = 8", "num_subarrays = 7");
        let e = ExperimentConfig::from_toml(&bad).unwrap().validate().unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "geometry"), "{e}");

        let bad = MINIMAL.replace("snr_db = [0.0, 10.0]", "snr_db = []");
        let e = ExperimentConfig::from_toml(&bad).unwrap().validate().unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "snr_db"));

        let bad = MINIMAL.replace("\"mrc\"", "\"zf\"");
        let e = ExperimentConfig::from_toml(&bad).unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "receivers"), "{e}");

        let bad = format!("{MINIMAL}\n[schedule]\nn_u = 4\n");
        let e = ExperimentConfig::from_toml(&bad).unwrap().validate().unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "schedule.n_u"));
    }

    #[test]
    fn closed_form_only_allows_zero_trials() {
        let text = MINIMAL.replace("snr_db", "trials = 0\nmethods = [\"closed-form\"]\nsnr_db");
        ExperimentConfig::from_toml(&text).unwrap().validate().unwrap();
        let text = MINIMAL.replace("snr_db", "trials = 0\nsnr_db");
        assert!(ExperimentConfig::from_toml(&text).unwrap().validate().is_err());
    }

    #[test]
    fn explicit_users_round_trip() {
        let text = MINIMAL.replace(
            "kind = \"random\"\nnum_users = 3\nvr_length = 16",
            "kind = \"explicit\"\nusers = [{ mean_aoa = 0.1, angular_std = 0.2, vr_start = 0, vr_length = 8 }]",
        );
        let c = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(c.scenario().unwrap().num_users(), 1);
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
