//! Uplink hardware power and energy efficiency.

use serde::{Deserialize, Serialize};

use crate::combiner::Architecture;
use crate::error::{Error, Result};

/// Component power draws in mW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerProfile {
    pub p_phase_shifter: f64,
    pub p_switch: f64,
    pub p_lna: f64,
    pub p_rf_chain: f64,
    pub p_adc: f64,
    pub p_baseband: f64,
}

impl Default for PowerProfile {
    fn default() -> Self {
        PowerProfile {
            p_phase_shifter: 20.0,
            p_switch: 10.0,
            p_lna: 20.0,
            p_rf_chain: 40.0,
            p_adc: 200.0,
            p_baseband: 200.0,
        }
    }
}

impl PowerProfile {
    pub fn zero() -> Self {
        PowerProfile {
            p_phase_shifter: 0.0,
            p_switch: 0.0,
            p_lna: 0.0,
            p_rf_chain: 0.0,
            p_adc: 0.0,
            p_baseband: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("p_phase_shifter", self.p_phase_shifter),
            ("p_switch", self.p_switch),
            ("p_lna", self.p_lna),
            ("p_rf_chain", self.p_rf_chain),
            ("p_adc", self.p_adc),
            ("p_baseband", self.p_baseband),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("power.{name}"), format!("must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Power of the per-antenna analog element for an architecture.
    pub fn per_antenna(&self, architecture: Architecture) -> f64 {
        match architecture {
            Architecture::PhaseShifter | Architecture::RandomPhase => self.p_phase_shifter,
            Architecture::OnOffSwitch => self.p_switch,
        }
    }

    /// LNA + RF chain + ADC.
    pub fn per_chain(&self) -> f64 {
        self.p_lna + self.p_rf_chain + self.p_adc
    }
}

/// How disabled subarrays are charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerAccounting {
    /// `M p_elem + N (p_lna + p_rf + p_adc) + p_bb` regardless of activity.
    #[default]
    Flat,
    /// Only active subarrays pay for their `M/N` elements and their chain.
    Gated,
}

/// Uplink power in mW. `active_subarrays` defaults to all `N`.
pub fn uplink_power(
    architecture: Architecture,
    num_antennas: usize,
    num_subarrays: usize,
    profile: &PowerProfile,
    active_subarrays: Option<usize>,
    accounting: PowerAccounting,
) -> f64 {
    let active = active_subarrays.unwrap_or(num_subarrays).min(num_subarrays);
    let elem = profile.per_antenna(architecture);
    match accounting {
        PowerAccounting::Flat => {
            num_antennas as f64 * elem + num_subarrays as f64 * profile.per_chain() + profile.p_baseband
        }
        PowerAccounting::Gated => {
            let per_sub = (num_antennas / num_subarrays.max(1)) as f64;
            active as f64 * (per_sub * elem + profile.per_chain()) + profile.p_baseband
        }
    }
}

/// `η = bandwidth · sum_se / P` in bits/Joule, with `P` given in mW.
pub fn energy_efficiency(sum_se: f64, power_mw: f64, bandwidth_hz: f64) -> Result<f64> {
    if power_mw.is_nan() || power_mw <= 0.0 {
        return Err(Error::Domain(format!("power must be positive, got {power_mw} mW")));
    }
    Ok(bandwidth_hz * sum_se / (power_mw * 1e-3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_scale_power() {
        let p = PowerProfile::default();
        let ps = uplink_power(Architecture::PhaseShifter, 1024, 128, &p, None, PowerAccounting::Flat);
        let sw = uplink_power(Architecture::OnOffSwitch, 1024, 128, &p, None, PowerAccounting::Flat);
        assert_eq!(ps, 53_960.0);
        assert_eq!(sw, 43_720.0);
        assert!((sw / ps - 0.810).abs() < 1e-3);
        assert_eq!(uplink_power(Architecture::PhaseShifter, 1024, 128, &PowerProfile::zero(), None, PowerAccounting::Flat), 0.0);
    }

    #[test]
    fn gated_equals_flat_when_everything_is_on() {
        let p = PowerProfile::default();
        for arch in [Architecture::PhaseShifter, Architecture::OnOffSwitch] {
            let flat = uplink_power(arch, 256, 32, &p, None, PowerAccounting::Flat);
            let gated = uplink_power(arch, 256, 32, &p, Some(32), PowerAccounting::Gated);
            assert_eq!(flat, gated);
            let half = uplink_power(arch, 256, 32, &p, Some(16), PowerAccounting::Gated);
            assert!(half < gated);
        }
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(energy_efficiency(0.0, 100.0, 1e6).unwrap(), 0.0);
        assert!((energy_efficiency(1.0, 1000.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(energy_efficiency(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn onoff_more_efficient_at_equal_se() {
        let p = PowerProfile::default();
        let se = 100.0;
        let ps = energy_efficiency(se, uplink_power(Architecture::PhaseShifter, 1024, 128, &p, None, PowerAccounting::Flat), 20e6).unwrap();
        let sw = energy_efficiency(se, uplink_power(Architecture::OnOffSwitch, 1024, 128, &p, None, PowerAccounting::Flat), 20e6).unwrap();
        assert!(sw > ps);
    }

    proptest! {
        #[test]
        fn power_is_monotone(
            m_per in 1usize..16, n in 1usize..64,
            ps in 0.0f64..100.0, sw in 0.0f64..100.0, lna in 0.0f64..100.0,
            rf in 0.0f64..100.0, adc in 0.0f64..500.0, bb in 0.0f64..500.0,
            bump in 0.0f64..50.0,
        ) {
            let prof = PowerProfile { p_phase_shifter: ps, p_switch: sw, p_lna: lna, p_rf_chain: rf, p_adc: adc, p_baseband: bb };
            let m = m_per * n;
            for arch in [Architecture::PhaseShifter, Architecture::OnOffSwitch] {
                let base = uplink_power(arch, m, n, &prof, None, PowerAccounting::Flat);
                prop_assert!(uplink_power(arch, m + n, n, &prof, None, PowerAccounting::Flat) >= base);
                prop_assert!(uplink_power(arch, 2 * m, 2 * n, &prof, None, PowerAccounting::Flat) >= base);
                let mut bigger = prof;
                bigger.p_adc += bump;
                bigger.p_switch += bump;
                bigger.p_phase_shifter += bump;
                prop_assert!(uplink_power(arch, m, n, &bigger, None, PowerAccounting::Flat) >= base);
            }
            if sw < ps {
                let a = uplink_power(Architecture::OnOffSwitch, m, n, &prof, None, PowerAccounting::Flat);
                let b = uplink_power(Architecture::PhaseShifter, m, n, &prof, None, PowerAccounting::Flat);
                prop_assert!(a < b);
            }
        }
    }
}
