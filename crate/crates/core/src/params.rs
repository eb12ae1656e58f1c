//! Physical-layer and traffic constants shared by every model component.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How thermal noise enters the secondary-link outage threshold.
///
/// `Literal` uses the noise density alone, which is the published closed
/// form. `Bandwidth` multiplies the density by the channel bandwidth, the
/// same way the primary link does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseScaling {
    #[default]
    Literal,
    Bandwidth,
}

impl NoiseScaling {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseScaling::Literal => "literal",
            NoiseScaling::Bandwidth => "bandwidth",
        }
    }
}

impl std::str::FromStr for NoiseScaling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "literal" => Ok(NoiseScaling::Literal),
            "bandwidth" => Ok(NoiseScaling::Bandwidth),
            other => Err(format!("expected `literal` or `bandwidth`, got `{other}`")),
        }
    }
}

/// All scalar constants of the slotted primary/secondary system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Slot length T in seconds.
    pub slot_duration_s: f64,
    /// Sensing time τ at the start of each slot, strictly shorter than T.
    pub sensing_duration_s: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_w_per_hz: f64,
    /// Data packet length in bits.
    pub packet_bits: f64,
    pub primary_power_w: f64,
    /// Bernoulli arrival probability of primary packets per slot.
    pub primary_arrival_rate: f64,
    /// Poisson rate of energy-packet arrivals; the per-slot mean is this
    /// times `slot_duration_s`.
    pub energy_arrival_rate: f64,
    /// Energy carried by one energy packet, in joules.
    pub energy_per_packet_j: f64,
    /// Buffer capacity in energy packets.
    pub energy_capacity: usize,
    /// Mean channel gain of the primary link.
    pub gain_ppd: f64,
    /// Mean channel gain of the secondary link.
    pub gain_ssd: f64,
    #[serde(default)]
    pub noise_scaling: NoiseScaling,
}

impl Default for SystemParams {
    /// Common numerical-study constants. Primary power, the two arrival
    /// rates and the buffer size are not fixed there; the values below keep
    /// the primary queue stable over most of the usual load range.
    fn default() -> Self {
        SystemParams {
            slot_duration_s: 1.0,
            sensing_duration_s: 0.1,
            bandwidth_hz: 1e3,
            noise_psd_w_per_hz: 1e-6,
            packet_bits: 1e3,
            primary_power_w: 1e-2,
            primary_arrival_rate: 0.4,
            energy_arrival_rate: 1.0,
            energy_per_packet_j: 1e-3,
            energy_capacity: 4,
            gain_ppd: 0.5,
            gain_ssd: 1.0,
            noise_scaling: NoiseScaling::Literal,
        }
    }
}

/// Numeric fields addressable by name, e.g. as sweep axes.
pub const NUMERIC_FIELDS: &[&str] = &[
    "slot_duration_s",
    "sensing_duration_s",
    "bandwidth_hz",
    "noise_psd_w_per_hz",
    "packet_bits",
    "primary_power_w",
    "primary_arrival_rate",
    "energy_arrival_rate",
    "energy_per_packet_j",
    "energy_capacity",
    "gain_ppd",
    "gain_ssd",
];

impl SystemParams {
    /// Every violated constraint, one message per problem. Empty when valid.
    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        let positive = [
            ("slot_duration_s", self.slot_duration_s),
            ("sensing_duration_s", self.sensing_duration_s),
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_psd_w_per_hz", self.noise_psd_w_per_hz),
            ("packet_bits", self.packet_bits),
            ("primary_power_w", self.primary_power_w),
            ("energy_per_packet_j", self.energy_per_packet_j),
            ("gain_ppd", self.gain_ppd),
            ("gain_ssd", self.gain_ssd),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        if self.sensing_duration_s.is_finite()
            && self.slot_duration_s.is_finite()
            && self.sensing_duration_s >= self.slot_duration_s
        {
            out.push(format!(
                "sensing_duration_s ({}) must be strictly less than slot_duration_s ({})",
                self.sensing_duration_s, self.slot_duration_s
            ));
        }
        if !(0.0..=1.0).contains(&self.primary_arrival_rate) {
            out.push(format!(
                "primary_arrival_rate must lie in [0, 1], got {}",
                self.primary_arrival_rate
            ));
        }
        if !(self.energy_arrival_rate.is_finite() && self.energy_arrival_rate >= 0.0) {
            out.push(format!(
                "energy_arrival_rate must be finite and >= 0, got {}",
                self.energy_arrival_rate
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(issues))
        }
    }

    /// Target primary spectral efficiency β/(T·W), bits/s/Hz.
    pub fn primary_spectral_efficiency(&self) -> f64 {
        self.packet_bits / (self.slot_duration_s * self.bandwidth_hz)
    }

    /// Target secondary spectral efficiency β/((T−τ)·W); the secondary only
    /// has the post-sensing part of the slot.
    pub fn secondary_spectral_efficiency(&self) -> f64 {
        self.packet_bits / (self.transmit_duration_s() * self.bandwidth_hz)
    }

    pub fn transmit_duration_s(&self) -> f64 {
        self.slot_duration_s - self.sensing_duration_s
    }

    /// Mean number of energy packets harvested in one slot (λ_e·T).
    pub fn arrivals_per_slot(&self) -> f64 {
        self.energy_arrival_rate * self.slot_duration_s
    }

    /// Number of buffer states, `energy_capacity + 1`.
    pub fn num_states(&self) -> usize {
        self.energy_capacity + 1
    }

    pub fn get(&self, field: &str) -> Option<f64> {
        Some(match field {
            "slot_duration_s" => self.slot_duration_s,
            "sensing_duration_s" => self.sensing_duration_s,
            "bandwidth_hz" => self.bandwidth_hz,
            "noise_psd_w_per_hz" => self.noise_psd_w_per_hz,
            "packet_bits" => self.packet_bits,
            "primary_power_w" => self.primary_power_w,
            "primary_arrival_rate" => self.primary_arrival_rate,
            "energy_arrival_rate" => self.energy_arrival_rate,
            "energy_per_packet_j" => self.energy_per_packet_j,
            "energy_capacity" => self.energy_capacity as f64,
            "gain_ppd" => self.gain_ppd,
            "gain_ssd" => self.gain_ssd,
            _ => return None,
        })
    }

    /// Sets a numeric field by name. `energy_capacity` requires a
    /// non-negative integral value.
    pub fn set(&mut self, field: &str, value: f64) -> Result<(), String> {
        let slot = match field {
            "slot_duration_s" => &mut self.slot_duration_s,
            "sensing_duration_s" => &mut self.sensing_duration_s,
            "bandwidth_hz" => &mut self.bandwidth_hz,
            "noise_psd_w_per_hz" => &mut self.noise_psd_w_per_hz,
            "packet_bits" => &mut self.packet_bits,
            "primary_power_w" => &mut self.primary_power_w,
            "primary_arrival_rate" => &mut self.primary_arrival_rate,
            "energy_arrival_rate" => &mut self.energy_arrival_rate,
            "energy_per_packet_j" => &mut self.energy_per_packet_j,
            "gain_ppd" => &mut self.gain_ppd,
            "gain_ssd" => &mut self.gain_ssd,
            "energy_capacity" => {
                if value < 0.0 || value.fract() != 0.0 || !value.is_finite() {
                    return Err(format!(
                        "energy_capacity must be a non-negative integer, got {value}"
                    ));
                }
                self.energy_capacity = value as usize;
                return Ok(());
            }
            other => {
                return Err(format!(
                    "unknown parameter `{other}`; valid names: {}",
                    NUMERIC_FIELDS.join(", ")
                ))
            }
        };
        *slot = value;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = SystemParams::default();
        assert!(p.issues().is_empty());
        assert_eq!(p.primary_spectral_efficiency(), 1.0);
        assert!((p.secondary_spectral_efficiency() - 10.0 / 9.0).abs() < 1e-15);
        assert!(p.secondary_spectral_efficiency() > p.primary_spectral_efficiency());
    }

    #[test]
    fn sensing_not_shorter_than_slot_names_both_fields() {
        let p = SystemParams {
            sensing_duration_s: 1.0,
            ..SystemParams::default()
        };
        let issues = p.issues();
        assert_eq!(issues.len(), 1);
        assert!(issues[0].contains("sensing_duration_s"));
        assert!(issues[0].contains("slot_duration_s"));
    }

    #[test]
    fn collects_every_issue() {
        let p = SystemParams {
            bandwidth_hz: 0.0,
            primary_arrival_rate: 1.5,
            energy_arrival_rate: -1.0,
            gain_ssd: f64::NAN,
            ..SystemParams::default()
        };
        assert_eq!(p.issues().len(), 4);
        assert!(matches!(p.validate(), Err(Error::InvalidParams(v)) if v.len() == 4));
    }

    #[test]
    fn set_and_get_by_name() {
        let mut p = SystemParams::default();
        for name in NUMERIC_FIELDS {
            p.set(name, 3.0).unwrap();
            assert_eq!(p.get(name), Some(3.0));
        }
        assert!(p.set("energy_capacity", 2.5).is_err());
        assert!(p.set("energy_capacity", -1.0).is_err());
        let err = p.set("bogus", 1.0).unwrap_err();
        assert!(err.contains("gain_ssd"));
    }

    #[test]
    fn noise_scaling_parses() {
        assert_eq!("literal".parse::<NoiseScaling>(), Ok(NoiseScaling::Literal));
        assert_eq!("bandwidth".parse::<NoiseScaling>(), Ok(NoiseScaling::Bandwidth));
        assert!("wide".parse::<NoiseScaling>().is_err());
    }
}
