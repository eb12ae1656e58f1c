//! Rayleigh block-fading success probabilities of the primary and secondary
//! links.
//!
//! A link with exponentially distributed gain `h` (mean `σ`) is in outage
//! when the target spectral efficiency exceeds `log2(1 + P·h / noise)`. The
//! success probability is therefore `exp(−noise·(2^R − 1) / (P·σ))`.

use crate::error::Result;
use crate::params::{NoiseScaling, SystemParams};

/// Gain below which the primary link is in outage.
pub fn primary_gain_threshold(params: &SystemParams) -> f64 {
    let noise = params.noise_psd_w_per_hz * params.bandwidth_hz;
    noise * (2f64.powf(params.primary_spectral_efficiency()) - 1.0) / params.primary_power_w
}

/// Gain below which a secondary transmission spending `packets` energy
/// packets is in outage. Infinite for a silent slot.
pub fn secondary_gain_threshold(params: &SystemParams, packets: usize) -> f64 {
    if packets == 0 {
        return f64::INFINITY;
    }
    let noise = match params.noise_scaling {
        NoiseScaling::Literal => params.noise_psd_w_per_hz,
        NoiseScaling::Bandwidth => params.noise_psd_w_per_hz * params.bandwidth_hz,
    };
    let energy = packets as f64 * params.energy_per_packet_j;
    noise * params.transmit_duration_s() * (2f64.powf(params.secondary_spectral_efficiency()) - 1.0)
        / energy
}

/// Per-slot probability that a primary transmission is decoded, which is
/// also the service rate of the primary queue.
pub fn primary_success_prob(params: &SystemParams) -> Result<f64> {
    params.validate()?;
    Ok((-primary_gain_threshold(params) / params.gain_ppd).exp())
}

/// Probability that a secondary packet sent with `packets` energy packets is
/// decoded. Zero when nothing is spent.
pub fn secondary_success_prob(params: &SystemParams, packets: usize) -> Result<f64> {
    params.validate()?;
    Ok(secondary_success_unchecked(params, packets))
}

/// Success probabilities for every spend level `0..=energy_capacity`.
pub fn secondary_success_table(params: &SystemParams) -> Result<Vec<f64>> {
    params.validate()?;
    Ok((0..params.num_states())
        .map(|j| secondary_success_unchecked(params, j))
        .collect())
}

fn secondary_success_unchecked(params: &SystemParams, packets: usize) -> f64 {
    if packets == 0 {
        return 0.0;
    }
    (-secondary_gain_threshold(params, packets) / params.gain_ssd).exp()
}
