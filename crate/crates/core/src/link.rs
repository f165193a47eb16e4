//! Multi-span link description and the normalized signal power profile.
//!
//! A link is a chain of fiber spans, each followed by an amplifier. The
//! amplifiers either restore the span loss exactly (constant gain) or hold
//! the total output power at the launch value (constant power), in which
//! case accumulated ASE progressively depletes the signal share.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::units;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainMode {
    /// Amplifier gain equals the preceding span loss.
    Gain,
    /// Amplifier output power (signal plus ASE) equals the launch power.
    Power,
}

/// How much ASE an amplifier of log-gain `g` adds, in units of n_sp·ħω₀·B.
///
/// `Lumped` is the physical discrete-amplifier value e^g − 1. `Distributed`
/// uses g itself, which is what one obtains by treating the gain as a Dirac
/// comb inside a distributed-noise model; it underestimates lumped ASE by
/// (e^g − 1)/g.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseLoading {
    Lumped,
    Distributed,
}

impl NoiseLoading {
    pub fn factor(self, log_gain: f64) -> f64 {
        match self {
            NoiseLoading::Lumped => log_gain.exp_m1(),
            NoiseLoading::Distributed => log_gain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberSpan {
    /// m
    pub length: f64,
    /// Power attenuation, 1/m.
    pub alpha: f64,
    /// s²/m
    pub beta2: f64,
    /// 1/(W·m)
    pub gamma: f64,
    /// Spontaneous-emission factor of the amplifier closing this span.
    pub n_sp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub spans: Vec<FiberSpan>,
    /// Bd
    pub symbol_rate: f64,
    /// Hz
    pub channel_spacing: f64,
    /// Channel indices relative to the channel of interest; must contain 0.
    pub channels: Vec<i32>,
    /// m
    pub wavelength: f64,
    pub gain_mode: GainMode,
    pub noise_loading: NoiseLoading,
    /// Bandwidth (Hz) over which amplifier ASE competes with the signal for
    /// output power in constant-power mode.
    pub ase_bandwidth: f64,
}

impl Link {
    pub fn validate(&self) -> Result<()> {
        if self.spans.is_empty() {
            return Err(Error::InvalidLink("link has no spans".into()));
        }
        for (i, s) in self.spans.iter().enumerate() {
            let ok = s.length > 0.0
                && s.alpha >= 0.0
                && s.n_sp >= 0.0
                && s.length.is_finite()
                && s.beta2.is_finite()
                && s.gamma.is_finite()
                && s.gamma >= 0.0;
            if !ok {
                return Err(Error::InvalidLink(format!("span {} has invalid parameters", i + 1)));
            }
        }
        if !(self.symbol_rate > 0.0) || !(self.wavelength > 0.0) {
            return Err(Error::InvalidLink("symbol rate and wavelength must be positive".into()));
        }
        if !self.channels.contains(&0) {
            return Err(Error::InvalidLink("channel plan must contain the channel of interest (0)".into()));
        }
        let mut sorted = self.channels.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.channels.len() {
            return Err(Error::InvalidLink("duplicate channel index".into()));
        }
        if self.channels.len() > 1 && self.channel_spacing < self.symbol_rate {
            return Err(Error::ChannelOverlap {
                spacing_hz: self.channel_spacing,
                symbol_rate: self.symbol_rate,
            });
        }
        if self.spans.iter().any(|s| s.gamma != self.spans[0].gamma) {
            return Err(Error::InvalidLink("spans must share one nonlinear coefficient".into()));
        }
        if self.gain_mode == GainMode::Power && !(self.ase_bandwidth > 0.0) {
            return Err(Error::InvalidLink("constant-power mode needs a positive ASE bandwidth".into()));
        }
        Ok(())
    }

    pub fn symbol_period(&self) -> f64 {
        1.0 / self.symbol_rate
    }

    /// Angular offset of channel `s` from the channel of interest.
    pub fn channel_offset(&self, s: i32) -> f64 {
        2.0 * PI * self.channel_spacing * s as f64
    }

    pub fn has_channel(&self, s: i32) -> bool {
        self.channels.contains(&s)
    }

    pub fn total_length(&self) -> f64 {
        self.spans.iter().map(|s| s.length).sum()
    }

    pub fn quantum_noise_variance(&self) -> f64 {
        units::quantum_noise_variance(self.wavelength, self.symbol_rate)
    }

    /// Per-span profile at per-channel launch power `power` (W, both
    /// polarizations).
    pub fn profile(&self, power: f64) -> PowerProfile {
        PowerProfile::new(self, power)
    }

    /// Replace every span's γ (used by the γ = 0 analytic limit).
    pub fn with_gamma(&self, gamma: f64) -> Link {
        let mut l = self.clone();
        l.spans.iter_mut().for_each(|s| s.gamma = gamma);
        l
    }

    pub fn with_nsp(&self, n_sp: f64) -> Link {
        let mut l = self.clone();
        l.spans.iter_mut().for_each(|s| s.n_sp = n_sp);
        l
    }
}

/// Build `count` channel indices centred on the channel of interest. For an
/// even count the extra channel sits above it.
pub fn centred_channels(count: usize) -> Vec<i32> {
    let count = count.max(1) as i32;
    let low = -(count - 1) / 2;
    (low..low + count).collect()
}

/// Quantities of span n (1-based in the physics, 0-based in the vector).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanProfile {
    pub z_start: f64,
    pub length: f64,
    pub alpha: f64,
    pub beta2: f64,
    pub gamma: f64,
    /// Accumulated ∫β₂ dz up to the start of the span, s².
    pub dispersion_before: f64,
    /// Span loss α·L in nepers (power).
    pub loss: f64,
    /// Amplifier log-gain.
    pub gain: f64,
    /// Signal depletion at this amplifier, loss − gain.
    pub depletion: f64,
    /// Cumulative depletion of all amplifiers before this span.
    pub depletion_before: f64,
    /// Cumulative depletion including this span's amplifier.
    pub depletion_after: f64,
    /// Normalized noise added by this span's amplifier.
    pub noise_added: f64,
    /// Normalized noise already present while propagating in this span.
    pub noise_present: f64,
}

impl SpanProfile {
    pub fn z_end(&self) -> f64 {
        self.z_start + self.length
    }

    /// e^{-αL}
    pub fn field_power_ratio(&self) -> f64 {
        (-self.loss).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    pub spans: Vec<SpanProfile>,
    pub launch_power: f64,
}

impl PowerProfile {
    fn new(link: &Link, power: f64) -> PowerProfile {
        let hnu = units::HBAR * units::carrier_angular_frequency(link.wavelength);
        let total_power = power * link.channels.len() as f64;
        let mut spans = Vec::with_capacity(link.spans.len());
        let mut z = 0.0;
        let mut dispersion = 0.0;
        let mut depletion_before = 0.0;
        let mut noise_present = 0.0;
        for s in &link.spans {
            let loss = s.alpha * s.length;
            let depletion = match link.gain_mode {
                GainMode::Gain => 0.0,
                GainMode::Power => {
                    let sigma2 = 2.0 * hnu * s.n_sp * link.ase_bandwidth;
                    let zeta = sigma2 / total_power;
                    depletion_from_ratio(loss, zeta)
                }
            };
            let gain = loss - depletion;
            let depletion_after = depletion_before + depletion;
            let noise_added = link.noise_loading.factor(gain) * depletion_after.exp() * s.n_sp;
            spans.push(SpanProfile {
                z_start: z,
                length: s.length,
                alpha: s.alpha,
                beta2: s.beta2,
                gamma: s.gamma,
                dispersion_before: dispersion,
                loss,
                gain,
                depletion,
                depletion_before,
                depletion_after,
                noise_added,
                noise_present,
            });
            z += s.length;
            dispersion += s.beta2 * s.length;
            depletion_before = depletion_after;
            noise_present += noise_added;
        }
        PowerProfile { spans, launch_power: power }
    }

    /// Normalized signal power f(z).
    pub fn signal_power(&self, z: f64) -> f64 {
        let s = self.span_at(z);
        (-s.depletion_before - s.alpha * (z - s.z_start)).exp()
    }

    /// Accumulated normalized noise ξ(z) at the channel of interest.
    pub fn noise_at(&self, z: f64) -> f64 {
        let s = self.span_at(z);
        if z >= s.z_end() {
            s.noise_present + s.noise_added
        } else {
            s.noise_present
        }
    }

    /// Accumulated ∫₀^z β₂.
    pub fn dispersion_at(&self, z: f64) -> f64 {
        let s = self.span_at(z);
        s.dispersion_before + s.beta2 * (z - s.z_start)
    }

    fn span_at(&self, z: f64) -> &SpanProfile {
        let idx = self.spans.partition_point(|s| s.z_end() <= z);
        &self.spans[idx.min(self.spans.len() - 1)]
    }

    /// ξ at the receiver, including the last amplifier.
    pub fn received_noise(&self) -> f64 {
        self.spans.iter().map(|s| s.noise_added).sum()
    }

    pub fn total_length(&self) -> f64 {
        self.spans.last().map(|s| s.z_end()).unwrap_or(0.0)
    }
}

/// d = ln((1 + e^l ζ)/(1 + ζ)), written to stay accurate for ζ → 0.
pub fn depletion_from_ratio(loss: f64, zeta: f64) -> f64 {
    (loss.exp() * zeta).ln_1p() - zeta.ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn three_span(mode: GainMode, loading: NoiseLoading) -> Link {
        let alpha = 100f64.ln() / 100e3;
        Link {
            spans: vec![
                FiberSpan { length: 100e3, alpha, beta2: -2.1e-26, gamma: 1.3e-3, n_sp: 1.5811 };
                3
            ],
            symbol_rate: 49e9,
            channel_spacing: 50e9,
            channels: vec![0],
            wavelength: 1550e-9,
            gain_mode: mode,
            noise_loading: loading,
            ase_bandwidth: 4e12,
        }
    }

    #[test]
    fn distributed_loading_reference_values() {
        let p = three_span(GainMode::Gain, NoiseLoading::Distributed).profile(1e-3);
        for s in &p.spans {
            assert_relative_eq!(s.noise_added, 100f64.ln() * 1.5811, max_relative = 1e-12);
            assert_relative_eq!(s.noise_added, 7.281, max_relative = 1e-3);
        }
        let psi: Vec<f64> = p.spans.iter().map(|s| s.noise_present).collect();
        assert_eq!(psi[0], 0.0);
        assert_relative_eq!(psi[1], 7.281, max_relative = 1e-3);
        assert_relative_eq!(psi[2], 14.562, max_relative = 1e-3);
    }

    #[test]
    fn lumped_loading_uses_linear_gain() {
        let p = three_span(GainMode::Gain, NoiseLoading::Lumped).profile(1e-3);
        assert_relative_eq!(p.spans[0].noise_added, 99.0 * 1.5811, max_relative = 1e-12);
    }

    #[test]
    fn gain_mode_restores_power_each_span() {
        let p = three_span(GainMode::Gain, NoiseLoading::Lumped).profile(1e-3);
        for s in &p.spans {
            assert_eq!(s.depletion, 0.0);
            assert_relative_eq!(p.signal_power(s.z_start), 1.0, max_relative = 1e-15);
            assert_relative_eq!(p.signal_power(s.z_end() - 1e-6), 0.01, max_relative = 1e-6);
        }
    }

    #[test]
    fn noise_steps_at_amplifier_outputs() {
        let p = three_span(GainMode::Gain, NoiseLoading::Lumped).profile(1e-3);
        let xi = p.spans[0].noise_added;
        assert_eq!(p.noise_at(50e3), 0.0);
        assert_relative_eq!(p.noise_at(150e3), xi);
        assert_relative_eq!(p.noise_at(300e3), 3.0 * xi);
    }

    #[test]
    fn overlap_is_rejected() {
        let mut link = three_span(GainMode::Gain, NoiseLoading::Lumped);
        link.channels = vec![-1, 0, 1];
        link.channel_spacing = 40e9;
        assert!(matches!(link.validate(), Err(Error::ChannelOverlap { .. })));
        link.channel_spacing = 50e9;
        assert!(link.validate().is_ok());
    }

    #[test]
    fn centred_plans() {
        assert_eq!(centred_channels(1), vec![0]);
        assert_eq!(centred_channels(2), vec![0, 1]);
        assert_eq!(centred_channels(3), vec![-1, 0, 1]);
        assert_eq!(centred_channels(4), vec![-1, 0, 1, 2]);
    }

    proptest! {
        #[test]
        fn depletion_vanishes_with_noise(loss in 0.1f64..8.0, zeta in 0.0f64..1e-12) {
            prop_assert!(depletion_from_ratio(loss, zeta).abs() <= loss.exp() * zeta * 1.0001 + 1e-300);
        }

        #[test]
        fn power_mode_keeps_total_power(loss in 0.5f64..7.0, zeta in 1e-6f64..1e-1) {
            // Output: signal+old noise after loss times gain, plus new noise.
            let d = depletion_from_ratio(loss, zeta);
            let g = loss - d;
            let out = g.exp() * (-loss).exp() + g.exp_m1() * zeta;
            prop_assert!((out - 1.0).abs() < 1e-12);
            prop_assert!(d >= 0.0 && d <= loss);
        }

        #[test]
        fn cumulative_depletion_is_monotone(p_dbm in -15.0f64..5.0) {
            let mut link = three_span(GainMode::Power, NoiseLoading::Lumped);
            link.spans.extend(link.spans.clone());
            let prof = link.profile(units::dbm_to_watts(p_dbm));
            for w in prof.spans.windows(2) {
                prop_assert!(w[1].depletion_before >= w[0].depletion_before);
                prop_assert!(w[1].noise_present > w[0].noise_present);
            }
        }
    }
}
