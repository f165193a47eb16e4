//! Split-step Fourier simulator of the Manakov equation for WDM links with
//! lumped amplifiers, digital backpropagation and a matched-filter receiver.
//!
//! The field is sampled on a cyclic grid of `symbols × samples_per_symbol`
//! points. Channel spectra are built directly in the frequency domain from
//! the DFT of each symbol stream, so the transmitter and receiver are exact
//! inverses of each other in the absence of propagation.

mod experiment;
mod grid;
mod propagate;
mod receiver;
mod waveform;

pub use experiment::{run_experiment, simulated_link, ExperimentResult, PowerSummary, RunRecord, Stat};
pub use grid::{FieldGrid, Spectral};
pub use propagate::{backpropagate, plan_for, propagate, NoiseSource, StepPlan, Workspace};
pub use receiver::{Reception, Receiver};
pub use waveform::{Transmission, Transmitter};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::Link;

/// Where amplifier noise is injected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseBand {
    /// Flat over the whole simulation bandwidth.
    #[default]
    Grid,
    /// Only inside the channel bands (|f − f_s| < R_s/2), the noise the
    /// analytic model accounts for.
    Channels,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StepControl {
    /// Nonlinear phase per step bounded by `max_phase` (rad) at the nominal
    /// total power, with steps no longer than `max_step` (m).
    NonlinearPhase { max_phase: f64, max_step: f64 },
    Fixed { step: f64 },
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl::NonlinearPhase { max_phase: 3e-3, max_step: 1e3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Symbols per channel and polarization; a power of two.
    pub symbols: usize,
    /// Zero selects the smallest power of two that keeps first-order mixing
    /// products from aliasing into the signal band.
    pub samples_per_symbol: usize,
    pub rolloff: f64,
    pub steps: StepControl,
    pub runs: usize,
    pub seed: u64,
    pub dbp: bool,
    pub noise_band: NoiseBand,
    /// Symbols excluded at each end of the cyclic frame.
    pub guard_symbols: usize,
    /// Also run every point without noise to isolate signal-signal
    /// distortion.
    pub noiseless_reference: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            symbols: 1 << 14,
            samples_per_symbol: 0,
            rolloff: 0.001,
            steps: StepControl::default(),
            runs: 4,
            seed: 1,
            dbp: true,
            noise_band: NoiseBand::default(),
            guard_symbols: 256,
            noiseless_reference: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.symbols < 1 << 6 || !self.symbols.is_power_of_two() {
            return Err(Error::Config(format!("symbols must be a power of two ≥ 64, got {}", self.symbols)));
        }
        if !(0.0..=0.1).contains(&self.rolloff) {
            return Err(Error::Config(format!("roll-off {} outside [0, 0.1]", self.rolloff)));
        }
        if 2 * self.guard_symbols >= self.symbols {
            return Err(Error::Config("guard symbols leave nothing to measure".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be positive".into()));
        }
        match self.steps {
            StepControl::NonlinearPhase { max_phase, max_step } if !(max_phase > 0.0 && max_step > 0.0) => {
                Err(Error::Config("step bounds must be positive".into()))
            }
            StepControl::Fixed { step } if !(step > 0.0) => Err(Error::Config("fixed step must be positive".into())),
            _ => Ok(()),
        }
    }

    /// Highest frequency occupied by any channel, Hz.
    fn band_edge(&self, link: &Link) -> f64 {
        let far = link.channels.iter().map(|s| s.unsigned_abs()).max().unwrap_or(0) as f64;
        far * link.channel_spacing + 0.5 * (1.0 + self.rolloff) * link.symbol_rate
    }

    pub fn resolved_samples_per_symbol(&self, link: &Link) -> usize {
        if self.samples_per_symbol > 0 {
            return self.samples_per_symbol;
        }
        // Third-order products of the occupied band reach 3× its edge; they
        // must fold beyond the opposite edge.
        let needed = 4.0 * self.band_edge(link) / link.symbol_rate;
        (needed.ceil() as usize).max(2).next_power_of_two()
    }

    /// Bandwidth over which amplifier noise is loaded, Hz (per polarization).
    pub fn noise_bandwidth(&self, link: &Link) -> f64 {
        match self.noise_band {
            NoiseBand::Grid => self.resolved_samples_per_symbol(link) as f64 * link.symbol_rate,
            NoiseBand::Channels => link.channels.len() as f64 * link.symbol_rate,
        }
    }
}
