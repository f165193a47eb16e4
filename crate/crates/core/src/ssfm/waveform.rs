use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use super::grid::{wrap_bin, FieldGrid, Spectral};
use super::SimConfig;
use crate::constellation::Format;
use crate::error::{Error, Result};
use crate::link::Link;

/// Root-raised-cosine amplitude response at frequency `f` for symbol rate
/// `rate`.
pub fn rrc_response(f: f64, rate: f64, rolloff: f64) -> f64 {
    let a = f.abs();
    let lo = 0.5 * (1.0 - rolloff) * rate;
    let hi = 0.5 * (1.0 + rolloff) * rate;
    if a <= lo {
        1.0
    } else if a > hi {
        0.0
    } else {
        (0.5 * (1.0 + (PI / (rolloff * rate) * (a - lo)).cos())).sqrt()
    }
}

/// Builds the WDM field spectrum from per-channel symbol streams.
#[derive(Clone)]
pub struct Transmitter {
    pub(crate) spectral: Spectral,
    pub(crate) symbols: usize,
    pub(crate) samples_per_symbol: usize,
    pub(crate) channels: Vec<i32>,
    /// Bin offset of each channel centre.
    pub(crate) channel_bins: Vec<i64>,
    /// Signed bins of the pulse passband and their amplitude response.
    pub(crate) pulse: Vec<(i64, f64)>,
    pub(crate) symbol_fft: Arc<dyn Fft<f64>>,
    pub(crate) symbol_ifft: Arc<dyn Fft<f64>>,
}

/// One transmitted frame and what the receiver needs to recover it.
#[derive(Debug, Clone)]
pub struct Transmission {
    pub field: FieldGrid,
    /// Unit-energy symbols per channel (in link order) and polarization.
    pub symbols: Vec<[Vec<Complex64>; 2]>,
    /// Field amplitude per unit symbol, including the random carrier phase.
    pub scales: Vec<Complex64>,
}

impl Transmitter {
    pub fn new(link: &Link, sim: &SimConfig) -> Result<Transmitter> {
        sim.validate()?;
        let sps = sim.resolved_samples_per_symbol(link);
        let len = sim.symbols * sps;
        let fs = sps as f64 * link.symbol_rate;
        if sim.band_edge(link) >= 0.5 * fs {
            return Err(Error::Config(format!(
                "channel edge {:.3e} Hz beyond the grid Nyquist frequency {:.3e} Hz",
                sim.band_edge(link),
                0.5 * fs
            )));
        }
        let spectral = Spectral::new(len, fs);
        let df = spectral.bin_spacing();
        let channel_bins = link.channels.iter().map(|&s| (s as f64 * link.channel_spacing / df).round() as i64).collect();
        let half = (0.5 * (1.0 + sim.rolloff) * link.symbol_rate / df).ceil() as i64;
        let pulse = (-half..=half)
            .map(|k| (k, rrc_response(k as f64 * df, link.symbol_rate, sim.rolloff)))
            .filter(|&(_, h)| h > 0.0)
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Transmitter {
            spectral,
            symbols: sim.symbols,
            samples_per_symbol: sps,
            channels: link.channels.clone(),
            channel_bins,
            pulse,
            symbol_fft: planner.plan_fft_forward(sim.symbols),
            symbol_ifft: planner.plan_fft_inverse(sim.symbols),
        })
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    pub fn sample_rate(&self) -> f64 {
        self.spectral.bin_spacing() * self.spectral.len() as f64
    }

    /// Bins occupied by the channel bands (|f − f_s| ≤ R_s/2).
    pub fn channel_mask(&self) -> Vec<bool> {
        let len = self.spectral.len();
        let half = (self.symbols / 2) as i64;
        let mut mask = vec![false; len];
        for &c in &self.channel_bins {
            for k in -half..half {
                mask[wrap_bin(c + k, len)] = true;
            }
        }
        mask
    }

    fn draw_symbols(&self, format: &Format, rng: &mut ChaCha8Rng) -> Result<Vec<Complex64>> {
        Ok(match format.points()? {
            Some(points) => (0..self.symbols).map(|_| points[rng.gen_range(0..points.len())]).collect(),
            None => (0..self.symbols)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im) * FRAC_1_SQRT_2
                })
                .collect(),
        })
    }

    /// Frame at per-channel power `power` (W over both polarizations).
    pub fn transmit(&self, format: &Format, power: f64, seed: u64) -> Result<Transmission> {
        let len = self.spectral.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pulse_energy: f64 = self.pulse.iter().map(|&(_, h)| h * h).sum();
        let amplitude = (0.5 * power / (self.symbols as f64 * pulse_energy)).sqrt();
        let mut spectra = [vec![Complex64::new(0.0, 0.0); len], vec![Complex64::new(0.0, 0.0); len]];
        let mut symbols = Vec::with_capacity(self.channels.len());
        let mut scales = Vec::with_capacity(self.channels.len());
        let mut scratch = Vec::new();
        for &centre in &self.channel_bins {
            let phase = rng.gen_range(0.0..2.0 * PI);
            let scale = Complex64::from_polar(amplitude, phase);
            let pair = [self.draw_symbols(format, &mut rng)?, self.draw_symbols(format, &mut rng)?];
            for (pol, syms) in pair.iter().enumerate() {
                let mut a = syms.clone();
                scratch.resize(self.symbol_fft.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
                self.symbol_fft.process_with_scratch(&mut a, &mut scratch);
                for &(k, h) in &self.pulse {
                    let j = k.rem_euclid(self.symbols as i64) as usize;
                    spectra[pol][wrap_bin(centre + k, len)] += scale * a[j] * h;
                }
            }
            symbols.push(pair);
            scales.push(scale);
        }
        let mut field = FieldGrid::zeros(len, self.sample_rate());
        for (pol, mut spec) in spectra.into_iter().enumerate() {
            self.spectral.inverse(&mut spec, &mut scratch);
            *field.pols_mut()[pol] = spec;
        }
        Ok(Transmission { field, symbols, scales })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::Constellation;
    use crate::link::{FiberSpan, GainMode, NoiseLoading};

    pub(crate) fn toy_link(channels: Vec<i32>) -> Link {
        Link {
            spans: vec![FiberSpan { length: 1e4, alpha: 4.6e-5, beta2: -2e-26, gamma: 1.3e-3, n_sp: 1.6 }],
            symbol_rate: 10e9,
            channel_spacing: 12.5e9,
            channels,
            wavelength: 1550e-9,
            gain_mode: GainMode::Gain,
            noise_loading: NoiseLoading::Lumped,
            ase_bandwidth: 1e12,
        }
    }

    #[test]
    fn rrc_is_nyquist() {
        let (r, b) = (1.0, 0.3);
        for f in [0.0, 0.1, 0.36, 0.4, 0.45, 0.49] {
            let s = rrc_response(f, r, b).powi(2) + rrc_response(f - r, r, b).powi(2);
            assert!((s - 1.0).abs() < 1e-12, "f={f}: {s}");
        }
    }

    #[test]
    fn qpsk_frame_has_requested_power() {
        let link = toy_link(vec![-1, 0, 1]);
        let sim = SimConfig { symbols: 1 << 10, ..SimConfig::default() };
        let tx = Transmitter::new(&link, &sim).unwrap();
        let p = 1e-3;
        let t = tx.transmit(&Format::Named(Constellation::Qpsk), p, 3).unwrap();
        let measured = t.field.power() / (3.0 * p);
        assert!((measured - 1.0).abs() < 1e-3, "{measured}");
    }

    #[test]
    fn auto_oversampling_leaves_room_for_mixing_products() {
        let sim = SimConfig::default();
        assert_eq!(sim.resolved_samples_per_symbol(&toy_link(vec![0])), 4);
        // Edge at 12.5 + 5 GHz: products reach 52.5 GHz, needs fs > 70 GHz.
        assert_eq!(sim.resolved_samples_per_symbol(&toy_link(vec![-1, 0, 1])), 8);
    }

    #[test]
    fn aliasing_grid_is_rejected() {
        let sim = SimConfig { samples_per_symbol: 2, ..SimConfig::default() };
        assert!(Transmitter::new(&toy_link(vec![-1, 0, 1]), &sim).is_err());
    }
}
