use num_complex::Complex64;

use super::grid::{wrap_bin, FieldGrid};
use super::waveform::{Transmission, Transmitter};
use crate::error::{Error, Result};

/// Matched-filter receiver for the channel of interest.
pub struct Receiver<'a> {
    tx: &'a Transmitter,
    /// Position of the channel of interest in the link's channel list.
    channel: usize,
    guard: usize,
}

/// Per-polarization least-squares fit of received to transmitted symbols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reception {
    /// Complex gain per polarization.
    pub gain: [Complex64; 2],
    /// Error variance after removing the gain, relative to the symbol
    /// energy, averaged over both polarizations.
    pub error_variance: f64,
}

impl Reception {
    pub fn snr(&self) -> f64 {
        1.0 / self.error_variance
    }
}

/// Cyclic lags probed for a timing slip.
const LAG_PROBE: i64 = 4;

impl<'a> Receiver<'a> {
    pub fn new(tx: &'a Transmitter, guard: usize) -> Result<Receiver<'a>> {
        let channel = tx
            .channels
            .iter()
            .position(|&s| s == 0)
            .ok_or_else(|| Error::Receiver("channel of interest is not in the plan".into()))?;
        Ok(Receiver { tx, channel, guard })
    }

    /// Matched filter and symbol-rate sampling of the channel of interest;
    /// returns symbol estimates scaled back to unit energy.
    pub fn demodulate(&self, field: &FieldGrid, sent: &Transmission) -> [Vec<Complex64>; 2] {
        let sp = &self.tx.spectral;
        let len = sp.len();
        let ns = self.tx.symbols;
        let centre = self.tx.channel_bins[self.channel];
        let norm = 1.0 / (ns as f64 * len as f64) / sent.scales[self.channel];
        let mut scratch = Vec::new();
        let mut out = [Vec::new(), Vec::new()];
        for (pol, samples) in [&field.x, &field.y].into_iter().enumerate() {
            let mut spec = samples.clone();
            sp.forward(&mut spec, &mut scratch);
            let mut folded = vec![Complex64::new(0.0, 0.0); ns];
            for &(k, h) in &self.tx.pulse {
                folded[k.rem_euclid(ns as i64) as usize] += spec[wrap_bin(centre + k, len)] * h;
            }
            scratch.resize(self.tx.symbol_ifft.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
            self.tx.symbol_ifft.process_with_scratch(&mut folded, &mut scratch);
            folded.iter_mut().for_each(|v| *v *= norm);
            out[pol] = folded;
        }
        out
    }

    /// Demodulate and fit. `field` must already be dispersion compensated
    /// (or backpropagated).
    pub fn receive(&self, field: &FieldGrid, sent: &Transmission) -> Result<Reception> {
        let est = self.demodulate(field, sent);
        let ns = self.tx.symbols;
        let kept = self.guard..ns - self.guard;
        let mut gain = [Complex64::new(0.0, 0.0); 2];
        let mut err = 0.0;
        let mut energy = 0.0;
        for pol in 0..2 {
            let tx = &sent.symbols[self.channel][pol];
            let rx = &est[pol];
            let corr = |lag: i64| -> Complex64 {
                kept.clone().map(|k| rx[k] * tx[(k as i64 - lag).rem_euclid(ns as i64) as usize].conj()).sum()
            };
            let c0 = corr(0);
            for lag in (-LAG_PROBE..=LAG_PROBE).filter(|&l| l != 0) {
                if corr(lag).norm() > c0.norm() {
                    return Err(Error::Receiver(format!("timing ambiguity: lag {lag} correlates better than lag 0")));
                }
            }
            let e_tx: f64 = kept.clone().map(|k| tx[k].norm_sqr()).sum();
            let h = c0 / e_tx;
            if !(h.norm() > 0.0) || !h.re.is_finite() {
                return Err(Error::Receiver("received channel carries no signal".into()));
            }
            err += kept.clone().map(|k| (rx[k] / h - tx[k]).norm_sqr()).sum::<f64>();
            energy += e_tx;
            gain[pol] = h;
        }
        Ok(Reception { gain, error_variance: err / energy })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{Constellation, Format};
    use crate::link::{FiberSpan, GainMode, Link, NoiseLoading};
    use crate::ssfm::SimConfig;

    fn link() -> Link {
        Link {
            spans: vec![FiberSpan { length: 1e4, alpha: 4.6e-5, beta2: -2e-26, gamma: 1.3e-3, n_sp: 1.6 }],
            symbol_rate: 10e9,
            channel_spacing: 12.5e9,
            channels: vec![-1, 0, 1],
            wavelength: 1550e-9,
            gain_mode: GainMode::Gain,
            noise_loading: NoiseLoading::Lumped,
            ase_bandwidth: 1e12,
        }
    }

    #[test]
    fn back_to_back_recovers_symbols_exactly() {
        let sim = SimConfig { symbols: 1 << 10, guard_symbols: 16, ..SimConfig::default() };
        let tx = Transmitter::new(&link(), &sim).unwrap();
        let sent = tx.transmit(&Format::Named(Constellation::Qam16), 1e-3, 5).unwrap();
        let rx = Receiver::new(&tx, 16).unwrap();
        let r = rx.receive(&sent.field, &sent).unwrap();
        assert!(r.snr() > 1e20, "{}", r.snr());
        assert!((r.gain[0] - 1.0).norm() < 1e-9);
    }

    #[test]
    fn shifted_frame_is_a_timing_error() {
        let sim = SimConfig { symbols: 1 << 10, guard_symbols: 16, ..SimConfig::default() };
        let tx = Transmitter::new(&link(), &sim).unwrap();
        let sent = tx.transmit(&Format::Named(Constellation::Qpsk), 1e-3, 5).unwrap();
        let mut field = sent.field.clone();
        let shift = 2 * tx.samples_per_symbol();
        field.x.rotate_right(shift);
        field.y.rotate_right(shift);
        let rx = Receiver::new(&tx, 16).unwrap();
        assert!(matches!(rx.receive(&field, &sent), Err(Error::Receiver(_))));
    }
}
