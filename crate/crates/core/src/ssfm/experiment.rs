use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::FieldGrid;
use super::propagate::{backpropagate, plan_for, propagate, NoiseSource, Workspace};
use super::receiver::Receiver;
use super::waveform::Transmitter;
use super::{NoiseBand, SimConfig};
use crate::constellation::Format;
use crate::error::{Error, Result};
use crate::link::Link;
use crate::units;

/// One realization at one launch power; SNRs are linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub power_dbm: f64,
    pub run: usize,
    pub data_seed: u64,
    pub noise_seed: u64,
    pub steps: usize,
    /// Noise on, dispersion compensation only.
    pub snr_u: f64,
    /// Noise on, full-field backpropagation.
    pub snr_c: Option<f64>,
    /// Noise off, dispersion compensation only.
    pub snr_ss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, stderr, n }
    }
}

/// Per-power statistics over runs. SNRs in dB; variance proxies are the
/// run-averaged inverse linear SNRs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSummary {
    pub power_dbm: f64,
    pub snr_u_db: Stat,
    pub snr_c_db: Option<Stat>,
    pub snr_ss_db: Option<Stat>,
    pub sigma2_total: f64,
    /// ASE plus signal-ASE interference left after backpropagation.
    pub sigma2_compensated: Option<f64>,
    pub sigma2_ss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    /// Link as simulated: `ase_bandwidth` set to the noise-loading bandwidth.
    pub link: Link,
    pub samples_per_symbol: usize,
    pub records: Vec<RunRecord>,
    pub summaries: Vec<PowerSummary>,
}

/// Link with its constant-power ASE bandwidth matched to the simulator's
/// noise loading, so analytic depletion and simulation agree.
pub fn simulated_link(link: &Link, sim: &SimConfig) -> Link {
    let mut l = link.clone();
    l.ase_bandwidth = sim.noise_bandwidth(link);
    l
}

fn seeds(seed: u64, run: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    (rng.next_u64(), rng.next_u64())
}

fn received_snr(rx: &Receiver, ws: &mut Workspace, mut field: FieldGrid, dispersion: f64, sent: &super::Transmission) -> Result<f64> {
    ws.disperse(&mut field, -dispersion);
    Ok(rx.receive(&field, sent)?.snr())
}

/// Simulate every launch power (dBm) with `sim.runs` realizations each.
/// Data and noise seeds depend only on the run index, so curves over power
/// share their random numbers.
pub fn run_experiment(link: &Link, format: &Format, powers_dbm: &[f64], sim: &SimConfig) -> Result<ExperimentResult> {
    let link = simulated_link(link, sim);
    link.validate()?;
    let tx = Transmitter::new(&link, sim)?;
    let rx = Receiver::new(&tx, sim.guard_symbols)?;
    let mask = match sim.noise_band {
        NoiseBand::Grid => vec![true; tx.spectral().len()],
        NoiseBand::Channels => tx.channel_mask(),
    };
    let dispersion: f64 = link.spans.iter().map(|s| s.beta2 * s.length).sum();
    let jobs: Vec<(f64, usize)> = powers_dbm.iter().flat_map(|&p| (0..sim.runs).map(move |r| (p, r))).collect();

    let records = jobs
        .par_iter()
        .map(|&(power_dbm, run)| -> Result<RunRecord> {
            let (data_seed, noise_seed) = seeds(sim.seed, run);
            let profile = link.profile(units::dbm_to_watts(power_dbm));
            let plan = plan_for(&link, &profile, sim);
            let mut ws = Workspace::new(tx.spectral().clone());
            let sent = tx.transmit(format, profile.launch_power, data_seed)?;

            let mut field = sent.field.clone();
            let mut noise = NoiseSource::new(noise_seed, mask.clone(), link.wavelength);
            propagate(&mut field, &link, &profile, &plan, Some(&mut noise), &mut ws);
            if !field.is_finite() {
                return Err(Error::Simulation(format!("field diverged at {power_dbm} dBm")));
            }
            let snr_u = received_snr(&rx, &mut ws, field.clone(), dispersion, &sent)?;
            let snr_c = if sim.dbp {
                backpropagate(&mut field, &profile, &plan, &mut ws);
                Some(rx.receive(&field, &sent)?.snr())
            } else {
                None
            };
            let snr_ss = if sim.noiseless_reference {
                let mut clean = sent.field.clone();
                propagate(&mut clean, &link, &profile, &plan, None, &mut ws);
                Some(received_snr(&rx, &mut ws, clean, dispersion, &sent)?)
            } else {
                None
            };
            Ok(RunRecord { power_dbm, run, data_seed, noise_seed, steps: plan.step_count(), snr_u, snr_c, snr_ss })
        })
        .collect::<Result<Vec<_>>>()?;

    let summaries = powers_dbm
        .iter()
        .map(|&p| {
            let rows: Vec<&RunRecord> = records.iter().filter(|r| r.power_dbm == p).collect();
            let db = |v: &[f64]| Stat::of(&v.iter().map(|&x| units::linear_to_db(x)).collect::<Vec<_>>());
            let inv_mean = |v: &[f64]| v.iter().map(|x| 1.0 / x).sum::<f64>() / v.len() as f64;
            let u: Vec<f64> = rows.iter().map(|r| r.snr_u).collect();
            let c: Option<Vec<f64>> = rows.iter().map(|r| r.snr_c).collect();
            let ss: Option<Vec<f64>> = rows.iter().map(|r| r.snr_ss).collect();
            PowerSummary {
                power_dbm: p,
                snr_u_db: db(&u),
                snr_c_db: c.as_deref().map(db),
                snr_ss_db: ss.as_deref().map(db),
                sigma2_total: inv_mean(&u),
                sigma2_compensated: c.as_deref().map(inv_mean),
                sigma2_ss: ss.as_deref().map(inv_mean),
            }
        })
        .collect();

    Ok(ExperimentResult { link, samples_per_symbol: tx.samples_per_symbol(), records, summaries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_of_constant_has_zero_spread() {
        let s = Stat::of(&[2.0, 2.0, 2.0]);
        assert_eq!((s.mean, s.stderr, s.n), (2.0, 0.0, 3));
    }

    #[test]
    fn seeds_differ_between_runs_and_repeat() {
        assert_eq!(seeds(1, 0), seeds(1, 0));
        assert_ne!(seeds(1, 0), seeds(1, 1));
        assert_ne!(seeds(1, 0).0, seeds(1, 0).1);
    }
}
