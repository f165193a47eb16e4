use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::HashMap;
use std::f64::consts::FRAC_1_SQRT_2;

use super::grid::{FieldGrid, Spectral};
use super::{SimConfig, StepControl};
use crate::link::{GainMode, Link, PowerProfile, SpanProfile};
use crate::units;

/// Manakov nonlinear coefficient over γ.
const MANAKOV: f64 = 8.0 / 9.0;

/// Step lengths (m) for every span, fixed before propagation so forward
/// and backward passes mirror each other.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    pub spans: Vec<Vec<f64>>,
}

impl StepPlan {
    /// `total_power` is the nominal launch power of all channels, W.
    pub fn new(profile: &PowerProfile, control: StepControl, total_power: f64) -> StepPlan {
        let spans = profile.spans.iter().map(|s| span_steps(s, control, total_power)).collect();
        StepPlan { spans }
    }

    pub fn step_count(&self) -> usize {
        self.spans.iter().map(Vec::len).sum()
    }
}

fn span_steps(span: &SpanProfile, control: StepControl, total_power: f64) -> Vec<f64> {
    let mut steps = Vec::new();
    let mut z = 0.0;
    while span.length - z > 1e-9 * span.length {
        let remaining = span.length - z;
        let h = match control {
            StepControl::Fixed { step } => step,
            StepControl::NonlinearPhase { max_phase, max_step } => {
                let p = total_power * (-span.depletion_before - span.alpha * z).exp();
                let rate = MANAKOV * span.gamma * p;
                let l_eff = if rate > 0.0 { max_phase / rate } else { f64::INFINITY };
                let h = if span.alpha == 0.0 {
                    l_eff
                } else if span.alpha * l_eff >= 1.0 {
                    f64::INFINITY
                } else {
                    -(-span.alpha * l_eff).ln_1p() / span.alpha
                };
                h.min(max_step)
            }
        };
        let h = h.min(remaining);
        steps.push(h);
        z += h;
    }
    steps
}

fn effective_length(alpha: f64, h: f64) -> f64 {
    if alpha * h < 1e-8 {
        h
    } else {
        -(-alpha * h).exp_m1() / alpha
    }
}

/// Scratch buffers and cached dispersion filters for one propagation thread.
pub struct Workspace {
    spectral: Spectral,
    scratch: Vec<Complex64>,
    filters: HashMap<u64, Vec<Complex64>>,
}

impl Workspace {
    pub fn new(spectral: Spectral) -> Workspace {
        Workspace { spectral, scratch: Vec::new(), filters: HashMap::new() }
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// Apply accumulated dispersion `beta` (s²) to both polarizations.
    pub fn disperse(&mut self, field: &mut FieldGrid, beta: f64) {
        if beta == 0.0 {
            return;
        }
        let spectral = &self.spectral;
        let filter = self.filters.entry(beta.to_bits()).or_insert_with(|| spectral.dispersion_filter(beta));
        for pol in field.pols_mut() {
            self.spectral.filter(pol, filter, &mut self.scratch);
        }
    }

    fn nonlinear(&self, field: &mut FieldGrid, gamma: f64, alpha: f64, h: f64) {
        let k = MANAKOV * gamma * effective_length(alpha, h);
        let decay = (-0.5 * alpha * h).exp();
        for (x, y) in field.x.iter_mut().zip(field.y.iter_mut()) {
            let rot = Complex64::from_polar(decay, k * (x.norm_sqr() + y.norm_sqr()));
            *x *= rot;
            *y *= rot;
        }
    }

    /// Exact inverse of [`Self::nonlinear`].
    fn inverse_nonlinear(&self, field: &mut FieldGrid, gamma: f64, alpha: f64, h: f64) {
        let k = MANAKOV * gamma * effective_length(alpha, h);
        let growth = (0.5 * alpha * h).exp();
        for (x, y) in field.x.iter_mut().zip(field.y.iter_mut()) {
            *x *= growth;
            *y *= growth;
            let rot = Complex64::from_polar(1.0, -k * (x.norm_sqr() + y.norm_sqr()));
            *x *= rot;
            *y *= rot;
        }
    }

    /// Symmetric split-step through one fiber span; adjacent half steps of
    /// dispersion are merged.
    pub fn span_forward(&mut self, field: &mut FieldGrid, span: &SpanProfile, steps: &[f64]) {
        let Some(&first) = steps.first() else { return };
        self.disperse(field, 0.5 * span.beta2 * first);
        for (i, &h) in steps.iter().enumerate() {
            self.nonlinear(field, span.gamma, span.alpha, h);
            let next = steps.get(i + 1).map_or(0.5 * h, |&n| 0.5 * (h + n));
            self.disperse(field, span.beta2 * next);
        }
    }

    pub fn span_backward(&mut self, field: &mut FieldGrid, span: &SpanProfile, steps: &[f64]) {
        let Some(&last) = steps.last() else { return };
        self.disperse(field, -0.5 * span.beta2 * last);
        for i in (0..steps.len()).rev() {
            let h = steps[i];
            self.inverse_nonlinear(field, span.gamma, span.alpha, h);
            let prev = if i == 0 { 0.5 * h } else { 0.5 * (h + steps[i - 1]) };
            self.disperse(field, -span.beta2 * prev);
        }
    }
}

/// White circular Gaussian amplifier noise restricted to a set of bins.
pub struct NoiseSource {
    rng: ChaCha8Rng,
    mask: Vec<bool>,
    /// ħω₀, J.
    photon_energy: f64,
}

impl NoiseSource {
    pub fn new(seed: u64, mask: Vec<bool>, wavelength: f64) -> NoiseSource {
        NoiseSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
            mask,
            photon_energy: units::HBAR * units::carrier_angular_frequency(wavelength),
        }
    }

    /// Noise bandwidth, Hz.
    fn bandwidth(&self, spectral: &Spectral) -> f64 {
        self.mask.iter().filter(|&&m| m).count() as f64 * spectral.bin_spacing()
    }

    /// Add the ASE of an amplifier with linear gain `gain` and factor `n_sp`.
    fn add(&mut self, field: &mut FieldGrid, ws: &mut Workspace, gain: f64, n_sp: f64) {
        let per_bin = n_sp * self.photon_energy * (gain - 1.0) * ws.spectral.bin_spacing();
        let sigma = per_bin.max(0.0).sqrt() * FRAC_1_SQRT_2;
        let len = ws.spectral.len();
        let mut spec = vec![Complex64::new(0.0, 0.0); len];
        for pol in field.pols_mut() {
            for (v, &on) in spec.iter_mut().zip(&self.mask) {
                *v = if on {
                    let re: f64 = self.rng.sample(StandardNormal);
                    let im: f64 = self.rng.sample(StandardNormal);
                    Complex64::new(re, im) * sigma
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            ws.spectral.inverse(&mut spec, &mut ws.scratch);
            pol.iter_mut().zip(&spec).for_each(|(a, n)| *a += n);
        }
    }
}

/// Propagate through every span and amplifier. Without a noise source the
/// amplifiers apply the nominal gains of `profile`; with one, constant-power
/// amplifiers measure their input and hold the output (signal plus added
/// ASE) at the nominal total launch power.
pub fn propagate(
    field: &mut FieldGrid,
    link: &Link,
    profile: &PowerProfile,
    plan: &StepPlan,
    mut noise: Option<&mut NoiseSource>,
    ws: &mut Workspace,
) {
    let target = profile.launch_power * link.channels.len() as f64;
    for ((span, steps), fiber) in profile.spans.iter().zip(&plan.spans).zip(&link.spans) {
        ws.span_forward(field, span, steps);
        let n_sp = fiber.n_sp;
        let gain = match (&noise, link.gain_mode) {
            (Some(src), GainMode::Power) => {
                let sigma2 = 2.0 * n_sp * src.photon_energy * src.bandwidth(&ws.spectral);
                (target + sigma2) / (field.power() + sigma2)
            }
            _ => span.gain.exp(),
        };
        field.scale(gain.sqrt());
        if let Some(src) = noise.as_deref_mut() {
            src.add(field, ws, gain, n_sp);
        }
    }
}

/// Ideal full-field digital backpropagation through the noiseless nominal
/// power profile.
pub fn backpropagate(field: &mut FieldGrid, profile: &PowerProfile, plan: &StepPlan, ws: &mut Workspace) {
    for (span, steps) in profile.spans.iter().zip(&plan.spans).rev() {
        field.scale((-0.5 * span.gain).exp());
        ws.span_backward(field, span, steps);
    }
}

/// Step plan at the profile's launch power.
pub fn plan_for(link: &Link, profile: &PowerProfile, sim: &SimConfig) -> StepPlan {
    StepPlan::new(profile, sim.steps, profile.launch_power * link.channels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::{FiberSpan, NoiseLoading};

    fn link(gamma: f64) -> Link {
        Link {
            spans: vec![FiberSpan { length: 5e4, alpha: 4.6e-5, beta2: -2e-26, gamma, n_sp: 1.6 }; 2],
            symbol_rate: 10e9,
            channel_spacing: 12.5e9,
            channels: vec![0],
            wavelength: 1550e-9,
            gain_mode: GainMode::Gain,
            noise_loading: NoiseLoading::Lumped,
            ase_bandwidth: 40e9,
        }
    }

    fn pulse_field(len: usize, fs: f64, peak: f64) -> FieldGrid {
        let mut f = FieldGrid::zeros(len, fs);
        for k in 0..len {
            let t = (k as f64 - len as f64 / 2.0) / 16.0;
            f.x[k] = Complex64::new(peak * (-t * t).exp(), 0.0);
            f.y[k] = Complex64::new(0.0, 0.5 * peak * (-t * t / 2.0).exp());
        }
        f
    }

    #[test]
    fn steps_respect_phase_budget_and_cover_span() {
        let l = link(1.3e-3);
        let p = l.profile(1e-2);
        let plan = StepPlan::new(&p, StepControl::NonlinearPhase { max_phase: 3e-3, max_step: 5e3 }, 1e-2);
        for (span, steps) in p.spans.iter().zip(&plan.spans) {
            assert!((steps.iter().sum::<f64>() - span.length).abs() < 1e-6);
            let mut z = 0.0;
            for &h in steps {
                let phase = MANAKOV * 1.3e-3 * 1e-2 * (-span.alpha * z).exp() * effective_length(span.alpha, h);
                assert!(phase <= 3e-3 * (1.0 + 1e-9) && h <= 5e3 + 1e-9);
                z += h;
            }
        }
    }

    #[test]
    fn backpropagation_inverts_noiseless_propagation() {
        let l = link(1.3e-3);
        let p = l.profile(1e-2);
        let plan = StepPlan::new(&p, StepControl::NonlinearPhase { max_phase: 1e-2, max_step: 5e3 }, 1e-2);
        let sp = Spectral::new(512, 80e9);
        let mut ws = Workspace::new(sp);
        let orig = pulse_field(512, 80e9, 0.3);
        let mut f = orig.clone();
        propagate(&mut f, &l, &p, &plan, None, &mut ws);
        assert!((f.x[256] - orig.x[256]).norm() > 1e-3);
        backpropagate(&mut f, &p, &plan, &mut ws);
        let err: f64 = f.x.iter().zip(&orig.x).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        let sig: f64 = orig.x.iter().map(|a| a.norm_sqr()).sum();
        assert!(err / sig < 1e-20, "{}", err / sig);
    }

    #[test]
    fn linear_propagation_conserves_power_with_nominal_gain() {
        let l = link(0.0);
        let p = l.profile(1e-3);
        let plan = StepPlan::new(&p, StepControl::Fixed { step: 1e4 }, 1e-3);
        let mut ws = Workspace::new(Spectral::new(256, 80e9));
        let mut f = pulse_field(256, 80e9, 0.1);
        let before = f.power();
        propagate(&mut f, &l, &p, &plan, None, &mut ws);
        assert!((f.power() / before - 1.0).abs() < 1e-12);
    }

    #[test]
    fn amplifier_noise_has_expected_power() {
        let l = link(0.0);
        let p = l.profile(1e-3);
        let plan = StepPlan::new(&p, StepControl::Fixed { step: 5e4 }, 1e-3);
        let (len, fs) = (1 << 14, 80e9);
        let mut ws = Workspace::new(Spectral::new(len, fs));
        let mut src = NoiseSource::new(9, vec![true; len], l.wavelength);
        let mut f = FieldGrid::zeros(len, fs);
        propagate(&mut f, &l, &p, &plan, Some(&mut src), &mut ws);
        let hnu = units::HBAR * units::carrier_angular_frequency(l.wavelength);
        // Two amplifiers of gain G = e^{αL}; the first one's noise sees the
        // second span's loss and gain.
        let g = (4.6e-5 * 5e4f64).exp();
        let expected = 2.0 * 2.0 * 1.6 * hnu * (g - 1.0) * fs;
        let ratio = f.power() / expected;
        assert!((ratio - 1.0).abs() < 0.03, "{ratio}");
    }
}
