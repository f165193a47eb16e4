//! Self-consistency checks: closed-form span integrals against quadrature,
//! analytic limits of the budget and its power scaling.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::coeffs::{self, CoefficientOptions, CoefficientSet};
use crate::constellation::{Constellation, Moments};
use crate::error::Result;
use crate::kernel::{mismatch, span_field, span_nested};
use crate::link::{GainMode, Link, SpanProfile};
use crate::quad::{nested_panels, panels, Rule};
use crate::variance::{brackets, budget, AssemblyOptions};

/// Worst relative deviations over all sampled points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormReport {
    pub points: usize,
    /// |r_closed − r_quad| / |r_quad|
    pub single: f64,
    /// |I_closed − I_quad| / |I_quad|
    pub nested: f64,
    /// |Re I(θ, θ) − |r|²/2| / (|r|²/2)
    pub diagonal: f64,
}

impl ClosedFormReport {
    fn merge(self, o: ClosedFormReport) -> ClosedFormReport {
        ClosedFormReport {
            points: self.points + o.points,
            single: self.single.max(o.single),
            nested: self.nested.max(o.nested),
            diagonal: self.diagonal.max(o.diagonal),
        }
    }
}

/// Span kernel H_θ(u) written out directly from its definition.
fn integrand(span: &SpanProfile, theta: f64, u: f64) -> Complex64 {
    let phase = theta * (span.dispersion_before + span.beta2 * u);
    Complex64::from_polar((-span.depletion_before - span.alpha * u).exp(), phase)
}

/// Enough 16-point panels that each spans at most ~1 rad of phase and
/// one e-fold of attenuation.
fn panel_count(span: &SpanProfile, theta: f64, theta_p: f64) -> usize {
    let phase = span.beta2.abs() * theta.abs().max(theta_p.abs()) * span.length;
    (phase + span.alpha * span.length).ceil() as usize + 2
}

/// Compare the closed forms with panel quadrature at `points` random
/// frequency triplets per span, drawn uniformly over the occupied band.
pub fn closed_forms(link: &Link, power: f64, points: usize, seed: u64) -> ClosedFormReport {
    let profile = link.profile(power);
    let lo = link.channels.iter().copied().min().unwrap_or(0) as f64 * link.channel_spacing - 0.5 * link.symbol_rate;
    let hi = link.channels.iter().copied().max().unwrap_or(0) as f64 * link.channel_spacing + 0.5 * link.symbol_rate;
    let rule = Rule::legendre(16);
    let empty = ClosedFormReport { points: 0, single: 0.0, nested: 0.0, diagonal: 0.0 };
    profile
        .spans
        .par_iter()
        .enumerate()
        .map(|(idx, span)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            let mut draw_theta = || {
                let w: [f64; 3] = std::array::from_fn(|_| 2.0 * PI * rng.gen_range(lo..hi));
                mismatch(&w)
            };
            let mut report = empty;
            for _ in 0..points {
                let (theta, theta_p) = (draw_theta(), draw_theta());
                let n = panel_count(span, theta, theta_p);
                let r_quad = panels(&rule, 0.0, span.length, n, |u| integrand(span, theta, u));
                let r = span_field(span, theta);
                let i_quad = nested_panels(
                    &rule,
                    0.0,
                    span.length,
                    n,
                    |u| integrand(span, theta, u),
                    |u| integrand(span, theta_p, u).conj(),
                );
                let i = span_nested(span, theta, theta_p);
                let half_sq = 0.5 * r.norm_sqr();
                let diag = span_nested(span, theta, theta).re;
                report = report.merge(ClosedFormReport {
                    points: 1,
                    single: (r - r_quad).norm() / r_quad.norm(),
                    nested: (i - i_quad).norm() / i_quad.norm(),
                    diagonal: (diag - half_sq).abs() / half_sq,
                });
            }
            report
        })
        .reduce(|| empty, ClosedFormReport::merge)
}

/// Deviations from the analytic limits of the variance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    /// With Gaussian moments: |σ²_SS − σ²_SS(X₁ terms only)| / σ²_SS.
    pub gaussian_residual: f64,
    /// γ = 0: max of |SNR·σ²_ASE − 1| over SNR_U and SNR_C.
    pub linear_deviation: f64,
    /// n_sp = 0 budget.
    pub noiseless_ase: f64,
    pub noiseless_ns: f64,
    pub noiseless_ss: f64,
    pub noiseless_snr_c: f64,
}

/// σ²_SS bracket sum with every format-dependent term dropped.
fn gaussian_ss(c: &CoefficientSet, opts: &AssemblyOptions) -> f64 {
    let xpm: f64 = c.xpm.iter().map(|t| t.x1.value).sum();
    let fwm: f64 = if opts.ndfwm { c.fwm.iter().map(|f| f.x1.value).sum() } else { 0.0 };
    (2.0 * c.x1.value + 4.0 * xpm + 2.0 * fwm) + (c.x1.value + 2.0 * xpm + fwm)
}

pub fn limits(link: &Link, power: f64, opts: &CoefficientOptions) -> Result<LimitReport> {
    let assembly = AssemblyOptions { ndfwm: opts.ndfwm, ..AssemblyOptions::default() };
    let profile = link.profile(power);
    let c = coeffs::compute(link, &profile, opts)?;
    let gauss = brackets(&c, &Constellation::Gaussian.moments(), &assembly);
    let full = gauss.ss_same + gauss.ss_cross;
    let gaussian_residual = (full - gaussian_ss(&c, &assembly)).abs() / full;

    let moments = Constellation::Qam16.moments();
    let linear = link.with_gamma(0.0);
    let b = budget(&linear, &profile, &brackets(&c, &moments, &assembly));
    let linear_deviation = (b.snr_u() * b.sigma2_ase - 1.0).abs().max((b.snr_c() * b.sigma2_ase - 1.0).abs());

    let quiet = link.with_nsp(0.0);
    let quiet_profile = quiet.profile(power);
    let cq = coeffs::compute(&quiet, &quiet_profile, opts)?;
    let bq = budget(&quiet, &quiet_profile, &brackets(&cq, &moments, &assembly));
    Ok(LimitReport {
        gaussian_residual,
        linear_deviation,
        noiseless_ase: bq.sigma2_ase,
        noiseless_ns: bq.sigma2_ns,
        noiseless_ss: bq.sigma2_ss,
        noiseless_snr_c: bq.snr_c(),
    })
}

/// Worst relative deviation from σ²_SS ∝ P², σ²_NS ∝ P and σ²_ASE ∝ 1/P
/// over `range_db` above `power`, with coefficients frozen at `power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub ss: f64,
    pub ns: f64,
    pub ase: f64,
}

pub fn scaling(link: &Link, power: f64, range_db: f64, moments: &Moments, opts: &CoefficientOptions) -> Result<ScalingReport> {
    let mut link = link.clone();
    link.gain_mode = GainMode::Gain;
    let assembly = AssemblyOptions { ndfwm: opts.ndfwm, ..AssemblyOptions::default() };
    let p0 = link.profile(power);
    let b = brackets(&coeffs::compute(&link, &p0, opts)?, moments, &assembly);
    let base = budget(&link, &p0, &b);
    let mut worst = ScalingReport { ss: 0.0, ns: 0.0, ase: 0.0 };
    for step in 1..=(range_db.round() as i32) {
        let k = 10f64.powf(step as f64 / 10.0);
        let at = budget(&link, &link.profile(power * k), &b);
        worst.ss = worst.ss.max((at.sigma2_ss / (base.sigma2_ss * k * k) - 1.0).abs());
        worst.ns = worst.ns.max((at.sigma2_ns / (base.sigma2_ns * k) - 1.0).abs());
        worst.ase = worst.ase.max((at.sigma2_ase * k / base.sigma2_ase - 1.0).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::config2;
    use crate::link::{FiberSpan, NoiseLoading};

    fn toy() -> Link {
        Link {
            spans: vec![FiberSpan { length: 1e4, alpha: 4.6e-5, beta2: -1e-27, gamma: 1.3e-3, n_sp: 1.6 }; 2],
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
    fn analytic_limits_hold() {
        let r = limits(&toy(), 1e-3, &CoefficientOptions::new(4000, 3)).unwrap();
        assert!(r.gaussian_residual < 1e-12, "{r:?}");
        assert!(r.linear_deviation < 1e-12, "{r:?}");
        assert_eq!((r.noiseless_ase, r.noiseless_ns), (0.0, 0.0));
        assert!(r.noiseless_ss.is_finite() && r.noiseless_ss > 0.0 && r.noiseless_snr_c.is_infinite());
    }

    #[test]
    fn frozen_budget_scales_exactly() {
        let r = scaling(&toy(), 1e-4, 10.0, &Constellation::Qpsk.moments(), &CoefficientOptions::new(4000, 3)).unwrap();
        assert!(r.ss < 1e-12 && r.ns < 1e-12 && r.ase < 1e-12, "{r:?}");
    }

    #[test]
    fn closed_forms_match_quadrature_on_a_short_link() {
        let link = config2().with_span_count(2).to_link().unwrap();
        let r = closed_forms(&link, 1e-3, 50, 7);
        assert_eq!(r.points, 100);
        assert!(r.single < 1e-9 && r.nested < 1e-8 && r.diagonal < 1e-12, "{r:?}");
    }
}
