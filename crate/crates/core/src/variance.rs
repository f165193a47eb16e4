//! Dual-polarization noise budget and SNR from a coefficient set.
//!
//! All variances are normalized to the per-channel signal power. `P` is the
//! total launch power of one channel over both polarizations; the
//! single-polarization formulas are evaluated with γ → 8γ/9 and P → P/2.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::coeffs::{self, CoefficientOptions, CoefficientSet, FwmTerms};
use crate::constellation::Moments;
use crate::error::{Error, Result};
use crate::link::{GainMode, Link, PowerProfile};
use crate::units;

/// Integer weights that combine coefficients into variances.
///
/// `Derived` follows from the fourth- and sixth-order symbol moments and the
/// noise moments term by term; it is what the brute-force oracles reproduce.
/// `Published` keeps the weights of the original closed-form summary, which
/// differ for the cross-channel XPM and FWM terms and drop the
/// fourth-moment correction of degenerate FWM pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Weights {
    #[default]
    Derived,
    Published,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    pub weights: Weights,
    /// Include non-degenerate and degenerate FWM pair terms.
    pub ndfwm: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { weights: Weights::Derived, ndfwm: true }
    }
}

/// Power-independent coefficient combinations of one link state: the
/// single-polarization signal-signal and signal-ASE brackets for the
/// same-polarization and cross-polarization nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Brackets {
    pub ss_same: f64,
    pub ss_cross: f64,
    pub ns_same: f64,
    pub ns_cross: f64,
}

fn pair_terms<'a>(c: &'a CoefficientSet, opts: &AssemblyOptions) -> impl Iterator<Item = &'a FwmTerms> + 'a {
    let published = opts.weights == Weights::Published;
    let ndfwm = opts.ndfwm;
    c.fwm
        .iter()
        .filter(move |f| ndfwm && !(published && f.pair.0 == f.pair.1))
}

pub fn brackets(c: &CoefficientSet, m: &Moments, opts: &AssemblyOptions) -> Brackets {
    let e4 = m.excess4();
    let e6 = m.excess6();
    let x4 = c.x4.map_or(0.0, |e| e.value);
    let sum_xpm = |f: &dyn Fn(&crate::coeffs::XpmTerms) -> f64| c.xpm.iter().map(f).sum::<f64>();
    let pairs: Vec<&FwmTerms> = pair_terms(c, opts).collect();
    let fwm_x1: f64 = pairs.iter().map(|f| f.x1.value).sum();
    let fwm_chi1: f64 = pairs.iter().map(|f| f.chi1.value).sum();
    let deg_x2: f64 = pairs.iter().filter_map(|f| f.x2.map(|e| e.value)).sum();
    let deg_chi2: f64 = pairs.iter().filter_map(|f| f.chi2.map(|e| e.value)).sum();

    let intra_ss = 2.0 * c.x1.value + e4 * (c.x2.value + 4.0 * c.x3.value + 4.0 * x4) + e6 * c.x5.value;
    // Fourth-moment part of the symbol-correlated distortion, removed by the
    // receiver's rotation fit.
    let rotation = e4 * e4 * c.rotation.norm_sqr();
    let intra_ns = 6.0 * c.chi1.value + e4 * (c.chi2.value + 4.0 * c.chi3.value);
    let xpm_ss_same = 4.0 * sum_xpm(&|t| t.x1.value + e4 * t.x3.value);

    match opts.weights {
        Weights::Derived => Brackets {
            ss_same: intra_ss - rotation + xpm_ss_same + 2.0 * fwm_x1 + e4 * deg_x2,
            ss_cross: c.x1.value + e4 * c.x3.value + sum_xpm(&|t| 2.0 * t.x1.value + e4 * t.x3.value) + fwm_x1,
            ns_same: intra_ns + sum_xpm(&|t| 12.0 * t.chi1.value + 4.0 * e4 * t.chi3.value) + 6.0 * fwm_chi1 + e4 * deg_chi2,
            ns_cross: 3.0 * c.chi1.value + e4 * c.chi3.value + sum_xpm(&|t| 6.0 * t.chi1.value + e4 * t.chi3.value) + 3.0 * fwm_chi1,
        },
        Weights::Published => {
            // The published NS pair term uses the single-interferer
            // coefficients at the three channels of each pair.
            let mut chi1_at: HashMap<i32, f64> = c.xpm.iter().map(|t| (t.channel, t.chi1.value)).collect();
            chi1_at.insert(0, c.chi1.value);
            let lookup = |s: i32| chi1_at.get(&s).copied().unwrap_or(0.0);
            let pair_ns: f64 = pairs.iter().map(|f| lookup(f.pair.0) + lookup(f.pair.1) + lookup(f.pair.0 + f.pair.1)).sum();
            Brackets {
                ss_same: intra_ss + xpm_ss_same + fwm_x1,
                ss_cross: c.x1.value + e4 * c.x3.value + sum_xpm(&|t| t.x1.value + e4 * t.x3.value) + fwm_x1,
                ns_same: intra_ns + sum_xpm(&|t| 12.0 * t.chi1.value + e4 * t.chi3.value) + pair_ns,
                ns_cross: 3.0 * c.chi1.value + e4 * c.chi3.value + sum_xpm(&|t| 3.0 * t.chi1.value + e4 * t.chi3.value) + 3.0 * fwm_chi1,
            }
        }
    }
}

/// Normalized variances at one launch power: the DP totals and the
/// single-polarization components they are built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    /// W per channel, both polarizations.
    pub power: f64,
    pub sigma2_ase: f64,
    pub sigma2_ss: f64,
    pub sigma2_ns: f64,
    pub ss_same: f64,
    pub ss_cross: f64,
    pub ns_same: f64,
    pub ns_cross: f64,
}

impl NoiseBudget {
    /// Uncompensated SNR (linear).
    pub fn snr_u(&self) -> f64 {
        1.0 / (self.sigma2_ase + self.sigma2_ss + self.sigma2_ns)
    }

    /// SNR after ideal full-field nonlinearity compensation (linear);
    /// infinite for a noiseless link.
    pub fn snr_c(&self) -> f64 {
        1.0 / (self.sigma2_ase + self.sigma2_ns)
    }
}

/// σ²_ASE,DP: both polarizations of the received ASE over the per-channel power.
pub fn ase_variance(link: &Link, profile: &PowerProfile) -> f64 {
    2.0 * link.quantum_noise_variance() * profile.received_noise() / profile.launch_power
}

/// DP budget. The single-polarization components are evaluated at the
/// total channel power; substituting γ → 8γ/9 and P → P/2 gives the factors
/// (8/9)²(1/2)² = 16/81 for the P² terms and (8/9)²(1/2) = 32/81 for the P
/// terms.
pub fn budget(link: &Link, profile: &PowerProfile, b: &Brackets) -> NoiseBudget {
    let p = profile.launch_power;
    let g = link.spans.first().map_or(0.0, |s| s.gamma);
    let ss = g * g * p * p;
    let ns = g * g * link.quantum_noise_variance() * p;
    let (ss_same, ss_cross) = (ss * b.ss_same, ss * b.ss_cross);
    let (ns_same, ns_cross) = (ns * b.ns_same, ns * b.ns_cross);
    NoiseBudget {
        power: p,
        sigma2_ase: ase_variance(link, profile),
        sigma2_ss: 16.0 / 81.0 * (ss_same + ss_cross),
        sigma2_ns: 32.0 / 81.0 * (ns_same + ns_cross),
        ss_same,
        ss_cross,
        ns_same,
        ns_cross,
    }
}

/// σ² = a/P + b·P + c·P² with power-independent a, b, c (constant-gain
/// links with frozen coefficients).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub ase: f64,
    pub ns: f64,
    pub ss: f64,
}

impl PowerLaw {
    pub fn from_budget(b: &NoiseBudget) -> PowerLaw {
        let p = b.power;
        PowerLaw { ase: b.sigma2_ase * p, ns: b.sigma2_ns / p, ss: b.sigma2_ss / (p * p) }
    }

    pub fn at(&self, power: f64) -> (f64, f64, f64) {
        (self.ase / power, self.ss * power * power, self.ns * power)
    }

    /// Launch power maximizing SNR_U: root of 2cP³ + bP² − a = 0.
    pub fn optimum_uncompensated(&self) -> Option<f64> {
        if !(self.ase > 0.0) || (self.ss <= 0.0 && self.ns <= 0.0) {
            return None;
        }
        let f = |p: f64| 2.0 * self.ss * p.powi(3) + self.ns * p * p - self.ase;
        let (mut lo, mut hi) = (0.0, 1.0);
        while f(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 { lo = mid } else { hi = mid }
        }
        Some(0.5 * (lo + hi))
    }

    /// Launch power maximizing SNR_C: √(a/b).
    pub fn optimum_compensated(&self) -> Option<f64> {
        (self.ase > 0.0 && self.ns > 0.0).then(|| (self.ase / self.ns).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrPoint {
    pub power_dbm: f64,
    pub budget: NoiseBudget,
}

impl SnrPoint {
    pub fn snr_u_db(&self) -> f64 {
        units::linear_to_db(self.budget.snr_u())
    }

    pub fn snr_c_db(&self) -> f64 {
        units::linear_to_db(self.budget.snr_c())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub power_dbm: f64,
    pub snr_db: f64,
    /// False when the maximum sits on the edge of the power grid.
    pub interior: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrCurve {
    pub points: Vec<SnrPoint>,
}

impl SnrCurve {
    pub fn optimum_uncompensated(&self) -> Option<Optimum> {
        self.optimum(|p| p.snr_u_db())
    }

    pub fn optimum_compensated(&self) -> Option<Optimum> {
        self.optimum(|p| p.snr_c_db())
    }

    /// Grid maximum refined by a parabola through it and its neighbours.
    fn optimum(&self, f: impl Fn(&SnrPoint) -> f64) -> Option<Optimum> {
        let y: Vec<f64> = self.points.iter().map(&f).collect();
        if y.iter().any(|v| !v.is_finite()) || y.is_empty() {
            return None;
        }
        let k = (0..y.len()).max_by(|&a, &b| y[a].total_cmp(&y[b]))?;
        let x = |i: usize| self.points[i].power_dbm;
        if k == 0 || k + 1 == y.len() {
            return Some(Optimum { power_dbm: x(k), snr_db: y[k], interior: false });
        }
        let (x0, x1, x2) = (x(k - 1), x(k), x(k + 1));
        let (y0, y1, y2) = (y[k - 1], y[k], y[k + 1]);
        let d01 = (y1 - y0) / (x1 - x0);
        let d12 = (y2 - y1) / (x2 - x1);
        let a = (d12 - d01) / (x2 - x0);
        if a >= 0.0 {
            return Some(Optimum { power_dbm: x1, snr_db: y1, interior: true });
        }
        let b = d01 - a * (x0 + x1);
        let xm = (-b / (2.0 * a)).clamp(x0, x2);
        let ym = y0 + d01 * (xm - x0) + a * (xm - x0) * (xm - x1);
        Some(Optimum { power_dbm: xm, snr_db: ym, interior: true })
    }
}

/// Analytic SNR curve over a launch-power grid (dBm). Constant-gain links
/// reuse one coefficient set; constant-power links recompute it per point
/// because depletion changes the power profile.
pub fn snr_curve(
    link: &Link,
    powers_dbm: &[f64],
    moments: &Moments,
    coeff_opts: &CoefficientOptions,
    assembly: &AssemblyOptions,
) -> Result<SnrCurve> {
    link.validate()?;
    let mut points = Vec::with_capacity(powers_dbm.len());
    let mut frozen: Option<Brackets> = None;
    for &dbm in powers_dbm {
        let profile = link.profile(units::dbm_to_watts(dbm));
        let b = match (link.gain_mode, frozen) {
            (GainMode::Gain, Some(b)) => b,
            _ => {
                let c = coeffs::compute(link, &profile, coeff_opts)?;
                let b = brackets(&c, moments, assembly);
                if link.gain_mode == GainMode::Gain {
                    frozen = Some(b);
                }
                b
            }
        };
        let budget = budget(link, &profile, &b);
        let all = [budget.sigma2_ase, budget.sigma2_ss, budget.sigma2_ns];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite variance at {dbm} dBm")));
        }
        points.push(SnrPoint { power_dbm: dbm, budget });
    }
    Ok(SnrCurve { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::Constellation;
    use crate::link::{FiberSpan, NoiseLoading};
    use proptest::prelude::*;

    fn toy(mode: GainMode) -> Link {
        Link {
            spans: vec![FiberSpan { length: 4e4, alpha: 4.6e-5, beta2: -2e-26, gamma: 1.3e-3, n_sp: 1.6 }; 3],
            symbol_rate: 10e9,
            channel_spacing: 12.5e9,
            channels: vec![0, 1],
            wavelength: 1550e-9,
            gain_mode: mode,
            noise_loading: NoiseLoading::Lumped,
            ase_bandwidth: 20e9,
        }
    }

    fn toy_brackets() -> Brackets {
        let link = toy(GainMode::Gain);
        let c = coeffs::compute(&link, &link.profile(1e-3), &CoefficientOptions::new(4000, 2)).unwrap();
        brackets(&c, &Constellation::Qam16.moments(), &AssemblyOptions::default())
    }

    #[test]
    fn budget_is_additive_and_compensation_helps() {
        let link = toy(GainMode::Gain);
        let b = toy_brackets();
        for dbm in [-10.0, 0.0, 10.0] {
            let n = budget(&link, &link.profile(units::dbm_to_watts(dbm)), &b);
            assert!(n.snr_c() >= n.snr_u());
            let diff = 1.0 / n.snr_u() - 1.0 / n.snr_c();
            assert!((diff - n.sigma2_ss).abs() <= 1e-12 * n.sigma2_ss, "{diff} {}", n.sigma2_ss);
        }
    }

    #[test]
    fn power_mode_ase_exceeds_gain_mode_and_falls_with_power() {
        let gain = toy(GainMode::Gain);
        let power = toy(GainMode::Power);
        let mut prev = f64::INFINITY;
        for dbm in (-30..=10).step_by(4) {
            let p = units::dbm_to_watts(dbm as f64);
            let ag = ase_variance(&gain, &gain.profile(p));
            let ap = ase_variance(&power, &power.profile(p));
            assert!(ap >= ag, "{dbm}: {ap} < {ag}");
            assert!(ap < prev);
            prev = ap;
        }
    }

    #[test]
    fn power_law_optimum_matches_grid_search() {
        let link = toy(GainMode::Gain);
        let b = toy_brackets();
        let law = PowerLaw::from_budget(&budget(&link, &link.profile(1e-3), &b));
        let p_opt = law.optimum_uncompensated().unwrap();
        let snr = |p: f64| {
            let (a, s, n) = law.at(p);
            1.0 / (a + s + n)
        };
        let best = (0..4000)
            .map(|k| units::dbm_to_watts(-20.0 + k as f64 * 0.01))
            .max_by(|&x, &y| snr(x).total_cmp(&snr(y)))
            .unwrap();
        assert!((units::watts_to_dbm(best) - units::watts_to_dbm(p_opt)).abs() < 0.011);
    }

    #[test]
    fn parabolic_refinement_recovers_vertex() {
        let point = |dbm: f64, snr_db: f64| SnrPoint {
            power_dbm: dbm,
            budget: NoiseBudget {
                power: units::dbm_to_watts(dbm),
                sigma2_ase: 1.0 / units::db_to_linear(snr_db),
                sigma2_ss: 0.0,
                sigma2_ns: 0.0,
                ss_same: 0.0,
                ss_cross: 0.0,
                ns_same: 0.0,
                ns_cross: 0.0,
            },
        };
        let curve = SnrCurve { points: (-3..=3).map(|k| point(k as f64, 10.0 - 0.5 * (k as f64 - 0.4).powi(2))).collect() };
        let o = curve.optimum_uncompensated().unwrap();
        assert!(o.interior);
        assert!((o.power_dbm - 0.4).abs() < 1e-9 && (o.snr_db - 10.0).abs() < 1e-9, "{o:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn doubling_power_scales_frozen_terms(dbm in -20.0f64..10.0) {
            let link = toy(GainMode::Gain);
            let b = Brackets { ss_same: 3.0e8, ss_cross: 1.0e8, ns_same: 5.0e7, ns_cross: 2.0e7 };
            let p = units::dbm_to_watts(dbm);
            let one = budget(&link, &link.profile(p), &b);
            let two = budget(&link, &link.profile(2.0 * p), &b);
            prop_assert!((two.sigma2_ss / (4.0 * one.sigma2_ss) - 1.0).abs() < 1e-12);
            prop_assert!((two.sigma2_ns / (2.0 * one.sigma2_ns) - 1.0).abs() < 1e-12);
            prop_assert!((two.sigma2_ase * 2.0 / one.sigma2_ase - 1.0).abs() < 1e-12);
        }
    }
}
