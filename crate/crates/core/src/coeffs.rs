//! Monte-Carlo estimation of the X (signal-signal) and χ (signal-ASE)
//! coefficients.
//!
//! Every coefficient is an integral over one or more Nyquist-gated frequency
//! triplets of products of whole-link kernel integrals. The free angular
//! frequencies are sampled uniformly in their channel bands (width 2π/T) and
//! points outside any gate are rejected.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::Result;
use crate::kernel::{self, Gate, Triplet};
use crate::link::{Link, PowerProfile};
use crate::mc::{self, Interval, McEstimate, McSettings};

/// Coefficient kinds. Channel arguments are indices relative to the channel
/// of interest; `Fwm` kinds take an ordered pair (s, s').
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    X1,
    X2,
    X3,
    X4,
    X5,
    X1Xpm(i32),
    X3Xpm(i32),
    X1Fwm(i32, i32),
    /// X₂-type sum of the degenerate pair (s, s).
    X2Fwm(i32),
    Chi1,
    Chi2,
    Chi3,
    Chi1Xpm(i32),
    Chi3Xpm(i32),
    Chi1Fwm(i32, i32),
    Chi2Fwm(i32),
}

impl Kind {
    pub fn dimension(self) -> usize {
        match self {
            Kind::X1 | Kind::X1Xpm(_) | Kind::X1Fwm(..) => 3,
            Kind::Chi1 | Kind::Chi1Xpm(_) | Kind::Chi1Fwm(..) => 3,
            Kind::X5 => 5,
            _ => 4,
        }
    }

    fn tag(self) -> u64 {
        let (k, a, b) = match self {
            Kind::X1 => (1, 0, 0),
            Kind::X2 => (2, 0, 0),
            Kind::X3 => (3, 0, 0),
            Kind::X4 => (4, 0, 0),
            Kind::X5 => (5, 0, 0),
            Kind::X1Xpm(s) => (6, s, 0),
            Kind::X3Xpm(s) => (7, s, 0),
            Kind::X1Fwm(s, t) => (8, s, t),
            Kind::Chi1 => (9, 0, 0),
            Kind::Chi2 => (10, 0, 0),
            Kind::Chi3 => (11, 0, 0),
            Kind::Chi1Xpm(s) => (12, s, 0),
            Kind::Chi3Xpm(s) => (13, s, 0),
            Kind::Chi1Fwm(s, t) => (14, s, t),
            Kind::X2Fwm(s) => (15, s, s),
            Kind::Chi2Fwm(s) => (16, s, s),
        };
        ((k as u64) << 40) ^ (((a as i64 + 512) as u64) << 20) ^ ((b as i64 + 512) as u64)
    }

    pub fn label(self) -> String {
        format!("{self:?}")
    }
}

struct Bands {
    period: f64,
    half: f64,
    spacing: f64,
}

impl Bands {
    fn new(link: &Link) -> Bands {
        let period = link.symbol_period();
        Bands { period, half: PI / period, spacing: 2.0 * PI * link.channel_spacing }
    }

    fn band(&self, c: i32) -> Interval {
        Interval { start: self.spacing * c as f64 - self.half, width: 2.0 * self.half }
    }

    fn gate(&self, s: i32, s2: i32) -> Gate {
        let o = |c: i32| self.spacing * c as f64;
        Gate::new(self.half, [o(s), o(s + s2), o(s2)])
    }
}

/// Estimate one coefficient for the given link profile.
pub fn estimate(kind: Kind, link: &Link, profile: &PowerProfile, settings: McSettings) -> Result<McEstimate> {
    let b = Bands::new(link);
    let t = b.period;
    let settings = settings.derive(kind.tag());
    let label = kind.label();
    let tau = 2.0 * PI;
    match kind {
        Kind::X1 | Kind::X1Xpm(_) | Kind::X1Fwm(..) => {
            let (s, s2) = match kind {
                Kind::X1Xpm(s) => (0, s),
                Kind::X1Fwm(s, s2) => (s, s2),
                _ => (0, 0),
            };
            let gate = b.gate(s, s2);
            let k = t.powi(3) / tau.powi(3);
            mc::integrate(&label, [b.band(s), b.band(s + s2), b.band(s2)], settings, |w| {
                gate.admits(w).then(|| k * kernel::link_field(profile, kernel::mismatch(w)).norm_sqr())
            })
        }
        Kind::Chi1 | Kind::Chi1Xpm(_) | Kind::Chi1Fwm(..) => {
            let (s, s2) = match kind {
                Kind::Chi1Xpm(s) => (0, s),
                Kind::Chi1Fwm(s, s2) => (s, s2),
                _ => (0, 0),
            };
            let gate = b.gate(s, s2);
            let k = 2.0 * t.powi(3) / tau.powi(3);
            mc::integrate(&label, [b.band(s), b.band(s + s2), b.band(s2)], settings, |w| {
                gate.admits(w).then(|| k * kernel::noise_weighted_self(profile, kernel::mismatch(w)))
            })
        }
        Kind::X2 | Kind::Chi2 | Kind::X2Fwm(_) | Kind::Chi2Fwm(_) => {
            let s = match kind {
                Kind::X2Fwm(s) | Kind::Chi2Fwm(s) => s,
                _ => 0,
            };
            let gate = b.gate(s, s);
            let c = b.band(s);
            let noise = matches!(kind, Kind::Chi2 | Kind::Chi2Fwm(_));
            let k = if noise { 2.0 } else { 1.0 } * t.powi(4) / tau.powi(4);
            mc::integrate(&label, [c, b.band(2 * s), c, c], settings, |x| {
                let w = [x[0], x[1], x[2]];
                let wp = [x[3], x[1], x[0] + x[2] - x[3]];
                pair_value(profile, &gate, &w, &gate, &wp, noise).map(|v| k * v)
            })
        }
        Kind::X3 | Kind::X3Xpm(_) | Kind::Chi3 | Kind::Chi3Xpm(_) => {
            let s = match kind {
                Kind::X3Xpm(s) | Kind::Chi3Xpm(s) => s,
                _ => 0,
            };
            let gate = b.gate(0, s);
            let noise = matches!(kind, Kind::Chi3 | Kind::Chi3Xpm(_));
            let k = if noise { 2.0 } else { 1.0 } * t.powi(4) / tau.powi(4);
            mc::integrate(&label, [b.band(0), b.band(s), b.band(s), b.band(s)], settings, |x| {
                let w = [x[0], x[1], x[2]];
                let wp = [x[0], x[3], x[2] - x[1] + x[3]];
                pair_value(profile, &gate, &w, &gate, &wp, noise).map(|v| k * v)
            })
        }
        Kind::X4 => {
            let gate = b.gate(0, 0);
            let c = b.band(0);
            let k = t.powi(4) / tau.powi(4);
            mc::integrate(&label, [c; 4], settings, |x| {
                let w = [x[0], x[1], x[1]];
                let wp = [x[2], x[3], x[0] - x[2] + x[3]];
                pair_value(profile, &gate, &w, &gate, &wp, false).map(|v| k * v)
            })
        }
        Kind::X5 => {
            let gate = b.gate(0, 0);
            let c = b.band(0);
            let k = t.powi(5) / tau.powi(5);
            mc::integrate(&label, [c; 5], settings, |x| {
                let w = [x[0], x[1], x[2]];
                let wp = [x[3], x[4], x[0] - x[1] + x[2] - x[3] + x[4]];
                pair_value(profile, &gate, &w, &gate, &wp, false).map(|v| k * v)
            })
        }
    }
}

/// Real part of the product of two gated link integrals (or of their
/// noise-weighted double integral), per unit T⁴.
fn pair_value(
    profile: &PowerProfile,
    g: &Gate,
    w: &Triplet,
    gp: &Gate,
    wp: &Triplet,
    noise: bool,
) -> Option<f64> {
    if !(g.admits(w) && gp.admits(wp)) {
        return None;
    }
    let th = kernel::mismatch(w);
    let thp = kernel::mismatch(wp);
    Some(if noise {
        kernel::noise_weighted(profile, th, thp).re
    } else {
        (kernel::link_field(profile, th) * kernel::link_field(profile, thp).conj()).re
    })
}

/// Whole-link kernel of the zero-index intra-channel term, X₀₀₀, in the
/// units of the X coefficients' square root. It is the part of the
/// intra-channel distortion that both scales with the transmitted symbol and
/// depends on the fourth moment, so a least-squares rotation at the receiver
/// removes it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub re: McEstimate,
    pub im: McEstimate,
}

impl Rotation {
    pub fn norm_sqr(&self) -> f64 {
        self.re.value * self.re.value + self.im.value * self.im.value
    }
}

pub fn rotation(link: &Link, profile: &PowerProfile, settings: McSettings) -> Result<Rotation> {
    let b = Bands::new(link);
    let t = b.period;
    let settings = settings.derive(17 << 40);
    let gate = b.gate(0, 0);
    let k = t.powi(3) / (2.0 * PI).powi(3);
    let axes = [b.band(0); 3];
    let part = |imag: bool| {
        mc::integrate("X000", axes, settings, |w| {
            gate.admits(w).then(|| {
                let r = kernel::link_field(profile, kernel::mismatch(w));
                k * if imag { r.im } else { r.re }
            })
        })
    };
    Ok(Rotation { re: part(false)?, im: part(true)? })
}

/// Ordered FWM pairs (s, s') with s, s' ≠ 0 and
/// s + s' in the plan.
pub fn fwm_pairs(channels: &[i32], include_degenerate: bool) -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    for &s in channels {
        for &s2 in channels {
            if s == 0 || s2 == 0 || (s == s2 && !include_degenerate) {
                continue;
            }
            if channels.contains(&(s + s2)) {
                out.push((s, s2));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct XpmTerms {
    pub channel: i32,
    pub x1: McEstimate,
    pub x3: McEstimate,
    pub chi1: McEstimate,
    pub chi3: McEstimate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FwmTerms {
    pub pair: (i32, i32),
    pub x1: McEstimate,
    pub chi1: McEstimate,
    /// Fourth-moment terms, present only for degenerate pairs (s, s).
    pub x2: Option<McEstimate>,
    pub chi2: Option<McEstimate>,
}

/// All coefficients needed by the variance model for one link state.
///
/// With a flat amplifier noise spectrum the noise-weighted coefficients do
/// not depend on the frequency at which the ASE is evaluated, so the
/// channel-shifted variants coincide with the ones stored here.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub x1: McEstimate,
    pub x2: McEstimate,
    pub x3: McEstimate,
    pub x4: Option<McEstimate>,
    pub x5: McEstimate,
    pub rotation: Rotation,
    pub chi1: McEstimate,
    pub chi2: McEstimate,
    pub chi3: McEstimate,
    pub xpm: Vec<XpmTerms>,
    pub fwm: Vec<FwmTerms>,
    /// Average-rotation term; diagnostic only.
    pub chi0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientOptions {
    pub settings: McSettings,
    pub include_x4: bool,
    pub ndfwm: bool,
    /// Include FWM pairs with s = s' (two photons from the same channel).
    pub degenerate_fwm: bool,
}

impl CoefficientOptions {
    pub fn new(samples: u64, seed: u64) -> CoefficientOptions {
        CoefficientOptions {
            settings: McSettings::new(samples, seed),
            include_x4: false,
            ndfwm: true,
            degenerate_fwm: true,
        }
    }
}

pub fn compute(link: &Link, profile: &PowerProfile, opts: &CoefficientOptions) -> Result<CoefficientSet> {
    link.validate()?;
    let st = opts.settings;
    let est = |k: Kind| estimate(k, link, profile, st);
    let mut xpm = Vec::new();
    for &s in link.channels.iter().filter(|&&s| s != 0) {
        xpm.push(XpmTerms {
            channel: s,
            x1: est(Kind::X1Xpm(s))?,
            x3: est(Kind::X3Xpm(s))?,
            chi1: est(Kind::Chi1Xpm(s))?,
            chi3: est(Kind::Chi3Xpm(s))?,
        });
    }
    let mut fwm = Vec::new();
    if opts.ndfwm {
        for (s, s2) in fwm_pairs(&link.channels, opts.degenerate_fwm) {
            let degenerate = s == s2;
            fwm.push(FwmTerms {
                pair: (s, s2),
                x1: est(Kind::X1Fwm(s, s2))?,
                chi1: est(Kind::Chi1Fwm(s, s2))?,
                x2: if degenerate { Some(est(Kind::X2Fwm(s))?) } else { None },
                chi2: if degenerate { Some(est(Kind::Chi2Fwm(s))?) } else { None },
            });
        }
    }
    Ok(CoefficientSet {
        x1: est(Kind::X1)?,
        x2: est(Kind::X2)?,
        x3: est(Kind::X3)?,
        x4: if opts.include_x4 { Some(est(Kind::X4)?) } else { None },
        x5: est(Kind::X5)?,
        rotation: rotation(link, profile, st)?,
        chi1: est(Kind::Chi1)?,
        chi2: est(Kind::Chi2)?,
        chi3: est(Kind::Chi3)?,
        xpm,
        fwm,
        chi0: chi0(profile),
    })
}

/// 2∫dz f(z) ∫₀^z dz' f(z') ξ(z'), the noise rotation integral.
pub fn chi0(profile: &PowerProfile) -> f64 {
    kernel::noise_weighted_self(profile, 0.0) * 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::{FiberSpan, GainMode, NoiseLoading};

    fn link(channels: Vec<i32>) -> Link {
        Link {
            spans: vec![FiberSpan { length: 60e3, alpha: 4.6e-5, beta2: -2.1e-26, gamma: 1.3e-3, n_sp: 1.6 }; 3],
            symbol_rate: 32e9,
            channel_spacing: 37.5e9,
            channels,
            wavelength: 1550e-9,
            gain_mode: GainMode::Gain,
            noise_loading: NoiseLoading::Lumped,
            ase_bandwidth: 1e12,
        }
    }

    #[test]
    fn pair_enumeration() {
        let plan = vec![-2, -1, 0, 1, 2];
        let p = fwm_pairs(&plan, false);
        assert!(p.contains(&(1, -1)) && p.contains(&(-1, 1)));
        assert!(p.contains(&(2, -1)) && !p.contains(&(1, 1)));
        assert!(!p.iter().any(|&(s, t)| s == 0 || t == 0));
        let d = fwm_pairs(&plan, true);
        assert!(d.contains(&(1, 1)) && d.contains(&(-1, -1)) && !d.contains(&(2, 2)));
        assert_eq!(fwm_pairs(&[-1, 0, 1], true), vec![(-1, 1), (1, -1)]);
    }

    #[test]
    fn diagonal_kinds_are_nonnegative() {
        let l = link(vec![-1, 0, 1]);
        let p = l.profile(1e-3);
        let st = McSettings::new(20_000, 5);
        for k in [Kind::X1, Kind::X2, Kind::X3, Kind::X5, Kind::X1Xpm(1), Kind::X3Xpm(-1), Kind::X1Fwm(1, -1)] {
            let e = estimate(k, &l, &p, st).unwrap();
            assert!(e.value + 3.0 * e.stderr >= 0.0, "{k:?} {e:?}");
        }
    }

    #[test]
    fn symmetric_pair_orders_agree() {
        let l = link(vec![-1, 0, 1]);
        let p = l.profile(1e-3);
        let st = McSettings::new(40_000, 9);
        let a = estimate(Kind::X1Fwm(1, -1), &l, &p, st).unwrap();
        let b = estimate(Kind::X1Fwm(-1, 1), &l, &p, st).unwrap();
        assert!((a.value - b.value).abs() < 4.0 * (a.stderr + b.stderr));
    }

    #[test]
    fn reproducible_for_fixed_seed() {
        let l = link(vec![0]);
        let p = l.profile(1e-3);
        let st = McSettings::new(10_000, 1234);
        let a = estimate(Kind::Chi2, &l, &p, st).unwrap();
        let b = estimate(Kind::Chi2, &l, &p, st).unwrap();
        assert_eq!(a, b);
    }
}
