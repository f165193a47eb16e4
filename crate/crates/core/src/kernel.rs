//! Closed-form z-integrals of the first-order perturbation kernel.
//!
//! For a frequency triplet ω = (ω₁, ω₂, ω₃) the kernel on span m is
//! f(z)·exp(iθ∫β₂) with θ = (ω₂ − ω₁)(ω₂ − ω₃). Both the single integral
//! over a span and the ordered double integral (z' < z) have elementary
//! closed forms; the functions here evaluate them without cancellation for
//! any attenuation and phase, including the lossless, phase-matched limit.
//! The Nyquist gate (a factor T² inside the band) is applied by callers.

use num_complex::Complex64;

use crate::link::{PowerProfile, SpanProfile};

pub type Triplet = [f64; 3];

/// FWM phase-mismatch factor (ω₂ − ω₁)(ω₂ − ω₃), rad²/s².
#[inline]
pub fn mismatch(w: &Triplet) -> f64 {
    (w[1] - w[0]) * (w[1] - w[2])
}

/// Nyquist gate of the (s, s') kernel: ω₁ in channel s, ω₂ in s+s', ω₃ in s',
/// and the generated frequency ω₁ − ω₂ + ω₃ inside the channel of interest.
#[derive(Debug, Clone, Copy)]
pub struct Gate {
    centres: [f64; 3],
    half_width: f64,
}

impl Gate {
    pub fn new(half_width: f64, centres: [f64; 3]) -> Gate {
        Gate { centres, half_width }
    }

    pub fn centres(&self) -> [f64; 3] {
        self.centres
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Open-interval test: points on a band edge are out of band.
    #[inline]
    pub fn admits(&self, w: &Triplet) -> bool {
        let h = self.half_width;
        (w[0] - self.centres[0]).abs() < h
            && (w[1] - self.centres[1]).abs() < h
            && (w[2] - self.centres[2]).abs() < h
            && (w[0] - w[1] + w[2]).abs() < h
    }
}

fn expm1_c(z: Complex64) -> Complex64 {
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    Complex64::new(z.re.exp_m1() * c - 2.0 * half * half, z.re.exp() * s)
}

/// (1 − e^{−w})/w
pub fn phi1(w: Complex64) -> Complex64 {
    if w.norm() < 1e-5 {
        Complex64::new(1.0, 0.0) - w * 0.5 + w * w / 6.0
    } else {
        -expm1_c(-w) / w
    }
}

/// ∫₀^L e^{−xu} du
pub fn span_exp_integral(x: Complex64, length: f64) -> Complex64 {
    phi1(x * length) * length
}

/// m_k(w) = ∫₀¹ t^k e^{−wt} dt for k = 0..=kmax, with Re w ≥ 0.
fn truncated_moments(w: Complex64, kmax: usize) -> Vec<Complex64> {
    if w.norm() <= 2.0 {
        (0..=kmax)
            .map(|k| {
                let mut term = Complex64::new(1.0, 0.0);
                let mut sum = Complex64::new(0.0, 0.0);
                for j in 0..48 {
                    sum += term / (k + j + 1) as f64;
                    term *= -w / (j + 1) as f64;
                }
                sum
            })
            .collect()
    } else {
        let ew = (-w).exp();
        let mut m = Vec::with_capacity(kmax + 1);
        m.push(phi1(w));
        for k in 1..=kmax {
            let prev = m[k - 1];
            m.push((prev * k as f64 - ew) / w);
        }
        m
    }
}

/// ∫₀^L du e^{−xu} ∫₀^u du' e^{−yu'} = [E(x) − E(x + y)]/y.
pub fn span_nested_integral(x: Complex64, y: Complex64, length: f64) -> Complex64 {
    let yl = y * length;
    if yl.norm() >= 0.1 {
        (span_exp_integral(x, length) - span_exp_integral(x + y, length)) / y
    } else {
        // Divided difference as a power series in y: Σ (−y)^{k−1} M_k(x)/k!,
        // M_k(x) = ∫₀^L u^k e^{−xu} du = L^{k+1} m_k(xL).
        const TERMS: usize = 18;
        let m = truncated_moments(x * length, TERMS);
        let mut sum = Complex64::new(0.0, 0.0);
        let mut coef = Complex64::new(length * length, 0.0); // (−yL)^{k−1} L² / k!
        for (k, mk) in m.iter().enumerate().skip(1) {
            coef /= k as f64;
            sum += coef * mk;
            coef *= -yl;
        }
        sum
    }
}

/// Span integral of the kernel per unit gate value.
#[inline]
pub fn span_field(span: &SpanProfile, theta: f64) -> Complex64 {
    let x = Complex64::new(span.alpha, -span.beta2 * theta);
    let lead = Complex64::from_polar((-span.depletion_before).exp(), theta * span.dispersion_before);
    lead * span_exp_integral(x, span.length)
}

/// Ordered double span integral ∫dz H_θ(z) ∫^z dz' H*_θ'(z') per unit gates.
#[inline]
pub fn span_nested(span: &SpanProfile, theta: f64, theta_p: f64) -> Complex64 {
    let x = Complex64::new(span.alpha, -span.beta2 * theta);
    let y = Complex64::new(span.alpha, span.beta2 * theta_p);
    let lead = Complex64::from_polar(
        (-2.0 * span.depletion_before).exp(),
        (theta - theta_p) * span.dispersion_before,
    );
    lead * span_nested_integral(x, y, span.length)
}

/// Whole-link integral Σ_m r̂_m.
pub fn link_field(profile: &PowerProfile, theta: f64) -> Complex64 {
    profile.spans.iter().map(|s| span_field(s, theta)).sum()
}

/// Noise-weighted double integral per unit gates:
/// ∫dz H_θ(z) ∫₀^z dz' ξ(z') H*_θ'(z'), assembled span by span.
pub fn noise_weighted(profile: &PowerProfile, theta: f64, theta_p: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut history = Complex64::new(0.0, 0.0);
    for s in &profile.spans {
        let r = span_field(s, theta);
        acc += r * history;
        if s.noise_present != 0.0 {
            acc += span_nested(s, theta, theta_p) * s.noise_present;
        }
        history += span_field(s, theta_p).conj() * s.noise_present;
    }
    acc
}

/// Re of the noise-weighted double integral for θ = θ', using Re Î = |r̂|²/2.
pub fn noise_weighted_self(profile: &PowerProfile, theta: f64) -> f64 {
    let mut acc = 0.0;
    let mut history = Complex64::new(0.0, 0.0);
    for s in &profile.spans {
        let r = span_field(s, theta);
        acc += (r * history).re + 0.5 * s.noise_present * r.norm_sqr();
        history += r.conj() * s.noise_present;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::{FiberSpan, GainMode, Link, NoiseLoading};
    use crate::quad;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn toy(spans: usize, alpha: f64) -> Link {
        Link {
            spans: vec![FiberSpan { length: 80e3, alpha, beta2: -2.1e-26, gamma: 1.3e-3, n_sp: 1.6 }; spans],
            symbol_rate: 49e9,
            channel_spacing: 50e9,
            channels: vec![0],
            wavelength: 1550e-9,
            gain_mode: GainMode::Gain,
            noise_loading: NoiseLoading::Lumped,
            ase_bandwidth: 1e12,
        }
    }

    #[test]
    fn phase_matched_lossless_limit() {
        let x = Complex64::new(0.0, 0.0);
        assert_relative_eq!(span_exp_integral(x, 7.0).re, 7.0, max_relative = 1e-15);
        let d = span_nested_integral(x, x, 7.0);
        assert_relative_eq!(d.re, 24.5, max_relative = 1e-14);
        assert!(d.im.abs() < 1e-14);
    }

    #[test]
    fn nested_series_matches_direct_near_threshold() {
        let x = Complex64::new(3e-5, 2e-4);
        let len = 1e4;
        for y in [Complex64::new(0.0, 9.0e-6), Complex64::new(1e-6, -9.5e-6), Complex64::new(0.0, 1.1e-5)] {
            let series_or_direct = span_nested_integral(x, y, len);
            let q = quad::nested_adaptive(
                0.0,
                len,
                1e-14,
                |u| (-x * u).exp(),
                |u| (-y * u).exp(),
            );
            assert_relative_eq!((series_or_direct - q).norm() / q.norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_span_noise_integral_vanishes() {
        let p = toy(1, 4.6e-5).profile(1e-3);
        assert_eq!(noise_weighted(&p, 3e21, -1e21).norm(), 0.0);
    }

    #[test]
    fn edge_of_band_is_out() {
        let g = Gate::new(1.0, [0.0, 0.0, 0.0]);
        assert!(g.admits(&[0.5, 0.2, -0.1]));
        assert!(!g.admits(&[1.0, 0.0, 0.0]));
        assert!(!g.admits(&[0.9, -0.9, 0.0]));
    }

    proptest! {
        #[test]
        fn real_part_of_diagonal_nested_is_half_square(alpha in 0.0f64..1e-4, theta in -5e22f64..5e22) {
            let span = toy(1, alpha).profile(1e-3).spans[0];
            let r = span_field(&span, theta);
            let i = span_nested(&span, theta, theta);
            prop_assert!((i.re - 0.5 * r.norm_sqr()).abs() <= 1e-12 * r.norm_sqr());
        }

        #[test]
        fn diagonal_shortcut_matches_general(theta in -5e22f64..5e22, n in 2usize..6) {
            let p = toy(n, 4.6e-5).profile(1e-3);
            let general = noise_weighted(&p, theta, theta).re;
            let shortcut = noise_weighted_self(&p, theta);
            prop_assert!((general - shortcut).abs() <= 1e-10 * shortcut.abs());
        }
    }
}
