use nsni_core::coeffs::{self, estimate, CoefficientOptions, Kind};
use nsni_core::constellation::Constellation;
use nsni_core::link::{FiberSpan, GainMode, Link, NoiseLoading};
use nsni_core::mc::McSettings;
use nsni_core::oracle::{families, Oracle};
use nsni_core::units;
use nsni_core::variance::{brackets, AssemblyOptions};

fn toy(spans: usize, channels: Vec<i32>) -> Link {
    Link {
        spans: vec![
            FiberSpan {
                length: 10e3,
                alpha: units::alpha_from_db_per_km(0.2),
                beta2: -1e-27,
                gamma: 1.3e-3,
                n_sp: units::nsp_from_noise_figure(5.0),
            };
            spans
        ],
        symbol_rate: 10e9,
        channel_spacing: 12.5e9,
        channels,
        wavelength: 1550e-9,
        gain_mode: GainMode::Gain,
        noise_loading: NoiseLoading::Lumped,
        ase_bandwidth: 20e9,
    }
}

/// Truncating the discrete-time sums at |m|, |n|, |p| ≤ 16 drops a few
/// percent of the X1-type mass on this link.
const TRUNCATION_ALLOWANCE: f64 = 0.04;

#[test]
fn monte_carlo_agrees_with_truncated_oracle() {
    let link = toy(1, vec![0, 1]);
    let profile = link.profile(1e-3);
    let mut oracle = Oracle::new(&link, &profile, 16);
    for kind in [Kind::X1, Kind::X2, Kind::X3, Kind::X4, Kind::X5, Kind::X1Xpm(1), Kind::X3Xpm(1)] {
        let reference = oracle.coefficient(kind);
        let mc = estimate(kind, &link, &profile, McSettings::new(20_000, 3)).unwrap();
        let bound = 3.0 * mc.stderr + TRUNCATION_ALLOWANCE * reference.abs();
        assert!(
            (mc.value - reference).abs() <= bound,
            "{kind:?}: mc {} ± {}, oracle {reference}",
            mc.value,
            mc.stderr
        );
    }
}

#[test]
fn xpm_coefficients_are_symmetric_in_detuning() {
    let link = toy(2, vec![-1, 0, 1]);
    let profile = link.profile(1e-3);
    for (plus, minus) in [(Kind::X1Xpm(1), Kind::X1Xpm(-1)), (Kind::X3Xpm(1), Kind::X3Xpm(-1)), (Kind::Chi1Xpm(1), Kind::Chi1Xpm(-1))] {
        let a = estimate(plus, &link, &profile, McSettings::new(40_000, 5)).unwrap();
        let b = estimate(minus, &link, &profile, McSettings::new(40_000, 6)).unwrap();
        let sigma = a.stderr.hypot(b.stderr);
        assert!((a.value - b.value).abs() <= 3.0 * sigma, "{plus:?}: {} vs {} (σ {sigma})", a.value, b.value);
    }
}

#[test]
fn signal_noise_variance_agrees_with_brute_force_sum() {
    let link = toy(3, vec![0, 1]);
    let profile = link.profile(1e-3);
    let moments = Constellation::Qam16.moments();
    let c = coeffs::compute(&link, &profile, &CoefficientOptions::new(100_000, 9)).unwrap();
    let b = brackets(&c, &moments, &AssemblyOptions::default());
    let mut oracle = Oracle::new(&link, &profile, 16);
    let same = oracle.noise_bracket(&families(&link.channels, false), moments);
    let cross = oracle.noise_bracket(&families(&link.channels, true), moments);
    let rel = (b.ns_same + b.ns_cross) / (same + cross) - 1.0;
    assert!(rel.abs() < 0.05 + TRUNCATION_ALLOWANCE, "assembled/oracle − 1 = {rel}");
}

#[test]
fn coefficient_set_is_reproducible() {
    let link = toy(2, vec![-1, 0, 1]);
    let profile = link.profile(1e-3);
    let opts = CoefficientOptions::new(5_000, 21);
    let a = coeffs::compute(&link, &profile, &opts).unwrap();
    let b = coeffs::compute(&link, &profile, &opts).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
