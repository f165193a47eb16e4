//! Physical constants and engineering-unit conversions.
//!
//! Everything inside the crate is SI: metres, seconds, watts, radians per
//! second. Conversions from datasheet units happen here and only here.

use std::f64::consts::{LN_10, PI};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const HBAR: f64 = PLANCK / (2.0 * PI);

/// Fiber attenuation from dB/km to 1/m (power attenuation coefficient).
pub fn alpha_from_db_per_km(db_per_km: f64) -> f64 {
    db_per_km * LN_10 / 10.0 / 1e3
}

/// Group-velocity dispersion from the dispersion parameter D (ps/nm/km) at
/// the given wavelength (m), returned in s²/m.
pub fn beta2_from_dispersion(d_ps_nm_km: f64, wavelength: f64) -> f64 {
    let d_si = d_ps_nm_km * 1e-12 / 1e-9 / 1e3;
    -d_si * wavelength * wavelength / (2.0 * PI * SPEED_OF_LIGHT)
}

/// Nonlinear coefficient 2πn₂/(λA_eff) in 1/(W·m); `area_um2` in µm².
pub fn gamma_from_n2(n2: f64, wavelength: f64, area_um2: f64) -> f64 {
    2.0 * PI * n2 / (wavelength * area_um2 * 1e-12)
}

/// Spontaneous-emission factor in the high-gain approximation.
pub fn nsp_from_noise_figure(nf_db: f64) -> f64 {
    db_to_linear(nf_db) / 2.0
}

pub fn carrier_angular_frequency(wavelength: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / wavelength
}

/// Quantum-noise variance ħω₀/T of one symbol slot, in watts.
pub fn quantum_noise_variance(wavelength: f64, symbol_rate: f64) -> f64 {
    HBAR * carrier_angular_frequency(wavelength) * symbol_rate
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * db_to_linear(dbm)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w / 1e-3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn smf_dispersion_at_1550() {
        let b2 = beta2_from_dispersion(16.5, 1550e-9);
        assert_relative_eq!(b2, -2.104e-26, max_relative = 2e-3);
    }

    #[test]
    fn five_db_noise_figure() {
        assert_relative_eq!(nsp_from_noise_figure(5.0), 1.5811, max_relative = 1e-4);
    }

    #[test]
    fn quantum_noise_at_49_gbaud() {
        assert_relative_eq!(quantum_noise_variance(1550e-9, 49e9), 6.28e-9, max_relative = 2e-3);
    }

    #[test]
    fn attenuation_conversion() {
        assert_relative_eq!(alpha_from_db_per_km(0.2), 4.605e-5, max_relative = 1e-3);
    }

    #[test]
    fn dbm_round_trip() {
        for p in [-10.0, 0.0, 3.5, 12.0] {
            assert_relative_eq!(watts_to_dbm(dbm_to_watts(p)), p, epsilon = 1e-12);
        }
    }
}
