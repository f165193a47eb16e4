//! Mutual information of a format over an AWGN channel at a given SNR.

use gauss_quad::GaussHermite;
use num_complex::Complex64;
use std::num::NonZeroUsize;

use crate::constellation::Format;
use crate::error::Result;

const NODES: usize = 40;

/// Per-polarization MI in bits of unit-energy points over circular Gaussian
/// noise with variance 1/snr, averaging over the noise by tensor
/// Gauss-Hermite quadrature.
pub fn discrete_mi(points: &[Complex64], snr: f64) -> f64 {
    let m = points.len() as f64;
    if snr <= 0.0 {
        return 0.0;
    }
    if snr.is_infinite() {
        return m.log2();
    }
    let sigma = snr.recip().sqrt();
    let gh = GaussHermite::new(NonZeroUsize::new(NODES).unwrap());
    let nodes: Vec<(f64, f64)> = gh.iter().map(|(x, w)| (*x, *w)).collect();
    let mut penalty = 0.0;
    for &x in points {
        let mut acc = 0.0;
        for &(u, wu) in &nodes {
            for &(v, wv) in &nodes {
                let z = Complex64::new(u, v) * sigma;
                // log Σ_j exp(−(|x − x_j + z|² − |z|²)/σ²), with the j = i term
                // contributing exactly 1.
                let s: f64 = points
                    .iter()
                    .map(|&xj| (-((x - xj + z).norm_sqr() - z.norm_sqr()) * snr).exp())
                    .sum();
                acc += wu * wv * s.log2();
            }
        }
        penalty += acc / std::f64::consts::PI;
    }
    m.log2() - penalty / m
}

/// Per-polarization MI of a circular Gaussian source.
pub fn gaussian_mi(snr: f64) -> f64 {
    snr.max(0.0).ln_1p() / std::f64::consts::LN_2
}

/// Dual-polarization MI in bits per channel use: twice the per-polarization
/// value.
pub fn mutual_information(format: &Format, snr: f64) -> Result<f64> {
    Ok(2.0 * match format.points()? {
        None => gaussian_mi(snr),
        Some(pts) => discrete_mi(&pts, snr),
    })
}
