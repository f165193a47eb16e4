use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Dual-polarization field samples on a cyclic time grid, √W.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    /// Hz
    pub sample_rate: f64,
}

impl FieldGrid {
    pub fn zeros(len: usize, sample_rate: f64) -> FieldGrid {
        FieldGrid { x: vec![Complex64::new(0.0, 0.0); len], y: vec![Complex64::new(0.0, 0.0); len], sample_rate }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Mean total power over both polarizations, W.
    pub fn power(&self) -> f64 {
        let sum: f64 = self.x.iter().zip(&self.y).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).sum();
        sum / self.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn scale(&mut self, k: f64) {
        self.x.iter_mut().chain(self.y.iter_mut()).for_each(|v| *v *= k);
    }

    pub fn pols_mut(&mut self) -> [&mut Vec<Complex64>; 2] {
        [&mut self.x, &mut self.y]
    }
}

/// FFT plans and angular-frequency axis for one grid size.
#[derive(Clone)]
pub struct Spectral {
    len: usize,
    sample_rate: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    omega: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("len", &self.len).field("sample_rate", &self.sample_rate).finish()
    }
}

impl Spectral {
    pub fn new(len: usize, sample_rate: f64) -> Spectral {
        let mut planner = FftPlanner::new();
        let df = sample_rate / len as f64;
        let omega = (0..len).map(|k| 2.0 * PI * df * signed_bin(k, len) as f64).collect();
        Spectral {
            len,
            sample_rate,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            omega,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bin_spacing(&self) -> f64 {
        self.sample_rate / self.len as f64
    }

    /// Angular frequency of every bin in FFT order, rad/s.
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        scratch.resize(self.forward.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
        self.forward.process_with_scratch(buf, scratch);
    }

    /// Unnormalized inverse transform in place; callers fold in 1/N.
    pub fn inverse(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        scratch.resize(self.inverse.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
        self.inverse.process_with_scratch(buf, scratch);
    }

    /// Multiply the spectrum of `buf` by `filter` (which carries the 1/N).
    pub fn filter(&self, buf: &mut [Complex64], filter: &[Complex64], scratch: &mut Vec<Complex64>) {
        self.forward(buf, scratch);
        buf.iter_mut().zip(filter).for_each(|(v, h)| *v *= h);
        self.inverse(buf, scratch);
    }

    /// exp(i·β·ω²/2)/N for accumulated dispersion `beta` (s²).
    pub fn dispersion_filter(&self, beta: f64) -> Vec<Complex64> {
        let norm = 1.0 / self.len as f64;
        self.omega.iter().map(|w| Complex64::from_polar(norm, 0.5 * beta * w * w)).collect()
    }
}

/// Bin index in (−N/2, N/2].
pub fn signed_bin(k: usize, len: usize) -> i64 {
    if k <= len / 2 {
        k as i64
    } else {
        k as i64 - len as i64
    }
}

/// FFT-order index of a signed bin.
pub fn wrap_bin(k: i64, len: usize) -> usize {
    k.rem_euclid(len as i64) as usize
}
