//! Modulation formats and their normalized moments.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constellation {
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "16QAM")]
    Qam16,
    #[serde(rename = "64QAM")]
    Qam64,
    #[serde(rename = "256QAM")]
    Qam256,
    /// Circular complex Gaussian source (the "Gaussian" limit).
    #[serde(rename = "Gaussian")]
    Gaussian,
}

impl Constellation {
    pub fn parse(name: &str) -> Option<Constellation> {
        match name.to_ascii_uppercase().as_str() {
            "QPSK" | "4QAM" => Some(Constellation::Qpsk),
            "16QAM" => Some(Constellation::Qam16),
            "64QAM" => Some(Constellation::Qam64),
            "256QAM" => Some(Constellation::Qam256),
            "GAUSSIAN" | "GAUSS" => Some(Constellation::Gaussian),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Constellation::Qpsk => "QPSK",
            Constellation::Qam16 => "16QAM",
            Constellation::Qam64 => "64QAM",
            Constellation::Qam256 => "256QAM",
            Constellation::Gaussian => "Gaussian",
        }
    }

    /// Points of a square QAM with unit mean energy; `None` for Gaussian.
    pub fn points(self) -> Option<Vec<Complex64>> {
        let side = match self {
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
            Constellation::Qam64 => 8,
            Constellation::Qam256 => 16,
            Constellation::Gaussian => return None,
        };
        let levels: Vec<f64> = (0..side).map(|k| (2 * k) as f64 - (side - 1) as f64).collect();
        let mut pts = Vec::with_capacity(side * side);
        for &i in &levels {
            for &q in &levels {
                pts.push(Complex64::new(i, q));
            }
        }
        let energy = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / pts.len() as f64;
        let scale = energy.sqrt().recip();
        Some(pts.into_iter().map(|p| p * scale).collect())
    }

    pub fn bits_per_symbol(self) -> Option<f64> {
        self.points().map(|p| (p.len() as f64).log2())
    }

    pub fn moments(self) -> Moments {
        match self.points() {
            None => Moments { mu2: 1.0, mu4: 2.0, mu6: 6.0 },
            Some(pts) => Moments::of(&pts),
        }
    }
}

/// A modulation format given by name or by an explicit point list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Format {
    Named(Constellation),
    /// (re, im) pairs; rescaled to unit mean energy.
    Points(Vec<[f64; 2]>),
}

impl Format {
    pub fn name(&self) -> String {
        match self {
            Format::Named(c) => c.name().to_string(),
            Format::Points(p) => format!("custom{}", p.len()),
        }
    }

    /// Unit-energy points; `None` for a Gaussian source.
    pub fn points(&self) -> Result<Option<Vec<Complex64>>> {
        match self {
            Format::Named(c) => Ok(c.points()),
            Format::Points(raw) => {
                if raw.is_empty() {
                    return Err(Error::Config("constellation has no points".into()));
                }
                let pts: Vec<Complex64> = raw.iter().map(|p| Complex64::new(p[0], p[1])).collect();
                let energy = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / pts.len() as f64;
                if !(energy > 0.0) {
                    return Err(Error::Config("constellation has zero energy".into()));
                }
                let scale = energy.sqrt().recip();
                Ok(Some(pts.into_iter().map(|p| p * scale).collect()))
            }
        }
    }

    pub fn moments(&self) -> Result<Moments> {
        Ok(match self.points()? {
            None => Constellation::Gaussian.moments(),
            Some(pts) => Moments::of(&pts),
        })
    }
}

/// Moments μ_n = E|a|^n of the normalized constellation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mu2: f64,
    pub mu4: f64,
    pub mu6: f64,
}

impl Moments {
    pub fn of(points: &[Complex64]) -> Moments {
        let n = points.len() as f64;
        let m = |k: i32| points.iter().map(|p| p.norm_sqr().powi(k)).sum::<f64>() / n;
        Moments { mu2: m(1), mu4: m(2), mu6: m(3) }
    }

    /// κ₄ − 2: vanishes for a Gaussian source.
    pub fn excess4(&self) -> f64 {
        self.mu4 / (self.mu2 * self.mu2) - 2.0
    }

    /// κ₆ − 9κ₄ + 12: vanishes for a Gaussian source.
    pub fn excess6(&self) -> f64 {
        let k4 = self.mu4 / (self.mu2 * self.mu2);
        let k6 = self.mu6 / self.mu2.powi(3);
        k6 - 9.0 * k4 + 12.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_moments() {
        let q = Constellation::Qpsk.moments();
        assert_relative_eq!(q.mu4, 1.0, epsilon = 1e-14);
        assert_relative_eq!(q.mu6, 1.0, epsilon = 1e-14);
        let m = Constellation::Qam16.moments();
        assert_relative_eq!(m.mu2, 1.0, epsilon = 1e-14);
        assert_relative_eq!(m.mu4, 1.32, epsilon = 1e-12);
        assert_relative_eq!(m.mu6, 1.96, epsilon = 1e-12);
    }

    #[test]
    fn explicit_points_are_normalized() {
        let f = Format::Points(vec![[3.0, 3.0], [-3.0, 3.0], [3.0, -3.0], [-3.0, -3.0]]);
        let m = f.moments().unwrap();
        assert_relative_eq!(m.mu2, 1.0, epsilon = 1e-14);
        assert_relative_eq!(m.mu4, 1.0, epsilon = 1e-14);
        assert!(Format::Points(vec![]).moments().is_err());
    }

    #[test]
    fn moments_ignore_rotation_and_scale() {
        let base = Constellation::Qam16.points().unwrap();
        let rot = Complex64::from_polar(2.5, 0.37);
        let f = Format::Points(base.iter().map(|p| p * rot).map(|p| [p.re, p.im]).collect());
        let a = f.moments().unwrap();
        let b = Constellation::Qam16.moments();
        assert_relative_eq!(a.mu4, b.mu4, epsilon = 1e-12);
        assert_relative_eq!(a.mu6, b.mu6, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_brackets_vanish() {
        let g = Constellation::Gaussian.moments();
        assert_eq!(g.excess4(), 0.0);
        assert_eq!(g.excess6(), 0.0);
    }

    #[test]
    fn qam_is_zero_mean_and_isotropic() {
        for c in [Constellation::Qpsk, Constellation::Qam16, Constellation::Qam256] {
            let pts = c.points().unwrap();
            let n = pts.len() as f64;
            let mean: Complex64 = pts.iter().sum::<Complex64>() / n;
            let second: Complex64 = pts.iter().map(|p| p * p).sum::<Complex64>() / n;
            assert!(mean.norm() < 1e-14 && second.norm() < 1e-14);
        }
    }

    #[test]
    fn names_round_trip() {
        for c in [Constellation::Qpsk, Constellation::Qam16, Constellation::Qam64, Constellation::Qam256, Constellation::Gaussian] {
            assert_eq!(Constellation::parse(c.name()), Some(c));
        }
    }
}
