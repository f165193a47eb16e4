//! Reproducible parallel Monte-Carlo integration over axis-aligned boxes.
//!
//! Work is split into fixed-size batches; batch `b` draws from a ChaCha
//! stream keyed by (seed, b) and partial sums are reduced in batch order,
//! so results are bit-identical regardless of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub samples: u64,
    pub seed: u64,
    pub batch: u64,
}

impl McSettings {
    pub fn new(samples: u64, seed: u64) -> McSettings {
        McSettings { samples, seed, batch: 8192 }
    }

    /// Same sample budget, independent stream for a derived task.
    pub fn derive(&self, tag: u64) -> McSettings {
        McSettings { seed: splitmix(self.seed ^ splitmix(tag)), ..*self }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub accepted: u64,
}

impl McEstimate {
    pub fn zero() -> McEstimate {
        McEstimate { value: 0.0, stderr: 0.0, samples: 0, accepted: 0 }
    }

    pub fn relative_error(&self) -> f64 {
        if self.value == 0.0 {
            if self.stderr == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            self.stderr / self.value.abs()
        }
    }

    pub fn scaled(&self, k: f64) -> McEstimate {
        McEstimate { value: self.value * k, stderr: self.stderr * k.abs(), ..*self }
    }
}

/// One axis of the sampling box: uniform on [start, start + width).
#[derive(Debug, Clone, Copy)]
pub struct Interval {
    pub start: f64,
    pub width: f64,
}

#[derive(Default, Clone, Copy)]
struct Partial {
    sum: f64,
    sum_sq: f64,
    accepted: u64,
    count: u64,
}

/// Estimate ∫ g over the box. `g` returns `None` for rejected points, which
/// count as zeros.
pub fn integrate<const D: usize, G>(
    label: &str,
    axes: [Interval; D],
    settings: McSettings,
    g: G,
) -> Result<McEstimate>
where
    G: Fn(&[f64; D]) -> Option<f64> + Sync,
{
    let volume: f64 = axes.iter().map(|a| a.width).product();
    let batch = settings.batch.max(1);
    let batches = settings.samples.div_ceil(batch);
    let partials: Vec<Partial> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(b);
            let n = batch.min(settings.samples - b * batch);
            let mut p = Partial::default();
            let mut x = [0.0; D];
            for _ in 0..n {
                for (xi, a) in x.iter_mut().zip(&axes) {
                    *xi = a.start + a.width * rng.gen::<f64>();
                }
                if let Some(v) = g(&x) {
                    p.sum += v;
                    p.sum_sq += v * v;
                    p.accepted += 1;
                }
                p.count += 1;
            }
            p
        })
        .collect();
    let mut total = Partial::default();
    for p in partials {
        total.sum += p.sum;
        total.sum_sq += p.sum_sq;
        total.accepted += p.accepted;
        total.count += p.count;
    }
    if total.accepted == 0 {
        return Err(Error::NoAcceptedSamples(label.to_string()));
    }
    let n = total.count as f64;
    let mean = total.sum / n;
    let var = (total.sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    Ok(McEstimate {
        value: volume * mean,
        stderr: volume * (var / n).sqrt(),
        samples: total.count,
        accepted: total.accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(d: usize) -> Vec<Interval> {
        vec![Interval { start: 0.0, width: 1.0 }; d]
    }

    #[test]
    fn ball_volume_within_three_sigma() {
        let axes: [Interval; 3] = [Interval { start: -1.0, width: 2.0 }; 3];
        let est = integrate("ball", axes, McSettings::new(400_000, 7), |x| {
            (x.iter().map(|v| v * v).sum::<f64>() < 1.0).then_some(1.0)
        })
        .unwrap();
        let exact = 4.0 / 3.0 * std::f64::consts::PI;
        assert!((est.value - exact).abs() < 3.0 * est.stderr, "{est:?}");
        assert_eq!(unit(3).len(), 3);
    }

    #[test]
    fn deterministic_across_thread_pools() {
        let axes = [Interval { start: 0.0, width: 1.0 }; 2];
        let run = || integrate("p", axes, McSettings::new(50_000, 11), |x| Some(x[0] * x[1])).unwrap();
        let a = run();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(run);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn stderr_shrinks_as_inverse_sqrt() {
        let axes = [Interval { start: 0.0, width: 1.0 }; 1];
        let e1 = integrate("s", axes, McSettings::new(20_000, 3), |x| Some(x[0].sin())).unwrap();
        let e2 = integrate("s", axes, McSettings::new(320_000, 3), |x| Some(x[0].sin())).unwrap();
        let ratio = e1.stderr / e2.stderr;
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn all_rejected_is_an_error() {
        let axes = [Interval { start: 0.0, width: 1.0 }; 1];
        assert!(matches!(
            integrate("none", axes, McSettings::new(1000, 1), |_| None),
            Err(Error::NoAcceptedSamples(_))
        ));
    }
}
