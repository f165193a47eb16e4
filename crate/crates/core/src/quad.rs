//! Gauss-Legendre panel quadrature for smooth complex integrands, with
//! panel doubling until two successive estimates agree.

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use std::num::NonZeroUsize;

#[derive(Debug, Clone)]
pub struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    pub fn legendre(order: usize) -> Rule {
        let gl = GaussLegendre::new(NonZeroUsize::new(order.max(1)).unwrap());
        let (nodes, weights) = gl.iter().map(|(x, w)| (*x, *w)).unzip();
        Rule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> Complex64>(&self, a: f64, b: f64, mut f: F) -> Complex64 {
        self.mapped(a, b).map(|(x, w)| f(x) * w).sum()
    }
}

pub fn panels<F: FnMut(f64) -> Complex64>(rule: &Rule, a: f64, b: f64, n: usize, mut f: F) -> Complex64 {
    let h = (b - a) / n as f64;
    (0..n)
        .map(|k| rule.integrate(a + k as f64 * h, a + (k + 1) as f64 * h, &mut f))
        .sum()
}

/// ∫_a^b f with panel doubling until the relative change drops below `tol`.
pub fn adaptive<F: FnMut(f64) -> Complex64>(a: f64, b: f64, tol: f64, mut f: F) -> Complex64 {
    let rule = Rule::legendre(16);
    let mut n = 2;
    let mut prev = panels(&rule, a, b, n, &mut f);
    loop {
        n *= 2;
        let next = panels(&rule, a, b, n, &mut f);
        let scale = next.norm().max(prev.norm()).max(f64::MIN_POSITIVE);
        if (next - prev).norm() <= tol * scale || n >= 1 << 14 {
            return next;
        }
        prev = next;
    }
}

/// ∫_a^b dz outer(z) ∫_a^z dz' inner(z') on `n` panels.
pub fn nested_panels<F, G>(rule: &Rule, a: f64, b: f64, n: usize, mut outer: F, mut inner: G) -> Complex64
where
    F: FnMut(f64) -> Complex64,
    G: FnMut(f64) -> Complex64,
{
    let h = (b - a) / n as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut running = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let p0 = a + k as f64 * h;
        let p1 = p0 + h;
        for (z, w) in rule.mapped(p0, p1) {
            let partial = running + rule.integrate(p0, z, &mut inner);
            acc += outer(z) * partial * w;
        }
        running += rule.integrate(p0, p1, &mut inner);
    }
    acc
}

pub fn nested_adaptive<F, G>(a: f64, b: f64, tol: f64, mut outer: F, mut inner: G) -> Complex64
where
    F: FnMut(f64) -> Complex64,
    G: FnMut(f64) -> Complex64,
{
    let rule = Rule::legendre(16);
    let mut n = 2;
    let mut prev = nested_panels(&rule, a, b, n, &mut outer, &mut inner);
    loop {
        n *= 2;
        let next = nested_panels(&rule, a, b, n, &mut outer, &mut inner);
        let scale = next.norm().max(prev.norm()).max(f64::MIN_POSITIVE);
        if (next - prev).norm() <= tol * scale || n >= 1 << 12 {
            return next;
        }
        prev = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn oscillatory_exponential() {
        let k = Complex64::new(-0.3, 40.0);
        let exact = ((k * 2.0).exp() - 1.0) / k;
        let got = adaptive(0.0, 2.0, 1e-13, |x| (k * x).exp());
        assert_relative_eq!((got - exact).norm() / exact.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn nested_triangle() {
        // ∫_0^1 z ∫_0^z z'^2 = ∫ z^4/3 = 1/15
        let got = nested_adaptive(0.0, 1.0, 1e-14, Complex64::from, |z| Complex64::from(z * z));
        assert_relative_eq!(got.re, 1.0 / 15.0, max_relative = 1e-13);
    }
}
