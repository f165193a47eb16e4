//! Brute-force reference values built from discrete symbol-index sums.
//!
//! The per-span time-domain kernels k⁽ˡ⁾_{mnp} = ∫_span K_{mnp}(z) dz are
//! computed by numerical quadrature in z and in frequency, without using the
//! closed-form span integrals or the Parseval-type reductions that the Monte
//! Carlo path relies on. The gated frequency region of a channel triplet is a
//! polytope; in the coordinates u = ω₁ + ω₃, v = ω₁ − ω₃, ω₂ it splits into
//! two pieces on which every bound is linear, so tensor Gauss-Legendre rules
//! converge spectrally.
//!
//! From these arrays the module evaluates the coefficient definitions as
//! truncated sums, the signal-ASE variance as an exact moment computation on
//! the first-order perturbation, and the signal-signal variance by sampling
//! random symbol sequences.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::collections::HashMap;
use std::f64::consts::PI;

use crate::coeffs::Kind;
use crate::constellation::{Constellation, Moments};
use crate::link::{Link, PowerProfile, SpanProfile};
use crate::quad::Rule;

/// Kernel arrays of one ordered channel pair (s, s'): ω₁ in s, ω₃ in s',
/// ω₂ in s + s'.
#[derive(Debug, Clone)]
pub struct PairKernels {
    pub pair: (i32, i32),
    pub truncation: usize,
    /// One (2N+1)³ array per span, indexed [m][n][p].
    pub spans: Vec<Vec<Complex64>>,
}

impl PairKernels {
    fn side(&self) -> usize {
        2 * self.truncation + 1
    }

    #[inline]
    pub fn index(&self, m: i32, n: i32, p: i32) -> usize {
        let t = self.truncation as i32;
        let d = self.side();
        ((m + t) as usize * d + (n + t) as usize) * d + (p + t) as usize
    }

    /// Σ over spans after `amp` (0-based) of the span arrays; `None` sums all.
    pub fn tail(&self, amp: Option<usize>) -> Vec<Complex64> {
        let start = amp.map_or(0, |j| j + 1);
        let mut out = vec![Complex64::new(0.0, 0.0); self.spans[0].len()];
        for s in &self.spans[start..] {
            for (o, v) in out.iter_mut().zip(s) {
                *o += v;
            }
        }
        out
    }
}

/// Quadrature resolution for the kernel arrays.
#[derive(Debug, Clone, Copy)]
pub struct KernelResolution {
    pub truncation: usize,
    /// Extra Gauss nodes per dimension beyond what the highest symbol index
    /// requires.
    pub margin: usize,
}

impl KernelResolution {
    pub fn new(truncation: usize) -> KernelResolution {
        KernelResolution { truncation, margin: 16 }
    }
}

fn nodes_for_phase(phase: f64, margin: usize) -> usize {
    (0.5 * phase).ceil() as usize + margin
}

/// z-quadrature of f(z)exp(iθ∫β₂) over one span.
struct SpanRule {
    points: Vec<(f64, f64)>,
}

impl SpanRule {
    fn new(span: &SpanProfile, max_theta: f64) -> SpanRule {
        let phase = (span.beta2 * max_theta * span.length).abs() + span.alpha * span.length;
        let panels = 1 + (phase / 10.0).ceil() as usize;
        let rule = Rule::legendre(20);
        let h = span.length / panels as f64;
        let mut points = Vec::with_capacity(panels * rule.len());
        for k in 0..panels {
            points.extend(rule.mapped(k as f64 * h, (k + 1) as f64 * h));
        }
        SpanRule { points }
    }

    fn integrate(&self, span: &SpanProfile, theta: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(u, w) in &self.points {
            let amp = (-span.depletion_before - span.alpha * u).exp();
            let ph = theta * (span.dispersion_before + span.beta2 * u);
            acc += Complex64::from_polar(amp * w, ph);
        }
        acc
    }
}

/// Compute the per-span kernel arrays of channel pair (s, s').
pub fn pair_kernels(link: &Link, profile: &PowerProfile, pair: (i32, i32), res: KernelResolution) -> PairKernels {
    let t = link.symbol_period();
    let h = PI / t;
    let spacing = 2.0 * PI * link.channel_spacing;
    let (c1, c3) = pair;
    let cu = spacing * (c1 + c3) as f64;
    let cv = spacing * (c1 - c3) as f64;
    let n = res.truncation as i32;
    let side = res.side();
    let nd = 4 * res.truncation + 1;
    let tau = 2.0 * PI;

    let max_sep = {
        let lo = [spacing * c1 as f64, spacing * (c1 + c3) as f64, spacing * c3 as f64];
        let spread = lo.iter().cloned().fold(f64::MIN, f64::max) - lo.iter().cloned().fold(f64::MAX, f64::min);
        spread + 2.0 * h
    };
    let max_theta = max_sep * max_sep;
    let span_rules: Vec<SpanRule> = profile.spans.iter().map(|s| SpanRule::new(s, max_theta)).collect();
    // Phase of the symbol-index exponentials across each integration
    // interval, plus the z-integrated dispersion phase across the band.
    let disp_phase: f64 = profile.spans.iter().map(|s| (s.beta2 * s.length).abs()).sum::<f64>() * max_theta;
    let nu = nodes_for_phase(2.0 * PI * n as f64 + disp_phase, res.margin);
    let nv = nodes_for_phase(4.0 * PI * n as f64 + disp_phase, res.margin);
    let nw = nodes_for_phase(2.0 * PI * n as f64 + disp_phase, res.margin);
    let rule_u = Rule::legendre(nu);
    let rule_v = Rule::legendre(nv);
    let rule_w = Rule::legendre(nw);

    let mut u_nodes: Vec<(f64, f64)> = rule_u.mapped(cu - 2.0 * h, cu).collect();
    u_nodes.extend(rule_u.mapped(cu, cu + 2.0 * h));

    let n_spans = profile.spans.len();
    let zero = Complex64::new(0.0, 0.0);

    let per_u = |&(u, wu): &(f64, f64)| -> Vec<Vec<Complex64>> {
        let a = 2.0 * h - (u - cu).abs();
        let v_nodes: Vec<(f64, f64)> = rule_v.mapped(cv - a, cv + a).collect();
        let w_lo = cu.max(u) - h;
        let w_hi = cu.min(u) + h;
        let w_nodes: Vec<(f64, f64)> = rule_w.mapped(w_lo, w_hi).collect();
        // e^{-i p ω₂ T} for each ω₂ node.
        let w_phase: Vec<Vec<Complex64>> = w_nodes
            .iter()
            .map(|&(w2, ww)| (-n..=n).map(|p| Complex64::from_polar(ww, -(p as f64) * w2 * t)).collect())
            .collect();
        let v_phase: Vec<Vec<Complex64>> = v_nodes
            .iter()
            .map(|&(v, wv)| (-2 * n..=2 * n).map(|d| Complex64::from_polar(wv, 0.5 * d as f64 * v * t)).collect())
            .collect();
        let mut a_stage = vec![vec![zero; v_nodes.len() * side]; n_spans];
        for (iv, &(v, _)) in v_nodes.iter().enumerate() {
            let w1 = 0.5 * (u + v);
            let w3 = 0.5 * (u - v);
            for (iw, &(w2, _)) in w_nodes.iter().enumerate() {
                let theta = (w2 - w1) * (w2 - w3);
                for (l, span) in profile.spans.iter().enumerate() {
                    let g = span_rules[l].integrate(span, theta);
                    let row = &mut a_stage[l][iv * side..(iv + 1) * side];
                    for (r, ph) in row.iter_mut().zip(&w_phase[iw]) {
                        *r += g * ph;
                    }
                }
            }
        }
        let mut out = Vec::with_capacity(n_spans);
        for a_l in &a_stage {
            let mut b = vec![zero; nd * side];
            for (iv, vp) in v_phase.iter().enumerate() {
                let row = &a_l[iv * side..(iv + 1) * side];
                for (id, ph) in vp.iter().enumerate() {
                    let dst = &mut b[id * side..(id + 1) * side];
                    for (d, r) in dst.iter_mut().zip(row) {
                        *d += ph * r;
                    }
                }
            }
            let mut x = vec![zero; side * side * side];
            for m in -n..=n {
                for k in -n..=n {
                    let ph = Complex64::from_polar(0.5 * wu, 0.5 * (m + k) as f64 * u * t);
                    let id = (m - k + 2 * n) as usize;
                    let src = &b[id * side..(id + 1) * side];
                    let base = ((m + n) as usize * side + (k + n) as usize) * side;
                    for (dst, s) in x[base..base + side].iter_mut().zip(src) {
                        *dst += ph * s;
                    }
                }
            }
            out.push(x);
        }
        out
    };

    // Fixed chunks reduced in order keep the result independent of the
    // thread count while bounding memory.
    let add = |acc: &mut Vec<Vec<Complex64>>, part: Vec<Vec<Complex64>>| {
        for (a, p) in acc.iter_mut().zip(part) {
            for (x, v) in a.iter_mut().zip(p) {
                *x += v;
            }
        }
    };
    let chunk = u_nodes.len().div_ceil(16).max(1);
    let partials: Vec<Vec<Vec<Complex64>>> = u_nodes
        .par_chunks(chunk)
        .map(|nodes| {
            let mut acc = vec![vec![zero; side * side * side]; n_spans];
            for node in nodes {
                add(&mut acc, per_u(node));
            }
            acc
        })
        .collect();
    let scale = t * t / tau.powi(3);
    let mut spans = vec![vec![zero; side * side * side]; n_spans];
    for part in partials {
        add(&mut spans, part);
    }
    for s in spans.iter_mut() {
        s.iter_mut().for_each(|v| *v *= scale);
    }
    PairKernels { pair, truncation: res.truncation, spans }
}

impl KernelResolution {
    fn side(&self) -> usize {
        2 * self.truncation + 1
    }
}

/// One family of terms in the first-order perturbation of the x-polarized
/// channel of interest: a field in channel c₁ at ω₁, one in c₃ at ω₃ and a
/// conjugated one in c₁ + c₃ at ω₂. Same-polarization families come from
/// |E_x|²E_x; cross-polarization families from |E_y|²E_x, with E_x at ω₁.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Family {
    pub pair: (i32, i32),
    pub cross_pol: bool,
}

impl Family {
    fn pols(&self) -> [usize; 3] {
        if self.cross_pol { [0, 1, 1] } else { [0, 0, 0] }
    }
}

/// Every ordered channel pair whose FWM product lands in the channel of
/// interest.
pub fn families(channels: &[i32], cross_pol: bool) -> Vec<Family> {
    let mut out = Vec::new();
    for &a in channels {
        for &b in channels {
            if channels.contains(&(a + b)) {
                out.push(Family { pair: (a, b), cross_pol });
            }
        }
    }
    out
}

/// Cache of kernel arrays for one link state.
pub struct Oracle<'a> {
    link: &'a Link,
    profile: &'a PowerProfile,
    res: KernelResolution,
    cache: HashMap<(i32, i32), PairKernels>,
}

impl<'a> Oracle<'a> {
    pub fn new(link: &'a Link, profile: &'a PowerProfile, truncation: usize) -> Oracle<'a> {
        Oracle { link, profile, res: KernelResolution::new(truncation), cache: HashMap::new() }
    }

    pub fn with_resolution(link: &'a Link, profile: &'a PowerProfile, res: KernelResolution) -> Oracle<'a> {
        Oracle { link, profile, res, cache: HashMap::new() }
    }

    pub fn truncation(&self) -> usize {
        self.res.truncation
    }

    pub fn kernels(&mut self, pair: (i32, i32)) -> &PairKernels {
        let (link, profile, res) = (self.link, self.profile, self.res);
        self.cache.entry(pair).or_insert_with(|| pair_kernels(link, profile, pair, res))
    }

    fn noise_added(&self) -> Vec<f64> {
        self.profile.spans.iter().map(|s| s.noise_added).collect()
    }

    /// Coefficient from its discrete definition (X as Σ|X_mnp|²-type sums of
    /// the whole-link kernel; χ as the ξ(min(z, z'))-weighted double sums).
    pub fn coefficient(&mut self, kind: Kind) -> f64 {
        let t = self.link.symbol_period();
        let n = self.res.truncation as i32;
        let xi = self.noise_added();
        let pair = match kind {
            Kind::X1Xpm(s) | Kind::X3Xpm(s) | Kind::Chi1Xpm(s) | Kind::Chi3Xpm(s) => (0, s),
            Kind::X1Fwm(s, s2) | Kind::Chi1Fwm(s, s2) => (s, s2),
            Kind::X2Fwm(s) | Kind::Chi2Fwm(s) => (s, s),
            _ => (0, 0),
        };
        let k = self.kernels(pair).clone();
        let pattern = |a: &[Complex64]| -> f64 {
            let at = |m: i32, q: i32, p: i32| a[k.index(m, q, p)];
            let range = || -n..=n;
            match kind {
                Kind::X1 | Kind::X1Xpm(_) | Kind::X1Fwm(..) | Kind::Chi1 | Kind::Chi1Xpm(_) | Kind::Chi1Fwm(..) => {
                    a.iter().map(|v| v.norm_sqr()).sum()
                }
                Kind::X2 | Kind::Chi2 | Kind::X2Fwm(_) | Kind::Chi2Fwm(_) => range().flat_map(|m| range().map(move |q| (m, q))).map(|(m, q)| at(m, m, q).norm_sqr()).sum(),
                Kind::X3 | Kind::X3Xpm(_) | Kind::Chi3 | Kind::Chi3Xpm(_) => {
                    range().flat_map(|m| range().map(move |q| (m, q))).map(|(m, q)| at(m, q, q).norm_sqr()).sum()
                }
                Kind::X4 => range()
                    .flat_map(|m| range().map(move |q| (m, q)))
                    .map(|(m, q)| (at(m, q, q) * at(m, m, m).conj()).re)
                    .sum(),
                Kind::X5 => range().map(|m| at(m, m, m).norm_sqr()).sum(),
            }
        };
        let noise = matches!(
            kind,
            Kind::Chi1 | Kind::Chi2 | Kind::Chi3 | Kind::Chi1Xpm(_) | Kind::Chi3Xpm(_) | Kind::Chi1Fwm(..) | Kind::Chi2Fwm(_)
        );
        if noise {
            // ξ(min(z, z')) = Σ_j ξ_j θ(z − z_j)θ(z' − z_j): split by amplifier.
            (0..xi.len()).filter(|&j| xi[j] != 0.0).map(|j| xi[j] * pattern(&k.tail(Some(j)))).sum::<f64>() * t * t
        } else {
            pattern(&k.tail(None)) * t * t
        }
    }

    /// Signal-ASE variance bracket Var(c)/(γ²σ²_qn P) of the given families,
    /// from exact symbol and noise moments. Rotation terms (a symbol pair
    /// contracted with itself) are removed.
    pub fn noise_bracket(&mut self, families: &[Family], moments: Moments) -> f64 {
        let t = self.link.symbol_period();
        let n = self.res.truncation as i32;
        let side = (2 * n + 1) as usize;
        let xi = self.noise_added();
        let channels = self.link.channels.clone();
        let ch_index = |c: i32| channels.iter().position(|&x| x == c).expect("channel in plan");
        let n_ch = channels.len();
        let vars = 2 * n_ch * side;
        let sym = |pol: usize, c: i32, m: i32| (pol * n_ch + ch_index(c)) * side + (m + n) as usize;
        let kernels: Vec<(Family, PairKernels)> = families.iter().map(|f| (*f, self.kernels(f.pair).clone())).collect();
        let mu4 = moments.mu4 / (moments.mu2 * moments.mu2);

        let mut total = 0.0;
        for (j, &x) in xi.iter().enumerate() {
            if x == 0.0 || j + 1 >= xi.len() {
                continue;
            }
            let tails: Vec<(Family, Vec<Complex64>)> = kernels.iter().map(|(f, k)| (*f, k.tail(Some(j)))).collect();
            let idx = |m: i32, q: i32, p: i32| ((m + n) as usize * side + (q + n) as usize) * side + (p + n) as usize;
            let per_var: f64 = (0..2usize)
                .flat_map(|pol| channels.iter().flat_map(move |&c| (-n..=n).map(move |k| (pol, c, k))))
                .collect::<Vec<_>>()
                .par_iter()
                .map(|&(pol, c, k)| {
                    let mut q = vec![Complex64::new(0.0, 0.0); vars * vars];
                    let mut qc = vec![Complex64::new(0.0, 0.0); vars * vars];
                    let mut any_q = false;
                    let mut any_qc = false;
                    for (f, tail) in &tails {
                        let [p1, p3, p2] = f.pols();
                        let (c1, c3) = f.pair;
                        let c2 = c1 + c3;
                        if p1 == pol && c1 == c {
                            any_q = true;
                            for a in -n..=n {
                                for b in -n..=n {
                                    q[sym(p3, c3, a) * vars + sym(p2, c2, b)] += tail[idx(k, a, b)];
                                }
                            }
                        }
                        if p3 == pol && c3 == c {
                            any_q = true;
                            for a in -n..=n {
                                for b in -n..=n {
                                    q[sym(p1, c1, a) * vars + sym(p2, c2, b)] += tail[idx(a, k, b)];
                                }
                            }
                        }
                        if p2 == pol && c2 == c {
                            any_qc = true;
                            for a in -n..=n {
                                for b in -n..=n {
                                    qc[sym(p1, c1, a) * vars + sym(p3, c3, b)] += tail[idx(a, b, k)];
                                }
                            }
                        }
                    }
                    let mut acc = 0.0;
                    if any_q {
                        for r in 0..vars {
                            for s in 0..vars {
                                let v = q[r * vars + s].norm_sqr();
                                acc += if r == s { (mu4 - 1.0) * v } else { v };
                            }
                        }
                    }
                    if any_qc {
                        for r in 0..vars {
                            acc += mu4 * qc[r * vars + r].norm_sqr();
                            for s in r + 1..vars {
                                acc += (qc[r * vars + s] + qc[s * vars + r]).norm_sqr();
                            }
                        }
                    }
                    acc
                })
                .sum();
            total += x * per_var;
        }
        total * t * t
    }

    /// Signal-signal variance bracket Var(b − βa₀)/(γ²P²) of the given
    /// families by sampling random symbol sequences, where β a₀ is the part
    /// of the distortion correlated with the transmitted symbol. Returns the
    /// estimate and its standard error; symbol sums use |index| ≤ `window`.
    pub fn signal_bracket(
        &mut self,
        families: &[Family],
        constellation: Constellation,
        window: usize,
        draws: usize,
        seed: u64,
    ) -> (f64, f64) {
        let t = self.link.symbol_period();
        let w = window.min(self.res.truncation) as i32;
        let ws = (2 * w + 1) as usize;
        let channels = self.link.channels.clone();
        let n_ch = channels.len();
        let ch_index = |c: i32| channels.iter().position(|&x| x == c).expect("channel in plan");
        // Whole-link kernels restricted to the window, as dense [m][q][p].
        let blocks: Vec<(Family, Vec<Complex64>)> = families
            .iter()
            .map(|f| {
                let k = self.kernels(f.pair);
                let full = k.tail(None);
                let mut b = Vec::with_capacity(ws * ws * ws);
                for m in -w..=w {
                    for q in -w..=w {
                        for p in -w..=w {
                            b.push(full[k.index(m, q, p)]);
                        }
                    }
                }
                (*f, b)
            })
            .collect();
        let points = constellation.points();
        let moments = constellation.moments();
        let sym_slot = |pol: usize, c: i32| pol * n_ch + ch_index(c);

        // β = E[b a₀*] from exact fourth moments.
        let mu4 = moments.mu4;
        let mut beta = Complex64::new(0.0, 0.0);
        let target = (sym_slot(0, 0), 0i32);
        for (f, b) in &blocks {
            let [p1, p3, p2] = f.pols();
            let (c1, c3) = f.pair;
            let s1 = sym_slot(p1, c1);
            let s3 = sym_slot(p3, c3);
            let s2 = sym_slot(p2, c1 + c3);
            for m in -w..=w {
                for q in -w..=w {
                    for p in -w..=w {
                        let u = (s1, m);
                        let v = (s3, q);
                        let x = (s2, p);
                        let mut e = 0.0;
                        if u == target && v == x {
                            e += 1.0;
                        }
                        if v == target && u == x {
                            e += 1.0;
                        }
                        if u == target && v == target && x == target {
                            e += mu4 - 2.0;
                        }
                        if e != 0.0 {
                            let i = (((m + w) as usize * ws) + (q + w) as usize) * ws + (p + w) as usize;
                            beta += b[i] * e;
                        }
                    }
                }
            }
        }

        let slots = 2 * n_ch;
        let batch = 256usize;
        let batches = draws.div_ceil(batch);
        let sums: Vec<(f64, f64, usize)> = (0..batches)
            .into_par_iter()
            .map(|bi| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(bi as u64);
                let count = batch.min(draws - bi * batch);
                let mut a = vec![Complex64::new(0.0, 0.0); slots * ws];
                let (mut s, mut s2) = (0.0, 0.0);
                for _ in 0..count {
                    for v in a.iter_mut() {
                        *v = match &points {
                            Some(pts) => pts[rng.gen_range(0..pts.len())],
                            None => {
                                let re: f64 = rng.sample(StandardNormal);
                                let im: f64 = rng.sample(StandardNormal);
                                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                            }
                        };
                    }
                    let mut b = Complex64::new(0.0, 0.0);
                    for (f, blk) in &blocks {
                        let [p1, p3, p2] = f.pols();
                        let (c1, c3) = f.pair;
                        let a1 = &a[sym_slot(p1, c1) * ws..][..ws];
                        let a3 = &a[sym_slot(p3, c3) * ws..][..ws];
                        let a2 = &a[sym_slot(p2, c1 + c3) * ws..][..ws];
                        for (mi, am) in a1.iter().enumerate() {
                            for (qi, aq) in a3.iter().enumerate() {
                                let row = &blk[(mi * ws + qi) * ws..][..ws];
                                let dot: Complex64 = row.iter().zip(a2).map(|(x, y)| x * y.conj()).sum();
                                b += am * aq * dot;
                            }
                        }
                    }
                    let a0 = a[sym_slot(0, 0) * ws + w as usize];
                    let e = (b - beta * a0).norm_sqr();
                    s += e;
                    s2 += e * e;
                }
                (s, s2, count)
            })
            .collect();
        let (mut s, mut s2, mut cnt) = (0.0, 0.0, 0usize);
        for (a, b, c) in sums {
            s += a;
            s2 += b;
            cnt += c;
        }
        let nn = cnt as f64;
        let mean = s / nn;
        let var = (s2 / nn - mean * mean).max(0.0);
        (mean * t * t, (var / nn).sqrt() * t * t)
    }
}
