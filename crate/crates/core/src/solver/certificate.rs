//! Constructive contraction constants and the sampled checks behind them.
//!
//! The supremum of the total variation of `H = Q̄(x, f, h_(x,g)) −
//! Q̄(y, g, h_(y,f))` is estimated by sampling state pairs in `C_R` and
//! function pairs of ω-span at most `M`; every certificate carries the
//! sample counts and is a sampled estimate, not a proof.

use serde::{Deserialize, Serialize};

use super::BellmanProblem;
use crate::entropic::{entropic_weighted, log_expectation_exp};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::norms::{node_variation, span_slice};
use crate::parallel::map_indexed;
use crate::rng::PathRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificateOptions {
    /// Drift rate `φ ∈ (b1, 1)`; defaults to `(1 + b1)/2`.
    pub phi: Option<f64>,
    /// `R = 2α/(1−φ)·(1 + r_margin)`.
    pub r_margin: f64,
    pub function_pairs: usize,
    pub state_pairs: usize,
    /// Certificate fails when the sampled sup-variation reaches `2 − eps_min`.
    pub eps_min: f64,
    pub seed: u64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions {
            phi: None,
            r_margin: 1.0,
            function_pairs: 64,
            state_pairs: 256,
            eps_min: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    /// Sampled sup-variation too close to 2.
    MixingTooWeak,
    /// `α_φ` overflowed.
    AlphaOverflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionCertificate {
    pub gamma_bar: f64,
    /// Span bound `μ⁰(a2) − μ^γ̄(−a2) + b2`.
    pub m: f64,
    pub phi: f64,
    pub alpha: f64,
    pub log_alpha: f64,
    pub r: f64,
    pub beta: Option<f64>,
    pub l: Option<f64>,
    pub gamma0: Option<f64>,
    pub sup_var: f64,
    /// `ω ≡ 0`: every state is in `C_R`, `β` is free and `L = sup_var / 2`.
    pub global_doeblin: bool,
    pub sampled: bool,
    pub function_pairs: usize,
    pub state_pairs: usize,
    pub nodes_in_cr: usize,
    pub verdict: Verdict,
}

impl ContractionCertificate {
    pub fn certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }
}

/// `M = μ⁰(a2) − μ^γ̄(−a2) + b2`.
pub fn span_bound(problem: &BellmanProblem, gamma_bar: f64) -> f64 {
    let model = problem.model();
    let p = model.law().weights();
    let a2 = model.a2_samples();
    let neg: Vec<f64> = a2.iter().map(|v| -v).collect();
    entropic_weighted(&a2, p, 0.0) - entropic_weighted(&neg, p, gamma_bar) + model.b2()
}

/// `ln α_φ`, the logarithm of the three-expectation product.
pub fn log_alpha(problem: &BellmanProblem, gamma: f64, phi: f64, m: f64) -> f64 {
    let model = problem.model();
    let p = model.law().weights();
    let (b1, b2) = (model.b1(), model.b2());
    let a1 = model.a1_samples();
    let a2 = model.a2_samples();
    let c = 4.0 * (m * b1 - gamma * b2) / (phi - b1);
    let first: Vec<f64> = a1.iter().map(|v| c * v).collect();
    let mixed: Vec<f64> = a1.iter().zip(&a2).map(|(x, y)| m * x - gamma * y).collect();
    let doubled: Vec<f64> = mixed.iter().map(|v| 2.0 * v).collect();
    2.0 * m
        + ((phi - b1) / (m * b1)).ln()
        + 0.5 * log_expectation_exp(&first, p)
        + 0.5 * log_expectation_exp(&doubled, p)
        + log_expectation_exp(&mixed, p)
}

/// Nodes whose weight admits a partner inside `C_R`.
fn cr_nodes(problem: &BellmanProblem, r: f64) -> Vec<usize> {
    let w = problem.omega().values();
    let wmin = w.iter().copied().fold(f64::INFINITY, f64::min);
    (0..w.len()).filter(|&i| w[i] + wmin <= r).collect()
}

/// Random function with ω-span exactly `target`; `kind` picks the family.
pub fn random_span_function(
    rng: &mut PathRng,
    weights: &[f64],
    target: f64,
    kind: usize,
) -> Vec<f64> {
    let n = weights.len();
    let raw: Vec<f64> = match kind % 3 {
        0 => weights
            .iter()
            .map(|&o| (2.0 * rng.uniform() - 1.0) * (1.0 + o))
            .collect(),
        1 => {
            let cut = rng.index(n);
            let sign = if rng.uniform() < 0.5 { 1.0 } else { -1.0 };
            weights
                .iter()
                .enumerate()
                .map(|(i, &o)| sign * if i < cut { -1.0 } else { 1.0 } * (1.0 + o))
                .collect()
        }
        _ => {
            let freq = 1.0 + 6.0 * rng.uniform();
            let phase = std::f64::consts::TAU * rng.uniform();
            (0..n)
                .map(|i| {
                    (freq * i as f64 / n as f64 * std::f64::consts::TAU + phase).sin()
                        + 0.3 * rng.standard_normal()
                })
                .collect()
        }
    };
    let s = span_slice(&raw, weights, 1.0).value;
    if s == 0.0 {
        return vec![0.0; n];
    }
    raw.into_iter().map(|v| v * target / s).collect()
}

/// Function pairs `(f, g)` of ω-span at most `m`: two extreme step pairs
/// followed by random pairs.
fn function_pairs(weights: &[f64], m: f64, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = weights.len();
    let step: Vec<f64> = weights
        .iter()
        .enumerate()
        .map(|(i, &o)| if 2 * i < n { -m } else { m } * (1.0 + o))
        .collect();
    let flip: Vec<f64> = step.iter().map(|v| -v).collect();
    let mut out = vec![(step.clone(), flip.clone()), (flip, step)];
    let mut rng = PathRng::new(seed, 1);
    while out.len() < count.max(2) {
        let k = out.len();
        let sf = m * (0.25 + 0.75 * rng.uniform());
        let sg = m * (0.25 + 0.75 * rng.uniform());
        let f = random_span_function(&mut rng, weights, sf, k);
        let g = random_span_function(&mut rng, weights, sg, k + 1);
        out.push((f, g));
    }
    out.truncate(count.max(2));
    out
}

/// State pairs in `C_R`: the two extreme pairs then uniform samples.
fn state_pairs(
    problem: &BellmanProblem,
    nodes: &[usize],
    r: f64,
    count: usize,
    seed: u64,
) -> Vec<(usize, usize)> {
    let w = problem.omega().values();
    let (first, last) = (nodes[0], nodes[nodes.len() - 1]);
    let mut out = Vec::new();
    if w[first] + w[last] <= r {
        out.push((first, last));
        out.push((last, first));
    }
    let mut rng = PathRng::new(seed, 2);
    let mut attempts = 0;
    while out.len() < count && attempts < 100 * count {
        attempts += 1;
        let x = nodes[rng.index(nodes.len())];
        let y = nodes[rng.index(nodes.len())];
        if x != y && w[x] + w[y] <= r {
            out.push((x, y));
        }
    }
    out
}

/// Total variation of `H^{f,g}_{x,y}` under the projected successor law.
fn pair_variation(
    problem: &BellmanProblem,
    gamma: f64,
    f: &[f64],
    g: &[f64],
    pol_f: &[usize],
    pol_g: &[usize],
    x: usize,
    y: usize,
    beta: f64,
) -> f64 {
    let qx = problem.tilted_node_masses(x, f, pol_g[x], gamma);
    let qy = problem.tilted_node_masses(y, g, pol_f[y], gamma);
    let h: Vec<f64> = qx.iter().zip(&qy).map(|(a, b)| a - b).collect();
    node_variation(&h, problem.omega().values(), beta)
}

/// Sampled `sup ‖H^{f,g}_{x,y}‖_var` over `(x, y) ∈ C_R` and `(f, g)` of span ≤ `m`.
pub fn sup_variation(
    problem: &BellmanProblem,
    gamma: f64,
    m: f64,
    r: f64,
    opts: &CertificateOptions,
) -> Result<(f64, usize, usize, usize)> {
    let nodes = cr_nodes(problem, r);
    if nodes.is_empty() {
        return Err(Error::Domain(format!(
            "C_R is empty on the grid for R = {r}"
        )));
    }
    let w = problem.omega().values();
    let fns = function_pairs(w, m, opts.function_pairs, opts.seed);
    let states = state_pairs(problem, &nodes, r, opts.state_pairs, opts.seed);
    let mut best: f64 = 0.0;
    for (f, g) in &fns {
        let (_, pol_f) = problem.raw_t(f, gamma);
        let (_, pol_g) = problem.raw_t(g, gamma);
        let vals = map_indexed(
            problem.execution(),
            states.len(),
            || (),
            |_, i| {
                let (x, y) = states[i];
                pair_variation(problem, gamma, f, g, &pol_f, &pol_g, x, y, 0.0)
            },
        );
        best = vals.into_iter().fold(best, f64::max);
    }
    Ok((best.min(2.0), fns.len(), states.len(), nodes.len()))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma < 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "risk parameter must be negative, got {gamma}"
        )));
    }
    Ok(())
}

/// Builds `(M, φ, α_φ, R, β, L, γ₀)` at `γ̄`.
pub fn contraction_certificate(
    problem: &BellmanProblem,
    gamma_bar: f64,
    opts: &CertificateOptions,
) -> Result<ContractionCertificate> {
    check_gamma(gamma_bar)?;
    let model = problem.model();
    let b1 = model.b1();
    let phi = opts.phi.unwrap_or(0.5 * (1.0 + b1));
    if !(phi > b1 && phi < 1.0) {
        return Err(Error::InvalidInput(format!(
            "phi must lie in (b1, 1) = ({b1}, 1), got {phi}"
        )));
    }
    if !(opts.r_margin > 0.0 && opts.eps_min > 0.0) {
        return Err(Error::InvalidInput(
            "r_margin and eps_min must be positive".into(),
        ));
    }
    let m = span_bound(problem, gamma_bar);
    let global = model.weight_vanishes();
    let mut cert = ContractionCertificate {
        gamma_bar,
        m,
        phi,
        alpha: 0.0,
        log_alpha: f64::NEG_INFINITY,
        r: 0.0,
        beta: None,
        l: None,
        gamma0: None,
        sup_var: 0.0,
        global_doeblin: global,
        sampled: true,
        function_pairs: 0,
        state_pairs: 0,
        nodes_in_cr: 0,
        verdict: Verdict::Certified,
    };
    if global {
        let (s, nf, ns, nc) = sup_variation(problem, gamma_bar, m, f64::INFINITY, opts)?;
        cert.sup_var = s;
        (cert.function_pairs, cert.state_pairs, cert.nodes_in_cr) = (nf, ns, nc);
        if s >= 2.0 - opts.eps_min {
            cert.verdict = Verdict::MixingTooWeak;
            return Ok(cert);
        }
        let beta = 0.5;
        let l = s / 2.0;
        cert.beta = Some(beta);
        cert.l = Some(l);
        cert.gamma0 = Some(gamma_bar.max(-beta * (1.0 - l)));
        return Ok(cert);
    }
    if !(m > 0.0 && b1 > 0.0) {
        return Err(Error::ModelDefinition(
            "need M > 0 and b1 > 0 for a weighted certificate".into(),
        ));
    }
    let la = log_alpha(problem, gamma_bar, phi, m);
    cert.log_alpha = la;
    cert.alpha = la.exp();
    if !cert.alpha.is_finite() {
        cert.verdict = Verdict::AlphaOverflow;
        return Ok(cert);
    }
    let alpha = cert.alpha;
    let r = 2.0 * alpha / (1.0 - phi) * (1.0 + opts.r_margin);
    cert.r = r;
    let (s, nf, ns, nc) = sup_variation(problem, gamma_bar, m, r, opts)?;
    cert.sup_var = s;
    (cert.function_pairs, cert.state_pairs, cert.nodes_in_cr) = (nf, ns, nc);
    if s >= 2.0 - opts.eps_min {
        cert.verdict = Verdict::MixingTooWeak;
        return Ok(cert);
    }
    let (beta, l) = beta_and_l(s, phi, alpha, r);
    cert.beta = Some(beta);
    cert.l = Some(l);
    cert.gamma0 = Some(gamma_bar.max(-beta * (1.0 - l)));
    Ok(cert)
}

/// `β` minimizing `L(β) = max{φ, (s + βK)/2, (2 + βK)/(2 + βR)}` with
/// `K = φR + 2α`: the middle term increases and the last decreases in `β`,
/// so the optimum is their crossing, the positive root of
/// `KRβ² + sRβ + 2s − 4 = 0`. Capped below 1.
pub fn beta_and_l(s: f64, phi: f64, alpha: f64, r: f64) -> (f64, f64) {
    let k = phi * r + 2.0 * alpha;
    let c = 4.0 - 2.0 * s;
    let root = 2.0 * c / (s * r + (s * s * r * r + 4.0 * k * r * c).sqrt());
    let beta = root.min(1.0 - 1e-9);
    let l = phi
        .max((s + beta * k) / 2.0)
        .max((2.0 + beta * k) / (2.0 + beta * r));
    (beta, l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionSample {
    pub max_ratio: f64,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
}

/// Largest observed `‖Tf − Tg‖_{β,ω-span} / ‖f − g‖_{β,ω-span}` over random
/// pairs of ω-span at most `m`.
pub fn empirical_contraction(
    problem: &BellmanProblem,
    gamma: f64,
    beta: f64,
    m: f64,
    trials: usize,
    seed: u64,
) -> Result<ContractionSample> {
    check_gamma(gamma)?;
    let w = problem.omega().values();
    let pairs = function_pairs(w, m, trials, seed);
    let mut out = ContractionSample {
        max_ratio: 0.0,
        pairs_used: 0,
        pairs_skipped: 0,
    };
    for (f, g) in pairs.iter().take(trials) {
        let diff: Vec<f64> = f.iter().zip(g).map(|(a, b)| a - b).collect();
        let den = span_slice(&diff, w, beta).value;
        if den <= 1e-300 {
            out.pairs_skipped += 1;
            continue;
        }
        let (tf, _) = problem.raw_t(f, gamma);
        let (tg, _) = problem.raw_t(g, gamma);
        let tdiff: Vec<f64> = tf.iter().zip(&tg).map(|(a, b)| a - b).collect();
        let ratio = span_slice(&tdiff, w, beta).value / den;
        out.max_ratio = out.max_ratio.max(ratio);
        out.pairs_used += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneStepOutcome {
    /// `Tf(x) − Tg(x) − (Tf(y) − Tg(y))`.
    pub lhs: f64,
    /// `‖f − g‖_{β,ω-span} · ‖H^{f,g}_{x,y}‖_{β,ω-var}`.
    pub rhs: f64,
}

impl OneStepOutcome {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

/// Both sides of the one-step difference inequality at arbitrary states.
pub fn one_step_check(
    problem: &BellmanProblem,
    gamma: f64,
    beta: f64,
    f: &GridFunction,
    g: &GridFunction,
    x: &[f64],
    y: &[f64],
) -> Result<OneStepOutcome> {
    check_gamma(gamma)?;
    if !(beta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let (tfx, hxf) = problem.apply_t_at(x, f, gamma)?;
    let (tgx, hxg) = problem.apply_t_at(x, g, gamma)?;
    let (tfy, hyf) = problem.apply_t_at(y, f, gamma)?;
    let (tgy, _) = problem.apply_t_at(y, g, gamma)?;
    let _ = hxf;
    let qx = problem.tilted_masses_at(x, f, hxg, gamma)?;
    let qy = problem.tilted_masses_at(y, g, hyf, gamma)?;
    let h: Vec<f64> = qx.iter().zip(&qy).map(|(a, b)| a - b).collect();
    let w = problem.omega().values();
    let diff = f.sub(g)?;
    let rhs = span_slice(diff.values(), w, beta).value * node_variation(&h, w, beta);
    Ok(OneStepOutcome {
        lhs: tfx - tgx - (tfy - tgy),
        rhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub samples: usize,
    pub violations: usize,
    /// Largest `∫ω dQ̄ − φω(x) − α`.
    pub max_excess: f64,
}

/// Samples `(node, f, h)` with `f` of ω-span at most `m` and checks
/// `∫ω dQ̄_(x,f,h) ≤ φω(x) + α`.
pub fn tilted_drift_check(
    problem: &BellmanProblem,
    gamma: f64,
    phi: f64,
    alpha: f64,
    m: f64,
    samples: usize,
    seed: u64,
) -> Result<DriftReport> {
    check_gamma(gamma)?;
    let w = problem.omega().values();
    let nh = problem.model().actions().len();
    let excess = map_indexed(
        problem.execution(),
        samples,
        || (),
        |_, i| {
            let mut rng = PathRng::new(seed, 1000 + i as u64);
            let node = rng.index(w.len());
            let h = rng.index(nh);
            let target = m * rng.uniform();
            let f = random_span_function(&mut rng, w, target, i);
            let masses = problem.tilted_node_masses(node, &f, h, gamma);
            let lhs: f64 = masses.iter().zip(w).map(|(q, o)| q * o).sum();
            lhs - phi * w[node] - alpha
        },
    );
    let violations = excess.iter().filter(|&&e| e > 1e-9).count();
    Ok(DriftReport {
        samples,
        violations,
        max_excess: excess.into_iter().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_balances_the_two_terms() {
        let (s, phi, alpha, r) = (1.2, 0.75, 50.0, 800.0);
        let (beta, l) = beta_and_l(s, phi, alpha, r);
        let k = phi * r + 2.0 * alpha;
        let mid = (s + beta * k) / 2.0;
        let last = (2.0 + beta * k) / (2.0 + beta * r);
        assert!((mid - last).abs() < 1e-12);
        assert!(l < 1.0 && l >= phi);
        for db in [-1e-6, 1e-6] {
            let b = beta + db;
            let other = phi
                .max((s + b * k) / 2.0)
                .max((2.0 + b * k) / (2.0 + b * r));
            assert!(other >= l - 1e-15);
        }
    }

    #[test]
    fn random_functions_hit_target_span() {
        let w: Vec<f64> = (0..50).map(|i| (i as f64 - 25.0).abs() * 0.1).collect();
        let mut rng = PathRng::new(3, 0);
        for kind in 0..3 {
            let f = random_span_function(&mut rng, &w, 0.7, kind);
            assert!((span_slice(&f, &w, 1.0).value - 0.7).abs() < 1e-12);
        }
    }
}
