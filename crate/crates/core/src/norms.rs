//! Weighted sup-norms, weighted span seminorms and weighted total variation.
//!
//! For a weight `ω ≥ 0` and scale `β > 0`:
//!
//! * `‖f‖_{β,ω}      = max_x |f(x)| / (1 + βω(x))`
//! * `‖f‖_{β,ω-span} = max_{x,y} (f(x) − f(y)) / (2 + βω(x) + βω(y))`
//! * `‖H‖_{β,ω-var}  = Σ_z (1 + βω(z)) |H(z)|` for an atomic signed measure `H`.
//!
//! Suprema over the factor space are maxima over grid nodes. The span is a
//! fractional program over node pairs; it is solved in `O(N)` per round by
//! Dinkelbach iteration, whose inner problem separates into the two
//! centering maxima `max_x f(x) − s(1+βω(x))` and `max_y −f(y) − s(1+βω(y))`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};

/// Relative slack allowed when checking that an atom lies inside the grid box.
const DOMAIN_SLACK: f64 = 1e-9;

pub type WeightEval = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A nonnegative weight `ω` bound to a grid: the evaluator plus its cached
/// samples on the grid nodes. Evaluation is restricted to the grid box.
#[derive(Clone)]
pub struct WeightFunction {
    eval: WeightEval,
    samples: GridFunction,
}

impl std::fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WeightFunction")
            .field("samples", &self.samples)
            .finish()
    }
}

impl WeightFunction {
    pub fn new(grid: &GridSpec, eval: WeightEval) -> Result<Self> {
        let samples = GridFunction::from_fn(grid, |x| eval(x))?;
        if let Some(i) = samples.values().iter().position(|&w| w < 0.0) {
            return Err(Error::Domain(format!("weight is negative at node {i}")));
        }
        Ok(WeightFunction { eval, samples })
    }

    pub fn from_fn(
        grid: &GridSpec,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(grid, Arc::new(f))
    }

    pub fn zero(grid: &GridSpec) -> Self {
        WeightFunction {
            eval: Arc::new(|_| 0.0),
            samples: GridFunction::zeros(grid),
        }
    }

    pub fn samples(&self) -> &GridFunction {
        &self.samples
    }

    pub fn values(&self) -> &[f64] {
        self.samples.values()
    }

    pub fn grid(&self) -> &GridSpec {
        self.samples.spec()
    }

    pub fn is_identically_zero(&self) -> bool {
        self.values().iter().all(|&w| w == 0.0)
    }

    /// Evaluates `ω(x)`; `x` must lie in the grid box.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let g = self.grid();
        if x.len() != g.dims() {
            return Err(Error::Shape(format!(
                "point of dimension {} on a {}-d grid",
                x.len(),
                g.dims()
            )));
        }
        for d in 0..g.dims() {
            let slack = DOMAIN_SLACK * (g.upper()[d] - g.lower()[d]);
            if !(x[d] >= g.lower()[d] - slack && x[d] <= g.upper()[d] + slack) {
                return Err(Error::Domain(format!(
                    "coordinate {d} = {} outside [{}, {}]",
                    x[d],
                    g.lower()[d],
                    g.upper()[d]
                )));
            }
        }
        let w = (self.eval)(x);
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::Domain(format!(
                "weight {w} at {x:?} is not a finite nonnegative value"
            )));
        }
        Ok(w)
    }
}

fn check_shapes(f: &GridFunction, w: &WeightFunction) -> Result<()> {
    if f.spec() != w.grid() {
        return Err(Error::Shape(
            "function and weight live on different grids".into(),
        ));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "beta must be positive, got {beta}"
        )));
    }
    Ok(())
}

/// `‖f‖_{β,ω}`.
pub fn omega_norm(f: &GridFunction, w: &WeightFunction, beta: f64) -> Result<f64> {
    check_shapes(f, w)?;
    check_beta(beta)?;
    Ok(norm_slice(f.values(), w.values(), beta))
}

pub fn norm_slice(f: &[f64], w: &[f64], beta: f64) -> f64 {
    f.iter()
        .zip(w)
        .map(|(&v, &o)| v.abs() / (1.0 + beta * o))
        .fold(0.0, f64::max)
}

/// The maximizing pair of the weighted span: `value = (f[hi] − f[lo]) / (2 + βω[hi] + βω[lo])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanWitness {
    pub value: f64,
    pub hi: usize,
    pub lo: usize,
}

/// `‖f‖_{β,ω-span}`.
pub fn omega_span(f: &GridFunction, w: &WeightFunction, beta: f64) -> Result<f64> {
    Ok(omega_span_witness(f, w, beta)?.value)
}

pub fn omega_span_witness(f: &GridFunction, w: &WeightFunction, beta: f64) -> Result<SpanWitness> {
    check_shapes(f, w)?;
    check_beta(beta)?;
    Ok(span_slice(f.values(), w.values(), beta))
}

fn pair_ratio(f: &[f64], w: &[f64], beta: f64, hi: usize, lo: usize) -> f64 {
    (f[hi] - f[lo]) / (2.0 + beta * w[hi] + beta * w[lo])
}

/// First index maximizing `sign·f(i) − s·(1 + βω(i))`.
fn centering_argmax(f: &[f64], w: &[f64], beta: f64, s: f64, sign: f64) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, (&v, &o)) in f.iter().zip(w).enumerate() {
        let val = sign * v - s * (1.0 + beta * o);
        if val > best_val {
            best_val = val;
            best = i;
        }
    }
    best
}

/// Weighted span of raw slices by Dinkelbach iteration. Each round costs
/// `O(N)`; the ratio sequence is strictly increasing over a finite set of
/// pairs, so it stops at the exact pairwise maximum.
pub fn span_slice(f: &[f64], w: &[f64], beta: f64) -> SpanWitness {
    if f.is_empty() {
        return SpanWitness {
            value: 0.0,
            hi: 0,
            lo: 0,
        };
    }
    let mut hi = centering_argmax(f, w, beta, 0.0, 1.0);
    let mut lo = centering_argmax(f, w, beta, 0.0, -1.0);
    let mut s = pair_ratio(f, w, beta, hi, lo);
    for _ in 0..200 {
        let x = centering_argmax(f, w, beta, s, 1.0);
        let y = centering_argmax(f, w, beta, s, -1.0);
        let r = pair_ratio(f, w, beta, x, y);
        if r <= s {
            break;
        }
        s = r;
        hi = x;
        lo = y;
    }
    SpanWitness {
        value: s.max(0.0),
        hi,
        lo,
    }
}

/// Constants `c` for which `‖f + c‖_ω` equals `‖f‖_{ω-span}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenteringResult {
    pub c1: f64,
    pub c2: f64,
    pub c0: f64,
    pub span: f64,
}

/// `c1 = −min_x {f + (1+ω)s}`, `c2 = −max_x {f − (1+ω)s}` with `s` the span;
/// `c0 ∈ [c1, c2]` balances `max (f+c)/(1+ω)` against `−min (f+c)/(1+ω)`.
pub fn centering_constants(f: &GridFunction, w: &WeightFunction) -> Result<CenteringResult> {
    check_shapes(f, w)?;
    let span = span_slice(f.values(), w.values(), 1.0).value;
    Ok(centering_with_span(f.values(), w.values(), span))
}

/// Centering constants for a caller-supplied span value.
pub fn centering_with_span(f: &[f64], w: &[f64], span: f64) -> CenteringResult {
    let c1 = -f
        .iter()
        .zip(w)
        .map(|(&v, &o)| v + (1.0 + o) * span)
        .fold(f64::INFINITY, f64::min);
    let c2 = -f
        .iter()
        .zip(w)
        .map(|(&v, &o)| v - (1.0 + o) * span)
        .fold(f64::NEG_INFINITY, f64::max);
    let c0 = balance_point(f, w, c1.min(c2), c1.max(c2));
    CenteringResult { c1, c2, c0, span }
}

fn upper_lower(f: &[f64], w: &[f64], c: f64) -> (f64, f64) {
    let mut a_plus = f64::NEG_INFINITY;
    let mut a_minus = f64::NEG_INFINITY;
    for (&v, &o) in f.iter().zip(w) {
        let r = (v + c) / (1.0 + o);
        a_plus = a_plus.max(r);
        a_minus = a_minus.max(-r);
    }
    (a_plus, a_minus)
}

/// Bisection for `a₊(c) = a₋(c)` on `[lo, hi]`; `a₊ − a₋` is nondecreasing in `c`.
fn balance_point(f: &[f64], w: &[f64], lo: f64, hi: f64) -> f64 {
    const TOL: f64 = 1e-12;
    let gap = |c: f64| {
        let (p, m) = upper_lower(f, w, c);
        p - m
    };
    let g_lo = gap(lo);
    if g_lo >= -TOL {
        return lo;
    }
    let g_hi = gap(hi);
    if g_hi <= TOL {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let g = gap(mid);
        if g.abs() <= TOL || mid == a || mid == b {
            return mid;
        }
        if g < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// A finite atomic signed measure on the factor space.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiscreteSignedMeasure {
    pub atoms: Vec<(Vec<f64>, f64)>,
}

impl DiscreteSignedMeasure {
    pub fn new(atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if atoms.iter().any(|(_, m)| !m.is_finite()) {
            return Err(Error::Domain("non-finite atom mass".into()));
        }
        Ok(DiscreteSignedMeasure { atoms })
    }

    /// `q1 − q2`, with atoms at identical states merged.
    pub fn difference(q1: &[(Vec<f64>, f64)], q2: &[(Vec<f64>, f64)]) -> Self {
        let mut atoms: Vec<(Vec<f64>, f64)> = Vec::with_capacity(q1.len() + q2.len());
        let mut push = |z: &Vec<f64>, m: f64| {
            if let Some(slot) = atoms.iter_mut().find(|(y, _)| y == z) {
                slot.1 += m;
            } else {
                atoms.push((z.clone(), m));
            }
        };
        for (z, m) in q1 {
            push(z, *m);
        }
        for (z, m) in q2 {
            push(z, -*m);
        }
        DiscreteSignedMeasure { atoms }
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, m)| m).sum()
    }
}

/// `‖H‖_{β,ω-var} = Σ (1 + βω(z))|H(z)|`; `β = 0` gives the plain total variation.
pub fn weighted_variation(h: &DiscreteSignedMeasure, w: &WeightFunction, beta: f64) -> Result<f64> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "beta must be nonnegative, got {beta}"
        )));
    }
    let mut total = 0.0;
    for (z, m) in &h.atoms {
        total += (1.0 + beta * w.eval(z)?) * m.abs();
    }
    Ok(total)
}

/// Weighted variation of a signed measure given as masses on grid nodes.
pub fn node_variation(masses: &[f64], w: &[f64], beta: f64) -> f64 {
    masses
        .iter()
        .zip(w)
        .map(|(&m, &o)| (1.0 + beta * o) * m.abs())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_span(f: &[f64], w: &[f64], beta: f64) -> f64 {
        let mut best = 0.0f64;
        for x in 0..f.len() {
            for y in 0..f.len() {
                best = best.max(pair_ratio(f, w, beta, x, y));
            }
        }
        best
    }

    fn line(n: usize, lo: f64, hi: f64) -> GridSpec {
        GridSpec::uniform_1d(lo, hi, n).unwrap()
    }

    #[test]
    fn norm_examples() {
        let g = line(11, -5.0, 5.0);
        let any = WeightFunction::from_fn(&g, |x| x[0].abs()).unwrap();
        assert_eq!(
            omega_norm(&GridFunction::zeros(&g), &any, 1.0).unwrap(),
            0.0
        );

        let zero = WeightFunction::zero(&g);
        assert_eq!(
            omega_norm(&GridFunction::constant(&g, 3.0), &zero, 1.0).unwrap(),
            3.0
        );

        // brute-force max of |x| / (1 + |x|) over the nodes: attained at ±5
        let f = GridFunction::from_fn(&g, |x| x[0].abs()).unwrap();
        let oracle = (0..g.len())
            .map(|i| g.node(i)[0].abs() / (1.0 + g.node(i)[0].abs()))
            .fold(0.0, f64::max);
        assert_eq!(oracle, 5.0 / 6.0);
        assert_eq!(omega_norm(&f, &any, 1.0).unwrap(), oracle);
    }

    #[test]
    fn shape_and_beta_errors() {
        let g = line(5, 0.0, 1.0);
        let h = line(6, 0.0, 1.0);
        let w = WeightFunction::zero(&g);
        let f = GridFunction::zeros(&h);
        assert!(matches!(omega_norm(&f, &w, 1.0), Err(Error::Shape(_))));
        assert!(matches!(
            omega_span(&GridFunction::zeros(&g), &w, 0.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn span_examples() {
        let g = line(9, -1.0, 1.0);
        let zero = WeightFunction::zero(&g);
        assert_eq!(
            omega_span(&GridFunction::constant(&g, 4.2), &zero, 1.0).unwrap(),
            0.0
        );

        // ω ≡ 0: half of the classical span
        let f = GridFunction::from_fn(&g, |x| 2.0 + x[0]).unwrap();
        assert_eq!(omega_span(&f, &zero, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn kinked_function_on_wide_grid() {
        let g = line(20_001, -1e3, 1e3);
        let f = GridFunction::from_fn(&g, |x| {
            let a = x[0].abs();
            if a <= 1.0 {
                0.0
            } else {
                (x[0] - 1.0 / x[0]).abs()
            }
        })
        .unwrap();
        let w = WeightFunction::from_fn(&g, |x| x[0].abs()).unwrap();
        let s = omega_span(&f, &w, 1.0).unwrap();
        assert!((0.998..=1.0).contains(&s), "span {s}");
        // with the limiting seminorm value the centering constants are ±1, attained at x = 0
        let c = centering_with_span(f.values(), w.values(), 1.0);
        assert!(
            (c.c1 + 1.0).abs() < 1e-12 && (c.c2 - 1.0).abs() < 1e-12,
            "{c:?}"
        );
        // on the truncated grid the far-tail pairs are missing and the interval collapses to −s
        let grid_c = centering_constants(&f, &w).unwrap();
        assert!(
            (grid_c.c1 + s).abs() < 1e-9 && (grid_c.c2 + s).abs() < 1e-9,
            "{grid_c:?}"
        );
    }

    #[test]
    fn centering_examples() {
        let g = line(21, -1.0, 1.0);
        let zero = WeightFunction::zero(&g);
        let c = centering_constants(&GridFunction::constant(&g, 2.5), &zero).unwrap();
        assert_eq!((c.c1, c.c2, c.c0, c.span), (-2.5, -2.5, -2.5, 0.0));

        let f = GridFunction::from_fn(&g, |x| x[0]).unwrap();
        let c = centering_constants(&f, &zero).unwrap();
        assert_eq!(brute_span(f.values(), zero.values(), 1.0), 1.0);
        assert_eq!(c.span, 1.0);
        assert!(c.c0.abs() < 1e-12);
    }

    #[test]
    fn variation_examples() {
        let g = line(5, 0.0, 4.0);
        let w = WeightFunction::from_fn(&g, |x| x[0]).unwrap();
        let a = vec![1.0];
        let b = vec![3.0];
        let same = DiscreteSignedMeasure::difference(&[(a.clone(), 1.0)], &[(a.clone(), 1.0)]);
        assert_eq!(weighted_variation(&same, &w, 1.0).unwrap(), 0.0);
        let h = DiscreteSignedMeasure::difference(&[(a.clone(), 1.0)], &[(b.clone(), 1.0)]);
        assert_eq!(weighted_variation(&h, &w, 0.0).unwrap(), 2.0);
        assert_eq!(weighted_variation(&h, &w, 0.5).unwrap(), 4.0);
        let outside = DiscreteSignedMeasure::new(vec![(vec![9.0], 1.0)]).unwrap();
        assert!(matches!(
            weighted_variation(&outside, &w, 1.0),
            Err(Error::Domain(_))
        ));
    }

    fn random_fn() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..60).prop_flat_map(|n| {
            (
                proptest::collection::vec(-50.0f64..50.0, n),
                proptest::collection::vec(0.0f64..10.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn linear_span_matches_pairwise((f, w) in random_fn(), beta in 0.05f64..2.0) {
            prop_assert_eq!(span_slice(&f, &w, beta).value, brute_span(&f, &w, beta));
        }

        #[test]
        fn span_kills_constants_and_scales((f, w) in random_fn(), c in -100.0f64..100.0, a in 0.01f64..20.0) {
            let s = span_slice(&f, &w, 1.0).value;
            let shifted: Vec<f64> = f.iter().map(|v| v + c).collect();
            let scaled: Vec<f64> = f.iter().map(|v| a * v).collect();
            prop_assert!((span_slice(&shifted, &w, 1.0).value - s).abs() <= 1e-9 * (1.0 + s));
            prop_assert!((span_slice(&scaled, &w, 1.0).value - a * s).abs() <= 1e-9 * (1.0 + a * s));
        }

        #[test]
        fn centering_attains_span((f, w) in random_fn()) {
            let c = centering_with_span(&f, &w, span_slice(&f, &w, 1.0).value);
            let at = |k: f64| norm_slice(&f.iter().map(|v| v + k).collect::<Vec<_>>(), &w, 1.0);
            prop_assert!(c.c1 <= c.c0 + 1e-12 && c.c0 <= c.c2 + 1e-12);
            prop_assert!((at(c.c1) - c.span).abs() <= 1e-9 * (1.0 + c.span));
            prop_assert!((at(c.c2) - c.span).abs() <= 1e-9 * (1.0 + c.span));
            prop_assert!((at(c.c0) - c.span).abs() <= 1e-9 * (1.0 + c.span));
        }
    }
}
