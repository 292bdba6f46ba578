//! Controlled factor models: dynamics `G`, log-returns `F`, the weight `ω`
//! with its growth constants, the noise law and the action set.

mod builtin;
mod finite;

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use builtin::{
    Builtin, ControlFreeGaussianParams, Example1Params, Example2Params, Example3Params,
    FrozenFactorParams,
};
pub use finite::FiniteChain;

use crate::entropic::{entropic_weighted, DiscreteLaw};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::norms::WeightFunction;
use crate::quadrature::{gauss_hermite_law, product_law, quantile_rule};
use crate::rng::PathRng;

/// The model-specific maps. Noise vectors have `noise_dim()` components,
/// states `factor_dim()`, actions `asset_dim()`.
///
/// Growth constants must satisfy, for all `x`, `h`, `w`:
/// `ω(G(x,w)) ≤ a1(w) + b1·ω(x)` and `|F(x,h,w)| ≤ a2(w) + b2·ω(x)`.
pub trait Dynamics: Send + Sync + Debug {
    fn factor_dim(&self) -> usize;
    fn asset_dim(&self) -> usize;
    fn noise_dim(&self) -> usize {
        self.factor_dim() + self.asset_dim()
    }
    fn factor_step(&self, x: &[f64], w: &[f64], out: &mut [f64]);
    fn log_return(&self, x: &[f64], h: &[f64], w: &[f64]) -> f64;
    fn weight(&self, x: &[f64]) -> f64;
    fn a1(&self, w: &[f64]) -> f64;
    fn a2(&self, w: &[f64]) -> f64;
    fn b1(&self) -> f64;
    fn b2(&self) -> f64;
    /// Whether `a1` is bounded above; gates the Monte Carlo agreement check.
    fn a1_bounded(&self) -> bool;
    /// True when `ω ≡ 0`.
    fn weight_vanishes(&self) -> bool {
        false
    }
}

/// Replaces declared growth constants of another model while keeping its
/// dynamics. Used to falsify wrong declarations.
#[derive(Debug)]
pub struct GrowthOverride {
    pub inner: Arc<dyn Dynamics>,
    pub b1: Option<f64>,
    pub b2: Option<f64>,
    pub a1_scale: f64,
    pub a2_scale: f64,
}

impl GrowthOverride {
    pub fn new(inner: Arc<dyn Dynamics>) -> Self {
        GrowthOverride {
            inner,
            b1: None,
            b2: None,
            a1_scale: 1.0,
            a2_scale: 1.0,
        }
    }
}

impl Dynamics for GrowthOverride {
    fn factor_dim(&self) -> usize {
        self.inner.factor_dim()
    }
    fn asset_dim(&self) -> usize {
        self.inner.asset_dim()
    }
    fn noise_dim(&self) -> usize {
        self.inner.noise_dim()
    }
    fn factor_step(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        self.inner.factor_step(x, w, out)
    }
    fn log_return(&self, x: &[f64], h: &[f64], w: &[f64]) -> f64 {
        self.inner.log_return(x, h, w)
    }
    fn weight(&self, x: &[f64]) -> f64 {
        self.inner.weight(x)
    }
    fn a1(&self, w: &[f64]) -> f64 {
        self.a1_scale * self.inner.a1(w)
    }
    fn a2(&self, w: &[f64]) -> f64 {
        self.a2_scale * self.inner.a2(w)
    }
    fn b1(&self) -> f64 {
        self.b1.unwrap_or_else(|| self.inner.b1())
    }
    fn b2(&self) -> f64 {
        self.b2.unwrap_or_else(|| self.inner.b2())
    }
    fn a1_bounded(&self) -> bool {
        self.inner.a1_bounded()
    }
    fn weight_vanishes(&self) -> bool {
        self.inner.weight_vanishes()
    }
}

/// The "true" law of one period's noise, used by the simulator.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSource {
    /// Independent standard normals.
    Gaussian { dim: usize },
    /// A finitely supported law, sampled exactly.
    Atoms(DiscreteLaw),
}

impl NoiseSource {
    pub fn dim(&self) -> usize {
        match self {
            NoiseSource::Gaussian { dim } => *dim,
            NoiseSource::Atoms(law) => law.dim(),
        }
    }

    pub fn sample(&self, rng: &mut PathRng, out: &mut [f64]) {
        match self {
            NoiseSource::Gaussian { .. } => rng.fill_normal(out),
            NoiseSource::Atoms(law) => {
                let i = rng.categorical(law.weights());
                out.copy_from_slice(law.point(i));
            }
        }
    }
}

/// How a Gaussian noise source is turned into a finite law for the solver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseApprox {
    GaussHermite {
        order: usize,
    },
    /// Equal-weight quantile midpoints with one order per noise coordinate.
    Quantile {
        orders: Vec<usize>,
    },
    Samples {
        count: usize,
        seed: u64,
    },
}

impl Default for NoiseApprox {
    fn default() -> Self {
        NoiseApprox::GaussHermite { order: 16 }
    }
}

impl NoiseApprox {
    pub fn discretize(&self, source: &NoiseSource) -> Result<DiscreteLaw> {
        let dim = match source {
            NoiseSource::Atoms(law) => return Ok(law.clone()),
            NoiseSource::Gaussian { dim } => *dim,
        };
        match self {
            NoiseApprox::GaussHermite { order } => gauss_hermite_law(dim, *order),
            NoiseApprox::Quantile { orders } => {
                if orders.len() != dim {
                    return Err(Error::Shape(format!(
                        "{} quantile orders for {dim} noise coordinates",
                        orders.len()
                    )));
                }
                let rules = orders
                    .iter()
                    .map(|&o| quantile_rule(o))
                    .collect::<Result<Vec<_>>>()?;
                product_law(&rules)
            }
            NoiseApprox::Samples { count, seed } => {
                let (count, seed) = (*count, *seed);
                if count == 0 {
                    return Err(Error::InvalidInput("sample count must be positive".into()));
                }
                let mut rng = PathRng::new(seed, 0);
                let mut points = vec![0.0; count * dim];
                rng.fill_normal(&mut points);
                DiscreteLaw::empirical(dim, points)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionConstraint {
    /// `h ≥ 0`, `Σh = 1`.
    SimplexEq,
    /// `h ≥ 0`, `Σh ≤ 1`; the remainder is held in cash.
    SimplexIneq,
    /// Per-coordinate interval.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// An explicit finite list.
    List { actions: Vec<Vec<f64>> },
}

/// A finite, lexicographically sorted, deduplicated set of portfolio weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    dim: usize,
    constraint: ActionConstraint,
    resolution: usize,
    actions: Vec<Vec<f64>>,
}

impl ActionSet {
    /// Lattice with spacing `1/resolution` (simplex kinds) or `resolution + 1`
    /// points per axis (box kind). Ignored for explicit lists.
    pub fn new(dim: usize, constraint: ActionConstraint, resolution: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "action dimension must be positive".into(),
            ));
        }
        let mut actions = match &constraint {
            ActionConstraint::SimplexEq | ActionConstraint::SimplexIneq => {
                if resolution == 0 {
                    return Err(Error::InvalidInput(
                        "simplex resolution must be positive".into(),
                    ));
                }
                let eq = constraint == ActionConstraint::SimplexEq;
                let mut out = Vec::new();
                let mut counts = vec![0usize; dim];
                simplex_lattice(&mut counts, 0, resolution, eq, &mut out, resolution);
                out
            }
            ActionConstraint::Box { lower, upper } => {
                if lower.len() != dim || upper.len() != dim {
                    return Err(Error::Shape(
                        "box bounds must match the action dimension".into(),
                    ));
                }
                if lower
                    .iter()
                    .zip(upper)
                    .any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u))
                {
                    return Err(Error::InvalidInput(
                        "box bounds need finite lower ≤ upper".into(),
                    ));
                }
                if resolution == 0 {
                    return Err(Error::InvalidInput(
                        "box resolution must be positive".into(),
                    ));
                }
                box_lattice(lower, upper, resolution)
            }
            ActionConstraint::List { actions } => {
                if actions.is_empty() {
                    return Err(Error::InvalidInput("action list is empty".into()));
                }
                if actions.iter().any(|a| a.len() != dim) {
                    return Err(Error::Shape("listed action has the wrong dimension".into()));
                }
                if actions.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput(
                        "listed action has non-finite entries".into(),
                    ));
                }
                actions.clone()
            }
        };
        actions.sort_by(|a, b| lex_cmp(a, b));
        actions.dedup();
        Ok(ActionSet {
            dim,
            constraint,
            resolution,
            actions,
        })
    }

    pub fn list(dim: usize, actions: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(dim, ActionConstraint::List { actions }, 0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraint(&self) -> &ActionConstraint {
        &self.constraint
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn actions(&self) -> &[Vec<f64>] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.actions[i]
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn simplex_lattice(
    counts: &mut Vec<usize>,
    d: usize,
    left: usize,
    eq: bool,
    out: &mut Vec<Vec<f64>>,
    n: usize,
) {
    let dim = counts.len();
    if d == dim - 1 {
        let range = if eq { left..=left } else { 0..=left };
        for c in range {
            counts[d] = c;
            out.push(counts.iter().map(|&k| k as f64 / n as f64).collect());
        }
        return;
    }
    for c in 0..=left {
        counts[d] = c;
        simplex_lattice(counts, d + 1, left - c, eq, out, n);
    }
}

fn box_lattice(lower: &[f64], upper: &[f64], n: usize) -> Vec<Vec<f64>> {
    let dim = lower.len();
    let total = (n + 1).pow(dim as u32);
    let mut out = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut a = vec![0.0; dim];
        for d in (0..dim).rev() {
            let i = idx % (n + 1);
            idx /= n + 1;
            a[d] = if i == n {
                upper[d]
            } else {
                lower[d] + (upper[d] - lower[d]) * i as f64 / n as f64
            };
        }
        out.push(a);
    }
    out
}

/// A complete model: dynamics, noise (true law plus its finite
/// representation) and the enumerated action set.
#[derive(Debug, Clone)]
pub struct MarketModel {
    name: String,
    dynamics: Arc<dyn Dynamics>,
    noise: NoiseSource,
    law: DiscreteLaw,
    actions: ActionSet,
}

impl MarketModel {
    pub fn new(
        name: impl Into<String>,
        dynamics: Arc<dyn Dynamics>,
        noise: NoiseSource,
        approx: NoiseApprox,
        actions: ActionSet,
    ) -> Result<Self> {
        let law = approx.discretize(&noise)?;
        Self::with_law(name, dynamics, noise, law, actions)
    }

    /// Builds a model whose solver-side noise law is given explicitly.
    pub fn with_law(
        name: impl Into<String>,
        dynamics: Arc<dyn Dynamics>,
        noise: NoiseSource,
        law: DiscreteLaw,
        actions: ActionSet,
    ) -> Result<Self> {
        let name = name.into();
        if noise.dim() != dynamics.noise_dim() || law.dim() != dynamics.noise_dim() {
            return Err(Error::ModelDefinition(format!(
                "{name}: noise dimension {} / law dimension {} but dynamics expect {}",
                noise.dim(),
                law.dim(),
                dynamics.noise_dim()
            )));
        }
        if actions.dim() != dynamics.asset_dim() {
            return Err(Error::ModelDefinition(format!(
                "{name}: actions have dimension {} but the model has {} assets",
                actions.dim(),
                dynamics.asset_dim()
            )));
        }
        if dynamics.factor_dim() == 0 {
            return Err(Error::ModelDefinition(format!(
                "{name}: factor dimension must be positive"
            )));
        }
        let (b1, b2) = (dynamics.b1(), dynamics.b2());
        if !(0.0..1.0).contains(&b1) || !(b2 >= 0.0 && b2.is_finite()) {
            return Err(Error::ModelDefinition(format!(
                "{name}: need b1 in [0,1) and b2 ≥ 0, got {b1}, {b2}"
            )));
        }
        Ok(MarketModel {
            name,
            dynamics,
            noise,
            law,
            actions,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dynamics(&self) -> &Arc<dyn Dynamics> {
        &self.dynamics
    }

    pub fn noise(&self) -> &NoiseSource {
        &self.noise
    }

    /// The finite law all solver-side expectations are taken under.
    pub fn law(&self) -> &DiscreteLaw {
        &self.law
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn factor_dim(&self) -> usize {
        self.dynamics.factor_dim()
    }

    pub fn asset_dim(&self) -> usize {
        self.dynamics.asset_dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.dynamics.noise_dim()
    }

    pub fn factor_step(&self, x: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x, w)?;
        let mut out = vec![0.0; self.factor_dim()];
        self.dynamics.factor_step(x, w, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::ModelDefinition(format!(
                "{}: factor step from {x:?} with noise {w:?} is not finite",
                self.name
            )));
        }
        Ok(out)
    }

    pub fn log_return(&self, x: &[f64], h: &[f64], w: &[f64]) -> Result<f64> {
        self.check_point(x, w)?;
        if h.len() != self.asset_dim() {
            return Err(Error::Shape(format!(
                "action of dimension {} for {} assets",
                h.len(),
                self.asset_dim()
            )));
        }
        let r = self.dynamics.log_return(x, h, w);
        if !r.is_finite() {
            return Err(Error::Domain(format!(
                "{}: log-return at x={x:?}, h={h:?}, w={w:?} is {r}",
                self.name
            )));
        }
        Ok(r)
    }

    fn check_point(&self, x: &[f64], w: &[f64]) -> Result<()> {
        if x.len() != self.factor_dim() || w.len() != self.noise_dim() {
            return Err(Error::Shape(format!(
                "state/noise dimensions {}/{} but model expects {}/{}",
                x.len(),
                w.len(),
                self.factor_dim(),
                self.noise_dim()
            )));
        }
        if x.iter().chain(w).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("state and noise must be finite".into()));
        }
        Ok(())
    }

    pub fn weight(&self, x: &[f64]) -> f64 {
        self.dynamics.weight(x)
    }

    pub fn weight_function(&self, grid: &GridSpec) -> Result<WeightFunction> {
        self.check_grid(grid)?;
        let dynamics = Arc::clone(&self.dynamics);
        WeightFunction::from_fn(grid, move |x| dynamics.weight(x))
    }

    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if grid.dims() != self.factor_dim() {
            return Err(Error::Shape(format!(
                "{}-d grid for a model with {} factors",
                grid.dims(),
                self.factor_dim()
            )));
        }
        Ok(())
    }

    pub fn weight_vanishes(&self) -> bool {
        self.dynamics.weight_vanishes()
    }

    pub fn b1(&self) -> f64 {
        self.dynamics.b1()
    }

    pub fn b2(&self) -> f64 {
        self.dynamics.b2()
    }

    pub fn a1_bounded(&self) -> bool {
        self.dynamics.a1_bounded()
    }

    /// `a1` evaluated on every atom of the solver law.
    pub fn a1_samples(&self) -> Vec<f64> {
        self.law.points().map(|w| self.dynamics.a1(w)).collect()
    }

    pub fn a2_samples(&self) -> Vec<f64> {
        self.law.points().map(|w| self.dynamics.a2(w)).collect()
    }

    /// Same model with a different action set.
    pub fn with_actions(&self, actions: ActionSet) -> Result<Self> {
        Self::with_law(
            self.name.clone(),
            Arc::clone(&self.dynamics),
            self.noise.clone(),
            self.law.clone(),
            actions,
        )
    }

    /// Same model with different dynamics (for example a [`GrowthOverride`]).
    pub fn with_dynamics(&self, dynamics: Arc<dyn Dynamics>) -> Result<Self> {
        Self::with_law(
            self.name.clone(),
            dynamics,
            self.noise.clone(),
            self.law.clone(),
            self.actions.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthViolation {
    pub kind: GrowthBound,
    pub node: usize,
    pub action: Option<usize>,
    pub atom: usize,
    pub excess: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthBound {
    Drift,
    Return,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub samples_drift: usize,
    pub samples_return: usize,
    pub violations_drift: usize,
    pub violations_return: usize,
    /// Smallest observed `a1 + b1ω(x) − ω(G(x,w))`.
    pub min_margin_drift: f64,
    /// Smallest observed `a2 + b2ω(x) − |F(x,h,w)|`.
    pub min_margin_return: f64,
    /// First violations found, capped at 16.
    pub examples: Vec<GrowthViolation>,
    /// `(γ, μ^γ(a1), μ^γ(a2))` on the ladder.
    pub entropic_ladder: Vec<(f64, f64, f64)>,
    pub ladder_finite: bool,
}

impl GrowthReport {
    pub fn violations(&self) -> usize {
        self.violations_drift + self.violations_return
    }
}

pub const GAMMA_LADDER: [f64; 9] = [-5.0, -2.0, -1.0, -0.5, -0.1, 0.0, 0.5, 1.0, 2.0];

/// Falsifies the declared growth constants on grid nodes × actions × noise
/// atoms. At most `max_samples` `(x, w)` pairs are inspected, spread evenly
/// over the full product.
pub fn validate_growth(
    model: &MarketModel,
    grid: &GridSpec,
    max_samples: usize,
) -> Result<GrowthReport> {
    const TOL: f64 = 1e-9;
    model.check_grid(grid)?;
    let dyns = model.dynamics();
    let law = model.law();
    let pairs = grid.len() * law.len();
    let stride = (pairs / max_samples.max(1)).max(1);
    let (b1, b2) = (dyns.b1(), dyns.b2());
    let mut report = GrowthReport {
        samples_drift: 0,
        samples_return: 0,
        violations_drift: 0,
        violations_return: 0,
        min_margin_drift: f64::INFINITY,
        min_margin_return: f64::INFINITY,
        examples: Vec::new(),
        entropic_ladder: Vec::new(),
        ladder_finite: true,
    };
    let mut x = vec![0.0; grid.dims()];
    let mut next = vec![0.0; grid.dims()];
    let record = |report: &mut GrowthReport, v: GrowthViolation| {
        if report.examples.len() < 16 {
            report.examples.push(v);
        }
    };
    for p in (0..pairs).step_by(stride) {
        let (node, atom) = (p / law.len(), p % law.len());
        grid.node_into(node, &mut x);
        let w = law.point(atom);
        let wx = dyns.weight(&x);
        dyns.factor_step(&x, w, &mut next);
        let a1 = dyns.a1(w);
        let margin = a1 + b1 * wx - dyns.weight(&next);
        report.samples_drift += 1;
        report.min_margin_drift = report.min_margin_drift.min(margin);
        if !(margin >= -TOL * (1.0 + a1.abs() + wx)) {
            report.violations_drift += 1;
            record(
                &mut report,
                GrowthViolation {
                    kind: GrowthBound::Drift,
                    node,
                    action: None,
                    atom,
                    excess: -margin,
                },
            );
        }
        let a2 = dyns.a2(w);
        for (ai, h) in model.actions().actions().iter().enumerate() {
            let f = dyns.log_return(&x, h, w);
            let margin = a2 + b2 * wx - f.abs();
            report.samples_return += 1;
            report.min_margin_return = report.min_margin_return.min(margin);
            if !(margin >= -TOL * (1.0 + a2.abs() + wx)) {
                report.violations_return += 1;
                record(
                    &mut report,
                    GrowthViolation {
                        kind: GrowthBound::Return,
                        node,
                        action: Some(ai),
                        atom,
                        excess: -margin,
                    },
                );
            }
        }
    }
    let a1s = model.a1_samples();
    let a2s = model.a2_samples();
    for &g in &GAMMA_LADDER {
        let m1 = entropic_weighted(&a1s, law.weights(), g);
        let m2 = entropic_weighted(&a2s, law.weights(), g);
        report.ladder_finite &= m1.is_finite() && m2.is_finite();
        report.entropic_ladder.push((g, m1, m2));
    }
    Ok(report)
}

/// Empirical minorization over `C_R = {x on the grid : ω(x) ≤ R}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinorizationCertificate {
    pub r: f64,
    /// `Σ_A inf_x P[G(x,W) ∈ A]`; zero means no common mass.
    pub c: f64,
    /// `ν(A) = inf_x P[G(x,W) ∈ A] / c`, one entry per cell (row-major).
    pub nu: Vec<f64>,
    pub cell_lower: Vec<f64>,
    pub cell_upper: Vec<f64>,
    pub cells_per_dim: Vec<usize>,
    pub nodes_in_set: usize,
}

impl MinorizationCertificate {
    pub fn holds(&self) -> bool {
        self.c > 0.0
    }
}

/// Partitions the bounding box of all successor atoms of `C_R` into
/// `cells_per_dim` uniform cells per axis (total capped at 4096) and takes
/// the cellwise infimum of the successor probabilities.
pub fn minorization_check(
    model: &MarketModel,
    grid: &GridSpec,
    r: f64,
    cells_per_dim: usize,
) -> Result<MinorizationCertificate> {
    const MAX_CELLS: usize = 4096;
    model.check_grid(grid)?;
    if cells_per_dim == 0 {
        return Err(Error::InvalidInput(
            "need at least one cell per dimension".into(),
        ));
    }
    let k = grid.dims();
    let dyns = model.dynamics();
    let law = model.law();
    let mut x = vec![0.0; k];
    let mut members = Vec::new();
    for i in 0..grid.len() {
        grid.node_into(i, &mut x);
        if dyns.weight(&x) <= r {
            members.push(i);
        }
    }
    if members.is_empty() {
        return Err(Error::Domain(format!("no grid node satisfies ω(x) ≤ {r}")));
    }
    let mut per_dim = cells_per_dim;
    while per_dim > 1 && per_dim.saturating_pow(k as u32) > MAX_CELLS {
        per_dim -= 1;
    }
    let mut successors = vec![0.0; members.len() * law.len() * k];
    let mut lo = vec![f64::INFINITY; k];
    let mut hi = vec![f64::NEG_INFINITY; k];
    for (m, &i) in members.iter().enumerate() {
        grid.node_into(i, &mut x);
        for a in 0..law.len() {
            let out = &mut successors[(m * law.len() + a) * k..][..k];
            dyns.factor_step(&x, law.point(a), out);
            for d in 0..k {
                if !out[d].is_finite() {
                    return Err(Error::ModelDefinition("non-finite successor".into()));
                }
                lo[d] = lo[d].min(out[d]);
                hi[d] = hi[d].max(out[d]);
            }
        }
    }
    let total_cells = per_dim.pow(k as u32);
    let cell_of = |z: &[f64]| {
        let mut idx = 0;
        for d in 0..k {
            let width = hi[d] - lo[d];
            let c = if width > 0.0 {
                (((z[d] - lo[d]) / width) * per_dim as f64)
                    .floor()
                    .clamp(0.0, (per_dim - 1) as f64) as usize
            } else {
                0
            };
            idx = idx * per_dim + c;
        }
        idx
    };
    let mut inf = vec![f64::INFINITY; total_cells];
    let mut mass = vec![0.0; total_cells];
    for m in 0..members.len() {
        mass.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..law.len() {
            let z = &successors[(m * law.len() + a) * k..][..k];
            mass[cell_of(z)] += law.weight(a);
        }
        for (lo_mass, &p) in inf.iter_mut().zip(&mass) {
            *lo_mass = lo_mass.min(p);
        }
    }
    let c: f64 = inf.iter().sum::<f64>().min(1.0);
    let nu = if c > 0.0 {
        inf.iter().map(|v| v / c).collect()
    } else {
        vec![0.0; total_cells]
    };
    Ok(MinorizationCertificate {
        r,
        c,
        nu,
        cell_lower: lo,
        cell_upper: hi,
        cells_per_dim: vec![per_dim; k],
        nodes_in_set: members.len(),
    })
}
