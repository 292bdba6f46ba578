//! Bellman operators on grid functions and relative value iteration.
//!
//! For `γ < 0` the logarithmic operator is
//!
//! ```text
//! T_γ f(x) = min_h ln E[exp(γ F(x,h,W) + f(G(x,W)))]
//! ```
//!
//! and `R_γ f = T_γ(γ f) / γ`. The Bellman equation reads
//! `T_γ u = u + γ λ_γ`. Successor values `f(G(x,w))` are multilinear
//! interpolations; successors outside the grid box are clamped onto it and
//! counted. Because interpolation weights are nonnegative and sum to one,
//! the discretized operator is itself the operator of a model whose
//! successors are spread over grid nodes by those weights; the diagnostics
//! in [`certificate`] work with that projected successor law.

pub mod certificate;

use serde::{Deserialize, Serialize};

use crate::entropic::{entropic_weighted, log_sum_exp};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::model::MarketModel;
use crate::norms::{span_slice, WeightFunction};
use crate::parallel::{map_indexed, Execution};

/// Largest `(node, action, atom)` table of log-returns kept in memory.
const MAX_TABLE: usize = 1 << 24;

/// Successor-clamping statistics of a problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampStats {
    /// Number of `(node, atom)` successors.
    pub pairs: usize,
    pub clamped_pairs: usize,
    /// Probability mass of clamped successors, averaged over nodes.
    pub clamped_mass: f64,
}

impl ClampStats {
    pub fn unreliable(&self, threshold: f64) -> bool {
        self.clamped_mass > threshold
    }
}

/// A model restricted to a grid, with every quantity the operators need
/// precomputed: interpolation stencils of all successors, log-weights of
/// the noise law and (when small enough) the table of log-returns.
#[derive(Debug, Clone)]
pub struct BellmanProblem {
    model: MarketModel,
    grid: GridSpec,
    omega: WeightFunction,
    exec: Execution,
    offsets: Vec<usize>,
    st_nodes: Vec<u32>,
    st_weights: Vec<f64>,
    log_p: Vec<f64>,
    returns: Option<Vec<f64>>,
    clamp: ClampStats,
}

impl BellmanProblem {
    pub fn new(model: MarketModel, grid: GridSpec, exec: Execution) -> Result<Self> {
        model.check_grid(&grid)?;
        if grid.len() > u32::MAX as usize {
            return Err(Error::InvalidInput("grid too large".into()));
        }
        let omega = model.weight_function(&grid)?;
        let law = model.law();
        let (n, na, nh) = (grid.len(), law.len(), model.actions().len());
        let dyns = model.dynamics();
        let k = grid.dims();

        let per_node = map_indexed(
            exec,
            n,
            || (vec![0.0; k], vec![0.0; k]),
            |(x, z), i| -> Result<_> {
                grid.node_into(i, x);
                let mut stencils = Vec::with_capacity(na);
                let mut clamped = (0usize, 0.0);
                for a in 0..na {
                    dyns.factor_step(x, law.point(a), z);
                    if z.iter().any(|v| !v.is_finite()) {
                        return Err(Error::ModelDefinition(format!(
                            "{}: non-finite successor from node {i}, atom {a}",
                            model.name()
                        )));
                    }
                    let s = grid.stencil(z);
                    if s.clamped {
                        clamped.0 += 1;
                        clamped.1 += law.weight(a);
                    }
                    stencils.push(s.entries);
                }
                Ok((stencils, clamped))
            },
        );
        let mut offsets = Vec::with_capacity(n * na + 1);
        offsets.push(0);
        let mut st_nodes = Vec::new();
        let mut st_weights = Vec::new();
        let mut clamp = ClampStats {
            pairs: n * na,
            clamped_pairs: 0,
            clamped_mass: 0.0,
        };
        for node in per_node {
            let (stencils, (count, mass)) = node?;
            clamp.clamped_pairs += count;
            clamp.clamped_mass += mass / n as f64;
            for entries in stencils {
                for (j, w) in entries {
                    st_nodes.push(j as u32);
                    st_weights.push(w);
                }
                offsets.push(st_nodes.len());
            }
        }

        let tabulate = n.saturating_mul(nh).saturating_mul(na) <= MAX_TABLE;
        let rows = map_indexed(
            exec,
            n,
            || vec![0.0; k],
            |x, i| -> Result<Vec<f64>> {
                grid.node_into(i, x);
                let mut row = if tabulate {
                    Vec::with_capacity(nh * na)
                } else {
                    Vec::new()
                };
                for (hi, h) in model.actions().actions().iter().enumerate() {
                    for a in 0..na {
                        let r = dyns.log_return(x, h, law.point(a));
                        if !r.is_finite() {
                            return Err(Error::Domain(format!(
                                "{}: log-return is {r} at node {i}, action {hi}, atom {a}",
                                model.name()
                            )));
                        }
                        if tabulate {
                            row.push(r);
                        }
                    }
                }
                Ok(row)
            },
        );
        let mut table = Vec::with_capacity(if tabulate { n * nh * na } else { 0 });
        for row in rows {
            table.extend(row?);
        }
        let log_p = law.weights().iter().map(|p| p.ln()).collect();
        Ok(BellmanProblem {
            model,
            grid,
            omega,
            exec,
            offsets,
            st_nodes,
            st_weights,
            log_p,
            returns: tabulate.then_some(table),
            clamp,
        })
    }

    pub fn model(&self) -> &MarketModel {
        &self.model
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn omega(&self) -> &WeightFunction {
        &self.omega
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn clamp_stats(&self) -> ClampStats {
        self.clamp
    }

    /// Grid node nearest to the origin.
    pub fn default_anchor(&self) -> usize {
        self.grid.nearest_node(&vec![0.0; self.grid.dims()])
    }

    fn atoms(&self) -> usize {
        self.log_p.len()
    }

    pub(crate) fn stencil(
        &self,
        node: usize,
        atom: usize,
    ) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r =
            self.offsets[node * self.atoms() + atom]..self.offsets[node * self.atoms() + atom + 1];
        self.st_nodes[r.clone()]
            .iter()
            .map(|&j| j as usize)
            .zip(self.st_weights[r].iter().copied())
    }

    /// `F(x_node, h_action, w_atom)`.
    pub fn log_return(&self, node: usize, action: usize, atom: usize) -> f64 {
        let na = self.atoms();
        match &self.returns {
            Some(t) => t[(node * self.model.actions().len() + action) * na + atom],
            None => {
                let x = self.grid.node(node);
                self.model.dynamics().log_return(
                    &x,
                    self.model.actions().get(action),
                    self.model.law().point(atom),
                )
            }
        }
    }

    /// `f(G(x_node, w))` for every atom `w`.
    pub fn successor_values(&self, node: usize, f: &[f64], out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = self.stencil(node, a).map(|(j, w)| w * f[j]).sum();
        }
    }

    fn check_function(&self, f: &GridFunction) -> Result<()> {
        if f.spec() != &self.grid {
            return Err(Error::Shape(
                "function is not sampled on the problem grid".into(),
            ));
        }
        Ok(())
    }

    /// `ln E[exp(γF(x,h,W) + g(W))]` for one node and action, where `g`
    /// already holds the successor values.
    fn log_moment(
        &self,
        node: usize,
        action: usize,
        gamma: f64,
        g: &[f64],
        scores: &mut [f64],
    ) -> f64 {
        for (a, s) in scores.iter_mut().enumerate() {
            *s = gamma * self.log_return(node, action, a) + g[a] + self.log_p[a];
        }
        log_sum_exp(scores.iter().copied())
    }

    fn node_t(
        &self,
        node: usize,
        f: &[f64],
        gamma: f64,
        g: &mut [f64],
        scores: &mut [f64],
    ) -> (f64, usize) {
        self.successor_values(node, f, g);
        let mut best = (f64::INFINITY, 0);
        for h in 0..self.model.actions().len() {
            let v = self.log_moment(node, h, gamma, g, scores);
            if v < best.0 {
                best = (v, h);
            }
        }
        best
    }

    fn node_mean(&self, node: usize, f: &[f64], g: &mut [f64]) -> (f64, usize) {
        self.successor_values(node, f, g);
        let p = self.model.law().weights();
        let mut best = (f64::NEG_INFINITY, 0);
        for h in 0..self.model.actions().len() {
            let v: f64 = (0..self.atoms())
                .map(|a| p[a] * (self.log_return(node, h, a) + g[a]))
                .sum();
            if v > best.0 {
                best = (v, h);
            }
        }
        best
    }

    fn sweep(
        &self,
        op: impl Fn(&mut (Vec<f64>, Vec<f64>), usize) -> (f64, usize) + Sync + Send,
    ) -> (Vec<f64>, Vec<usize>) {
        let na = self.atoms();
        let out = map_indexed(self.exec, self.len(), || (vec![0.0; na], vec![0.0; na]), op);
        out.into_iter().unzip()
    }

    fn raw_t(&self, f: &[f64], gamma: f64) -> (Vec<f64>, Vec<usize>) {
        self.sweep(|(g, s), i| self.node_t(i, f, gamma, g, s))
    }

    fn raw_mean(&self, f: &[f64]) -> (Vec<f64>, Vec<usize>) {
        self.sweep(|(g, _), i| self.node_mean(i, f, g))
    }

    /// `T_γ f` and the minimizing action index per node (first minimizer in
    /// the lexicographically sorted action list).
    pub fn apply_t(&self, f: &GridFunction, gamma: f64) -> Result<(GridFunction, Vec<usize>)> {
        check_negative(gamma)?;
        self.check_function(f)?;
        let (v, pol) = self.raw_t(f.values(), gamma);
        Ok((GridFunction::new(self.grid.clone(), v)?, pol))
    }

    /// `R_γ f = T_γ(γ f) / γ`.
    pub fn apply_r(&self, f: &GridFunction, gamma: f64) -> Result<GridFunction> {
        check_negative(gamma)?;
        let (t, _) = self.apply_t(&f.scaled(gamma), gamma)?;
        Ok(t.scaled(1.0 / gamma))
    }

    /// Risk-neutral operator `max_h E[F(x,h,W) + f(G(x,W))]` with its argmax.
    pub fn apply_mean(&self, f: &GridFunction) -> Result<(GridFunction, Vec<usize>)> {
        self.check_function(f)?;
        let (v, pol) = self.raw_mean(f.values());
        Ok((GridFunction::new(self.grid.clone(), v)?, pol))
    }

    /// `T_γ f` at an arbitrary state, interpolating `f` at its successors.
    pub fn apply_t_at(&self, x: &[f64], f: &GridFunction, gamma: f64) -> Result<(f64, usize)> {
        check_negative(gamma)?;
        self.check_function(f)?;
        let (g, returns) = self.point_inputs(x, f)?;
        let mut scores = vec![0.0; self.atoms()];
        let mut best = (f64::INFINITY, 0);
        for (h, row) in returns.iter().enumerate() {
            for (a, s) in scores.iter_mut().enumerate() {
                *s = gamma * row[a] + g[a] + self.log_p[a];
            }
            let v = log_sum_exp(scores.iter().copied());
            if v < best.0 {
                best = (v, h);
            }
        }
        Ok(best)
    }

    /// Successor values and log-returns (per action, per atom) at a point.
    fn point_inputs(&self, x: &[f64], f: &GridFunction) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let law = self.model.law();
        let g = (0..self.atoms())
            .map(|a| Ok(f.interpolate(&self.model.factor_step(x, law.point(a))?)))
            .collect::<Result<Vec<f64>>>()?;
        let returns = self
            .model
            .actions()
            .actions()
            .iter()
            .map(|h| {
                (0..self.atoms())
                    .map(|a| self.model.log_return(x, h, law.point(a)))
                    .collect()
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok((g, returns))
    }

    /// Esscher-tilted successor law of `(x_node, f, h)` spread over grid
    /// nodes by the interpolation weights; one mass per node.
    pub fn tilted_node_masses(
        &self,
        node: usize,
        f: &[f64],
        action: usize,
        gamma: f64,
    ) -> Vec<f64> {
        let na = self.atoms();
        let mut g = vec![0.0; na];
        let mut scores = vec![0.0; na];
        self.successor_values(node, f, &mut g);
        let lz = self.log_moment(node, action, gamma, &g, &mut scores);
        let mut masses = vec![0.0; self.len()];
        for (a, s) in scores.iter().enumerate() {
            let q = (s - lz).exp();
            for (j, w) in self.stencil(node, a) {
                masses[j] += q * w;
            }
        }
        masses
    }

    /// As [`Self::tilted_node_masses`] at an arbitrary state.
    pub fn tilted_masses_at(
        &self,
        x: &[f64],
        f: &GridFunction,
        action: usize,
        gamma: f64,
    ) -> Result<Vec<f64>> {
        self.check_function(f)?;
        let law = self.model.law();
        let h = self.model.actions().get(action);
        let mut masses = vec![0.0; self.len()];
        let mut scores = Vec::with_capacity(self.atoms());
        let mut stencils = Vec::with_capacity(self.atoms());
        for a in 0..self.atoms() {
            let z = self.model.factor_step(x, law.point(a))?;
            let st = self.grid.stencil(&z);
            scores.push(
                gamma * self.model.log_return(x, h, law.point(a))?
                    + st.apply(f.values())
                    + self.log_p[a],
            );
            stencils.push(st);
        }
        let lz = log_sum_exp(scores.iter().copied());
        for (s, st) in scores.iter().zip(stencils) {
            let q = (s - lz).exp();
            for (j, w) in st.entries {
                masses[j] += q * w;
            }
        }
        Ok(masses)
    }

    /// Tilted successor law at `x` before projection onto the grid: one atom
    /// at `G(x, w_i)` per noise atom, weighted by the Esscher tilt of
    /// `γF(x,h,w) + f(G(x,w))`. Atoms landing on the same state are merged.
    pub fn pushforward_tilt(
        &self,
        x: &[f64],
        f: &GridFunction,
        action: usize,
        gamma: f64,
    ) -> Result<Vec<(Vec<f64>, f64)>> {
        self.check_function(f)?;
        let law = self.model.law();
        let h = self.model.actions().get(action);
        let mut succ = Vec::with_capacity(self.atoms());
        let mut scores = Vec::with_capacity(self.atoms());
        for a in 0..self.atoms() {
            let z = self.model.factor_step(x, law.point(a))?;
            scores.push(
                gamma * self.model.log_return(x, h, law.point(a))?
                    + f.interpolate(&z)
                    + self.log_p[a],
            );
            succ.push(z);
        }
        let lz = log_sum_exp(scores.iter().copied());
        let mut atoms: Vec<(Vec<f64>, f64)> = succ
            .into_iter()
            .zip(&scores)
            .map(|(z, s)| (z, (s - lz).exp()))
            .collect();
        atoms.sort_by(|a, b| {
            a.0.iter()
                .zip(&b.0)
                .map(|(u, v)| u.total_cmp(v))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut merged: Vec<(Vec<f64>, f64)> = Vec::with_capacity(atoms.len());
        for (z, q) in atoms {
            match merged.last_mut() {
                Some((prev, mass)) if *prev == z => *mass += q,
                _ => merged.push((z, q)),
            }
        }
        Ok(merged)
    }
}

fn check_negative(gamma: f64) -> Result<()> {
    if !(gamma < 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "risk parameter must be negative here, got {gamma}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Stop when the ω-span of successive iterates' difference drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Anchor node; defaults to the node nearest the origin.
    pub anchor: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tolerance: 1e-9,
            max_iterations: 100_000,
            anchor: None,
        }
    }
}

/// Result of relative value iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellmanSolution {
    pub gamma: f64,
    pub lambda: f64,
    /// Largest deviation of the per-anchor growth rates from `lambda`.
    pub lambda_deviation: f64,
    /// Value function normalized to vanish at the anchor.
    pub u: GridFunction,
    /// `u / γ` (equal to `u` when `γ = 0`).
    pub v: GridFunction,
    /// Optimal action index per node.
    pub policy: Vec<usize>,
    /// ω-span of successive differences, one entry per iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `max_x |T u(x) − u(x) − γλ| / (1 + ω(x))`.
    pub residual: f64,
    pub anchor: usize,
    pub anchor_set: Vec<usize>,
    pub clamp: ClampStats,
}

impl BellmanSolution {
    /// Largest ratio of successive trace entries over the second half of
    /// the trace, ignoring entries at round-off level.
    pub fn tail_ratio(&self) -> Option<f64> {
        let t = &self.trace;
        let start = t.len() / 2;
        (start.max(1)..t.len())
            .filter(|&i| t[i - 1] > 1e-13 && t[i] > 1e-13)
            .map(|i| t[i] / t[i - 1])
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }
}

/// The anchor node and its immediate axis neighbours.
fn anchor_set(grid: &GridSpec, anchor: usize) -> Vec<usize> {
    let k = grid.dims();
    let mut multi = vec![0usize; k];
    let mut rem = anchor;
    for d in (0..k).rev() {
        multi[d] = rem % grid.counts()[d];
        rem /= grid.counts()[d];
    }
    let mut set = vec![anchor];
    for d in 0..k {
        for delta in [-1i64, 1] {
            let v = multi[d] as i64 + delta;
            if v >= 0 && (v as usize) < grid.counts()[d] {
                let mut m = multi.clone();
                m[d] = v as usize;
                set.push(grid.linear_index(&m));
            }
        }
    }
    set
}

/// Relative value iteration `f ← T f − (T f)(anchor)` from `f = 0`.
///
/// `γ < 0` uses `T_γ`; `γ = 0` uses the risk-neutral operator. Positive `γ`
/// is rejected. Non-convergence is reported through `converged = false`.
pub fn solve(problem: &BellmanProblem, gamma: f64, opts: &SolveOptions) -> Result<BellmanSolution> {
    if !(gamma <= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "risk parameter must be ≤ 0, got {gamma}"
        )));
    }
    if !(opts.tolerance > 0.0) || opts.max_iterations == 0 {
        return Err(Error::InvalidInput(
            "tolerance and iteration cap must be positive".into(),
        ));
    }
    let n = problem.len();
    let anchor = opts.anchor.unwrap_or_else(|| problem.default_anchor());
    if anchor >= n {
        return Err(Error::InvalidInput(format!(
            "anchor {anchor} outside a grid of {n} nodes"
        )));
    }
    let apply = |f: &[f64]| {
        if gamma < 0.0 {
            problem.raw_t(f, gamma)
        } else {
            problem.raw_mean(f)
        }
    };
    let w = problem.omega().values();
    let mut f = vec![0.0; n];
    let mut trace = Vec::new();
    let mut converged = false;
    while trace.len() < opts.max_iterations {
        let (mut next, _) = apply(&f);
        let shift = next[anchor];
        next.iter_mut().for_each(|v| *v -= shift);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "value iteration produced non-finite values".into(),
            ));
        }
        let diff: Vec<f64> = next.iter().zip(&f).map(|(a, b)| a - b).collect();
        let span = span_slice(&diff, w, 1.0).value;
        trace.push(span);
        f = next;
        if span < opts.tolerance {
            converged = true;
            break;
        }
    }
    let (tu, policy) = apply(&f);
    let scale = if gamma < 0.0 { gamma } else { 1.0 };
    let anchors = anchor_set(problem.grid(), anchor);
    let rates: Vec<f64> = anchors.iter().map(|&a| (tu[a] - f[a]) / scale).collect();
    let lambda = rates.iter().sum::<f64>() / rates.len() as f64;
    let lambda_deviation = rates.iter().map(|r| (r - lambda).abs()).fold(0.0, f64::max);
    let residual = tu
        .iter()
        .zip(&f)
        .zip(w)
        .map(|((t, u), o)| (t - u - scale * lambda).abs() / (1.0 + o))
        .fold(0.0, f64::max);
    let u = GridFunction::new(problem.grid().clone(), f)?;
    let v = if gamma < 0.0 {
        u.scaled(1.0 / gamma)
    } else {
        u.clone()
    };
    Ok(BellmanSolution {
        gamma,
        lambda,
        lambda_deviation,
        u,
        v,
        policy,
        iterations: trace.len(),
        trace,
        converged,
        residual,
        anchor,
        anchor_set: anchors,
        clamp: problem.clamp_stats(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub lambda: f64,
    /// ω-span of the normalized value function.
    pub u_span: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// Rows sorted by increasing `γ`.
    pub rows: Vec<SweepRow>,
    /// `λ` is nondecreasing in `γ` (up to `1e-9`).
    pub monotone: bool,
    /// `max |Δλ| / Δγ` over adjacent rows.
    pub max_slope: f64,
}

/// Solves at every `γ` (each must be ≤ 0) and tabulates `λ_γ`.
pub fn gamma_sweep(
    problem: &BellmanProblem,
    gammas: &[f64],
    opts: &SolveOptions,
) -> Result<SweepReport> {
    if gammas.is_empty() {
        return Err(Error::InvalidInput("empty list of risk parameters".into()));
    }
    let mut sorted = gammas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut rows = Vec::with_capacity(sorted.len());
    for &g in &sorted {
        let sol = solve(problem, g, opts)?;
        rows.push(SweepRow {
            gamma: g,
            lambda: sol.lambda,
            u_span: span_slice(sol.u.values(), problem.omega().values(), 1.0).value,
            converged: sol.converged,
            iterations: sol.iterations,
        });
    }
    let mut monotone = true;
    let mut max_slope: f64 = 0.0;
    for w in rows.windows(2) {
        let d = w[1].lambda - w[0].lambda;
        monotone &= d >= -1e-9;
        max_slope = max_slope.max(d.abs() / (w[1].gamma - w[0].gamma));
    }
    Ok(SweepReport {
        rows,
        monotone,
        max_slope,
    })
}

/// `μ^γ(a2(W) + b2/(1−b1)·a1(W))` under the model's noise law.
pub fn rsc_upper_bound(model: &MarketModel, gamma: f64) -> f64 {
    let c = model.b2() / (1.0 - model.b1());
    let vals: Vec<f64> = model
        .a2_samples()
        .iter()
        .zip(model.a1_samples())
        .map(|(a2, a1)| a2 + c * a1)
        .collect();
    entropic_weighted(&vals, model.law().weights(), gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropic::DiscreteLaw;
    use crate::model::{ActionSet, Builtin, ControlFreeGaussianParams, NoiseApprox, NoiseSource};
    use std::sync::Arc;

    fn control_free(order: usize) -> BellmanProblem {
        let model = Builtin::ControlFreeGaussian(ControlFreeGaussianParams::default())
            .build(NoiseApprox::GaussHermite { order }, 1)
            .unwrap();
        BellmanProblem::new(
            model,
            GridSpec::uniform_1d(-4.0, 4.0, 21).unwrap(),
            Execution::Parallel,
        )
        .unwrap()
    }

    #[test]
    fn gaussian_log_moment() {
        let p = control_free(24);
        let zero = GridFunction::zeros(p.grid());
        let (t, _) = p.apply_t(&zero, -1.0).unwrap();
        assert!(t.values().iter().all(|v| (v - 0.5).abs() < 1e-10));
        let r = p.apply_r(&zero, -1.0).unwrap();
        assert!(r.values().iter().all(|v| (v + 0.5).abs() < 1e-10));
    }

    #[test]
    fn rejects_bad_gamma() {
        let p = control_free(8);
        let zero = GridFunction::zeros(p.grid());
        assert!(p.apply_t(&zero, 0.0).is_err());
        assert!(solve(&p, 0.3, &SolveOptions::default()).is_err());
    }

    #[derive(Debug)]
    struct Bet;

    impl crate::model::Dynamics for Bet {
        fn factor_dim(&self) -> usize {
            1
        }
        fn asset_dim(&self) -> usize {
            1
        }
        fn noise_dim(&self) -> usize {
            1
        }
        fn factor_step(&self, _: &[f64], _: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn log_return(&self, _: &[f64], h: &[f64], w: &[f64]) -> f64 {
            h[0] * w[0]
        }
        fn weight(&self, _: &[f64]) -> f64 {
            0.0
        }
        fn a1(&self, _: &[f64]) -> f64 {
            0.0
        }
        fn a2(&self, w: &[f64]) -> f64 {
            w[0].abs()
        }
        fn b1(&self) -> f64 {
            0.5
        }
        fn b2(&self) -> f64 {
            0.0
        }
        fn a1_bounded(&self) -> bool {
            true
        }
    }

    #[test]
    fn two_action_coin() {
        let law = DiscreteLaw::from_atoms(&[(vec![-1.0], 0.5), (vec![1.0], 0.5)]).unwrap();
        let actions = ActionSet::list(1, vec![vec![1.0], vec![0.0]]).unwrap();
        let model = MarketModel::with_law(
            "bet",
            Arc::new(Bet),
            NoiseSource::Atoms(law.clone()),
            law,
            actions,
        )
        .unwrap();
        let p = BellmanProblem::new(
            model,
            GridSpec::uniform_1d(-1.0, 1.0, 3).unwrap(),
            Execution::Sequential,
        )
        .unwrap();
        let zero = GridFunction::zeros(p.grid());
        let (t, pol) = p.apply_t(&zero, -1.0).unwrap();
        assert!(t.values().iter().all(|v| v.abs() < 1e-15));
        assert!(pol.iter().all(|&h| h == 0));
        let mut s = vec![0.0; 2];
        let g = vec![0.0; 2];
        let cosh = p.log_moment(0, 1, -1.0, &g, &mut s);
        assert!((cosh - 1f64.cosh().ln()).abs() < 1e-14);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let model = Builtin::by_name("example2_clipped")
            .unwrap()
            .build(NoiseApprox::GaussHermite { order: 8 }, 4)
            .unwrap();
        let grid = GridSpec::uniform_1d(-3.0, 3.0, 41).unwrap();
        let par = BellmanProblem::new(model.clone(), grid.clone(), Execution::Parallel).unwrap();
        let seq = par.clone().with_execution(Execution::Sequential);
        let a = solve(&par, -0.5, &SolveOptions::default()).unwrap();
        let b = solve(&seq, -0.5, &SolveOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn anchor_neighbours() {
        let g = GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![3, 3]).unwrap();
        assert_eq!(anchor_set(&g, 4), vec![4, 1, 7, 3, 5]);
        assert_eq!(anchor_set(&g, 0), vec![0, 3, 1]);
    }
}
