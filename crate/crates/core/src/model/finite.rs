use std::sync::Arc;

use super::{ActionSet, Dynamics, MarketModel, NoiseSource};
use crate::entropic::DiscreteLaw;
use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// An uncontrolled chain on states `0..n` driven by noise atoms `0..k`:
/// the state moves to `next[s][j]` and earns `reward[s][j]` when atom `j`
/// is drawn. States sit on the nodes of a unit-spaced 1-d grid, so the
/// solver sees the chain exactly (no interpolation between nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    next: Vec<Vec<usize>>,
    reward: Vec<Vec<f64>>,
}

impl FiniteChain {
    pub fn new(next: Vec<Vec<usize>>, reward: Vec<Vec<f64>>) -> Result<Self> {
        let n = next.len();
        let k = next.first().map_or(0, Vec::len);
        if n < 2 || k == 0 {
            return Err(Error::ModelDefinition(
                "a finite chain needs at least two states and one atom".into(),
            ));
        }
        if reward.len() != n
            || next.iter().any(|r| r.len() != k)
            || reward.iter().any(|r| r.len() != k)
        {
            return Err(Error::Shape(
                "transition and reward tables must both be states × atoms".into(),
            ));
        }
        if next.iter().flatten().any(|&t| t >= n) {
            return Err(Error::ModelDefinition(
                "transition to a missing state".into(),
            ));
        }
        if reward.iter().flatten().any(|r| !r.is_finite()) {
            return Err(Error::ModelDefinition("rewards must be finite".into()));
        }
        Ok(FiniteChain { next, reward })
    }

    pub fn states(&self) -> usize {
        self.next.len()
    }

    pub fn atoms(&self) -> usize {
        self.next[0].len()
    }

    /// The grid whose nodes are the states.
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::uniform_1d(0.0, (self.states() - 1) as f64, self.states())
    }

    /// The chain as a single-action model; atom `j` has probability `probs[j]`.
    pub fn model(&self, probs: &[f64]) -> Result<MarketModel> {
        if probs.len() != self.atoms() {
            return Err(Error::Shape(format!(
                "{} probabilities for {} atoms",
                probs.len(),
                self.atoms()
            )));
        }
        let atoms: Vec<(Vec<f64>, f64)> = probs
            .iter()
            .enumerate()
            .map(|(j, &p)| (vec![j as f64], p))
            .collect();
        let law = DiscreteLaw::from_atoms(&atoms)?;
        MarketModel::with_law(
            "finite_chain",
            Arc::new(self.clone()),
            NoiseSource::Atoms(law.clone()),
            law,
            ActionSet::list(1, vec![vec![1.0]])?,
        )
    }

    fn index(v: f64, len: usize) -> usize {
        (v.round().max(0.0) as usize).min(len - 1)
    }
}

impl Dynamics for FiniteChain {
    fn factor_dim(&self) -> usize {
        1
    }
    fn asset_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn factor_step(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        let s = Self::index(x[0], self.states());
        out[0] = self.next[s][Self::index(w[0], self.atoms())] as f64;
    }
    fn log_return(&self, x: &[f64], _: &[f64], w: &[f64]) -> f64 {
        self.reward[Self::index(x[0], self.states())][Self::index(w[0], self.atoms())]
    }
    fn weight(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn a1(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn a2(&self, w: &[f64]) -> f64 {
        let j = Self::index(w[0], self.atoms());
        self.reward.iter().map(|r| r[j].abs()).fold(0.0, f64::max)
    }
    fn b1(&self) -> f64 {
        0.0
    }
    fn b2(&self) -> f64 {
        0.0
    }
    fn a1_bounded(&self) -> bool {
        true
    }
    fn weight_vanishes(&self) -> bool {
        true
    }
}
