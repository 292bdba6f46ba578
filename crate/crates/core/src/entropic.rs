//! Entropic utility, Esscher tilting and relative entropy over finitely
//! supported laws.
//!
//! `μ^γ(Z) = (1/γ) ln E[e^{γZ}]` for `γ ≠ 0` and `E[Z]` for `γ = 0`. All
//! exponential sums are evaluated with a max-shift (log-sum-exp).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Finitely supported probability law on `ℝ^dim`; atoms stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLaw {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteLaw {
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("law dimension must be positive".into()));
        }
        if points.len() != dim * weights.len() {
            return Err(Error::Shape(format!(
                "{} coordinates for {} atoms of dimension {dim}",
                points.len(),
                weights.len()
            )));
        }
        if weights.is_empty() {
            return Err(Error::InvalidInput("law needs at least one atom".into()));
        }
        if weights.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidInput(
                "atom weights must be positive and finite".into(),
            ));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "atom coordinates must be finite".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "atom weights sum to {total}, not 1"
            )));
        }
        Ok(DiscreteLaw {
            dim,
            points,
            weights,
        })
    }

    /// Builds a law from rows of `(point, weight)`.
    pub fn from_atoms(atoms: &[(Vec<f64>, f64)]) -> Result<Self> {
        let dim = atoms.first().map(|(p, _)| p.len()).unwrap_or(0);
        if atoms.iter().any(|(p, _)| p.len() != dim) {
            return Err(Error::Shape("atoms of differing dimension".into()));
        }
        let points = atoms.iter().flat_map(|(p, _)| p.iter().copied()).collect();
        let weights = atoms.iter().map(|(_, w)| *w).collect();
        Self::new(dim, points, weights)
    }

    /// Equal-weight empirical law of the given sample rows.
    pub fn empirical(dim: usize, points: Vec<f64>) -> Result<Self> {
        let n = points.len() / dim.max(1);
        let w = 1.0 / n as f64;
        let mut weights = vec![w; n];
        // absorb the rounding of n·(1/n) into the last atom
        let drift: f64 = 1.0 - weights.iter().sum::<f64>();
        if let Some(last) = weights.last_mut() {
            *last += drift;
        }
        Self::new(dim, points, weights)
    }

    /// Single atom at `point`.
    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(point.len(), point, vec![1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    /// Independent product law: atoms are concatenated coordinates.
    pub fn product(&self, other: &DiscreteLaw) -> Result<DiscreteLaw> {
        let dim = self.dim + other.dim;
        let mut points = Vec::with_capacity(dim * self.len() * other.len());
        let mut weights = Vec::with_capacity(self.len() * other.len());
        for i in 0..self.len() {
            for j in 0..other.len() {
                points.extend_from_slice(self.point(i));
                points.extend_from_slice(other.point(j));
                weights.push(self.weights[i] * other.weights[j]);
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        DiscreteLaw::new(dim, points, weights)
    }

    /// `E[g(W)]`.
    pub fn expect(&self, g: impl Fn(&[f64]) -> f64) -> f64 {
        self.points()
            .zip(&self.weights)
            .map(|(p, &w)| w * g(p))
            .sum()
    }
}

/// `ln Σ exp(v_i)` with the max-shift; `−∞` for an empty or all-`−∞` input.
pub fn log_sum_exp(v: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || !m.is_finite() {
        return m;
    }
    m + v.into_iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln Σ p_i exp(s_i)` for raw weights and scores.
pub fn log_expectation_exp(scores: &[f64], weights: &[f64]) -> f64 {
    let m = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !m.is_finite() {
        return m;
    }
    let s: f64 = scores
        .iter()
        .zip(weights)
        .map(|(&x, &p)| p * (x - m).exp())
        .sum();
    m + s.ln()
}

fn check_values(values: &[f64], law: &DiscreteLaw) -> Result<()> {
    if values.len() != law.len() {
        return Err(Error::Shape(format!(
            "{} values for {} atoms",
            values.len(),
            law.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("values must be finite".into()));
    }
    Ok(())
}

/// `μ^γ` of the random variable taking `values[i]` on atom `i`.
pub fn entropic_utility(values: &[f64], law: &DiscreteLaw, gamma: f64) -> Result<f64> {
    check_values(values, law)?;
    Ok(entropic_weighted(values, law.weights(), gamma))
}

/// `μ^γ` for raw weights (assumed to be a probability vector).
pub fn entropic_weighted(values: &[f64], weights: &[f64], gamma: f64) -> f64 {
    if gamma == 0.0 {
        return values.iter().zip(weights).map(|(&v, &p)| p * v).sum();
    }
    let scores: Vec<f64> = values.iter().map(|&v| gamma * v).collect();
    log_expectation_exp(&scores, weights) / gamma
}

/// Exponentially reweighted law `q_i ∝ p_i e^{score_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltedLaw {
    pub weights: Vec<f64>,
    /// `ln Σ p_i e^{score_i}`.
    pub log_normalizer: f64,
}

impl TiltedLaw {
    /// `E_Q[values]`.
    pub fn expect(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(&q, &v)| q * v).sum()
    }
}

pub fn esscher_tilt(score: &[f64], law: &DiscreteLaw) -> Result<TiltedLaw> {
    check_values(score, law)?;
    Ok(tilt_weights(score, law.weights()))
}

pub fn tilt_weights(score: &[f64], weights: &[f64]) -> TiltedLaw {
    let m = score.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let raw: Vec<f64> = score
        .iter()
        .zip(weights)
        .map(|(&s, &p)| p * (s - m).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    TiltedLaw {
        weights: raw.into_iter().map(|r| r / total).collect(),
        log_normalizer: m + total.ln(),
    }
}

/// `H[q ‖ p] = Σ q_i ln(q_i / p_i)`; `+∞` when `q` charges an atom `p` does not.
pub fn relative_entropy(q: &[f64], p: &[f64]) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::Shape(format!("{} vs {} atoms", q.len(), p.len())));
    }
    let mut h = 0.0;
    for (&qi, &pi) in q.iter().zip(p) {
        if qi <= 0.0 {
            continue;
        }
        if pi <= 0.0 {
            return Ok(f64::INFINITY);
        }
        h += qi * (qi / pi).ln();
    }
    Ok(h.max(0.0))
}
