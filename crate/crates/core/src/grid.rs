//! Rectangular truncation of the factor space and functions sampled on it.
//!
//! Nodes are laid out row-major: the last dimension varies fastest, so the
//! linear index order is the lexicographic order of the node coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative snap tolerance used when a query lands (numerically) on a node.
const SNAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidInput(
                "grid needs at least one dimension".into(),
            ));
        }
        if lower.len() != upper.len() || lower.len() != counts.len() {
            return Err(Error::Shape(format!(
                "grid bounds/counts lengths differ: {} / {} / {}",
                lower.len(),
                upper.len(),
                counts.len()
            )));
        }
        for d in 0..lower.len() {
            if !(lower[d].is_finite() && upper[d].is_finite() && lower[d] < upper[d]) {
                return Err(Error::InvalidInput(format!(
                    "dimension {d}: need finite lower < upper, got [{}, {}]",
                    lower[d], upper[d]
                )));
            }
            if counts[d] < 2 {
                return Err(Error::InvalidInput(format!(
                    "dimension {d}: need at least 2 points, got {}",
                    counts[d]
                )));
            }
        }
        let total = counts.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c));
        if total.is_none() {
            return Err(Error::InvalidInput("grid too large".into()));
        }
        Ok(GridSpec {
            lower,
            upper,
            counts,
        })
    }

    pub fn uniform_1d(lower: f64, upper: f64, count: usize) -> Result<Self> {
        Self::new(vec![lower], vec![upper], vec![count])
    }

    pub fn dims(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn step(&self, d: usize) -> f64 {
        (self.upper[d] - self.lower[d]) / (self.counts[d] - 1) as f64
    }

    /// Coordinate of the `i`-th point along dimension `d`.
    pub fn coord(&self, d: usize, i: usize) -> f64 {
        let n = self.counts[d] - 1;
        if i == n {
            return self.upper[d];
        }
        self.lower[d] + (self.upper[d] - self.lower[d]) * (i as f64) / (n as f64)
    }

    pub fn node_into(&self, index: usize, out: &mut [f64]) {
        let mut rem = index;
        for d in (0..self.dims()).rev() {
            let i = rem % self.counts[d];
            rem /= self.counts[d];
            out[d] = self.coord(d, i);
        }
    }

    pub fn node(&self, index: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dims()];
        self.node_into(index, &mut out);
        out
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.counts)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(d, &v)| v >= self.lower[d] && v <= self.upper[d])
    }

    /// Index of the node nearest to `x` (per-dimension rounding, clamped).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        for d in 0..self.dims() {
            let t = (x[d] - self.lower[d]) / self.step(d);
            let i = if t.is_nan() {
                0
            } else {
                t.round().clamp(0.0, (self.counts[d] - 1) as f64) as usize
            };
            idx = idx * self.counts[d] + i;
        }
        idx
    }

    /// Multilinear interpolation stencil of `x`; points outside the box are
    /// clamped onto its boundary and reported as such.
    pub fn stencil(&self, x: &[f64]) -> Stencil {
        let k = self.dims();
        let mut lows = Vec::with_capacity(k);
        let mut fracs = Vec::with_capacity(k);
        let mut clamped = false;
        for d in 0..k {
            let n = self.counts[d];
            let mut v = x[d];
            if v < self.lower[d] || v.is_nan() {
                v = self.lower[d];
                clamped = true;
            } else if v > self.upper[d] {
                v = self.upper[d];
                clamped = true;
            }
            let t = (v - self.lower[d]) / self.step(d);
            let mut i = t.floor();
            let mut frac = t - i;
            if frac > 1.0 - SNAP {
                i += 1.0;
                frac = 0.0;
            } else if frac < SNAP {
                frac = 0.0;
            }
            let mut i = i as usize;
            if i >= n - 1 {
                // upper boundary: represent as the last cell with weight 1 on its top
                i = n - 2;
                frac = 1.0;
            }
            lows.push(i);
            fracs.push(frac);
        }
        let corners = 1usize << k;
        let mut entries = Vec::with_capacity(corners);
        for corner in 0..corners {
            let mut w = 1.0;
            let mut idx = 0usize;
            for d in 0..k {
                let up = (corner >> (k - 1 - d)) & 1 == 1;
                let i = lows[d] + usize::from(up);
                w *= if up { fracs[d] } else { 1.0 - fracs[d] };
                idx = idx * self.counts[d] + i;
            }
            if w != 0.0 {
                entries.push((idx, w));
            }
        }
        Stencil { entries, clamped }
    }

    /// Interpolates `values` (one per node) at `x`, clamping to the box.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        self.stencil(x).apply(values)
    }
}

/// Node indices and weights of a multilinear interpolation; weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub entries: Vec<(usize, f64)>,
    pub clamped: bool,
}

impl Stencil {
    pub fn apply(&self, values: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, w)| w * values[i]).sum()
    }
}

/// Real values sampled on every node of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Shape(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                spec.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at node {i}")));
        }
        Ok(GridFunction { spec, values })
    }

    pub fn constant(spec: &GridSpec, c: f64) -> Self {
        GridFunction {
            values: vec![c; spec.len()],
            spec: spec.clone(),
        }
    }

    pub fn zeros(spec: &GridSpec) -> Self {
        Self::constant(spec, 0.0)
    }

    pub fn from_fn(spec: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut x = vec![0.0; spec.dims()];
        let values = (0..spec.len())
            .map(|i| {
                spec.node_into(i, &mut x);
                f(&x)
            })
            .collect();
        Self::new(spec.clone(), values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridFunction {
            spec: self.spec.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn shifted(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(GridFunction {
            spec: self.spec.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::Shape(
                "grid functions live on different grids".into(),
            ));
        }
        Ok(())
    }

    pub fn interpolate(&self, x: &[f64]) -> f64 {
        self.spec.interpolate(&self.values, x)
    }
}
