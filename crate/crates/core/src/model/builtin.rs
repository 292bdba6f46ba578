use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ActionConstraint, ActionSet, Dynamics, MarketModel, NoiseApprox, NoiseSource};
use crate::error::{Error, Result};

/// Built-in models and their parameters, tagged by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", content = "params", rename_all = "snake_case")]
pub enum Builtin {
    Example1Omega0(#[serde(default)] Example1Params),
    Example2Clipped(#[serde(default)] Example2Params),
    Example3Discrete(#[serde(default)] Example3Params),
    ControlFreeGaussian(#[serde(default)] ControlFreeGaussianParams),
    FrozenFactor(#[serde(default)] FrozenFactorParams),
}

impl Builtin {
    pub const NAMES: [&'static str; 5] = [
        "example1_omega0",
        "example2_clipped",
        "example3_discrete",
        "control_free_gaussian",
        "frozen_factor",
    ];

    /// The named model with default parameters.
    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "example1_omega0" => Builtin::Example1Omega0(Default::default()),
            "example2_clipped" => Builtin::Example2Clipped(Default::default()),
            "example3_discrete" => Builtin::Example3Discrete(Default::default()),
            "control_free_gaussian" => Builtin::ControlFreeGaussian(Default::default()),
            "frozen_factor" => Builtin::FrozenFactor(Default::default()),
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown builtin `{other}`; expected one of {}",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Example1Omega0(_) => Self::NAMES[0],
            Builtin::Example2Clipped(_) => Self::NAMES[1],
            Builtin::Example3Discrete(_) => Self::NAMES[2],
            Builtin::ControlFreeGaussian(_) => Self::NAMES[3],
            Builtin::FrozenFactor(_) => Self::NAMES[4],
        }
    }

    pub fn dynamics(&self) -> Result<Arc<dyn Dynamics>> {
        Ok(match self {
            Builtin::Example1Omega0(p) => Arc::new(Example1::new(p)?),
            Builtin::Example2Clipped(p) => Arc::new(Example2::new(p)?),
            Builtin::Example3Discrete(p) => Arc::new(Example3::new(p)?),
            Builtin::ControlFreeGaussian(p) => Arc::new(ControlFree::new(p)?),
            Builtin::FrozenFactor(p) => Arc::new(Frozen::new(p)?),
        })
    }

    fn constraint(&self) -> Option<ActionConstraint> {
        match self {
            Builtin::Example1Omega0(_) => Some(ActionConstraint::SimplexEq),
            Builtin::Example2Clipped(_) | Builtin::Example3Discrete(_) => {
                Some(ActionConstraint::SimplexIneq)
            }
            Builtin::ControlFreeGaussian(_) | Builtin::FrozenFactor(_) => None,
        }
    }

    /// Builds the model with Gaussian noise discretized by `noise` and a
    /// simplex lattice of the given resolution (single-action models ignore it).
    pub fn build(&self, noise: NoiseApprox, resolution: usize) -> Result<MarketModel> {
        let dynamics = self.dynamics()?;
        let actions = match self.constraint() {
            Some(c) => ActionSet::new(dynamics.asset_dim(), c, resolution)?,
            None => ActionSet::list(1, vec![vec![1.0]])?,
        };
        let source = NoiseSource::Gaussian {
            dim: dynamics.noise_dim(),
        };
        MarketModel::new(self.name(), dynamics, source, noise, actions)
    }
}

fn check_matrix(name: &str, m: &[Vec<f64>], rows: usize, cols: usize) -> Result<()> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(Error::ModelDefinition(format!(
            "`{name}` must be a {rows}×{cols} matrix"
        )));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::ModelDefinition(format!(
            "`{name}` has non-finite entries"
        )));
    }
    Ok(())
}

fn check_vector(name: &str, v: &[f64], len: usize) -> Result<()> {
    check_matrix(name, &[v.to_vec()], 1, len)
}

/// Per-asset drift `a_i(x) = mu_i + Σ_j load_ij·φ(x_j)` and volatility rows.
#[derive(Debug, Clone)]
struct Returns {
    mu: Vec<f64>,
    load: Vec<Vec<f64>>,
    sigma: Vec<Vec<f64>>,
    bounded_feature: bool,
}

impl Returns {
    fn new(
        mu: &[f64],
        load: &[Vec<f64>],
        sigma: &[Vec<f64>],
        k: usize,
        bounded_feature: bool,
    ) -> Result<Self> {
        let m = mu.len();
        if m == 0 {
            return Err(Error::ModelDefinition(
                "`mu` needs at least one asset".into(),
            ));
        }
        check_vector("mu", mu, m)?;
        check_matrix("load", load, m, k)?;
        check_matrix("sigma", sigma, m, k + m)?;
        Ok(Returns {
            mu: mu.to_vec(),
            load: load.to_vec(),
            sigma: sigma.to_vec(),
            bounded_feature,
        })
    }

    fn drift(&self, i: usize, x: &[f64]) -> f64 {
        let feat = |v: f64| if self.bounded_feature { v.tanh() } else { v };
        self.mu[i]
            + self.load[i]
                .iter()
                .zip(x)
                .map(|(l, &v)| l * feat(v))
                .sum::<f64>()
    }

    /// `Σ_i h_i a_i(x) − ½|σᵀh|² + (σᵀh)·w`.
    fn continuous_return(&self, x: &[f64], h: &[f64], w: &[f64]) -> f64 {
        let mut drift = 0.0;
        for (i, &hi) in h.iter().enumerate() {
            drift += hi * self.drift(i, x);
        }
        let mut quad = 0.0;
        let mut noise = 0.0;
        for (z, &wz) in w.iter().enumerate() {
            let s: f64 = h
                .iter()
                .zip(&self.sigma)
                .map(|(&hi, row)| hi * row[z])
                .sum();
            quad += s * s;
            noise += s * wz;
        }
        drift - 0.5 * quad + noise
    }

    /// `ln ξ_i = a_i(x) − ½Σ_z σ_iz² + Σ_z σ_iz w_z`.
    fn log_gross(&self, i: usize, x: &[f64], w: &[f64]) -> f64 {
        let row = &self.sigma[i];
        self.drift(i, x) - 0.5 * row.iter().map(|s| s * s).sum::<f64>()
            + row.iter().zip(w).map(|(s, v)| s * v).sum::<f64>()
    }

    fn mu_sup(&self) -> f64 {
        self.mu.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `sup_x |a_i(x)|` over `i` for the bounded feature.
    fn drift_sup(&self) -> f64 {
        self.mu
            .iter()
            .zip(&self.load)
            .map(|(m, l)| m.abs() + l.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn half_var_sup(&self) -> f64 {
        0.5 * self
            .sigma
            .iter()
            .map(|r| r.iter().map(|s| s * s).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn noise_bound(&self, w: &[f64]) -> f64 {
        self.sigma
            .iter()
            .map(|r| r.iter().zip(w).map(|(s, v)| (s * v).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn max_load_norm(&self) -> f64 {
        self.load
            .iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// `x'_j = amp_j·tanh(x_j) + Σ_z δ_jz w_z`.
#[derive(Debug, Clone)]
struct BoundedFactor {
    amp: Vec<f64>,
    delta: Vec<Vec<f64>>,
}

impl BoundedFactor {
    fn new(amp: &[f64], delta: &[Vec<f64>], noise_dim: usize) -> Result<Self> {
        let k = amp.len();
        check_vector("amp", amp, k)?;
        check_matrix("delta", delta, k, noise_dim)?;
        Ok(BoundedFactor {
            amp: amp.to_vec(),
            delta: delta.to_vec(),
        })
    }

    fn step(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.amp[j] * x[j].tanh()
                + self.delta[j].iter().zip(w).map(|(d, v)| d * v).sum::<f64>();
        }
    }
}

/// Weight-free model with bounded factor drift; within-period weights are
/// constant and fully invested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Example1Params {
    /// Factor mean-reversion amplitude per factor (`b_j(x) = amp_j·tanh(x_j)`).
    pub amp: Vec<f64>,
    /// Factor noise loadings, `k × (k+m)`.
    pub delta: Vec<Vec<f64>>,
    /// Base drift per asset.
    pub mu: Vec<f64>,
    /// Drift sensitivity to `tanh(x_j)`, `m × k`.
    pub load: Vec<Vec<f64>>,
    /// Volatility loadings, `m × (k+m)`.
    pub sigma: Vec<Vec<f64>>,
}

impl Default for Example1Params {
    fn default() -> Self {
        Example1Params {
            amp: vec![0.6],
            delta: vec![vec![0.5, 0.0]],
            mu: vec![0.04],
            load: vec![vec![0.03]],
            sigma: vec![vec![0.05, 0.15]],
        }
    }
}

#[derive(Debug)]
struct Example1 {
    factor: BoundedFactor,
    returns: Returns,
}

impl Example1 {
    fn new(p: &Example1Params) -> Result<Self> {
        let k = p.amp.len();
        let returns = Returns::new(&p.mu, &p.load, &p.sigma, k, true)?;
        let factor = BoundedFactor::new(&p.amp, &p.delta, k + p.mu.len())?;
        Ok(Example1 { factor, returns })
    }
}

impl Dynamics for Example1 {
    fn factor_dim(&self) -> usize {
        self.factor.amp.len()
    }
    fn asset_dim(&self) -> usize {
        self.returns.mu.len()
    }
    fn factor_step(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        self.factor.step(x, w, out)
    }
    fn log_return(&self, x: &[f64], h: &[f64], w: &[f64]) -> f64 {
        self.returns.continuous_return(x, h, w)
    }
    fn weight(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn a1(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn a2(&self, w: &[f64]) -> f64 {
        self.returns.drift_sup() + self.returns.half_var_sup() + self.returns.noise_bound(w)
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
    fn weight_vanishes(&self) -> bool {
        true
    }
}

/// Linear factor with clipped shocks: `x' = b1·x + C(w)`,
/// `C_j(w) = clip(Σ_z δ_jz w_z, −K, K)`; weight `ω(x) = a + b1‖x‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Example2Params {
    pub b1: f64,
    /// The constant `a` in `ω(x) = a + b1‖x‖`.
    pub omega_offset: f64,
    /// Clip level `K`.
    pub clip: f64,
    /// Also clip from below at `−K`, which keeps `a1` bounded.
    pub two_sided: bool,
    /// Shock loadings, `k × (k+m)`.
    pub delta: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    /// Drift sensitivity to `x_j`, `m × k`.
    pub load: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
}

impl Default for Example2Params {
    fn default() -> Self {
        Example2Params {
            b1: 0.5,
            omega_offset: 1.0,
            clip: 1.5,
            two_sided: true,
            delta: vec![vec![1.0, 0.0]],
            mu: vec![0.03],
            load: vec![vec![0.02]],
            sigma: vec![vec![0.0, 0.2]],
        }
    }
}

#[derive(Debug)]
struct Example2 {
    b1: f64,
    offset: f64,
    clip: f64,
    two_sided: bool,
    delta: Vec<Vec<f64>>,
    returns: Returns,
}

impl Example2 {
    fn new(p: &Example2Params) -> Result<Self> {
        if !(p.b1 > 0.0 && p.b1 < 1.0) {
            return Err(Error::ModelDefinition(format!(
                "b1 must lie in (0,1), got {}",
                p.b1
            )));
        }
        if !(p.omega_offset >= 0.0 && p.omega_offset.is_finite()) {
            return Err(Error::ModelDefinition(
                "omega_offset must be finite and ≥ 0".into(),
            ));
        }
        if !(p.clip > 0.0) {
            return Err(Error::ModelDefinition(format!(
                "clip must be positive, got {}",
                p.clip
            )));
        }
        let k = p.delta.len();
        if k == 0 {
            return Err(Error::ModelDefinition(
                "`delta` needs at least one factor row".into(),
            ));
        }
        let returns = Returns::new(&p.mu, &p.load, &p.sigma, k, false)?;
        check_matrix("delta", &p.delta, k, k + p.mu.len())?;
        Ok(Example2 {
            b1: p.b1,
            offset: p.omega_offset,
            clip: p.clip,
            two_sided: p.two_sided,
            delta: p.delta.clone(),
            returns,
        })
    }

    fn shock(&self, j: usize, w: &[f64]) -> f64 {
        let s: f64 = self.delta[j].iter().zip(w).map(|(d, v)| d * v).sum();
        let s = s.min(self.clip);
        if self.two_sided {
            s.max(-self.clip)
        } else {
            s
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl Dynamics for Example2 {
    fn factor_dim(&self) -> usize {
        self.delta.len()
    }
    fn asset_dim(&self) -> usize {
        self.returns.mu.len()
    }
    fn factor_step(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.b1 * x[j] + self.shock(j, w);
        }
    }
    fn log_return(&self, x: &[f64], h: &[f64], w: &[f64]) -> f64 {
        self.returns.continuous_return(x, h, w)
    }
    fn weight(&self, x: &[f64]) -> f64 {
        self.offset + self.b1 * norm(x)
    }
    fn a1(&self, w: &[f64]) -> f64 {
        let c: Vec<f64> = (0..self.delta.len()).map(|j| self.shock(j, w)).collect();
        self.offset * (1.0 - self.b1) + self.b1 * norm(&c)
    }
    fn a2(&self, w: &[f64]) -> f64 {
        self.returns.mu_sup() + self.returns.half_var_sup() + self.returns.noise_bound(w)
    }
    fn b1(&self) -> f64 {
        self.b1
    }
    fn b2(&self) -> f64 {
        self.returns.max_load_norm() / self.b1
    }
    fn a1_bounded(&self) -> bool {
        self.two_sided && self.clip.is_finite()
    }
}

/// Discrete-time gross returns `ξ_i = exp(a_i(x) − ½Σσ_iz² + Σσ_iz w_z)`
/// with a cash account; factor as in [`Example1Params`], `ω ≡ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Example3Params {
    pub amp: Vec<f64>,
    pub delta: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub load: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
}

impl Default for Example3Params {
    fn default() -> Self {
        Example3Params {
            amp: vec![0.6],
            delta: vec![vec![0.5, 0.0]],
            mu: vec![0.03],
            load: vec![vec![0.02]],
            sigma: vec![vec![0.05, 0.2]],
        }
    }
}

#[derive(Debug)]
struct Example3 {
    factor: BoundedFactor,
    returns: Returns,
}

impl Example3 {
    fn new(p: &Example3Params) -> Result<Self> {
        let k = p.amp.len();
        let returns = Returns::new(&p.mu, &p.load, &p.sigma, k, true)?;
        let factor = BoundedFactor::new(&p.amp, &p.delta, k + p.mu.len())?;
        Ok(Example3 { factor, returns })
    }
}

impl Dynamics for Example3 {
    fn factor_dim(&self) -> usize {
        self.factor.amp.len()
    }
    fn asset_dim(&self) -> usize {
        self.returns.mu.len()
    }
    fn factor_step(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        self.factor.step(x, w, out)
    }
    fn log_return(&self, x: &[f64], h: &[f64], w: &[f64]) -> f64 {
        let invested: f64 = h.iter().sum();
        let mut gross = (1.0 - invested).max(0.0);
        for (i, &hi) in h.iter().enumerate() {
            if hi != 0.0 {
                gross += hi * self.returns.log_gross(i, x, w).exp();
            }
        }
        gross.ln()
    }
    fn weight(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn a1(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn a2(&self, w: &[f64]) -> f64 {
        self.returns.drift_sup() + self.returns.half_var_sup() + self.returns.noise_bound(w)
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
    fn weight_vanishes(&self) -> bool {
        true
    }
}

/// One factor, one asset, one action: `x' = persistence·x + factor_scale·w₁`,
/// `F = mean + scale·w₂`. Then `λ_γ = mean + γ·scale²/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlFreeGaussianParams {
    pub mean: f64,
    pub scale: f64,
    pub persistence: f64,
    pub factor_scale: f64,
}

impl Default for ControlFreeGaussianParams {
    fn default() -> Self {
        ControlFreeGaussianParams {
            mean: 0.0,
            scale: 1.0,
            persistence: 0.0,
            factor_scale: 1.0,
        }
    }
}

#[derive(Debug)]
struct ControlFree(ControlFreeGaussianParams);

impl ControlFree {
    fn new(p: &ControlFreeGaussianParams) -> Result<Self> {
        if ![p.mean, p.scale, p.persistence, p.factor_scale]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::ModelDefinition(
                "control_free_gaussian parameters must be finite".into(),
            ));
        }
        Ok(ControlFree(p.clone()))
    }
}

impl Dynamics for ControlFree {
    fn factor_dim(&self) -> usize {
        1
    }
    fn asset_dim(&self) -> usize {
        1
    }
    fn factor_step(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        out[0] = self.0.persistence * x[0] + self.0.factor_scale * w[0];
    }
    fn log_return(&self, _: &[f64], _: &[f64], w: &[f64]) -> f64 {
        self.0.mean + self.0.scale * w[1]
    }
    fn weight(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn a1(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn a2(&self, w: &[f64]) -> f64 {
        self.0.mean.abs() + (self.0.scale * w[1]).abs()
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
    fn weight_vanishes(&self) -> bool {
        true
    }
}

/// A factor that never moves (`x' = x`): no mixing at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrozenFactorParams {
    pub mean: f64,
    pub scale: f64,
}

impl Default for FrozenFactorParams {
    fn default() -> Self {
        FrozenFactorParams {
            mean: 0.0,
            scale: 1.0,
        }
    }
}

#[derive(Debug)]
struct Frozen(FrozenFactorParams);

impl Frozen {
    fn new(p: &FrozenFactorParams) -> Result<Self> {
        if !(p.mean.is_finite() && p.scale.is_finite()) {
            return Err(Error::ModelDefinition(
                "frozen_factor parameters must be finite".into(),
            ));
        }
        Ok(Frozen(p.clone()))
    }
}

impl Dynamics for Frozen {
    fn factor_dim(&self) -> usize {
        1
    }
    fn asset_dim(&self) -> usize {
        1
    }
    fn factor_step(&self, x: &[f64], _: &[f64], out: &mut [f64]) {
        out[0] = x[0];
    }
    fn log_return(&self, _: &[f64], _: &[f64], w: &[f64]) -> f64 {
        self.0.mean + self.0.scale * w[1]
    }
    fn weight(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn a1(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn a2(&self, w: &[f64]) -> f64 {
        self.0.mean.abs() + (self.0.scale * w[1]).abs()
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
    fn weight_vanishes(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(b: Builtin) -> MarketModel {
        b.build(NoiseApprox::GaussHermite { order: 8 }, 4).unwrap()
    }

    #[test]
    fn clipped_step() {
        let p = Example2Params {
            delta: vec![vec![1.0, 1.0]],
            clip: 2.0,
            ..Default::default()
        };
        let m = model(Builtin::Example2Clipped(p));
        assert_eq!(m.factor_step(&[0.0], &[0.0, 0.0]).unwrap(), vec![0.0]);
        assert_eq!(m.factor_step(&[1.0], &[2.0, 1.0]).unwrap(), vec![0.5 + 2.0]);
        assert_eq!(
            m.factor_step(&[1.0], &[-2.0, -1.0]).unwrap(),
            vec![0.5 - 2.0]
        );
    }

    #[test]
    fn one_sided_clip_is_unbounded_below() {
        let p = Example2Params {
            two_sided: false,
            ..Default::default()
        };
        let m = model(Builtin::Example2Clipped(p));
        assert_eq!(m.factor_step(&[0.0], &[-7.0, 0.0]).unwrap(), vec![-7.0]);
        assert!(!m.a1_bounded());
    }

    #[test]
    fn example1_factor_display() {
        let p = Example1Params::default();
        let m = model(Builtin::Example1Omega0(p.clone()));
        let (x, w) = ([0.7], [0.3, -1.1]);
        let expect = p.amp[0] * 0.7f64.tanh() + p.delta[0][0] * 0.3 + p.delta[0][1] * -1.1;
        assert!((m.factor_step(&x, &w).unwrap()[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn example3_log_returns() {
        let p = Example3Params {
            sigma: vec![vec![0.0, 1.0]],
            mu: vec![0.0],
            load: vec![vec![0.0]],
            ..Default::default()
        };
        let m = model(Builtin::Example3Discrete(p));
        assert_eq!(m.log_return(&[0.4], &[0.0], &[0.3, 2.0]).unwrap(), 0.0);
        assert!((m.log_return(&[0.4], &[1.0], &[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unknown_names_and_bad_shapes() {
        assert!(Builtin::by_name("example9").is_err());
        let p = Example1Params {
            sigma: vec![vec![0.1]],
            ..Default::default()
        };
        assert!(Builtin::Example1Omega0(p).dynamics().is_err());
        let p = Example2Params {
            b1: 1.0,
            ..Default::default()
        };
        assert!(Builtin::Example2Clipped(p).dynamics().is_err());
    }

    #[test]
    fn builtins_are_deterministic() {
        for name in Builtin::NAMES {
            let a = model(Builtin::by_name(name).unwrap());
            let b = model(Builtin::by_name(name).unwrap());
            assert_eq!(a.law(), b.law());
            assert_eq!(a.actions(), b.actions());
        }
    }
}
