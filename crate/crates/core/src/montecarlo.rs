//! Path simulation of `(X_t, ln V_t)` and finite-horizon estimates of the
//! risk-sensitive growth rate.
//!
//! Noise is drawn from the model's true law ([`NoiseSource`]), never from
//! the quadrature the solver uses, so agreement with `λ_γ` is a genuine
//! cross-check. Each path has its own random stream, so batches are
//! bit-identical regardless of thread count.
//!
//! [`NoiseSource`]: crate::model::NoiseSource

use serde::{Deserialize, Serialize};

use crate::entropic::log_sum_exp;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::model::MarketModel;
use crate::parallel::{map_indexed, Execution};
use crate::rng::PathRng;
use crate::solver::{rsc_upper_bound, BellmanProblem, BellmanSolution};

/// How the simulator picks `H_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// The same portfolio at every step.
    Fixed(Vec<f64>),
    /// Action index per grid node, looked up at the node nearest `X_t`.
    Feedback { grid: GridSpec, actions: Vec<usize> },
}

impl Policy {
    pub fn from_solution(solution: &BellmanSolution) -> Self {
        Policy::Feedback {
            grid: solution.u.spec().clone(),
            actions: solution.policy.clone(),
        }
    }

    fn check(&self, model: &MarketModel) -> Result<()> {
        match self {
            Policy::Fixed(h) if h.len() != model.asset_dim() => Err(Error::Shape(format!(
                "fixed action of length {} for {} assets",
                h.len(),
                model.asset_dim()
            ))),
            Policy::Feedback { grid, actions } => {
                if grid.dims() != model.factor_dim() || actions.len() != grid.len() {
                    return Err(Error::Shape(
                        "feedback policy does not match the grid or model".into(),
                    ));
                }
                if actions.iter().any(|&a| a >= model.actions().len()) {
                    return Err(Error::InvalidInput(
                        "feedback policy refers to a missing action".into(),
                    ));
                }
                Ok(())
            }
            Policy::Fixed(_) => Ok(()),
        }
    }

    fn action<'a>(&'a self, model: &'a MarketModel, x: &[f64]) -> (&'a [f64], bool) {
        match self {
            Policy::Fixed(h) => (h, false),
            Policy::Feedback { grid, actions } => (
                model.actions().get(actions[grid.nearest_node(x)]),
                !grid.contains(x),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationOptions {
    pub horizon: usize,
    pub paths: usize,
    pub seed: u64,
    /// Sorted horizons at which `Σ F` is recorded; empty means ten evenly
    /// spaced ones ending at `horizon`.
    pub checkpoints: Vec<usize>,
    /// Initial factor state; empty means the origin.
    pub initial_state: Vec<f64>,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            horizon: 1000,
            paths: 10_000,
            seed: 0,
            checkpoints: Vec::new(),
            initial_state: Vec::new(),
        }
    }
}

/// Ten evenly spaced checkpoints ending at `horizon` (fewer for short horizons).
pub fn default_checkpoints(horizon: usize) -> Vec<usize> {
    let mut c: Vec<usize> = (1..=10)
        .map(|i| (horizon * i).div_ceil(10))
        .filter(|&t| t > 0)
        .collect();
    c.dedup();
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBatch {
    pub seed: u64,
    pub horizon: usize,
    /// Paths requested.
    pub paths: usize,
    pub checkpoints: Vec<usize>,
    /// `sums[c][p]`: cumulative log-return of kept path `p` at checkpoint `c`.
    pub sums: Vec<Vec<f64>>,
    /// Paths dropped for non-finite model output.
    pub excluded: usize,
    /// Steps at which a feedback lookup was made outside the policy grid.
    pub clamped_steps: u64,
}

impl TrajectoryBatch {
    pub fn kept(&self) -> usize {
        self.sums.first().map_or(0, Vec::len)
    }
}

enum PathOutcome {
    Kept(Vec<f64>, u64),
    Dropped,
}

fn simulate_path(
    model: &MarketModel,
    policy: &Policy,
    opts: &SimulationOptions,
    x0: &[f64],
    p: usize,
) -> PathOutcome {
    let dyns = model.dynamics();
    let mut rng = PathRng::new(opts.seed, p as u64);
    let mut x = x0.to_vec();
    let mut next = vec![0.0; x.len()];
    let mut w = vec![0.0; model.noise_dim()];
    let mut sum = 0.0;
    let mut record = Vec::with_capacity(opts.checkpoints.len());
    let mut clamped = 0u64;
    let mut c = 0;
    for t in 1..=opts.horizon {
        model.noise().sample(&mut rng, &mut w);
        let (h, outside) = policy.action(model, &x);
        clamped += u64::from(outside);
        let r = dyns.log_return(&x, h, &w);
        dyns.factor_step(&x, &w, &mut next);
        if !r.is_finite() || next.iter().any(|v| !v.is_finite()) {
            return PathOutcome::Dropped;
        }
        sum += r;
        std::mem::swap(&mut x, &mut next);
        if c < opts.checkpoints.len() && opts.checkpoints[c] == t {
            record.push(sum);
            c += 1;
        }
    }
    PathOutcome::Kept(record, clamped)
}

/// Simulates `opts.paths` independent paths of length `opts.horizon`.
pub fn simulate(
    model: &MarketModel,
    policy: &Policy,
    opts: &SimulationOptions,
    exec: Execution,
) -> Result<TrajectoryBatch> {
    policy.check(model)?;
    if opts.horizon == 0 || opts.paths == 0 {
        return Err(Error::InvalidInput(
            "horizon and path count must be positive".into(),
        ));
    }
    let mut resolved = opts.clone();
    if resolved.checkpoints.is_empty() {
        resolved.checkpoints = default_checkpoints(opts.horizon);
    }
    let cps = &resolved.checkpoints;
    if cps.windows(2).any(|w| w[0] >= w[1]) || cps[0] == 0 || cps[cps.len() - 1] > opts.horizon {
        return Err(Error::InvalidInput(
            "checkpoints must be increasing and lie in 1..=horizon".into(),
        ));
    }
    let x0 = if opts.initial_state.is_empty() {
        vec![0.0; model.factor_dim()]
    } else {
        opts.initial_state.clone()
    };
    if x0.len() != model.factor_dim() {
        return Err(Error::Shape(format!(
            "initial state of length {} for {} factors",
            x0.len(),
            model.factor_dim()
        )));
    }
    let outcomes = map_indexed(
        exec,
        opts.paths,
        || (),
        |_, p| simulate_path(model, policy, &resolved, &x0, p),
    );
    let mut sums = vec![Vec::with_capacity(opts.paths); cps.len()];
    let (mut excluded, mut clamped_steps) = (0, 0);
    for o in outcomes {
        match o {
            PathOutcome::Kept(rec, cl) => {
                for (col, v) in sums.iter_mut().zip(rec) {
                    col.push(v);
                }
                clamped_steps += cl;
            }
            PathOutcome::Dropped => excluded += 1,
        }
    }
    Ok(TrajectoryBatch {
        seed: opts.seed,
        horizon: opts.horizon,
        paths: opts.paths,
        checkpoints: resolved.checkpoints,
        sums,
        excluded,
        clamped_steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateOptions {
    pub resamples: usize,
    /// Two-sided confidence level of the percentile interval.
    pub level: f64,
    pub seed: u64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            resamples: 400,
            level: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEstimate {
    pub t: usize,
    pub estimate: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    /// Sample mean of `Σ F / t`.
    pub mean: f64,
    /// `mean + (γ/2)·Var(Σ F)/t`.
    pub taylor: f64,
}

impl CheckpointEstimate {
    pub fn ci_width(&self) -> f64 {
        self.ci_upper - self.ci_lower
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RscEstimate {
    pub gamma: f64,
    pub rows: Vec<CheckpointEstimate>,
    /// Smallest estimate over the second half of the checkpoints.
    pub tail_min: f64,
    pub paths: usize,
    pub excluded: usize,
}

impl RscEstimate {
    pub fn last(&self) -> &CheckpointEstimate {
        self.rows.last().expect("estimates are never empty")
    }
}

/// `(1/(tγ))·ln((1/N) Σ e^{γ s_i})`, or the mean when `γ = 0`.
fn entropic_rate(values: impl Iterator<Item = f64> + Clone, n: usize, t: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        return values.sum::<f64>() / (n as f64 * t);
    }
    (log_sum_exp(values.map(|s| gamma * s)) - (n as f64).ln()) / (gamma * t)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Entropic growth-rate estimate at every checkpoint with a percentile
/// bootstrap interval (widened if needed to contain the point estimate).
pub fn estimate_rsc(
    batch: &TrajectoryBatch,
    gamma: f64,
    opts: &EstimateOptions,
    exec: Execution,
) -> Result<RscEstimate> {
    let n = batch.kept();
    if n == 0 {
        return Err(Error::Estimation("every path was excluded".into()));
    }
    if !gamma.is_finite() || opts.resamples == 0 || !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::InvalidInput(
            "need finite γ, resamples > 0 and level in (0, 1)".into(),
        ));
    }
    let mut rows = Vec::with_capacity(batch.checkpoints.len());
    for (c, &t) in batch.checkpoints.iter().enumerate() {
        let s = &batch.sums[c];
        let tf = t as f64;
        let estimate = entropic_rate(s.iter().copied(), n, tf, gamma);
        let mean_s = s.iter().sum::<f64>() / n as f64;
        let var_s = if n > 1 {
            s.iter().map(|v| (v - mean_s).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let mut boot = map_indexed(
            exec,
            opts.resamples,
            || (),
            |_, b| {
                let mut rng = PathRng::new(
                    opts.seed ^ 0x9e37_79b9_7f4a_7c15,
                    ((c as u64) << 32) | b as u64,
                );
                let picks: Vec<usize> = (0..n).map(|_| rng.index(n)).collect();
                entropic_rate(picks.iter().map(|&i| s[i]), n, tf, gamma)
            },
        );
        boot.sort_by(f64::total_cmp);
        let alpha = 0.5 * (1.0 - opts.level);
        let lower = quantile(&boot, alpha).min(estimate);
        let upper = quantile(&boot, 1.0 - alpha).max(estimate);
        if !estimate.is_finite() {
            return Err(Error::Estimation(format!("non-finite estimate at t = {t}")));
        }
        rows.push(CheckpointEstimate {
            t,
            estimate,
            ci_lower: lower,
            ci_upper: upper,
            mean: mean_s / tf,
            taylor: mean_s / tf + 0.5 * gamma * var_s / tf,
        });
    }
    let tail = &rows[rows.len() / 2..];
    let tail_min = tail
        .iter()
        .map(|r| r.estimate)
        .fold(f64::INFINITY, f64::min);
    Ok(RscEstimate {
        gamma,
        rows,
        tail_min,
        paths: batch.paths,
        excluded: batch.excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    /// Horizon ladder for the solved policy; the last entry is used for the
    /// baselines and the gating checks.
    pub horizons: Vec<usize>,
    pub paths: usize,
    pub seed: u64,
    pub initial_state: Vec<f64>,
    pub resamples: usize,
    /// Action indices of the fixed baselines; empty picks the first, middle
    /// and last actions.
    pub baselines: Vec<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            horizons: vec![500, 1000, 2000],
            paths: 10_000,
            seed: 0,
            initial_state: Vec::new(),
            resamples: 400,
            baselines: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonRow {
    pub horizon: usize,
    pub estimate: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub taylor: f64,
    pub tail_min: f64,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub action_index: usize,
    pub action: Vec<f64>,
    pub estimate: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub passed: bool,
    /// Non-gating rows are informative only.
    pub gating: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub gamma: f64,
    pub lambda: f64,
    pub upper_bound: f64,
    pub a1_bounded: bool,
    pub solved: Vec<HorizonRow>,
    pub baselines: Vec<BaselineRow>,
    pub checks: Vec<CheckRow>,
    pub passed: bool,
}

fn horizon_row(est: &RscEstimate, horizon: usize) -> HorizonRow {
    let last = est.last();
    HorizonRow {
        horizon,
        estimate: last.estimate,
        ci_lower: last.ci_lower,
        ci_upper: last.ci_upper,
        taylor: last.taylor,
        tail_min: est.tail_min,
        excluded: est.excluded,
    }
}

fn default_baselines(n: usize) -> Vec<usize> {
    let mut b = vec![0, n / 2, n - 1];
    b.dedup();
    b
}

/// Compares `λ_γ` with Monte Carlo estimates under the solved policy and
/// under fixed-action baselines.
pub fn verify(
    problem: &BellmanProblem,
    solution: &BellmanSolution,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    if !solution.converged {
        return Err(Error::InvalidInput(
            "verification needs a converged solution".into(),
        ));
    }
    let mut horizons = opts.horizons.clone();
    horizons.sort_unstable();
    horizons.dedup();
    if horizons.is_empty() || horizons[0] == 0 {
        return Err(Error::InvalidInput(
            "horizon ladder must be nonempty and positive".into(),
        ));
    }
    let model = problem.model();
    let exec = problem.execution();
    let gamma = solution.gamma;
    let lambda = solution.lambda;
    let est_opts = EstimateOptions {
        resamples: opts.resamples,
        level: 0.95,
        seed: opts.seed,
    };
    let run = |policy: &Policy, horizon: usize| -> Result<RscEstimate> {
        let sim = SimulationOptions {
            horizon,
            paths: opts.paths,
            seed: opts.seed,
            checkpoints: default_checkpoints(horizon),
            initial_state: opts.initial_state.clone(),
        };
        estimate_rsc(
            &simulate(model, policy, &sim, exec)?,
            gamma,
            &est_opts,
            exec,
        )
    };

    let solved_policy = Policy::from_solution(solution);
    let solved = horizons
        .iter()
        .map(|&h| Ok(horizon_row(&run(&solved_policy, h)?, h)))
        .collect::<Result<Vec<_>>>()?;
    let final_t = *horizons.last().unwrap();
    let picks = if opts.baselines.is_empty() {
        default_baselines(model.actions().len())
    } else {
        opts.baselines.clone()
    };
    let mut baselines = Vec::with_capacity(picks.len());
    for i in picks {
        if i >= model.actions().len() {
            return Err(Error::InvalidInput(format!(
                "baseline action {i} does not exist"
            )));
        }
        let action = model.actions().get(i).to_vec();
        let last = run(&Policy::Fixed(action.clone()), final_t)?.last().clone();
        baselines.push(BaselineRow {
            action_index: i,
            action,
            estimate: last.estimate,
            ci_lower: last.ci_lower,
            ci_upper: last.ci_upper,
        });
    }

    let upper_bound = rsc_upper_bound(model, gamma);
    let a1_bounded = model.a1_bounded();
    let mut checks = Vec::new();
    checks.push(CheckRow {
        name: "upper_bound_dominates".into(),
        passed: upper_bound >= lambda - 1e-9,
        gating: true,
        detail: format!("bound {upper_bound:.9} vs lambda {lambda:.9}"),
    });
    for b in &baselines {
        let slack = 2.0 * (b.ci_upper - b.ci_lower);
        checks.push(CheckRow {
            name: format!("baseline_{}_below_lambda", b.action_index),
            passed: b.estimate <= lambda + slack,
            gating: true,
            detail: format!("estimate {:.9} vs lambda + {slack:.3e}", b.estimate),
        });
    }
    let last = solved.last().unwrap();
    checks.push(CheckRow {
        name: "solved_policy_matches_lambda".into(),
        passed: last.ci_lower <= lambda && lambda <= last.ci_upper,
        gating: a1_bounded,
        detail: format!(
            "lambda {lambda:.9} vs CI [{:.9}, {:.9}] at T = {}",
            last.ci_lower, last.ci_upper, last.horizon
        ),
    });
    let passed = checks.iter().all(|c| c.passed || !c.gating);
    Ok(VerificationReport {
        gamma,
        lambda,
        upper_bound,
        a1_bounded,
        solved,
        baselines,
        checks,
        passed,
    })
}
