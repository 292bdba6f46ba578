use std::sync::Arc;

use riskgrowth::entropic::{entropic_weighted, DiscreteLaw};
use riskgrowth::model::{
    ActionSet, Builtin, ControlFreeGaussianParams, Dynamics, Example2Params, FiniteChain,
    MarketModel, NoiseApprox, NoiseSource,
};
use riskgrowth::norms::{norm_slice, span_slice};
use riskgrowth::rng::PathRng;
use riskgrowth::solver::{gamma_sweep, rsc_upper_bound, solve, BellmanProblem, SolveOptions};
use riskgrowth::{Execution, GridFunction, GridSpec};

fn control_free(mean: f64, scale: f64) -> BellmanProblem {
    let params = ControlFreeGaussianParams {
        mean,
        scale,
        ..Default::default()
    };
    let model = Builtin::ControlFreeGaussian(params)
        .build(NoiseApprox::GaussHermite { order: 24 }, 1)
        .unwrap();
    BellmanProblem::new(
        model,
        GridSpec::uniform_1d(-3.0, 3.0, 41).unwrap(),
        Execution::Parallel,
    )
    .unwrap()
}

fn example2() -> BellmanProblem {
    let model = Builtin::Example2Clipped(Example2Params::default())
        .build(NoiseApprox::GaussHermite { order: 12 }, 8)
        .unwrap();
    BellmanProblem::new(
        model,
        GridSpec::uniform_1d(-3.0, 3.0, 61).unwrap(),
        Execution::Parallel,
    )
    .unwrap()
}

/// Spectral radius of a nonnegative matrix by normalized power iteration.
fn spectral_radius(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut v = vec![1.0; n];
    let mut rho = 0.0;
    for _ in 0..20_000 {
        let next: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| m[i][j] * v[j]).sum())
            .collect();
        let norm = next.iter().cloned().fold(0.0, f64::max);
        let change = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a / norm - b).abs())
            .fold(0.0, f64::max);
        rho = norm / v.iter().cloned().fold(0.0, f64::max);
        v = next.iter().map(|x| x / norm).collect();
        if change < 1e-15 {
            break;
        }
    }
    rho
}

fn random_chain(rng: &mut PathRng) -> (FiniteChain, Vec<f64>) {
    let n = 2 + rng.index(5);
    let k = 2 + rng.index(3);
    // atom 0 stays put and atom 1 moves round the cycle: irreducible and aperiodic
    let next: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            (0..k)
                .map(|j| {
                    if j == 0 {
                        s
                    } else if j == 1 {
                        (s + 1) % n
                    } else {
                        rng.index(n)
                    }
                })
                .collect()
        })
        .collect();
    let reward: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..k).map(|_| rng.standard_normal()).collect())
        .collect();
    let raw: Vec<f64> = (0..k).map(|_| 0.1 + rng.uniform()).collect();
    let total: f64 = raw.iter().sum();
    (
        FiniteChain::new(next, reward).unwrap(),
        raw.iter().map(|p| p / total).collect(),
    )
}

#[test]
fn finite_chains_match_the_tilted_kernel() {
    let mut rng = PathRng::new(2024, 0);
    let opts = SolveOptions {
        tolerance: 1e-13,
        ..Default::default()
    };
    for case in 0..25 {
        let (chain, probs) = random_chain(&mut rng);
        let gamma = -(0.2 + 1.8 * rng.uniform());
        let n = chain.states();
        let mut kernel = vec![vec![0.0; n]; n];
        let model = chain.model(&probs).unwrap();
        let dyns = model.dynamics();
        for (s, row) in kernel.iter_mut().enumerate() {
            for (j, p) in probs.iter().enumerate() {
                let mut next = [0.0];
                dyns.factor_step(&[s as f64], &[j as f64], &mut next);
                row[next[0] as usize] +=
                    p * (gamma * dyns.log_return(&[s as f64], &[1.0], &[j as f64])).exp();
            }
        }
        let oracle = spectral_radius(&kernel).ln() / gamma;
        let problem =
            BellmanProblem::new(model, chain.grid().unwrap(), Execution::Sequential).unwrap();
        let sol = solve(&problem, gamma, &opts).unwrap();
        assert!(sol.converged, "case {case}");
        assert!(
            (sol.lambda - oracle).abs() <= 1e-8,
            "case {case}: {} vs {oracle}",
            sol.lambda
        );
    }
}

#[test]
fn two_state_chain() {
    // state 0 earns +1 or −1; state 1 earns 0; atoms flip or keep the state
    let chain = FiniteChain::new(
        vec![vec![0, 1], vec![1, 0]],
        vec![vec![1.0, -1.0], vec![0.0, 0.0]],
    )
    .unwrap();
    let gamma = -1.0;
    let p = [0.7, 0.3];
    let kernel = [
        [
            p[0] * (gamma * 1.0f64).exp(),
            p[1] * (gamma * -1.0f64).exp(),
        ],
        [p[1], p[0]],
    ];
    let tr = kernel[0][0] + kernel[1][1];
    let det = kernel[0][0] * kernel[1][1] - kernel[0][1] * kernel[1][0];
    let rho = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
    let problem = BellmanProblem::new(
        chain.model(&p).unwrap(),
        chain.grid().unwrap(),
        Execution::Sequential,
    )
    .unwrap();
    let sol = solve(
        &problem,
        gamma,
        &SolveOptions {
            tolerance: 1e-13,
            ..Default::default()
        },
    )
    .unwrap();
    assert!((sol.lambda - rho.ln() / gamma).abs() < 1e-10);
}

#[test]
fn operator_examples() {
    let zero_f = control_free(0.0, 0.0);
    let grid = zero_f.grid().clone();
    let z = GridFunction::zeros(&grid);
    let (t, _) = zero_f.apply_t(&z, -1.0).unwrap();
    assert!(t.values().iter().all(|v| v.abs() < 1e-14));

    let gauss = control_free(0.0, 1.0);
    let (t, _) = gauss.apply_t(&z, -1.0).unwrap();
    assert!(t.values().iter().all(|v| (v - 0.5).abs() < 1e-10));
    let r = gauss.apply_r(&z, -1.0).unwrap();
    assert!(r.values().iter().all(|v| (v + 0.5).abs() < 1e-10));

    let p = example2();
    let f = GridFunction::from_fn(&grid_of(&p), |x| (2.0 * x[0]).sin()).unwrap();
    for gamma in [-0.3, -2.0] {
        let lhs = p
            .apply_r(&f.scaled(1.0 / gamma), gamma)
            .unwrap()
            .scaled(gamma);
        let (rhs, _) = p.apply_t(&f, gamma).unwrap();
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}

fn grid_of(p: &BellmanProblem) -> GridSpec {
    p.grid().clone()
}

#[test]
fn equivariant_and_monotone() {
    let p = example2();
    let grid = grid_of(&p);
    let mut rng = PathRng::new(5, 0);
    for _ in 0..20 {
        let f: Vec<f64> = (0..grid.len()).map(|_| rng.standard_normal()).collect();
        let bump: Vec<f64> = f.iter().map(|v| v + rng.uniform()).collect();
        let f = GridFunction::new(grid.clone(), f).unwrap();
        let g = GridFunction::new(grid.clone(), bump).unwrap();
        let gamma = -(0.1 + 2.0 * rng.uniform());
        let c = 10.0 * rng.standard_normal();
        let (tf, _) = p.apply_t(&f, gamma).unwrap();
        let (tc, _) = p.apply_t(&f.shifted(c), gamma).unwrap();
        let (tg, _) = p.apply_t(&g, gamma).unwrap();
        for i in 0..grid.len() {
            assert!(
                (tc.values()[i] - tf.values()[i] - c).abs()
                    <= 1e-12 * (1.0 + c.abs() + tf.values()[i].abs())
            );
            assert!(tf.values()[i] <= tg.values()[i] + 1e-12);
        }
    }
}

#[test]
fn operator_maps_weighted_space_into_itself() {
    // 0 is a node, so the interpolated weight equals ω at every successor
    let model = Builtin::Example2Clipped(Example2Params::default())
        .build(NoiseApprox::GaussHermite { order: 12 }, 8)
        .unwrap();
    let grid = GridSpec::uniform_1d(-3.0, 3.0, 121).unwrap();
    let p = BellmanProblem::new(model.clone(), grid.clone(), Execution::Parallel).unwrap();
    let w = p.omega().values().to_vec();
    let mut rng = PathRng::new(6, 0);
    let probs = model.law().weights();
    for _ in 0..20 {
        let m = 0.1 + 3.0 * rng.uniform();
        let raw: Vec<f64> = w
            .iter()
            .map(|o| (2.0 * rng.uniform() - 1.0) * (1.0 + o))
            .collect();
        let scale = m / norm_slice(&raw, &w, 1.0);
        let f = GridFunction::new(grid.clone(), raw.iter().map(|v| v * scale).collect()).unwrap();
        let gamma = -(0.1 + 2.0 * rng.uniform());
        let r = p.apply_r(&f, gamma).unwrap();
        let y: Vec<f64> = model
            .a2_samples()
            .iter()
            .zip(model.a1_samples())
            .map(|(a2, a1)| a2 + m * a1)
            .collect();
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let level = entropic_weighted(&y, probs, gamma).max(-entropic_weighted(&neg, probs, gamma));
        let slope = model.b2() + m * model.b1();
        for (i, v) in r.values().iter().enumerate() {
            assert!(v.abs() <= slope * w[i] + level + m + 1e-9, "node {i}");
        }
    }
}

#[test]
fn zero_returns_give_zero_growth() {
    let p = control_free(0.0, 0.0);
    let sol = solve(&p, -0.7, &SolveOptions::default()).unwrap();
    assert!(sol.lambda.abs() < 1e-14);
    assert!(sol.u.values().iter().all(|v| v.abs() < 1e-14));
}

#[test]
fn control_free_gaussian_sweep() {
    let p = control_free(0.0, 1.0);
    let gammas: Vec<f64> = (1..=10).map(|i| -0.2 * i as f64).collect();
    let report = gamma_sweep(&p, &gammas, &SolveOptions::default()).unwrap();
    for row in &report.rows {
        assert!((row.lambda - row.gamma / 2.0).abs() < 1e-6, "{row:?}");
        assert!(row.converged && row.u_span < 1e-9);
    }
    assert!(report.monotone);
    assert!((report.max_slope - 0.5).abs() < 1e-6);
    assert!(gamma_sweep(&p, &[], &SolveOptions::default()).is_err());
}

#[test]
fn solution_invariants_on_example2() {
    let p = example2();
    let opts = SolveOptions::default();
    for gamma in [-1.5, -0.5, -0.05] {
        let sol = solve(&p, gamma, &opts).unwrap();
        assert!(sol.converged);
        assert!(
            sol.residual <= 10.0 * opts.tolerance,
            "residual {}",
            sol.residual
        );
        assert_eq!(sol.u.values()[sol.anchor], 0.0);
        assert!(sol.policy.iter().all(|&a| a < p.model().actions().len()));
        assert!(sol.trace.iter().all(|&t| t >= 0.0) && *sol.trace.last().unwrap() < opts.tolerance);
        assert!(rsc_upper_bound(p.model(), gamma) >= sol.lambda);
        for (u, v) in sol.u.values().iter().zip(sol.v.values()) {
            assert!((u / gamma - v).abs() <= 1e-15 * (1.0 + v.abs()));
        }
    }
    let report = gamma_sweep(&p, &[-2.0, -1.0, -0.5, -0.25, -0.1], &opts).unwrap();
    assert!(report.monotone);
    assert!(report.max_slope.is_finite());
}

#[test]
fn risk_neutral_limit_is_continuous() {
    let p = example2();
    let opts = SolveOptions::default();
    let neutral = solve(&p, 0.0, &opts).unwrap();
    let near = solve(&p, -1e-4, &opts).unwrap();
    assert!(neutral.lambda >= near.lambda - 1e-12);
    assert!((neutral.lambda - near.lambda).abs() < 1e-3);
}

#[test]
fn anchor_choice_does_not_move_lambda() {
    let p = example2();
    let a = solve(&p, -0.5, &SolveOptions::default()).unwrap();
    let b = solve(
        &p,
        -0.5,
        &SolveOptions {
            anchor: Some(3),
            ..Default::default()
        },
    )
    .unwrap();
    assert!((a.lambda - b.lambda).abs() < 1e-8);
    let diff = a.u.sub(&b.u).unwrap();
    assert!(span_slice(diff.values(), p.omega().values(), 1.0).value < 1e-8);
}

#[test]
fn pushforward_tilt_rules() {
    // G(x, w) = w, no returns: the successor law is the noise law itself
    let p = control_free(0.0, 0.0);
    let z = GridFunction::zeros(p.grid());
    let atoms = p.pushforward_tilt(&[0.5], &z, 0, -1.0).unwrap();
    let law = p.model().law();
    let mut expected: Vec<(f64, f64)> = Vec::new();
    for (pt, &w) in law.points().zip(law.weights()) {
        match expected.iter_mut().find(|e| e.0 == pt[0]) {
            Some(e) => e.1 += w,
            None => expected.push((pt[0], w)),
        }
    }
    expected.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert_eq!(atoms.len(), expected.len());
    for ((z, q), (x, w)) in atoms.iter().zip(&expected) {
        assert_eq!(z[0], *x);
        assert!((q - w).abs() < 1e-12);
    }
}

#[derive(Debug)]
struct Merge;

impl Dynamics for Merge {
    fn factor_dim(&self) -> usize {
        1
    }
    fn asset_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn factor_step(&self, _: &[f64], w: &[f64], out: &mut [f64]) {
        out[0] = if w[0] < 2.5 { 0.0 } else { 1.0 };
    }
    fn log_return(&self, _: &[f64], _: &[f64], w: &[f64]) -> f64 {
        0.1 * w[0]
    }
    fn weight(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn a1(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn a2(&self, w: &[f64]) -> f64 {
        0.1 * w[0].abs()
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
fn pushforward_tilt_merges_and_matches_the_esscher_weights() {
    let law =
        DiscreteLaw::from_atoms(&[(vec![1.0], 0.2), (vec![2.0], 0.5), (vec![3.0], 0.3)]).unwrap();
    let model = MarketModel::with_law(
        "merge",
        Arc::new(Merge),
        NoiseSource::Atoms(law.clone()),
        law.clone(),
        ActionSet::list(1, vec![vec![1.0]]).unwrap(),
    )
    .unwrap();
    let grid = GridSpec::uniform_1d(0.0, 1.0, 2).unwrap();
    let p = BellmanProblem::new(model, grid.clone(), Execution::Sequential).unwrap();
    let f = GridFunction::new(grid, vec![0.0, 0.4]).unwrap();
    let gamma = -2.0;
    let atoms = p.pushforward_tilt(&[0.0], &f, 0, gamma).unwrap();
    let score = [gamma * 0.1, gamma * 0.2, gamma * 0.3 + 0.4];
    let tilt = riskgrowth::entropic::esscher_tilt(&score, &law).unwrap();
    assert_eq!(atoms.len(), 2);
    assert!((atoms[0].1 - (tilt.weights[0] + tilt.weights[1])).abs() < 1e-15);
    assert!((atoms[1].1 - tilt.weights[2]).abs() < 1e-15);

    let single = DiscreteLaw::from_atoms(&[(vec![1.0], 0.4), (vec![2.0], 0.6)]).unwrap();
    let merged = MarketModel::with_law(
        "merge",
        Arc::new(Merge),
        NoiseSource::Atoms(single.clone()),
        single,
        ActionSet::list(1, vec![vec![1.0]]).unwrap(),
    )
    .unwrap();
    let p = BellmanProblem::new(
        merged,
        GridSpec::uniform_1d(0.0, 1.0, 2).unwrap(),
        Execution::Sequential,
    )
    .unwrap();
    let atoms = p
        .pushforward_tilt(&[0.0], &GridFunction::zeros(p.grid()), 0, gamma)
        .unwrap();
    assert_eq!(atoms, vec![(vec![0.0], 1.0)]);
}
