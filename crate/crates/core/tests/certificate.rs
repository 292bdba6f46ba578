use riskgrowth::model::{Builtin, ControlFreeGaussianParams, Example2Params, NoiseApprox};
use riskgrowth::rng::PathRng;
use riskgrowth::solver::certificate::{
    beta_and_l, contraction_certificate, empirical_contraction, one_step_check,
    random_span_function, tilted_drift_check, CertificateOptions, Verdict,
};
use riskgrowth::solver::{solve, BellmanProblem, SolveOptions};
use riskgrowth::{Execution, GridFunction, GridSpec};

fn example2(noise: NoiseApprox, nodes: usize) -> BellmanProblem {
    let model = Builtin::Example2Clipped(Example2Params::default())
        .build(noise, 10)
        .unwrap();
    BellmanProblem::new(
        model,
        GridSpec::uniform_1d(-3.0, 3.0, nodes).unwrap(),
        Execution::Parallel,
    )
    .unwrap()
}

#[test]
fn one_step_difference_inequality() {
    let p = example2(NoiseApprox::GaussHermite { order: 12 }, 61);
    let grid = p.grid().clone();
    let w = p.omega().values().to_vec();
    let mut rng = PathRng::new(41, 0);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..1000 {
        let (sf, sg) = (0.05 + 3.0 * rng.uniform(), 0.05 + 3.0 * rng.uniform());
        let f = random_span_function(&mut rng, &w, sf, i);
        let g = random_span_function(&mut rng, &w, sg, i + 1);
        let f = GridFunction::new(grid.clone(), f).unwrap();
        let g = GridFunction::new(grid.clone(), g).unwrap();
        let gamma = -(0.05 + 2.0 * rng.uniform());
        let beta = 0.01 + 2.0 * rng.uniform();
        let x = [-3.0 + 6.0 * rng.uniform()];
        let y = [-3.0 + 6.0 * rng.uniform()];
        let out = one_step_check(&p, gamma, beta, &f, &g, &x, &y).unwrap();
        assert!(out.holds(1e-10), "tuple {i}: {out:?}");
        worst = worst.max(out.lhs - out.rhs);
    }
    assert!(worst <= 1e-10);
}

#[test]
fn inputs_are_checked() {
    let p = example2(NoiseApprox::GaussHermite { order: 8 }, 21);
    let z = GridFunction::zeros(p.grid());
    assert!(one_step_check(&p, 0.5, 1.0, &z, &z, &[0.0], &[1.0]).is_err());
    assert!(one_step_check(&p, -0.5, 0.0, &z, &z, &[0.0], &[1.0]).is_err());
    assert!(contraction_certificate(&p, 0.0, &CertificateOptions::default()).is_err());
    let bad_phi = CertificateOptions {
        phi: Some(0.2),
        ..Default::default()
    };
    assert!(contraction_certificate(&p, -1.0, &bad_phi).is_err());
}

#[test]
fn beta_rule_reduces_to_the_crossing() {
    for &(s, phi, alpha, r) in &[
        (1.9, 0.75, 90.0, 1500.0),
        (0.5, 0.6, 2.0, 20.0),
        (1.99, 0.99, 1e4, 4.1e6),
    ] {
        let (beta, l) = beta_and_l(s, phi, alpha, r);
        assert!(beta > 0.0 && beta < 1.0);
        assert!(l < 1.0 && l >= phi);
        let grid_best = (1..10_000)
            .map(|i| {
                let b = beta * i as f64 / 5_000.0;
                let k = phi * r + 2.0 * alpha;
                phi.max((s + b * k) / 2.0)
                    .max((2.0 + b * k) / (2.0 + b * r))
            })
            .fold(f64::INFINITY, f64::min);
        assert!(l <= grid_best + 1e-12);
    }
}

#[test]
fn weighted_certificate_on_example2() {
    let p = example2(
        NoiseApprox::Quantile {
            orders: vec![160, 8],
        },
        200,
    );
    let gamma_bar = -1.0;
    let cert = contraction_certificate(&p, gamma_bar, &CertificateOptions::default()).unwrap();
    assert_eq!(cert.verdict, Verdict::Certified, "{cert:?}");
    let (beta, l, gamma0) = (cert.beta.unwrap(), cert.l.unwrap(), cert.gamma0.unwrap());
    assert!(cert.sup_var < 2.0 && beta > 0.0 && l < 1.0);
    assert!(gamma0 < 0.0 && gamma0 >= gamma_bar);
    assert!(cert.r >= 2.0 * cert.alpha / (1.0 - cert.phi));

    let drift = tilted_drift_check(&p, gamma_bar, cert.phi, cert.alpha, cert.m, 500, 3).unwrap();
    assert_eq!(drift.violations, 0, "{drift:?}");

    for gamma in [gamma0 * 0.9, gamma0 * 0.5, gamma0 * 0.1] {
        let sample = empirical_contraction(&p, gamma, beta, cert.m, 24, 9).unwrap();
        assert!(sample.pairs_used > 0);
        assert!(sample.max_ratio <= l + 1e-9, "gamma {gamma}: {sample:?}");
    }
}

#[test]
fn global_doeblin_without_weight() {
    let model = Builtin::ControlFreeGaussian(ControlFreeGaussianParams::default())
        .build(NoiseApprox::GaussHermite { order: 16 }, 1)
        .unwrap();
    let p = BellmanProblem::new(
        model,
        GridSpec::uniform_1d(-3.0, 3.0, 31).unwrap(),
        Execution::Parallel,
    )
    .unwrap();
    let cert = contraction_certificate(&p, -1.0, &CertificateOptions::default()).unwrap();
    assert!(cert.global_doeblin && cert.certified());
    assert_eq!(cert.beta, Some(0.5));
    // H pairs the f-tilt at x with the g-tilt at y, so it is nonzero even
    // though every state has the same successor law
    let l = cert.l.unwrap();
    assert!(l < 1.0 && (l - cert.sup_var / 2.0).abs() < 1e-15);
    let sample = empirical_contraction(&p, -0.5, 0.5, cert.m, 16, 1).unwrap();
    assert!(sample.max_ratio <= l + 1e-9);
}

#[test]
fn frozen_factor_does_not_mix() {
    let model = Builtin::by_name("frozen_factor")
        .unwrap()
        .build(NoiseApprox::GaussHermite { order: 8 }, 1)
        .unwrap();
    let grid = GridSpec::uniform_1d(-2.0, 2.0, 21).unwrap();
    let p = BellmanProblem::new(model, grid, Execution::Parallel).unwrap();
    let cert = contraction_certificate(&p, -1.0, &CertificateOptions::default()).unwrap();
    assert_eq!(cert.verdict, Verdict::MixingTooWeak);
    assert!(cert.beta.is_none() && cert.gamma0.is_none());
    // the iteration still converges because F does not depend on x
    let sol = solve(&p, -1.0, &SolveOptions::default()).unwrap();
    assert!(sol.converged && (sol.lambda + 0.5).abs() < 1e-8);
}
