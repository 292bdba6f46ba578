use riskgrowth::model::{
    minorization_check, validate_growth, GrowthReport, MinorizationCertificate,
};
use riskgrowth::montecarlo::{verify, VerificationReport};
use riskgrowth::solver::certificate::{
    contraction_certificate, empirical_contraction, tilted_drift_check, ContractionCertificate,
    ContractionSample, DriftReport,
};
use riskgrowth::solver::{gamma_sweep, solve, BellmanProblem, BellmanSolution};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{cols, num, Artifacts};
use crate::Failure;

fn io(e: std::io::Error) -> Failure {
    Failure::Runtime(format!("writing outputs: {e}"))
}

fn runtime(e: riskgrowth::Error) -> Failure {
    Failure::Runtime(e.to_string())
}

fn solve_or_fail(cfg: &RunConfig, problem: &BellmanProblem) -> Result<BellmanSolution, Failure> {
    solve(problem, cfg.solver.gamma, &cfg.solve_options()).map_err(runtime)
}

#[derive(Serialize)]
struct SolutionDoc<'a> {
    model: &'a str,
    gamma: f64,
    lambda: f64,
    lambda_deviation: f64,
    converged: bool,
    iterations: usize,
    residual: f64,
    tail_ratio: Option<f64>,
    anchor: usize,
    clamped_mass: f64,
    nodes: Vec<Vec<f64>>,
    u: &'a [f64],
    v: &'a [f64],
    policy: &'a [usize],
    actions: Vec<&'a [f64]>,
    trace: &'a [f64],
}

fn write_solution(
    out: &Artifacts,
    problem: &BellmanProblem,
    sol: &BellmanSolution,
) -> Result<(), Failure> {
    let grid = problem.grid();
    let model = problem.model();
    let nodes: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.node(i)).collect();
    let actions: Vec<&[f64]> = sol.policy.iter().map(|&a| model.actions().get(a)).collect();
    let doc = SolutionDoc {
        model: model.name(),
        gamma: sol.gamma,
        lambda: sol.lambda,
        lambda_deviation: sol.lambda_deviation,
        converged: sol.converged,
        iterations: sol.iterations,
        residual: sol.residual,
        tail_ratio: sol.tail_ratio(),
        anchor: sol.anchor,
        clamped_mass: sol.clamp.clamped_mass,
        nodes: nodes.clone(),
        u: sol.u.values(),
        v: sol.v.values(),
        policy: &sol.policy,
        actions: actions.clone(),
        trace: &sol.trace,
    };
    out.json("solution", &doc).map_err(io)?;

    let mut header = vec!["node".to_string()];
    header.extend((0..grid.dims()).map(|d| format!("x{d}")));
    header.extend(cols(&["u", "v", "action_index"]));
    header.extend((0..model.asset_dim()).map(|j| format!("h{j}")));
    let rows: Vec<Vec<String>> = (0..grid.len())
        .map(|i| {
            let mut row = vec![i.to_string()];
            row.extend(nodes[i].iter().map(|&x| num(x)));
            row.push(num(sol.u.values()[i]));
            row.push(num(sol.v.values()[i]));
            row.push(sol.policy[i].to_string());
            row.extend(actions[i].iter().map(|&h| num(h)));
            row
        })
        .collect();
    out.csv("solution", &header, &rows).map_err(io)?;
    let trace: Vec<Vec<String>> = sol
        .trace
        .iter()
        .enumerate()
        .map(|(k, &d)| vec![(k + 1).to_string(), num(d)])
        .collect();
    out.csv("trace", &cols(&["iteration", "span_diff"]), &trace)
        .map_err(io)?;
    let summary = vec![
        vec!["lambda".into(), num(sol.lambda)],
        vec!["gamma".into(), num(sol.gamma)],
        vec!["converged".into(), sol.converged.to_string()],
        vec!["iterations".into(), sol.iterations.to_string()],
        vec!["residual".into(), num(sol.residual)],
    ];
    out.csv("summary", &cols(&["key", "value"]), &summary)
        .map_err(io)
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<(), Failure> {
    let problem = cfg.problem().map_err(Failure::Config)?;
    let out = Artifacts::create(cfg).map_err(io)?;
    let sol = solve_or_fail(cfg, &problem)?;
    write_solution(&out, &problem, &sol)?;
    println!(
        "lambda = {} (gamma = {}, {} iterations, converged = {})",
        num(sol.lambda),
        num(sol.gamma),
        sol.iterations,
        sol.converged
    );
    if sol.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!(
            "no convergence after {} iterations",
            sol.iterations
        )))
    }
}

fn write_verification(out: &Artifacts, report: &VerificationReport) -> Result<(), Failure> {
    out.json("verification", report).map_err(io)?;
    let horizons: Vec<Vec<String>> = report
        .solved
        .iter()
        .map(|r| {
            vec![
                r.horizon.to_string(),
                num(r.estimate),
                num(r.ci_lower),
                num(r.ci_upper),
                num(r.taylor),
                num(r.tail_min),
                r.excluded.to_string(),
                num(report.lambda),
            ]
        })
        .collect();
    out.csv(
        "verification_horizons",
        &cols(&[
            "horizon", "estimate", "ci_lower", "ci_upper", "taylor", "tail_min", "excluded",
            "lambda",
        ]),
        &horizons,
    )
    .map_err(io)?;
    let baselines: Vec<Vec<String>> = report
        .baselines
        .iter()
        .map(|b| {
            let action = b
                .action
                .iter()
                .map(|&h| num(h))
                .collect::<Vec<_>>()
                .join(" ");
            vec![
                b.action_index.to_string(),
                action,
                num(b.estimate),
                num(b.ci_lower),
                num(b.ci_upper),
            ]
        })
        .collect();
    out.csv(
        "verification_baselines",
        &cols(&["action_index", "action", "estimate", "ci_lower", "ci_upper"]),
        &baselines,
    )
    .map_err(io)?;
    let checks: Vec<Vec<String>> = report
        .checks
        .iter()
        .map(|c| {
            vec![
                c.name.clone(),
                c.passed.to_string(),
                c.gating.to_string(),
                c.detail.clone(),
            ]
        })
        .collect();
    out.csv(
        "verification_checks",
        &cols(&["check", "passed", "gating", "detail"]),
        &checks,
    )
    .map_err(io)
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<(), Failure> {
    let problem = cfg.problem().map_err(Failure::Config)?;
    let out = Artifacts::create(cfg).map_err(io)?;
    let sol = solve_or_fail(cfg, &problem)?;
    write_solution(&out, &problem, &sol)?;
    if !sol.converged {
        return Err(Failure::NotConverged(format!(
            "no convergence after {} iterations",
            sol.iterations
        )));
    }
    let report = verify(&problem, &sol, &cfg.verify_options()).map_err(runtime)?;
    write_verification(&out, &report)?;
    for c in &report.checks {
        let tag = if c.passed {
            "pass"
        } else if c.gating {
            "FAIL"
        } else {
            "info"
        };
        println!("{tag:4} {}: {}", c.name, c.detail);
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Verification("a gating check failed".into()))
    }
}

#[derive(Serialize)]
struct DiagnoseDoc {
    model: String,
    global_doeblin: bool,
    certified: bool,
    certificate: Option<ContractionCertificate>,
    certificate_error: Option<String>,
    contraction: Vec<(f64, ContractionSample)>,
    drift: Option<DriftReport>,
    minorization: Option<MinorizationCertificate>,
    minorization_error: Option<String>,
    growth: GrowthReport,
    notes: Vec<String>,
}

pub fn cmd_diagnose(cfg: &RunConfig) -> Result<(), Failure> {
    let problem = cfg.problem().map_err(Failure::Config)?;
    let out = Artifacts::create(cfg).map_err(io)?;
    let model = problem.model();
    let d = &cfg.diagnose;
    let growth = validate_growth(model, problem.grid(), d.growth_samples).map_err(runtime)?;
    let global = model.weight_vanishes();
    let mut notes = Vec::new();
    if global {
        notes.push(
            "weight vanishes: C_R is the whole state space (global Doeblin condition)".into(),
        );
    }
    let (cert, cert_err) =
        match contraction_certificate(&problem, d.gamma_bar, &cfg.certificate_options()) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        };
    let mut contraction = Vec::new();
    let mut drift = None;
    if let Some(c) = cert.as_ref().filter(|c| c.certified()) {
        let (beta, gamma0) = (c.beta.unwrap(), c.gamma0.unwrap());
        for frac in [0.9, 0.5, 0.1] {
            let gamma = gamma0 * frac;
            let sample =
                empirical_contraction(&problem, gamma, beta, c.m, d.contraction_pairs, cfg.seed)
                    .map_err(runtime)?;
            contraction.push((gamma, sample));
        }
        if !global {
            drift = Some(
                tilted_drift_check(
                    &problem,
                    d.gamma_bar,
                    c.phi,
                    c.alpha,
                    c.m,
                    d.drift_samples,
                    cfg.seed,
                )
                .map_err(runtime)?,
            );
        }
    }
    let r = cert
        .as_ref()
        .map(|c| c.r)
        .filter(|r| *r > 0.0 && r.is_finite())
        .unwrap_or(f64::INFINITY);
    let (minorization, minorization_error) =
        match minorization_check(model, problem.grid(), r, d.cells_per_dim) {
            Ok(m) => (Some(m), None),
            Err(e) => (None, Some(e.to_string())),
        };
    let certified = cert.as_ref().is_some_and(|c| c.certified());
    if growth.violations() > 0 {
        notes.push(format!("{} growth-bound violations", growth.violations()));
    }
    let doc = DiagnoseDoc {
        model: model.name().to_string(),
        global_doeblin: global,
        certified,
        certificate: cert.clone(),
        certificate_error: cert_err.clone(),
        contraction: contraction.clone(),
        drift: drift.clone(),
        minorization: minorization.clone(),
        minorization_error,
        growth: growth.clone(),
        notes,
    };
    out.json("diagnose", &doc).map_err(io)?;

    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let mut rows = vec![
        vec!["global_doeblin".into(), global.to_string()],
        vec!["certified".into(), certified.to_string()],
        vec!["growth_violations".into(), growth.violations().to_string()],
    ];
    if let Some(c) = &cert {
        rows.extend([
            vec!["verdict".into(), format!("{:?}", c.verdict)],
            vec!["gamma_bar".into(), num(c.gamma_bar)],
            vec!["m".into(), num(c.m)],
            vec!["phi".into(), num(c.phi)],
            vec!["alpha".into(), num(c.alpha)],
            vec!["r".into(), num(c.r)],
            vec!["sup_var".into(), num(c.sup_var)],
            vec!["beta".into(), opt(c.beta)],
            vec!["l".into(), opt(c.l)],
            vec!["gamma0".into(), opt(c.gamma0)],
        ]);
    }
    if let Some(e) = &cert_err {
        rows.push(vec!["certificate_error".into(), e.clone()]);
    }
    for (gamma, s) in &contraction {
        rows.push(vec![
            format!("contraction_ratio@{}", num(*gamma)),
            num(s.max_ratio),
        ]);
    }
    if let Some(dr) = &drift {
        rows.push(vec!["drift_violations".into(), dr.violations.to_string()]);
    }
    if let Some(m) = &minorization {
        rows.push(vec!["minorization_c".into(), num(m.c)]);
    }
    out.csv("diagnose", &cols(&["key", "value"]), &rows)
        .map_err(io)?;

    match &cert {
        Some(c) if c.certified() => println!(
            "verdict {:?}: L = {}, beta = {}, gamma0 = {}",
            c.verdict,
            opt(c.l),
            opt(c.beta),
            opt(c.gamma0)
        ),
        Some(c) => println!(
            "verdict {:?}: sampled sup variation {}",
            c.verdict,
            num(c.sup_var)
        ),
        None => println!("no certificate: {}", cert_err.as_deref().unwrap_or("")),
    }
    if certified && growth.violations() == 0 {
        Ok(())
    } else {
        Err(Failure::Certificate(
            "the contraction certificate could not be established".into(),
        ))
    }
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<(), Failure> {
    let problem = cfg.problem().map_err(Failure::Config)?;
    let out = Artifacts::create(cfg).map_err(io)?;
    let report = gamma_sweep(&problem, &cfg.sweep.gammas, &cfg.solve_options()).map_err(runtime)?;
    out.json("sweep", &report).map_err(io)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.gamma),
                num(r.lambda),
                num(r.u_span),
                r.converged.to_string(),
                r.iterations.to_string(),
            ]
        })
        .collect();
    out.csv(
        "sweep",
        &cols(&["gamma", "lambda", "u_span", "converged", "iterations"]),
        &rows,
    )
    .map_err(io)?;
    let checks = vec![
        vec![
            "lambda_nondecreasing".into(),
            report.monotone.to_string(),
            String::new(),
        ],
        vec![
            "max_slope".into(),
            report.max_slope.is_finite().to_string(),
            num(report.max_slope),
        ],
    ];
    out.csv(
        "sweep_checks",
        &cols(&["check", "passed", "value"]),
        &checks,
    )
    .map_err(io)?;
    for r in &report.rows {
        println!("gamma {:>8}  lambda {}", num(r.gamma), num(r.lambda));
    }
    if report.rows.iter().all(|r| r.converged) {
        Ok(())
    } else {
        Err(Failure::NotConverged(
            "some risk parameters did not converge".into(),
        ))
    }
}
