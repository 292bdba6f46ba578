use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use riskgrowth::model::{Builtin, Example2Params, NoiseApprox};
use riskgrowth::montecarlo::{simulate, Policy, SimulationOptions};
use riskgrowth::solver::BellmanProblem;
use riskgrowth::{Execution, GridFunction, GridSpec};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn problem(nodes: usize, exec: Execution) -> BellmanProblem {
    let model = Builtin::Example2Clipped(Example2Params::default())
        .build(NoiseApprox::GaussHermite { order: 16 }, 10)
        .unwrap();
    BellmanProblem::new(model, GridSpec::uniform_1d(-3.0, 3.0, nodes).unwrap(), exec).unwrap()
}

fn bellman_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_t");
    for nodes in [201, 801] {
        for (name, exec) in MODES {
            let p = problem(nodes, exec);
            let f = GridFunction::from_fn(p.grid(), |x| (0.7 * x[0]).sin()).unwrap();
            group.bench_with_input(BenchmarkId::new(name, nodes), &f, |b, f| {
                b.iter(|| p.apply_t(black_box(f), -0.5).unwrap())
            });
        }
    }
    group.finish();
}

fn path_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    let model = Builtin::Example2Clipped(Example2Params::default())
        .build(NoiseApprox::GaussHermite { order: 8 }, 10)
        .unwrap();
    let policy = Policy::Fixed(model.actions().get(5).to_vec());
    let opts = SimulationOptions {
        horizon: 500,
        paths: 2000,
        ..Default::default()
    };
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| simulate(&model, &policy, black_box(&opts), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bellman_step, path_batch);
criterion_main!(benches);
