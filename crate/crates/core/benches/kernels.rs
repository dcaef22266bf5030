use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use immuno_turing::equilibria::{cce_solve, existence_region_scan, lin_grid, log_grid, ScanRule};
use immuno_turing::pde::{initial_condition, Diffusion, Geometry, NegativityPolicy, Solver};
use immuno_turing::stability::{default_k_grid, dispersion_relation};
use immuno_turing::{Exec, ModelParams, Scenario};

const POLICIES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn pde_step(c: &mut Criterion) {
    let p = ModelParams::scenario(Scenario::Untreated);
    let mut group = c.benchmark_group("pde_step_10");
    group.sample_size(20);
    for n in [101, 201] {
        let g = initial_condition(1, Geometry::square(n).unwrap()).unwrap();
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, n), &g, |b, g| {
                b.iter_batched(
                    || {
                        Solver::new(g.clone(), p, Diffusion::from_params(&p), 1e-3)
                            .unwrap()
                            .with_exec(exec)
                            .with_policy(NegativityPolicy::Warn)
                    },
                    |mut s| s.advance(10).unwrap(),
                    criterion::BatchSize::LargeInput,
                )
            });
        }
    }
    group.finish();
}

fn region_scan(c: &mut Criterion) {
    let p = ModelParams::scenario(Scenario::Untreated);
    let p2 = log_grid(0.01, 10.0, 50);
    let cs = lin_grid(0.0, 1.0, 50);
    let mut group = c.benchmark_group("region_scan_50x50");
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| {
            b.iter(|| existence_region_scan(&p, &p2, &cs, ScanRule::Untreated, exec).unwrap())
        });
    }
    group.finish();
}

fn dispersion(c: &mut Criterion) {
    let p = ModelParams::scenario(Scenario::Untreated);
    let e = cce_solve(&p).unwrap()[0].state;
    let k = default_k_grid();
    let mut group = c.benchmark_group("dispersion_default_grid");
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| {
            b.iter(|| dispersion_relation(&p, e, &k, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, pde_step, region_scan, dispersion);
criterion_main!(benches);
