use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use vwave_core::boundary::build_boundary_data;
use vwave_core::goursat::solve_goursat;
use vwave_core::model::{InitialData, LatticeSpec, WaveSpeed};
use vwave_core::par;
use vwave_core::reconstruct::extract_time_slice;
use vwave_core::singular::{default_tol, detect_singular_set};
use vwave_core::sweep::{sweep_lambda, ExprFamily, SweepOptions};

const MODES: [(&str, bool); 2] = [("parallel", true), ("sequential", false)];

fn blowup_setup(h: f64) -> (vwave_core::boundary::BoundaryData, WaveSpeed) {
    let ws = WaveSpeed::parse("1 + 0.25*u^2").unwrap();
    let d = InitialData::parse("exp(-x^2)", "5*exp(-x^2)").unwrap();
    (build_boundary_data(&d, &ws, &LatticeSpec::new(4.0, h)).unwrap(), ws)
}

fn solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_goursat");
    group.sample_size(10);
    for h in [0.04, 0.02] {
        let (b, ws) = blowup_setup(h);
        for (name, on) in MODES {
            par::set_parallel(on);
            group.bench_with_input(BenchmarkId::new(name, h), &h, |bch, _| bch.iter(|| solve_goursat(black_box(&b), &ws).unwrap()));
        }
    }
    par::set_parallel(true);
    group.finish();
}

fn analysis(c: &mut Criterion) {
    let (b, ws) = blowup_setup(0.02);
    let g = solve_goursat(&b, &ws).unwrap();
    let mut group = c.benchmark_group("analysis");
    group.sample_size(10);
    for (name, on) in MODES {
        par::set_parallel(on);
        group.bench_function(BenchmarkId::new("time_slice", name), |bch| bch.iter(|| extract_time_slice(&g, black_box(1.5), &ws).unwrap()));
        group.bench_function(BenchmarkId::new("singular_set", name), |bch| {
            bch.iter(|| detect_singular_set(&g, &ws, default_tol(&g)).unwrap())
        });
    }
    par::set_parallel(true);
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let ws = WaveSpeed::parse("1 + 0.25*u^2").unwrap();
    let fam = ExprFamily::parse("lambda*exp(-x^2)", "0").unwrap();
    let spec = LatticeSpec::new(1.0, 0.05);
    let opts = SweepOptions { n_lambda: 8, ..SweepOptions::default() };
    let mut group = c.benchmark_group("sweep_lambda");
    group.sample_size(10);
    for (name, on) in MODES {
        par::set_parallel(on);
        group.bench_function(name, |bch| bch.iter(|| sweep_lambda(&fam, &ws, &spec, &opts).unwrap()));
    }
    par::set_parallel(true);
    group.finish();
}

criterion_group!(benches, solve, analysis, sweep);
criterion_main!(benches);
