use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fa2lab::bp::bp_closure;
use fa2lab::kcm::simulate;
use fa2lab::lattice::{sample_configuration, sample_environment, Boundary, Configuration, LatticeBox, ModelParams, Site};
use fa2lab::moves::verify_legal;
use fa2lab::z2::{build_infection_path, random_supergood_instance};

fn sampled(side: usize, q: f64, pi: f64, boundary: Boundary) -> (Configuration, ModelParams) {
    let bx = LatticeBox::new(Site::ORIGIN, &[side, side], boundary).unwrap();
    let par = ModelParams::new(q, pi, 1.0, 2).unwrap();
    let env = Arc::new(sample_environment(&par, &bx, 7));
    (sample_configuration(&par, &env, 7), par)
}

fn constraint(c: &mut Criterion) {
    let (cfg, _) = sampled(256, 0.3, 0.05, Boundary::Periodic);
    let n = cfg.bx().len();
    c.bench_function("constraint/256x256 sweep", |b| {
        b.iter(|| {
            let mut k = 0usize;
            for i in 0..n {
                if !cfg.env().is_immune_idx(i) && cfg.constraint_idx(i) {
                    k += 1;
                }
            }
            black_box(k)
        })
    });
}

fn closure(c: &mut Criterion) {
    let mut g = c.benchmark_group("bp_closure");
    for side in [64usize, 256] {
        let (cfg, _) = sampled(side, 0.08, 0.02, Boundary::HealthyFrozen);
        g.bench_with_input(BenchmarkId::from_parameter(side), &cfg, |b, cfg| b.iter(|| bp_closure(black_box(cfg))));
    }
    g.finish();
}

fn dynamics(c: &mut Criterion) {
    let (cfg, par) = sampled(64, 0.25, 0.0, Boundary::Periodic);
    let origin = cfg.bx().origin();
    let stop = move |x: &Configuration| x.is_infected(origin);
    // the origin may start infected; run from its healthy version
    let mut start = cfg.clone();
    start.set(origin, fa2lab::State::Healthy).unwrap();
    c.bench_function("kcm/64x64 until origin", |b| {
        b.iter(|| simulate(black_box(&start), &par, &stop, 1e4, 3, None))
    });
}

fn legality(c: &mut Criterion) {
    let (cfg, path, origin) = random_supergood_instance(8, 30, 0.3, 0.02, 5);
    let g = build_infection_path(&cfg, &path, origin).unwrap();
    c.bench_function("verify_legal/z2 path L=8 l=30", |b| b.iter(|| verify_legal(black_box(&cfg), black_box(&g))));
}

criterion_group!(benches, constraint, closure, dynamics, legality);
criterion_main!(benches);
