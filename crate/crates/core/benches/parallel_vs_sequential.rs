use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sap_core::busch::g_from_eg;
use sap_core::fft2::Fft2;
use sap_core::grid::{Grid1D, Site, TrapConfiguration, TwoBodyWavefunction};
use sap_core::hamiltonian::{prepare_ground_state, GroundStateSettings, Occupancy};
use sap_core::propagator::SplitStepPropagator;
use sap_core::Execution;

fn modes() -> Vec<(&'static str, Execution)> {
    #[allow(unused_mut)]
    let mut m = vec![("sequential", Execution::Sequential)];
    #[cfg(feature = "parallel")]
    m.push(("parallel", Execution::Parallel));
    m
}

fn fft(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft2");
    for n in [128usize, 256] {
        let grid = Grid1D::symmetric(n, 12.0).unwrap();
        let psi = TwoBodyWavefunction::gaussian_pair(&grid, 1.0);
        for (name, exec) in modes() {
            let f = Fft2::new(n, exec);
            let mut a = psi.amplitudes().clone();
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| {
                    f.forward(&mut a);
                    f.inverse(&mut a);
                    black_box(&a);
                })
            });
        }
    }
    group.finish();
}

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("split_step");
    let config = TrapConfiguration::symmetric(3.0);
    for n in [128usize, 256] {
        let grid = Grid1D::symmetric(n, 12.0).unwrap();
        for (name, exec) in modes() {
            let prop = SplitStepPropagator::new(&grid, 0.01, exec);
            let mut psi = TwoBodyWavefunction::gaussian_pair(&grid, -3.0);
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| prop.step(&mut psi, &config, 1.45).unwrap())
            });
        }
    }
    group.finish();
}

// several independent ground-state preparations, as in an E_g sweep
fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("ground_state_sweep");
    group.sample_size(10);
    let grid = Grid1D::symmetric(64, 12.0).unwrap();
    let config = TrapConfiguration::symmetric(9.0);
    let settings = GroundStateSettings { dtau: 2e-3, tolerance: 1e-9, ..Default::default() };
    let values = [1.1, 1.2, 1.3, 1.4, 1.5, 1.6];
    for (name, exec) in modes() {
        group.bench_function(name, |b| {
            b.iter(|| {
                exec.map_jobs(values.to_vec(), |e| {
                    let g = g_from_eg(e).unwrap();
                    // jobs run whole; the kernels inside stay sequential
                    prepare_ground_state(&config, g, &grid, Occupancy::Pair(Site::Left), &settings, Execution::Sequential)
                        .unwrap()
                        .energy
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, fft, step, sweep);
criterion_main!(benches);
