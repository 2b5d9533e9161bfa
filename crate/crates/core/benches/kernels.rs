//! Hot kernels. Run once as is and once with `--no-default-features` to
//! compare the rayon and sequential builds; results are labelled by build.

use std::hint::black_box;

use abraham_core::exec;
use abraham_core::grid::{step_coupled, CoupledState, SpectralProfile};
use abraham_core::propagator::{spectral_evolve, FieldGrid, GridGeometry};
use abraham_core::scenario::Pulse;
use abraham_core::{ChargeProfile, PhysicalConstants, ProfileShape};
use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::Vector3;

fn build() -> &'static str {
    if exec::is_parallel() {
        "parallel"
    } else {
        "sequential"
    }
}

fn setup(n: usize) -> (FieldGrid, SpectralProfile) {
    let g = GridGeometry::new(16.0, n).unwrap();
    let pulse = Pulse::new(Vector3::new(2.0, 0.0, 0.0), 1.0, 1.0, Vector3::z()).unwrap();
    let mut f = FieldGrid::from_fn(g.clone(), |x| (pulse.field(x).0, Vector3::zeros()));
    f.project_transverse();
    let sp = SpectralProfile::new(g, &ChargeProfile::new(ProfileShape::Bump, 1.0).unwrap());
    (f, sp)
}

fn kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group(build());
    group.sample_size(10);
    let (data, sp) = setup(48);
    let spectral = data.spectral();
    group.bench_function("spectral_evolve_48", |b| b.iter(|| spectral_evolve(black_box(&spectral), 0.1)));
    group.bench_function("soliton_grid_48", |b| {
        b.iter(|| sp.soliton_grid(0.5, black_box(&Vector3::zeros()), &Vector3::new(0.3, 0.0, 0.0)).unwrap())
    });
    let c0 = PhysicalConstants::new(0.5, 1.0).unwrap();
    let state = CoupledState::with_spectral_profile(&data, Vector3::zeros(), Vector3::new(0.2, 0.0, 0.0), c0, sp).unwrap();
    group.bench_function("coupled_step_48", |b| {
        b.iter_batched(|| state.clone(), |mut s| step_coupled(&mut s, 0.05).unwrap(), criterion::BatchSize::LargeInput)
    });
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
