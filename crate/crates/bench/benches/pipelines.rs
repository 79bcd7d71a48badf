use criterion::{criterion_group, criterion_main, Criterion};
use matscat::forward::{self, BoundStateOptions};
use matscat::numerics::ode::Tolerances;
use matscat::{marchenko, star, KGrid, MarchenkoConfig, RecoveryConfig};
use matscat_bench::{coupled_well, scalar_data, star_partial};

fn forward_grid(cr: &mut Criterion) {
    let (q, bc) = coupled_well();
    let kgrid = KGrid::uniform(20.0, 0.1).unwrap();
    cr.bench_function("scattering_on_grid n=2 400 nodes", |b| b.iter(|| forward::scattering_on_grid(&q, &bc, &kgrid, Tolerances::default()).unwrap()));
    let opts = BoundStateOptions::new(forward::default_kappa_max(&q, &bc));
    cr.bench_function("bound_state_search n=2", |b| b.iter(|| forward::bound_states(&q, &bc, &opts).unwrap()));
}

fn inverse(cr: &mut Criterion) {
    let data = scalar_data();
    let cfg = MarchenkoConfig::for_support(3.0);
    cr.bench_function("marchenko invert n=1 support 3", |b| b.iter(|| marchenko::invert(&data, &cfg).unwrap()));
}

fn star_recovery(cr: &mut Criterion) {
    let partial = star_partial();
    let cfg = RecoveryConfig::new(MarchenkoConfig::for_support(4.0));
    cr.bench_function("recover_last_ray n=3", |b| b.iter(|| star::recover_last_ray(&partial, &cfg).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = forward_grid, inverse, star_recovery
}
criterion_main!(benches);
