use criterion::{criterion_group, criterion_main, Criterion};
use pickands_core::estimators::{estimate_h_dy, fubini_identity, kernel_constant, KernelQuadConfig};
use pickands_core::{DyConfig, DyMethod, Kernel, Replicator, SpectralFieldSpec, VarianceFunction};

fn ratio_estimator(c: &mut Criterion) {
    let spec = SpectralFieldSpec::log_gaussian(VarianceFunction::fbm(0.5, 2.0));
    let cfg = DyConfig::new(0.0, 0.0, 10.0).with_method(DyMethod::MonteCarlo);
    let runner = Replicator::new(7);
    c.bench_function("dy_fbm_1000_paths", |b| b.iter(|| estimate_h_dy(&spec, &cfg, 1000, &runner).unwrap()));
}

fn kernel_quadrature(c: &mut Criterion) {
    let q = KernelQuadConfig::default();
    c.bench_function("kernel_gaussian_delta_0.25_T_40", |b| {
        b.iter(|| kernel_constant(&Kernel::GaussianDensity, 0.25, 40.0, &q).unwrap())
    });
    c.bench_function("fubini_laplace_eta_0.5", |b| b.iter(|| fubini_identity(&Kernel::Laplace, 0.5).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = ratio_estimator, kernel_quadrature
}
criterion_main!(benches);
