use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use slitsim::fock::{fock_squeezed_thermal, ProbeOperator};
use slitsim::inference::model::{FitParams, ForwardConfig, ScanDesign, TwaForwardModel, TwaLikelihood};
use slitsim::inference::synthetic::{reference_truth, synthetic_dataset, SyntheticConfig};
use slitsim::phase_space::{apply_squeeze, thermal_state};
use slitsim::tomography::{exact_samples, reconstruct_wigner, GridSpec, TomographyPlan};
use slitsim::twa::sample_initial;
use slitsim::units::us_to_s;
use slitsim::{ClassicalFlow, FockDensityMatrix, KerrScaling, LambDicke};
use std::f64::consts::PI;
use std::hint::black_box;

fn fock(c: &mut Criterion) {
    let rho = fock_squeezed_thermal(1.0, -1.0, 0.0, 200).unwrap();
    let probe = ProbeOperator::new(200, 2.0 * 0.316);
    c.bench_function("fock_kerr_evolve_dim200", |b| b.iter(|| black_box(rho.evolve_kerr_diagonal(PI, -0.01 * PI, 3.7))));
    c.bench_function("fock_probe_expectation_dim200", |b| b.iter(|| black_box(probe.expectation(&rho))));
}

fn twa(c: &mut Criterion) {
    let start = apply_squeeze(&thermal_state(1.0).unwrap(), -1.0, 0.0);
    let ens = sample_initial(&start, 20_000, 1).unwrap();
    c.bench_function("twa_evolve_20k", |b| b.iter(|| black_box(ens.evolve(PI, -0.01 * PI, 3.7, ClassicalFlow::default()).unwrap())));
    c.bench_function("twa_visibility_20k", |b| b.iter(|| black_box(ens.visibility(LambDicke::DEFAULT))));
}

fn likelihood(c: &mut Criterion) {
    let data = synthetic_dataset(&SyntheticConfig { n_trajectories: 2000, ..SyntheticConfig::reference() }, 3).unwrap();
    let forward = ForwardConfig {
        n_trajectories: 5000,
        seed: 9,
        design: ScanDesign { fixed_shallow: us_to_s(19.53), fixed_deep: us_to_s(6.0) },
        kerr_scaling: KerrScaling::default(),
    };
    let like = TwaLikelihood::new(TwaForwardModel::new(forward).unwrap(), data).unwrap();
    let p: FitParams = reference_truth();
    c.bench_function("twa_log_likelihood_50pts_5k", |b| b.iter(|| black_box(like.log_likelihood(&p))));
}

fn tomography(c: &mut Criterion) {
    let target = FockDensityMatrix::from_populations(&[0.5, 0.5]).unwrap().resized(120).unwrap();
    let plan = TomographyPlan::annulus(LambDicke::new(0.5).unwrap(), 2.0, 1.0, 48, 64, 10_000).unwrap();
    let samples = exact_samples(&target, &plan);
    let spec = GridSpec::default();
    c.bench_function("reconstruct_wigner_128", |b| b.iter_batched(|| samples.clone(), |s| black_box(reconstruct_wigner(&s, &spec).unwrap()), BatchSize::LargeInput));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = fock, twa, likelihood, tomography
}
criterion_main!(benches);
