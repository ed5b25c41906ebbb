use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use odflow::calibrate::{minimize, CalibrateOptions};
use odflow::domain::{Family, FlowObservation, Loss, ModelSpec};
use odflow::pipeline::{evaluate_specs, map_ordered, Execution};
use odflow::select::enumerate_models;
use odflow::synth::{generate_flows, generate_system, GroundTruth, Noise, SynthConfig};

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel { jobs: 0 })]
}

fn all_specs(c: &mut Criterion) {
    let system = generate_system(&SynthConfig::new(38, 1));
    let truth = GroundTruth::default().params(Family::Retail);
    let flows: Vec<FlowObservation> = [2019, 2020]
        .iter()
        .map(|&y| generate_flows(&truth, &system, y, 4000.0, Noise::Poisson, y as u64).unwrap())
        .collect();
    let specs = enumerate_models();
    let options = CalibrateOptions::default();
    let mut group = c.benchmark_group("cross_validate_68_specs");
    group.sample_size(10);
    for (name, mode) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate_specs(&specs, &system, &flows, &options, None, mode))
        });
    }
    group.finish();
}

fn replicates(c: &mut Criterion) {
    let system = generate_system(&SynthConfig::new(38, 2));
    let spec = ModelSpec::radiation(4, Loss::Poisson);
    let truth = GroundTruth::default().params(Family::Radiation);
    let samples: Vec<FlowObservation> =
        (0..64).map(|seed| generate_flows(&truth, &system, 2019, 4000.0, Noise::Poisson, seed).unwrap()).collect();
    let options = CalibrateOptions::default().with_lambda(0.0);
    let mut group = c.benchmark_group("radiation_replicates_64");
    group.sample_size(10);
    for (name, mode) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| map_ordered(&samples, mode, |obs| minimize(&spec, &system, obs, &options).map(|r| r.params)))
        });
    }
    group.finish();
}

criterion_group!(benches, all_specs, replicates);
criterion_main!(benches);
