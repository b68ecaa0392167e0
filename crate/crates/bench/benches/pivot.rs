use criterion::{black_box, criterion_group, criterion_main, Criterion};

use pivot_bench::observations;
use pivot_core::env::Action;
use pivot_core::nn::{GaussianPolicy, ValueNet};
use pivot_core::rng::rng_from;
use pivot_core::trpo::{collect_rollouts, conjugate_gradient};
use pivot_core::{EnvConfig, PivotEnv, PivotModel, PivotState};

fn dynamics(c: &mut Criterion) {
    let model = PivotModel::default();
    let mut slipping = PivotState::at_rest(0.3, 0.031);
    slipping.tool_rate = 0.5;
    slipping.mode = pivot_core::ContactMode::Slipping;
    let stuck = PivotState::at_rest(0.3, 0.02);
    c.bench_function("dynamics_step_slipping", |b| {
        b.iter(|| model.step(black_box(&slipping), black_box(5.0), 1e-3).unwrap())
    });
    c.bench_function("dynamics_step_stuck", |b| {
        b.iter(|| model.step(black_box(&stuck), black_box(5.0), 1e-3).unwrap())
    });
}

fn environment(c: &mut Criterion) {
    let mut env = PivotEnv::new(EnvConfig::default()).unwrap();
    let mut rng = rng_from(1, &[]);
    env.reset(&mut rng).unwrap();
    c.bench_function("env_control_step", |b| {
        b.iter(|| {
            let t = env.step(black_box(Action::new(0.4, 0.5))).unwrap();
            if t.done {
                env.reset(&mut rng).unwrap();
            }
        })
    });
}

fn networks(c: &mut Criterion) {
    let mut rng = rng_from(2, &[]);
    let policy = GaussianPolicy::pivot(-0.5, &mut rng).unwrap();
    let value = ValueNet::pivot(&mut rng).unwrap();
    let obs = observations(1000, 3);
    c.bench_function("policy_mean", |b| b.iter(|| policy.mean(black_box(&obs[0])).unwrap()));
    c.bench_function("value_forward", |b| b.iter(|| value.value(black_box(&obs[0])).unwrap()));
    let v: Vec<f64> = (0..policy.num_params()).map(|i| (i as f64 * 0.37).sin()).collect();
    c.bench_function("fisher_vector_product_1000_obs", |b| {
        b.iter(|| policy.fisher_vector_product(black_box(&obs), &v, 0.1).unwrap())
    });
    c.bench_function("conjugate_gradient_10_iters_1000_obs", |b| {
        b.iter(|| {
            conjugate_gradient(|x| policy.fisher_vector_product(&obs, x, 0.1), &v, 10, 1e-10).unwrap()
        })
    });
}

fn rollouts(c: &mut Criterion) {
    let policy = GaussianPolicy::pivot(-0.5, &mut rng_from(4, &[])).unwrap();
    let factory = || PivotEnv::new(EnvConfig::default());
    let mut group = c.benchmark_group("rollouts");
    group.sample_size(10);
    group.bench_function("collect_4_episodes", |b| {
        b.iter(|| collect_rollouts(&factory, &policy, 4, black_box(5)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, dynamics, environment, networks, rollouts);
criterion_main!(benches);
