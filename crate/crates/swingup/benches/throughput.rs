//! Criterion benches over the data-parallel inner loops. Build twice to
//! compare backends: `cargo bench` (rayon) vs
//! `cargo bench --no-default-features` (sequential fallback); bench names
//! carry the active mode.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swingup::catalog::build_catalog;
use swingup::dataset::{generate_episode, Dataset};
use swingup::exec::parallel_enabled;
use swingup::models::{EncoderConfig, Normalization, SampleInput, TrainedModel, Variant};
use swingup::pipeline::embeddings_for;
use swingup::simdyn::{simulate_swing, SwingConfig};
use swingup::tactile::TactileConfig;

fn mode() -> &'static str {
    if parallel_enabled() {
        "parallel"
    } else {
        "sequential"
    }
}

fn bench_episode_generation(c: &mut Criterion) {
    let cat = build_catalog();
    let sim = SwingConfig::default();
    let tact = TactileConfig::default();
    let mut group = c.benchmark_group("gen");
    group.sample_size(10);
    group.bench_function(format!("{}/generate_64_episodes", mode()), |b| {
        b.iter(|| {
            let eps = swingup::exec::par_map_indexed(64, |i| {
                generate_episode(&cat.specs[i % 33], 11, i, &sim, &tact).unwrap()
            });
            assert_eq!(eps.len(), 64);
        })
    });
    group.finish();
}

fn bench_batch_gradients(c: &mut Criterion) {
    let cat = build_catalog();
    let sim = SwingConfig::default();
    let tact = TactileConfig::default();
    let norm = Normalization::from_catalog(&cat);
    let model = TrainedModel::init(Variant::Combined, EncoderConfig::default(), norm, 3);
    let episodes: Vec<_> = (0..16)
        .map(|i| generate_episode(&cat.specs[i * 2], 7, i, &sim, &tact).unwrap())
        .collect();
    let mut group = c.benchmark_group("batch_grad");
    group.sample_size(10);
    group.bench_function(format!("{}/combined_batch16", mode()), |b| {
        b.iter(|| {
            let grads = swingup::exec::par_map_slice(&episodes, |ep| {
                let input = SampleInput::for_episode(&model, ep, &cat).unwrap();
                model.episode_loss_and_grads(&input).unwrap()
            });
            assert_eq!(grads.len(), 16);
        })
    });
    group.finish();
}

fn bench_embedding_batch(c: &mut Criterion) {
    let cat = build_catalog();
    let sim = SwingConfig::default();
    let tact = TactileConfig::default();
    let norm = Normalization::from_catalog(&cat);
    let model = TrainedModel::init(Variant::Combined, EncoderConfig::default(), norm, 3);
    let episodes: Vec<_> = (0..32)
        .map(|i| generate_episode(&cat.specs[i % 33], 7, i, &sim, &tact).unwrap())
        .collect();
    let dataset = Dataset {
        episodes,
        catalog: cat.clone(),
        seed: 7,
        config_fingerprint: 0,
    };
    let indices: Vec<usize> = (0..32).collect();
    let mut group = c.benchmark_group("embed");
    group.sample_size(10);
    group.bench_function(format!("{}/embeddings_32", mode()), |b| {
        b.iter(|| {
            let embs = embeddings_for(&model, &dataset, &indices).unwrap();
            assert_eq!(embs.len(), 32);
        })
    });
    group.finish();
}

fn bench_control_grid(c: &mut Criterion) {
    let cat = build_catalog();
    let mut sim = SwingConfig::default().noise_free();
    sim.l_imp = 9.4e-3;
    let spec = cat.specs[20].clone();
    let mut group = c.benchmark_group("control");
    group.sample_size(10);
    group.bench_function(format!("{}/oracle_grid_201", mode()), |b| {
        b.iter_batched(
            || spec.clone(),
            |spec| {
                let angles = swingup::exec::par_map_indexed(201, |i| {
                    let w = i as f64 / 200.0;
                    let mut rng = ChaCha8Rng::seed_from_u64(0);
                    simulate_swing(&spec, w, &sim, &mut rng).unwrap().final_angle_deg
                });
                assert_eq!(angles.len(), 201);
            },
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_episode_generation,
    bench_batch_gradients,
    bench_embedding_batch,
    bench_control_grid
);
criterion_main!(benches);
