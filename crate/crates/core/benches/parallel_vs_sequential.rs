use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mht_core::mwis::{solve_mwis_with, ConflictGraph};
use mht_core::simulator::{generate, ScenarioSpec};
use mht_core::tracker::track_stream;
use mht_core::{Execution, TrackerConfig, TrackingMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn tracker(c: &mut Criterion) {
    let mut group = c.benchmark_group("tracker");
    group.sample_size(10);
    for mode in [TrackingMode::GroundPlane, TrackingMode::ImagePlane] {
        let spec = ScenarioSpec::chain(42, mode, 6, 25, 420.0);
        let s = generate(&spec).expect("scenario");
        for exec in MODES {
            let cfg = TrackerConfig {
                execution: exec,
                ..spec.tracker_defaults()
            };
            group.bench_with_input(
                BenchmarkId::new(format!("{mode:?}"), format!("{exec:?}")),
                &cfg,
                |b, cfg| b.iter(|| track_stream(cfg, &s.network, &s.events).expect("tracks")),
            );
        }
    }
    group.finish();
}

/// Many small components, the shape a busy forest produces.
fn clustered_graph(seed: u64, clusters: usize, size: usize) -> ConflictGraph {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n = clusters * size;
    let weights: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..5.0)).collect();
    let mut g = ConflictGraph::with_weights(&weights);
    for c in 0..clusters {
        for a in 0..size {
            for b in a + 1..size {
                if r.gen::<f64>() < 0.3 {
                    g.add_edge(c * size + a, c * size + b);
                }
            }
        }
    }
    g
}

fn mwis(c: &mut Criterion) {
    let mut group = c.benchmark_group("mwis");
    for (clusters, size) in [(8, 30), (64, 30)] {
        let g = clustered_graph(7, clusters, size);
        for exec in MODES {
            group.bench_with_input(
                BenchmarkId::new(format!("{clusters}x{size}"), format!("{exec:?}")),
                &g,
                |b, g| b.iter(|| solve_mwis_with(g, exec)),
            );
        }
    }
    group.finish();
}

criterion_group!(benches, tracker, mwis);
criterion_main!(benches);
