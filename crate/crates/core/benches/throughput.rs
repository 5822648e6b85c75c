use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use graphbench_core::builder::{coarse_screen, ingest_trajectories, CoarseConfig, OracleSuite};
use graphbench_core::engine::resolve_transition;
use graphbench_core::graph::load_graph;
use graphbench_core::harness::{run_eval, AgentSpec, EvalConfig, ScriptedFactory};
use graphbench_core::par::Exec;
use graphbench_core::{ActionSpec, GraphBenchmark, Point};
use std::hint::black_box;
use std::path::PathBuf;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn demo() -> GraphBenchmark {
    load_graph(&fixtures().join("demo-food-order/manifest.json")).unwrap()
}

const STRATEGIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

/// Random-agent episodes over every task, for a batch of seeds.
fn episodes(c: &mut Criterion) {
    let g = demo();
    let f = ScriptedFactory::new(AgentSpec::Random).unwrap();
    let seeds: Vec<u64> = (0..32).collect();
    let mut group = c.benchmark_group("episodes");
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::new(name, seeds.len()), |b| {
            b.iter(|| {
                exec.map(&seeds, |&seed| {
                    let cfg = EvalConfig { seed, exec, ..EvalConfig::default() };
                    run_eval(&g, &f, &cfg).unwrap().report.average.sr
                })
            })
        });
    }
    group.finish();
}

fn coarse(c: &mut Criterion) {
    let corpus = fixtures().join("trajectories");
    let ts = ingest_trajectories(&corpus).unwrap();
    let suite = OracleSuite::from_config(&corpus.join("oracles.json"), None).unwrap();
    let cfg = CoarseConfig::default();
    let mut group = c.benchmark_group("coarse_screen");
    for (name, exec) in STRATEGIES {
        group.bench_function(name, |b| b.iter(|| coarse_screen(black_box(&ts), &suite, &cfg, exec).unwrap()));
    }
    group.finish();
}

/// Resolves a click at every other pixel of every node.
fn hit_sweep(c: &mut Criterion) {
    let g = demo();
    let nodes: Vec<_> = g.nodes.values().collect();
    let mut group = c.benchmark_group("hit_sweep");
    group.sample_size(20);
    for (name, exec) in STRATEGIES {
        group.bench_function(name, |b| {
            b.iter(|| {
                exec.map(&nodes, |n| {
                    let d = n.screens[0].dims();
                    let mut hits = 0usize;
                    for y in (0..d.height).step_by(2) {
                        for x in (0..d.width).step_by(2) {
                            let a = ActionSpec::Click { coordinate: Point::new(x, y) };
                            hits += usize::from(resolve_transition(&g, &n.id, &a).is_some());
                        }
                    }
                    hits
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, episodes, coarse, hit_sweep);
criterion_main!(benches);
