use criterion::{criterion_group, criterion_main, Criterion};
use rhowave::par::Parallelism;
use rhowave::scenario::{run_sweep, Grid};

const GRID: &str = "topos = ring, grid, random\nns = 8, 12\nrhos = 1, 2\n\
                    daemons = synchronous, distributed:0.5\nseeds = 0..3\nprotos = lme\nphases = 6";

fn sweep(c: &mut Criterion) {
    let grid = Grid::parse(GRID).unwrap();
    let mut group = c.benchmark_group("lme_sweep_72_cells");
    group.sample_size(10);
    for (name, mode) in [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)] {
        group.bench_function(name, |b| b.iter(|| run_sweep(&grid, mode).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
