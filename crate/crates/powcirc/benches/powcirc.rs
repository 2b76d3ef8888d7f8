//! Criterion suite over the data-parallel entry points.
//!
//! With the default `parallel` feature each workload is measured twice:
//! on the default rayon pool and pinned to one thread, which isolates the
//! parallel speedup. Building with `--no-default-features` benches the
//! plain sequential code instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use powcirc::baumslag;
use powcirc::reduce;
use powcirc::{Marking, PowerCircuit};

/// Runs `f` once on the default pool and once on a single thread, or as
/// plain sequential code without the `parallel` feature.
fn compare_pools<F: Fn() + Sync>(c: &mut Criterion, group: &str, id: usize, f: F) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    #[cfg(feature = "parallel")]
    {
        g.bench_with_input(BenchmarkId::new("par", id), &(), |b, ()| b.iter(&f));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        g.bench_with_input(BenchmarkId::new("1thread", id), &(), |b, ()| {
            b.iter(|| pool.install(&f))
        });
    }
    #[cfg(not(feature = "parallel"))]
    g.bench_with_input(BenchmarkId::new("seq", id), &(), |b, ()| b.iter(&f));
    g.finish();
}

fn bench_word_problem(c: &mut Criterion) {
    for n in [10u64, 12] {
        let word = baumslag::tower_word(n).unwrap();
        let len = word.len();
        compare_pools(c, "word_problem/tower", len, move || {
            assert!(!baumslag::word_problem(&word).unwrap());
        });
    }
}

fn bench_reduce(c: &mut Criterion) {
    // a circuit with one marking per node exercises the data-parallel
    // marking rewrite inside every pipeline round
    let (pc, nodes) = PowerCircuit::tower_chain(48);
    let markings: Vec<Marking> = nodes
        .iter()
        .map(|&n| Marking::from_pairs([(n, 1)]).unwrap())
        .collect();
    compare_pools(c, "reduce/tower_all_markings", nodes.len(), move || {
        let result = reduce::reduce(&pc, &markings).unwrap();
        assert_eq!(result.iterations, 49);
    });
}

fn bench_compare(c: &mut Criterion) {
    let (pc, nodes) = PowerCircuit::tower_chain(60);
    let l = Marking::from_pairs([(nodes[60], 1)]).unwrap();
    let m = Marking::from_pairs([(nodes[59], 1)]).unwrap();
    compare_pools(c, "compare/tower", 60, move || {
        assert_eq!(
            reduce::compare(&pc, &l, &m).unwrap(),
            std::cmp::Ordering::Greater
        );
    });
}

criterion_group!(benches, bench_word_problem, bench_reduce, bench_compare);
criterion_main!(benches);
