//! Dense versus sparse factorization of the Newton matrix of benchmark games.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cqg::gamegen::{GameKind, GameRecipe};
use cqg::ipm::KktSystem;
use cqg::sparse::{LuBackend, LuOptions};

fn factor(c: &mut Criterion) {
    let cases = [
        (GameKind::Ev, 10, 24),
        (GameKind::Market, 10, 10),
        (GameKind::Market, 30, 10),
        (GameKind::Traffic, 4, 14),
    ];
    let mut group = c.benchmark_group("newton_factor");
    group.sample_size(10);
    for (kind, players, size) in cases {
        let game = GameRecipe::random(kind, players, size, 0.01, 3).unwrap().build().unwrap();
        let v = vec![0.5; game.m_ineq()];
        for backend in [LuBackend::Dense, LuBackend::Sparse] {
            let lu = LuOptions {
                backend,
                ..LuOptions::default()
            };
            let sys = KktSystem::new(&game, 1e-9, lu).unwrap();
            let id = BenchmarkId::new(format!("{kind}_N{players}"), format!("{backend:?}").to_lowercase());
            group.bench_function(id, |b| b.iter(|| sys.factor(&v).unwrap()));
        }
    }
    group.finish();
}

criterion_group!(benches, factor);
criterion_main!(benches);
