use criterion::{black_box, criterion_group, criterion_main, Criterion};

use goalgen_bench::Fixture;
use goalgen_core::analysis::{game_distance, nearest_real};
use goalgen_core::dsl::{parse_game, print_game, Game};
use goalgen_core::interp::score_game;
use goalgen_core::qd::{mutate, KeySpace, QdConfig};
use goalgen_core::rng;

fn benches(c: &mut Criterion) {
    let f = Fixture::new();
    let texts: Vec<String> = f.corpus.iter().map(print_game).collect();
    let ctx = f.trained.context();

    c.bench_function("parse corpus", |b| b.iter(|| texts.iter().map(|t| parse_game(t).unwrap()).count()));
    c.bench_function("print corpus", |b| b.iter(|| f.corpus.iter().map(|g| print_game(g).len()).sum::<usize>()));
    c.bench_function("extract features", |b| b.iter(|| f.samples.iter().map(|g| ctx.extract_full(g)).count()));
    c.bench_function("score fitness", |b| {
        b.iter(|| f.samples.iter().map(|g| f.trained.model.score_game(g).unwrap()).sum::<f64>())
    });
    c.bench_function("replay corpus on one trace", |b| {
        b.iter(|| f.corpus.iter().filter_map(|g| score_game(g, &f.traces[0]).ok()).count())
    });

    let weights = QdConfig::desk().weights;
    let partners: Vec<&Game> = f.samples.iter().collect();
    let space = KeySpace::desk();
    c.bench_function("mutate", |b| {
        let mut r = rng::substream(2, "bench/mutate");
        let mut i = 0;
        b.iter(|| {
            i = (i + 1) % f.corpus.len();
            mutate(&f.corpus[i], &weights, &f.trained.pcfg, &partners, &space, &mut r)
        })
    });

    c.bench_function("edit distance", |b| b.iter(|| game_distance(black_box(&f.samples[0]), black_box(&f.corpus[0]))));
    c.bench_function("nearest corpus game", |b| b.iter(|| nearest_real(black_box(&f.samples[1]), &f.corpus)));
}

criterion_group!(pipeline, benches);
criterion_main!(pipeline);
