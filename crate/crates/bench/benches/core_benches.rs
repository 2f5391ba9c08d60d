//! Benchmarks for the pipeline hot paths: transition enumeration, BLEU rule
//! matching, and one training step of the encoder-decoder.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use rationale_core::corpus::{balance_and_noise, build_corpus, split_stratified};
use rationale_core::env::{enumerate_triples, generate_map, is_solvable};
use rationale_core::eval::{match_rule, BLEU_THRESHOLD};
use rationale_core::seq2seq::{Batch, Model, ModelConfig, Vocabulary};
use rationale_core::Grammar;

fn bench_env(c: &mut Criterion) {
    let map = generate_map(9, 3, 0.5, 1).unwrap();
    c.bench_function("enumerate_triples_desk_map", |b| {
        b.iter(|| black_box(enumerate_triples(black_box(&map))))
    });
    c.bench_function("is_solvable_desk_map", |b| {
        b.iter(|| black_box(is_solvable(black_box(&map))))
    });
}

fn bench_eval(c: &mut Criterion) {
    let grammar = Grammar::standard();
    let forms = grammar.all_surface_forms();
    let candidate: Vec<String> = "i hopped onto a log to cross the water"
        .split_whitespace()
        .map(str::to_string)
        .collect();
    c.bench_function("match_rule_full_scan", |b| {
        b.iter(|| black_box(match_rule(black_box(&candidate), &forms, BLEU_THRESHOLD)))
    });
}

fn bench_train_step(c: &mut Criterion) {
    let map = generate_map(9, 3, 0.25, 1).unwrap();
    let grammar = Grammar::standard();
    let corpus = build_corpus(&map, &grammar, 2);
    let (split, _) = split_stratified(&corpus, 0.2, 3);
    let (balanced, _) = balance_and_noise(&split.train, &map, &grammar, 2, 0.3, 4);
    let src_vocab = Vocabulary::source_for_map(&map);
    let tgt_vocab = Vocabulary::target_for_grammar(&grammar);
    let pairs: Vec<(Vec<usize>, Vec<usize>)> = balanced
        .iter()
        .take(16)
        .map(|e| {
            (
                src_vocab.encode(&e.source).unwrap(),
                tgt_vocab.encode(&e.target).unwrap(),
            )
        })
        .collect();
    let refs: Vec<(&[usize], &[usize])> = pairs
        .iter()
        .map(|(s, t)| (s.as_slice(), t.as_slice()))
        .collect();
    let batch = Batch::new(&refs);
    let cfg = ModelConfig {
        seed: 7,
        ..ModelConfig::desk_scale()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let model: Model<f32> = Model::new_random(cfg, src_vocab.len(), tgt_vocab.len(), &mut rng);
    let mut group = c.benchmark_group("seq2seq");
    group.sample_size(20);
    group.bench_function("forward_backward_chunk16", |b| {
        b.iter_batched(
            || batch.clone(),
            |batch| black_box(model.forward_backward(&batch)),
            BatchSize::LargeInput,
        )
    });
    group.bench_function("greedy_decode_one", |b| {
        let src = &pairs[0].0;
        b.iter(|| black_box(model.greedy_decode(black_box(src), 32).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench_env, bench_eval, bench_train_step);
criterion_main!(benches);
