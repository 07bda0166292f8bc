use std::hint::black_box;

use corwa_core::analysis::{mine_patterns, span_length_stats, PatternQuery};
use corwa_core::generation::strip_citation_marks;
use corwa_core::metrics::rouge_scores;
use corwa_core::schema::{from_bio, to_bio};
use corwa_core::synth::{random_corpus, random_labeled_paragraph};
use corwa_core::{LabeledParagraph, LossWeights, ModelConfig, TaggerModel, TrainConfig};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn paragraphs(n: usize) -> Vec<LabeledParagraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    (0..n).map(|_| random_labeled_paragraph(&mut rng, 6)).collect()
}

fn schema(c: &mut Criterion) {
    let data = paragraphs(100);
    c.bench_function("bio round trip x100", |b| {
        b.iter(|| {
            for lp in &data {
                let tags = to_bio(lp).unwrap();
                black_box(from_bio(&tags, &lp.paragraph).unwrap());
            }
        })
    });
}

fn tagger(c: &mut Criterion) {
    let data = paragraphs(20);
    let model = TaggerModel::new(ModelConfig::default(), LossWeights::default(), TrainConfig::default()).unwrap();
    c.bench_function("predict x20", |b| {
        b.iter(|| {
            for lp in &data {
                black_box(model.predict(&lp.paragraph).unwrap());
            }
        })
    });
}

fn analysis(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sections = random_corpus(&mut rng, 200, 4);
    let data: Vec<LabeledParagraph> = sections.into_iter().flat_map(|s| s.paragraphs).collect();
    let sequences: Vec<_> = data.iter().map(|lp| lp.sentence_labels.clone()).collect();
    let query = PatternQuery {
        max_gap: Some(1),
        ..PatternQuery::default_for(sequences.len())
    };
    c.bench_function("mine patterns", |b| b.iter(|| black_box(mine_patterns(&sequences, &query).unwrap())));
    c.bench_function("span length stats", |b| b.iter(|| black_box(span_length_stats(&data))));
}

fn text(c: &mut Criterion) {
    let data = paragraphs(50);
    let texts: Vec<&str> = data.iter().map(|lp| lp.paragraph.text.as_str()).collect();
    c.bench_function("strip citation marks x50", |b| {
        b.iter(|| {
            for t in &texts {
                black_box(strip_citation_marks(t));
            }
        })
    });
    c.bench_function("rouge pairs x49", |b| {
        b.iter_batched(
            || texts.clone(),
            |t| {
                for w in t.windows(2) {
                    black_box(rouge_scores(w[0], w[1]).unwrap());
                }
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, schema, tagger, analysis, text);
criterion_main!(benches);
