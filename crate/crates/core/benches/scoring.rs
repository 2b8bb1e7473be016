//! Batch scoring throughput, sequential vs data-parallel.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use blanc_core::{
    score_corpus, BlancParams, CopycatLm, CorpusRecord, Document, ScoreVariant, SummaryRecord,
    Tokenizer,
};

fn synthetic_corpus(n_docs: usize, sentences_per_doc: usize) -> Vec<CorpusRecord> {
    let pool = [
        "wolves", "howled", "loudly", "overnight", "winter", "mountain", "forest", "river",
        "morning", "evening", "question", "answer", "sentence", "letter", "capital", "country",
    ];
    (0..n_docs)
        .map(|d| {
            let text: String = (0..sentences_per_doc)
                .map(|s| {
                    let words: Vec<&str> =
                        (0..8).map(|w| pool[(d + 3 * s + 5 * w) % pool.len()]).collect();
                    format!("{}.", words.join(" "))
                })
                .collect::<Vec<_>>()
                .join(" ");
            let summary: String = (0..6).map(|w| pool[(d + w) % pool.len()]).collect::<Vec<_>>().join(" ");
            let document = Document::new(format!("d{d}"), text);
            let summaries = vec![SummaryRecord {
                id: format!("s{d}"),
                doc_id: document.id.clone(),
                text: summary,
                source: String::new(),
                human_scores: None,
                external_scores: None,
            }];
            CorpusRecord {
                document,
                summaries,
            }
        })
        .collect()
}

fn bench_scoring(c: &mut Criterion) {
    let records = synthetic_corpus(32, 24);
    let params = BlancParams::default();
    let backend = CopycatLm::new(512);
    let tok = Tokenizer::default();
    let variants = [ScoreVariant::Help];

    let mut group = c.benchmark_group("score_corpus");
    for &jobs in &[1usize, 0] {
        let label = if jobs == 1 { "sequential" } else { "parallel" };
        group.bench_with_input(BenchmarkId::new(label, jobs), &jobs, |b, &jobs| {
            b.iter(|| {
                black_box(score_corpus(
                    black_box(&records),
                    &variants,
                    &params,
                    &backend,
                    &tok,
                    jobs,
                ))
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_scoring);
criterion_main!(benches);
