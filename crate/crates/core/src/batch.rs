//! Batch scoring over a corpus, with optional data parallelism.
//!
//! Work items are mapped in a fixed order and the results collected back
//! in that order, so parallel and sequential runs produce identical
//! output.

use serde::{Deserialize, Serialize};

use crate::baselines::{neg_js_quality, PrepFlags};
use crate::blanc_help::score_help;
use crate::blanc_tune::score_tune;
use crate::corpus::CorpusRecord;
use crate::lm_backend::MaskedLm;
use crate::masking::BlancParams;
use crate::tokenizer::Tokenizer;
use crate::UnmaskingCounts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreVariant {
    Help,
    Tune,
    Js,
}

impl ScoreVariant {
    pub fn parse_selection(s: &str) -> Option<Vec<ScoreVariant>> {
        match s {
            "help" => Some(vec![ScoreVariant::Help]),
            "tune" => Some(vec![ScoreVariant::Tune]),
            "js" => Some(vec![ScoreVariant::Js]),
            "all" => Some(vec![ScoreVariant::Help, ScoreVariant::Tune, ScoreVariant::Js]),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScoreVariant::Help => "help",
            ScoreVariant::Tune => "tune",
            ScoreVariant::Js => "js",
        }
    }
}

/// One scored (document, summary, variant) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub doc_id: String,
    pub summary_id: String,
    pub variant: String,
    pub value: f64,
    pub counts: Option<UnmaskingCounts>,
    pub guard_skips: u32,
    pub seed: u64,
    pub passes: u32,
    pub params_fingerprint: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairFailure {
    pub doc_id: String,
    pub summary_id: String,
    pub variant: String,
    pub message: String,
}

/// Map `f` over `items`, preserving order. `jobs` = 1 runs sequentially;
/// 0 uses all cores; any other value caps the worker count. Without the
/// `parallel` feature every value runs sequentially.
#[cfg(feature = "parallel")]
pub fn par_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs) // 0 means "all cores" for rayon too
        .build()
        .expect("thread pool construction");
    pool.install(|| items.par_iter().map(f).collect())
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, R, F>(items: &[T], _jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    items.iter().map(f).collect()
}

/// Score every (document, summary) pair of the corpus under each selected
/// variant. Failures are collected per pair and the run continues.
pub fn score_corpus(
    records: &[CorpusRecord],
    variants: &[ScoreVariant],
    params: &BlancParams,
    backend: &dyn MaskedLm,
    tok: &Tokenizer,
    jobs: usize,
) -> (Vec<ScoreRow>, Vec<PairFailure>) {
    let mut tasks: Vec<(usize, usize, ScoreVariant)> = Vec::new();
    for (d, record) in records.iter().enumerate() {
        for s in 0..record.summaries.len() {
            for &variant in variants {
                tasks.push((d, s, variant));
            }
        }
    }

    let results = par_map(&tasks, jobs, |&(d, s, variant)| {
        let record = &records[d];
        let summary = &record.summaries[s];
        let outcome = match variant {
            ScoreVariant::Help => {
                score_help(&record.document, &summary.text, params, backend, tok).map(|score| {
                    (score.value, Some(score.counts), score.guard_skips)
                })
            }
            ScoreVariant::Tune => score_tune(
                &record.document,
                &summary.text,
                params,
                backend,
                params.seed,
                tok,
            )
            .map(|score| (score.value, Some(score.counts), score.guard_skips)),
            ScoreVariant::Js => {
                neg_js_quality(&summary.text, &record.document, PrepFlags::default())
                    .map(|value| (value, None, 0))
            }
        };
        match outcome {
            Ok((value, counts, guard_skips)) => Ok(ScoreRow {
                doc_id: record.document.id.clone(),
                summary_id: summary.id.clone(),
                variant: variant.name().to_string(),
                value,
                counts,
                guard_skips,
                seed: params.seed,
                passes: params.tune_passes,
                params_fingerprint: params.fingerprint(),
            }),
            Err(e) => Err(PairFailure {
                doc_id: record.document.id.clone(),
                summary_id: summary.id.clone(),
                variant: variant.name().to_string(),
                message: e.to_string(),
            }),
        }
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for result in results {
        match result {
            Ok(row) => rows.push(row),
            Err(failure) => failures.push(failure),
        }
    }
    (rows, failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_corpus;
    use crate::lm_backend::CopycatLm;
    use std::io::Write;

    fn corpus() -> Vec<CorpusRecord> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for i in 0..6 {
            writeln!(
                f,
                r#"{{"id":"d{i}","text":"wolves howled loudly overnight. winter forest mountain river.","summary":"wolves howled overnight","summary_id":"s{i}"}}"#
            )
            .unwrap();
        }
        load_corpus(f.path()).unwrap()
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let records = corpus();
        let params = BlancParams::default();
        let backend = CopycatLm::new(512);
        let tok = Tokenizer::default();
        let variants = ScoreVariant::parse_selection("all").unwrap();
        let (serial, fail_a) = score_corpus(&records, &variants, &params, &backend, &tok, 1);
        let (parallel, fail_b) = score_corpus(&records, &variants, &params, &backend, &tok, 4);
        assert!(fail_a.is_empty() && fail_b.is_empty());
        assert_eq!(serial, parallel);
        assert_eq!(serial.len(), 18);
    }

    #[test]
    fn failures_do_not_abort_the_batch() {
        let mut records = corpus();
        // A summary with no retained JS terms makes only the js variant fail.
        records[0].summaries[0].text = "the of and".to_string();
        let params = BlancParams::default();
        let backend = CopycatLm::new(512);
        let tok = Tokenizer::default();
        let variants = ScoreVariant::parse_selection("all").unwrap();
        let (rows, failures) = score_corpus(&records, &variants, &params, &backend, &tok, 1);
        assert_eq!(failures.len(), 1);
        assert_eq!(failures[0].variant, "js");
        assert_eq!(rows.len(), 17);
    }
}
