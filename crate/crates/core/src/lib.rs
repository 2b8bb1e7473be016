//! Reference-free summary quality estimation.
//!
//! Two measures quantify how much a summary helps a masked language model
//! reconstruct obscured document tokens:
//!
//! - **help**: the summary (vs an equal-length period filler) is
//!   concatenated in front of each document sentence during inference.
//! - **tune**: a copy of the model is fine-tuned on a tiny masked dataset
//!   built from the summary, then both models unmask bare sentences.
//!
//! Both report `(S01 - S10) / S_total` over the joint success counters of
//! the unassisted and assisted conditions. The model sits behind the
//! [`lm_backend::MaskedLm`] trait; the deterministic copycat backend makes
//! every algorithm testable without real inference. A Jensen-Shannon
//! unigram baseline, control-summary generators, and a correlation
//! harness round out the toolkit.

pub mod analysis;
pub mod baselines;
pub mod batch;
pub mod blanc_help;
pub mod blanc_tune;
pub mod corpus;
pub mod error;
pub mod lm_backend;
pub mod masking;
pub mod tokenizer;

pub use analysis::{
    aggregate_human, annotator_split, blend_scores, normalize_by_compression, pearson, spearman,
    ScoreMatrix, SplitRow,
};
pub use baselines::{
    deterioration_experiment, js_divergence, neg_js_quality, random_sentences_summary,
    random_words_summary, spoil_summary, PrepFlags, UnigramDistribution,
};
pub use batch::{par_map, score_corpus, PairFailure, ScoreRow, ScoreVariant};
pub use blanc_help::{
    apply_guard, blanc_from_counts, score_help, BlancScore, UnmaskingCounts, Variant,
};
pub use blanc_tune::{build_tuning_set, score_tune, TuningSet};
pub use corpus::{
    compression_factor, load_corpus, split_sentences, write_corpus, CorpusRecord, Document,
    SummaryRecord,
};
pub use error::{Error, Result};
pub use lm_backend::{
    backend_from_id, make_reference_backend, CopycatLm, CorruptionKind, MaskedLm, MaskedSample,
    DEFAULT_MAX_INPUT_LEN, MASK_TOKEN, UNK_TOKEN,
};
pub use masking::{
    apply_mask, build_filler, eligible_positions, periodic_plans, BlancParams, EligibilityMode,
    GuardMode, MaskingPlan,
};
pub use tokenizer::{TokenSequence, Tokenizer};
