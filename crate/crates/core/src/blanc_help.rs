//! BLANC-help: unmasking accuracy with the summary prefixed to each
//! sentence, compared against the same task with an equal-length period
//! filler prefixed instead.

use std::collections::BTreeMap;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::corpus::{split_sentences, Document};
use crate::error::{Error, Result};
use crate::lm_backend::MaskedLm;
use crate::masking::{
    apply_mask, assemble_with_prefix, build_filler, periodic_plans, BlancParams, EligibilityMode,
    GuardMode,
};
use crate::tokenizer::{TokenSequence, Tokenizer};

/// Joint success/failure counters. Index i is the base (filler) condition,
/// index j the summary-assisted condition; e.g. `s01` counts events the
/// filler input failed and the summary input got right.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnmaskingCounts {
    pub s00: u64,
    pub s01: u64,
    pub s10: u64,
    pub s11: u64,
}

impl UnmaskingCounts {
    pub fn total(&self) -> u64 {
        self.s00 + self.s01 + self.s10 + self.s11
    }

    pub fn increment(&mut self, base_correct: bool, assisted_correct: bool) {
        match (base_correct, assisted_correct) {
            (false, false) => self.s00 += 1,
            (false, true) => self.s01 += 1,
            (true, false) => self.s10 += 1,
            (true, true) => self.s11 += 1,
        }
    }

    /// Accuracy with assistance, (S11 + S01) / S_total.
    pub fn assisted_accuracy(&self) -> f64 {
        (self.s11 + self.s01) as f64 / self.total() as f64
    }

    /// Accuracy without assistance, (S11 + S10) / S_total.
    pub fn base_accuracy(&self) -> f64 {
        (self.s11 + self.s10) as f64 / self.total() as f64
    }
}

impl Add for UnmaskingCounts {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            s00: self.s00 + rhs.s00,
            s01: self.s01 + rhs.s01,
            s10: self.s10 + rhs.s10,
            s11: self.s11 + rhs.s11,
        }
    }
}

impl AddAssign for UnmaskingCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Help,
    Tune,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Help => write!(f, "help"),
            Variant::Tune => write!(f, "tune"),
        }
    }
}

/// A scored result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlancScore {
    /// (S01 - S10) / S_total, in [-1, 1].
    pub value: f64,
    pub counts: UnmaskingCounts,
    pub variant: Variant,
    pub params: BlancParams,
    /// Sentences removed by the no-copy-pair guard.
    pub guard_skips: u32,
    /// Sentences skipped because they alone exceed the length budget.
    pub overlength_skips: u32,
}

/// (S01 - S10) / S_total.
pub fn blanc_from_counts(counts: &UnmaskingCounts) -> Result<f64> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::NoMaskableContent { guard_skips: 0 });
    }
    Ok((counts.s01 as f64 - counts.s10 as f64) / total as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuardDecision {
    /// Proceed with the (possibly reduced) summary sentences.
    Proceed(Vec<String>),
    Skip,
}

/// No-copy-pair guard. Copies are detected by exact match after trimming
/// outer whitespace only.
pub fn apply_guard(sentence: &str, summary_sentences: &[String], guard: GuardMode) -> GuardDecision {
    let trimmed = sentence.trim();
    let has_copy = summary_sentences.iter().any(|s| s.trim() == trimmed);
    match guard {
        GuardMode::Off => GuardDecision::Proceed(summary_sentences.to_vec()),
        GuardMode::SkipSentence if has_copy => GuardDecision::Skip,
        GuardMode::SkipSentence => GuardDecision::Proceed(summary_sentences.to_vec()),
        GuardMode::DropCopy => GuardDecision::Proceed(
            summary_sentences
                .iter()
                .filter(|s| s.trim() != trimmed)
                .cloned()
                .collect(),
        ),
    }
}

/// Count one masked event, word- or token-granular, into `counts`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn count_events(
    counts: &mut UnmaskingCounts,
    mode: EligibilityMode,
    seq: &TokenSequence,
    word_positions: &[usize],
    shift_base: usize,
    base_pred: &BTreeMap<usize, String>,
    shift_assisted: usize,
    assisted_pred: &BTreeMap<usize, String>,
) {
    for &wp in word_positions {
        let (start, end) = seq.word_spans[wp - 1];
        match mode {
            EligibilityMode::Word => {
                let base_ok = (start..end)
                    .all(|t| base_pred.get(&(t + shift_base)) == Some(&seq.tokens[t]));
                let assisted_ok = (start..end)
                    .all(|t| assisted_pred.get(&(t + shift_assisted)) == Some(&seq.tokens[t]));
                counts.increment(base_ok, assisted_ok);
            }
            EligibilityMode::Token => {
                for t in start..end {
                    let base_ok = base_pred.get(&(t + shift_base)) == Some(&seq.tokens[t]);
                    let assisted_ok =
                        assisted_pred.get(&(t + shift_assisted)) == Some(&seq.tokens[t]);
                    counts.increment(base_ok, assisted_ok);
                }
            }
        }
    }
}

/// Score one (document, summary) pair with BLANC-help.
pub fn score_help(
    document: &Document,
    summary_text: &str,
    params: &BlancParams,
    backend: &dyn MaskedLm,
    tok: &Tokenizer,
) -> Result<BlancScore> {
    params.validate()?;
    let summary_sentences = split_sentences(summary_text);
    let mut counts = UnmaskingCounts::default();
    let mut guard_skips = 0u32;
    let mut overlength_skips = 0u32;

    for (sentence_index, sentence) in document.sentences.iter().enumerate() {
        let retained = match apply_guard(sentence, &summary_sentences, params.guard) {
            GuardDecision::Skip => {
                guard_skips += 1;
                continue;
            }
            GuardDecision::Proceed(s) => s,
        };

        let words: Vec<&str> = sentence.split_whitespace().collect();
        let plans = periodic_plans(&words, sentence_index, params, tok);
        if plans.is_empty() {
            continue;
        }
        let seq = tok.sequence(&words);
        if seq.tokens.len() + 3 > backend.max_input_len() {
            overlength_skips += 1;
            continue;
        }

        let summary_tokens = tok.sequence_from_text(&retained.join(" "));
        let filler = build_filler(&summary_tokens);

        for plan in &plans {
            let sample = apply_mask(&seq, plan)?;
            let (filler_sample, shift_f) =
                assemble_with_prefix(&filler, &sample, backend.max_input_len())?;
            let (summary_sample, shift_s) =
                assemble_with_prefix(&summary_tokens, &sample, backend.max_input_len())?;
            let base_pred = backend.predict_masked(&filler_sample)?;
            let assisted_pred = backend.predict_masked(&summary_sample)?;
            count_events(
                &mut counts,
                params.mode,
                &seq,
                &plan.positions,
                shift_f,
                &base_pred,
                shift_s,
                &assisted_pred,
            );
        }
    }

    if counts.total() == 0 {
        return Err(Error::NoMaskableContent { guard_skips });
    }
    Ok(BlancScore {
        value: (counts.s01 as f64 - counts.s10 as f64) / counts.total() as f64,
        counts,
        variant: Variant::Help,
        params: params.clone(),
        guard_skips,
        overlength_skips,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm_backend::CopycatLm;

    fn setup() -> (BlancParams, CopycatLm, Tokenizer) {
        (BlancParams::default(), CopycatLm::new(512), Tokenizer::default())
    }

    #[test]
    fn formula_from_counts() {
        let c = UnmaskingCounts {
            s00: 10,
            s11: 5,
            s01: 3,
            s10: 1,
        };
        let v = blanc_from_counts(&c).unwrap();
        assert!((v - 2.0 / 19.0).abs() < 1e-12);
        assert!((c.assisted_accuracy() - 8.0 / 19.0).abs() < 1e-12);
        assert!((c.base_accuracy() - 6.0 / 19.0).abs() < 1e-12);
    }

    #[test]
    fn equal_crossed_counts_give_zero() {
        let c = UnmaskingCounts {
            s00: 7,
            s11: 2,
            s01: 4,
            s10: 4,
        };
        assert_eq!(blanc_from_counts(&c).unwrap(), 0.0);
    }

    #[test]
    fn all_gain_gives_one() {
        let c = UnmaskingCounts {
            s00: 0,
            s11: 0,
            s01: 4,
            s10: 0,
        };
        assert_eq!(blanc_from_counts(&c).unwrap(), 1.0);
    }

    #[test]
    fn zero_total_is_an_error() {
        assert!(matches!(
            blanc_from_counts(&UnmaskingCounts::default()),
            Err(Error::NoMaskableContent { .. })
        ));
    }

    #[test]
    fn guard_rules() {
        let summary = vec!["Wolves howled.".to_string(), "It was cold.".to_string()];
        assert_eq!(
            apply_guard("Wolves howled.", &summary, GuardMode::SkipSentence),
            GuardDecision::Skip
        );
        assert_eq!(
            apply_guard("Wolves howled.", &summary, GuardMode::DropCopy),
            GuardDecision::Proceed(vec!["It was cold.".to_string()])
        );
        for guard in [GuardMode::Off, GuardMode::SkipSentence, GuardMode::DropCopy] {
            assert_eq!(
                apply_guard("Snow fell.", &summary, guard),
                GuardDecision::Proceed(summary.clone())
            );
        }
    }

    #[test]
    fn copycat_oracle_example() {
        let (params, backend, tok) = setup();
        let doc = Document::new("d", "wolves howled loudly overnight");
        let score = score_help(&doc, "wolves howled at night", &params, &backend, &tok).unwrap();
        assert_eq!(score.counts.s01, 2);
        assert_eq!(score.counts.s00, 2);
        assert_eq!(score.counts.s10, 0);
        assert_eq!(score.counts.s11, 0);
        assert_eq!(score.value, 0.5);
    }

    #[test]
    fn period_summary_scores_exactly_zero() {
        let (params, backend, tok) = setup();
        let doc = Document::new("d", "wolves howled loudly overnight");
        let score = score_help(&doc, ". . . .", &params, &backend, &tok).unwrap();
        assert_eq!(score.value, 0.0);
        assert_eq!(score.counts.s01, 0);
        assert_eq!(score.counts.s10, 0);
    }

    #[test]
    fn guard_can_force_no_maskable_content() {
        let (mut params, backend, tok) = setup();
        params.guard = GuardMode::SkipSentence;
        let doc = Document::new("d", "Wolves howled loudly overnight.");
        let err = score_help(
            &doc,
            "Wolves howled loudly overnight.",
            &params,
            &backend,
            &tok,
        )
        .unwrap_err();
        match err {
            Error::NoMaskableContent { guard_skips } => assert_eq!(guard_skips, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_summary_scores_zero() {
        let (params, backend, tok) = setup();
        let doc = Document::new("d", "wolves howled loudly overnight");
        let score = score_help(&doc, "", &params, &backend, &tok).unwrap();
        assert_eq!(score.value, 0.0);
    }

    #[test]
    fn helpful_word_cannot_decrease_score() {
        let (params, backend, tok) = setup();
        let doc = Document::new("d", "wolves howled loudly overnight");
        let before = score_help(&doc, "wolves howled", &params, &backend, &tok).unwrap();
        let after = score_help(&doc, "wolves howled loudly", &params, &backend, &tok).unwrap();
        assert!(after.value >= before.value);
    }

    #[test]
    fn overlength_sentence_is_skipped_and_reported() {
        let params = BlancParams::default();
        let tok = Tokenizer::default();
        let backend = CopycatLm::new(8);
        // First sentence fits; second is far over the 8-token budget.
        let long: Vec<String> = (0..20).map(|i| format!("Mountain{i}")).collect();
        let text = format!("wolves howled loudly overnight. {}.", long.join(" "));
        let doc = Document::new("d", text);
        let score = score_help(&doc, "wolves howled", &params, &backend, &tok).unwrap();
        assert_eq!(score.overlength_skips, 1);
        assert_eq!(score.counts.total(), 4);
    }
}
