//! Periodic masking: eligibility, offset plans, filler construction, mask
//! application, and input assembly.
//!
//! Word indices are 1-based within each sentence, so the plan for offset
//! `i0` selects exactly the eligible positions `p` with
//! `(p - i0) % M == 0`. Across offsets 1..=M every eligible word lands in
//! exactly one plan.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm_backend::{
    CorruptionKind, MaskedSample, END_TOKEN, MASK_TOKEN, SEP_TOKEN, START_TOKEN,
};
use crate::tokenizer::{word_len, TokenSequence, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EligibilityMode {
    Word,
    Token,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardMode {
    Off,
    SkipSentence,
    DropCopy,
}

/// Scoring parameters shared by both measure variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlancParams {
    /// Masking period M.
    pub masking_period: usize,
    /// Minimum word length L_min for eligibility.
    pub min_word_len: usize,
    pub mode: EligibilityMode,
    /// Tuning-set masking probability (tune variant only).
    pub p_mask: f64,
    /// Number of tuning passes N.
    pub tune_passes: u32,
    pub guard: GuardMode,
    pub seed: u64,
}

impl Default for BlancParams {
    fn default() -> Self {
        Self {
            masking_period: 6,
            min_word_len: 4,
            mode: EligibilityMode::Word,
            p_mask: 0.15,
            tune_passes: 10,
            guard: GuardMode::Off,
            seed: 0,
        }
    }
}

impl BlancParams {
    pub fn validate(&self) -> Result<()> {
        if self.masking_period < 1 || self.min_word_len < 1 {
            return Err(Error::Validation(
                "masking period and minimum word length must be at least 1".into(),
            ));
        }
        if !(self.p_mask > 0.0 && self.p_mask <= 1.0) {
            return Err(Error::Validation("p_mask must be in (0, 1]".into()));
        }
        Ok(())
    }

    /// Compact identifier of the parameter set, used in score rows.
    pub fn fingerprint(&self) -> String {
        let mode = match self.mode {
            EligibilityMode::Word => "word",
            EligibilityMode::Token => "token",
        };
        let guard = match self.guard {
            GuardMode::Off => "off",
            GuardMode::SkipSentence => "skip_sentence",
            GuardMode::DropCopy => "drop_copy",
        };
        format!(
            "M{}-L{}-{}-p{}-N{}-guard_{}-s{}",
            self.masking_period,
            self.min_word_len,
            mode,
            self.p_mask,
            self.tune_passes,
            guard,
            self.seed
        )
    }
}

/// One (sentence, offset) masking configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskingPlan {
    pub sentence_index: usize,
    /// Offset i0 in 1..=M.
    pub offset: usize,
    /// 1-based word indices, strictly increasing.
    pub positions: Vec<usize>,
    /// Ground-truth word per position.
    pub truth: BTreeMap<usize, String>,
}

/// 1-based indices of words a plan may mask. Word mode: character length
/// (edge punctuation stripped) >= L_min. Token mode: additionally any word
/// the tokenizer splits into two or more tokens.
pub fn eligible_positions(words: &[&str], params: &BlancParams, tok: &Tokenizer) -> Vec<usize> {
    words
        .iter()
        .enumerate()
        .filter(|(_, w)| {
            word_len(w) >= params.min_word_len
                || (params.mode == EligibilityMode::Token && tok.is_composite(w))
        })
        .map(|(i, _)| i + 1)
        .collect()
}

/// One plan per offset with a non-empty position set; empty offsets are
/// omitted so no model call is made for them.
pub fn periodic_plans(
    words: &[&str],
    sentence_index: usize,
    params: &BlancParams,
    tok: &Tokenizer,
) -> Vec<MaskingPlan> {
    let eligible = eligible_positions(words, params, tok);
    let m = params.masking_period;
    (1..=m)
        .filter_map(|offset| {
            let positions: Vec<usize> = eligible
                .iter()
                .copied()
                .filter(|&p| p >= offset && (p - offset) % m == 0)
                .collect();
            if positions.is_empty() {
                return None;
            }
            let truth = positions
                .iter()
                .map(|&p| (p, words[p - 1].to_string()))
                .collect();
            Some(MaskingPlan {
                sentence_index,
                offset,
                positions,
                truth,
            })
        })
        .collect()
}

/// Same token count as the summary, every token a period.
pub fn build_filler(summary: &TokenSequence) -> TokenSequence {
    TokenSequence {
        tokens: vec![".".to_string(); summary.tokens.len()],
        word_spans: summary.word_spans.clone(),
    }
}

/// Replace every token of every planned word with the MASK sentinel,
/// recording the ground truth per masked token position.
pub fn apply_mask(seq: &TokenSequence, plan: &MaskingPlan) -> Result<MaskedSample> {
    let mut input = seq.clone();
    let mut targets = BTreeMap::new();
    let mut corruption_kinds = BTreeMap::new();
    for &word_pos in &plan.positions {
        let (start, end) = *seq
            .word_spans
            .get(word_pos - 1)
            .ok_or_else(|| {
                Error::PlanInconsistency(format!(
                    "word position {word_pos} outside sentence of {} words",
                    seq.word_spans.len()
                ))
            })?;
        for t in start..end {
            targets.insert(t, seq.tokens[t].clone());
            corruption_kinds.insert(t, CorruptionKind::Masked);
            input.tokens[t] = MASK_TOKEN.to_string();
        }
    }
    Ok(MaskedSample {
        input,
        targets,
        corruption_kinds,
    })
}

/// Two-segment assembly: `[CLS] prefix.. [SEP] sentence.. [END]`.
///
/// When the whole input would exceed `max_input_len` the prefix is
/// truncated from its end, never the sentence. Returns the assembled
/// sample and the shift added to sentence token positions.
pub fn assemble_with_prefix(
    prefix: &TokenSequence,
    sample: &MaskedSample,
    max_input_len: usize,
) -> Result<(MaskedSample, usize)> {
    let sentence_len = sample.input.tokens.len();
    let overhead = 3; // start + separator + end markers
    if sentence_len + overhead > max_input_len {
        return Err(Error::InputTooLong {
            len: sentence_len + overhead,
            max: max_input_len,
        });
    }
    let budget = max_input_len - overhead - sentence_len;
    let take = prefix.tokens.len().min(budget);
    let shift = take + 2;

    let mut tokens = Vec::with_capacity(shift + sentence_len + 1);
    tokens.push(START_TOKEN.to_string());
    tokens.extend(prefix.tokens[..take].iter().cloned());
    tokens.push(SEP_TOKEN.to_string());
    tokens.extend(sample.input.tokens.iter().cloned());
    tokens.push(END_TOKEN.to_string());
    let word_spans = (0..tokens.len()).map(|i| (i, i + 1)).collect();

    Ok((
        MaskedSample {
            input: TokenSequence { tokens, word_spans },
            targets: shift_keys(&sample.targets, shift),
            corruption_kinds: shift_keys(&sample.corruption_kinds, shift),
        },
        shift,
    ))
}

/// Single-segment assembly: `[CLS] sentence.. [END]`, shift 1.
pub fn assemble_bare(sample: &MaskedSample, max_input_len: usize) -> Result<(MaskedSample, usize)> {
    let sentence_len = sample.input.tokens.len();
    if sentence_len + 2 > max_input_len {
        return Err(Error::InputTooLong {
            len: sentence_len + 2,
            max: max_input_len,
        });
    }
    let mut tokens = Vec::with_capacity(sentence_len + 2);
    tokens.push(START_TOKEN.to_string());
    tokens.extend(sample.input.tokens.iter().cloned());
    tokens.push(END_TOKEN.to_string());
    let word_spans = (0..tokens.len()).map(|i| (i, i + 1)).collect();
    Ok((
        MaskedSample {
            input: TokenSequence { tokens, word_spans },
            targets: shift_keys(&sample.targets, 1),
            corruption_kinds: shift_keys(&sample.corruption_kinds, 1),
        },
        1,
    ))
}

fn shift_keys<V: Clone>(map: &BTreeMap<usize, V>, shift: usize) -> BTreeMap<usize, V> {
    map.iter().map(|(&k, v)| (k + shift, v.clone())).collect()
}
