//! Pluggable masked-token predictor interface, plus the deterministic
//! "copycat" reference backend used as the test oracle.
//!
//! The copycat rule: a masked position is predicted as its ground-truth
//! token if and only if that token occurs unmasked anywhere else in the
//! input sequence, or is in the backend's memory. Otherwise the backend
//! predicts the fixed UNK sentinel. Fine-tuning returns a copy whose
//! memory additionally holds every ground-truth target token of the
//! tuning samples.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::TokenSequence;

pub const MASK_TOKEN: &str = "[MASK]";
/// Reserved sentinel; never equal to a corpus token.
pub const UNK_TOKEN: &str = "[UNK]";
pub const START_TOKEN: &str = "[CLS]";
pub const SEP_TOKEN: &str = "[SEP]";
pub const END_TOKEN: &str = "[END]";

pub const DEFAULT_MAX_INPUT_LEN: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    Masked,
    Random,
    Unchanged,
}

/// A token sequence with some positions obscured or corrupted, together
/// with the ground truth for each target position.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedSample {
    pub input: TokenSequence,
    pub targets: BTreeMap<usize, String>,
    pub corruption_kinds: BTreeMap<usize, CorruptionKind>,
}

impl MaskedSample {
    pub fn unmasked(input: TokenSequence) -> Self {
        Self {
            input,
            targets: BTreeMap::new(),
            corruption_kinds: BTreeMap::new(),
        }
    }
}

/// Abstract masked language model.
///
/// `predict_masked` is read-only and safe for concurrent calls on one
/// handle. `fine_tune` returns a new independent handle and leaves the
/// base handle untouched.
pub trait MaskedLm: Send + Sync {
    fn model_id(&self) -> &str;
    fn max_input_len(&self) -> usize;
    fn is_deterministic(&self) -> bool;
    fn supports_tuning(&self) -> bool;

    /// Predict one token per target position.
    fn predict_masked(&self, sample: &MaskedSample) -> Result<BTreeMap<usize, String>>;

    fn fine_tune(
        &self,
        samples: &[MaskedSample],
        passes: u32,
        seed: u64,
    ) -> Result<Box<dyn MaskedLm>>;

    /// Tokens random corruption may draw from, sentinels excluded.
    fn vocab_tokens(&self) -> Vec<String>;
}

/// Deterministic reference backend.
#[derive(Debug, Clone)]
pub struct CopycatLm {
    max_input_len: usize,
    memory: BTreeSet<String>,
}

impl CopycatLm {
    pub fn new(max_input_len: usize) -> Self {
        Self::with_memory(BTreeSet::new(), max_input_len)
    }

    pub fn with_memory(memory: BTreeSet<String>, max_input_len: usize) -> Self {
        assert!(max_input_len >= 2, "max_input_len must be at least 2");
        Self {
            max_input_len,
            memory,
        }
    }

    pub fn memory(&self) -> &BTreeSet<String> {
        &self.memory
    }
}

impl MaskedLm for CopycatLm {
    fn model_id(&self) -> &str {
        "reference"
    }

    fn max_input_len(&self) -> usize {
        self.max_input_len
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn supports_tuning(&self) -> bool {
        true
    }

    fn predict_masked(&self, sample: &MaskedSample) -> Result<BTreeMap<usize, String>> {
        let len = sample.input.tokens.len();
        if len > self.max_input_len {
            return Err(Error::InputTooLong {
                len,
                max: self.max_input_len,
            });
        }
        let mut out = BTreeMap::new();
        for (&pos, truth) in &sample.targets {
            if pos >= len {
                return Err(Error::PlanInconsistency(format!(
                    "target position {pos} outside input of {len} tokens"
                )));
            }
            let seen_elsewhere = sample
                .input
                .tokens
                .iter()
                .enumerate()
                .any(|(q, t)| q != pos && t == truth);
            let prediction = if seen_elsewhere || self.memory.contains(truth) {
                truth.clone()
            } else {
                UNK_TOKEN.to_string()
            };
            out.insert(pos, prediction);
        }
        Ok(out)
    }

    fn fine_tune(
        &self,
        samples: &[MaskedSample],
        _passes: u32,
        _seed: u64,
    ) -> Result<Box<dyn MaskedLm>> {
        if samples.is_empty() {
            return Err(Error::EmptyTuningSet);
        }
        let mut tuned = self.clone();
        for sample in samples {
            tuned
                .memory
                .extend(sample.targets.values().cloned());
        }
        Ok(Box::new(tuned))
    }

    fn vocab_tokens(&self) -> Vec<String> {
        self.memory.iter().cloned().collect()
    }
}

/// Reference backend with preset memory and the default length budget.
pub fn make_reference_backend(memory: BTreeSet<String>) -> CopycatLm {
    CopycatLm::with_memory(memory, DEFAULT_MAX_INPUT_LEN)
}

/// Resolve a backend id: `reference` for the copycat oracle, or
/// `mlm:<model-name>` for a real masked-LM adapter plug-in (not bundled
/// in this build).
pub fn backend_from_id(id: &str, max_input_len: usize) -> Result<Box<dyn MaskedLm>> {
    if id == "reference" {
        return Ok(Box::new(CopycatLm::new(max_input_len)));
    }
    if id.starts_with("mlm:") {
        return Err(Error::BackendUnavailable(id.to_string()));
    }
    Err(Error::Validation(format!("unknown backend id '{id}'")))
}
