//! BLANC-tune: build a tiny masked dataset from the summary, fine-tune a
//! copy of the model on it, and compare tuned vs base unmasking on bare
//! document sentences.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::lm_backend::{CorruptionKind, MaskedLm, MaskedSample, MASK_TOKEN};
use crate::masking::{
    apply_mask, assemble_bare, eligible_positions, periodic_plans, BlancParams,
};
use crate::blanc_help::{count_events, BlancScore, UnmaskingCounts, Variant};
use crate::tokenizer::{TokenSequence, Tokenizer};

/// Tuning samples derived from one summary. Within each pass, every
/// eligible summary position is selected exactly once across samples.
#[derive(Debug, Clone)]
pub struct TuningSet {
    pub samples: Vec<MaskedSample>,
    pub passes: u32,
    pub seed: u64,
}

/// Build the tuning set: per pass, shuffle the eligible positions and
/// consume them in chunks of `N_mask = max(1, int(N_words * p_mask))`,
/// each chunk producing one corrupted copy of the summary. Each selected
/// position is independently masked (0.8), replaced by a random token
/// (0.1), or left unchanged (0.1).
pub fn build_tuning_set(
    summary_text: &str,
    params: &BlancParams,
    seed: u64,
    tok: &Tokenizer,
    backend: &dyn MaskedLm,
) -> TuningSet {
    let words: Vec<&str> = summary_text.split_whitespace().collect();
    let eligible = eligible_positions(&words, params, tok);
    let mut samples = Vec::new();
    if !eligible.is_empty() {
        let n_mask = ((words.len() as f64 * params.p_mask) as usize).max(1);
        let base_seq = tok.sequence(&words);
        let vocab = backend.vocab_tokens();
        // Fall back to the summary's own tokens when the backend exposes
        // no vocabulary.
        let pool: Vec<String> = if vocab.is_empty() {
            base_seq.tokens.clone()
        } else {
            vocab
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..params.tune_passes {
            let mut positions = eligible.clone();
            positions.shuffle(&mut rng);
            for chunk in positions.chunks(n_mask) {
                samples.push(corrupt(&base_seq, chunk, &mut rng, &pool));
            }
        }
    }
    TuningSet {
        samples,
        passes: params.tune_passes,
        seed,
    }
}

fn corrupt(
    seq: &TokenSequence,
    word_positions: &[usize],
    rng: &mut ChaCha8Rng,
    pool: &[String],
) -> MaskedSample {
    let mut sample = MaskedSample::unmasked(seq.clone());
    for &wp in word_positions {
        let (start, end) = seq.word_spans[wp - 1];
        let kind = match rng.gen::<f64>() {
            r if r < 0.8 => CorruptionKind::Masked,
            r if r < 0.9 => CorruptionKind::Random,
            _ => CorruptionKind::Unchanged,
        };
        for t in start..end {
            sample.targets.insert(t, seq.tokens[t].clone());
            sample.corruption_kinds.insert(t, kind);
            match kind {
                CorruptionKind::Masked => sample.input.tokens[t] = MASK_TOKEN.to_string(),
                CorruptionKind::Random => {
                    sample.input.tokens[t] = pool[rng.gen_range(0..pool.len())].clone();
                }
                CorruptionKind::Unchanged => {}
            }
        }
    }
    sample
}

/// Score one (document, summary) pair with BLANC-tune. The inference
/// masking period is `int(1 / p_mask)`, i.e. 6 at the default 0.15.
pub fn score_tune(
    document: &Document,
    summary_text: &str,
    params: &BlancParams,
    backend: &dyn MaskedLm,
    seed: u64,
    tok: &Tokenizer,
) -> Result<BlancScore> {
    params.validate()?;
    if !backend.supports_tuning() {
        return Err(Error::TuningUnsupported(backend.model_id().to_string()));
    }

    let tuning_set = build_tuning_set(summary_text, params, seed, tok, backend);
    let tuned: Option<Box<dyn MaskedLm>> = if tuning_set.samples.is_empty() {
        // Nothing eligible to tune on: tuned model equals the base model.
        None
    } else {
        Some(backend.fine_tune(&tuning_set.samples, params.tune_passes, seed)?)
    };

    let mut inference_params = params.clone();
    inference_params.masking_period = ((1.0 / params.p_mask) as usize).max(1);

    let mut counts = UnmaskingCounts::default();
    let mut overlength_skips = 0u32;

    for (sentence_index, sentence) in document.sentences.iter().enumerate() {
        let words: Vec<&str> = sentence.split_whitespace().collect();
        let plans = periodic_plans(&words, sentence_index, &inference_params, tok);
        if plans.is_empty() {
            continue;
        }
        let seq = tok.sequence(&words);
        if seq.tokens.len() + 2 > backend.max_input_len() {
            overlength_skips += 1;
            continue;
        }
        for plan in &plans {
            let sample = apply_mask(&seq, plan)?;
            let (bare, shift) = assemble_bare(&sample, backend.max_input_len())?;
            let base_pred = backend.predict_masked(&bare)?;
            let tuned_pred = match &tuned {
                Some(model) => model.predict_masked(&bare)?,
                None => base_pred.clone(),
            };
            count_events(
                &mut counts,
                params.mode,
                &seq,
                &plan.positions,
                shift,
                &base_pred,
                shift,
                &tuned_pred,
            );
        }
    }

    if counts.total() == 0 {
        return Err(Error::NoMaskableContent { guard_skips: 0 });
    }
    Ok(BlancScore {
        value: (counts.s01 as f64 - counts.s10 as f64) / counts.total() as f64,
        counts,
        variant: Variant::Tune,
        params: params.clone(),
        guard_skips: 0,
        overlength_skips,
    })
}
