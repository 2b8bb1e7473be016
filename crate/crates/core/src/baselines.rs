//! Control-summary generators, the summary deterioration experiment, and
//! the Jensen-Shannon divergence baseline.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blanc_help::score_help;
use crate::corpus::{split_sentences, Document};
use crate::error::{Error, Result};
use crate::lm_backend::MaskedLm;
use crate::masking::BlancParams;
use crate::tokenizer::Tokenizer;

const STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepFlags {
    pub filter_stopwords: bool,
    pub stem: bool,
}

impl Default for PrepFlags {
    fn default() -> Self {
        Self {
            filter_stopwords: true,
            stem: true,
        }
    }
}

/// A normalized unigram distribution over preprocessed terms.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramDistribution {
    probabilities: BTreeMap<String, f64>,
    pub preprocessing: PrepFlags,
}

impl UnigramDistribution {
    pub fn from_text(text: &str, prep: PrepFlags) -> Result<Self> {
        let terms = preprocess(text, prep);
        if terms.is_empty() {
            return Err(Error::DegenerateInput(
                "no terms retained after preprocessing".into(),
            ));
        }
        let mut counts: BTreeMap<String, f64> = BTreeMap::new();
        for term in &terms {
            *counts.entry(term.clone()).or_insert(0.0) += 1.0;
        }
        let total = terms.len() as f64;
        for v in counts.values_mut() {
            *v /= total;
        }
        Ok(Self {
            probabilities: counts,
            preprocessing: prep,
        })
    }

    pub fn probabilities(&self) -> &BTreeMap<String, f64> {
        &self.probabilities
    }
}

/// Lowercase, split on non-alphanumeric characters, optionally filter
/// stopwords and apply the suffix-stripping stemmer.
pub fn preprocess(text: &str, prep: PrepFlags) -> Vec<String> {
    let stopwords: BTreeSet<&str> = STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .filter(|t| !prep.filter_stopwords || !stopwords.contains(t))
        .map(|t| if prep.stem { stem(t) } else { t.to_string() })
        .collect()
}

/// Fixed suffix-stripping stemmer. Rules, applied once in order:
/// `-sses` -> `-ss`; `-ies` -> `-y`; `-s` dropped (not after `s`);
/// then `-ing`, `-ed`, or `-ly` dropped when enough stem remains.
pub fn stem(word: &str) -> String {
    let mut w = word.to_string();
    if let Some(base) = w.strip_suffix("sses") {
        w = format!("{base}ss");
    } else if let Some(base) = w.strip_suffix("ies") {
        if base.len() >= 2 {
            w = format!("{base}y");
        }
    } else if w.ends_with('s') && !w.ends_with("ss") && w.len() > 3 {
        w.truncate(w.len() - 1);
    }
    if let Some(base) = w.strip_suffix("ing") {
        if base.len() >= 3 {
            w = base.to_string();
        }
    } else if let Some(base) = w.strip_suffix("ed") {
        if base.len() >= 3 {
            w = base.to_string();
        }
    } else if let Some(base) = w.strip_suffix("ly") {
        if base.len() >= 3 {
            w = base.to_string();
        }
    }
    w
}

/// Jensen-Shannon divergence between the summary and document unigram
/// distributions: `JS(P,Q) = KL(P||M)/2 + KL(Q||M)/2` with `M = (P+Q)/2`,
/// natural log. Finite without smoothing. The quality score exposed to
/// the harness is the negation, see [`neg_js_quality`].
pub fn js_divergence(summary_text: &str, document: &Document, prep: PrepFlags) -> Result<f64> {
    let p = UnigramDistribution::from_text(summary_text, prep)?;
    let q = UnigramDistribution::from_text(&document.text, prep)?;
    Ok(js_between(&p, &q))
}

pub fn js_between(p: &UnigramDistribution, q: &UnigramDistribution) -> f64 {
    let mut terms: BTreeSet<&String> = p.probabilities.keys().collect();
    terms.extend(q.probabilities.keys());
    let mut js = 0.0;
    for term in terms {
        let pv = p.probabilities.get(term).copied().unwrap_or(0.0);
        let qv = q.probabilities.get(term).copied().unwrap_or(0.0);
        let m = 0.5 * (pv + qv);
        if pv > 0.0 {
            js += 0.5 * pv * (pv / m).ln();
        }
        if qv > 0.0 {
            js += 0.5 * qv * (qv / m).ln();
        }
    }
    js
}

/// Negated JS divergence, so that higher is better.
pub fn neg_js_quality(summary_text: &str, document: &Document, prep: PrepFlags) -> Result<f64> {
    js_divergence(summary_text, document, prep).map(|js| -js)
}

/// Literal symmetrized-KL reading, `(KL(P||Q) + KL(Q||P)) / 2`, made
/// finite by add-one smoothing over the union vocabulary.
pub fn symmetrized_kl_smoothed(
    summary_text: &str,
    document: &Document,
    prep: PrepFlags,
) -> Result<f64> {
    let p_terms = preprocess(summary_text, prep);
    let q_terms = preprocess(&document.text, prep);
    if p_terms.is_empty() || q_terms.is_empty() {
        return Err(Error::DegenerateInput(
            "no terms retained after preprocessing".into(),
        ));
    }
    let vocab: BTreeSet<&String> = p_terms.iter().chain(q_terms.iter()).collect();
    let smoothed = |terms: &[String]| -> BTreeMap<String, f64> {
        let mut counts: BTreeMap<String, f64> = vocab.iter().map(|t| ((*t).clone(), 1.0)).collect();
        for t in terms {
            *counts.get_mut(t).unwrap() += 1.0;
        }
        let total: f64 = counts.values().sum();
        counts.into_iter().map(|(k, v)| (k, v / total)).collect()
    };
    let p = smoothed(&p_terms);
    let q = smoothed(&q_terms);
    let kl = |a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>| -> f64 {
        a.iter().map(|(t, &pv)| pv * (pv / b[t]).ln()).sum()
    };
    Ok(0.5 * (kl(&p, &q) + kl(&q, &p)))
}

/// Uniformly sampled document words, joined by spaces, stopping before
/// the target character length would be exceeded.
pub fn random_words_summary(document: &Document, target_char_len: usize, seed: u64) -> String {
    let words: Vec<&str> = document.text.split_whitespace().collect();
    if words.is_empty() || target_char_len == 0 {
        return String::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    loop {
        let word = words[rng.gen_range(0..words.len())];
        let added = if out.is_empty() {
            word.chars().count()
        } else {
            word.chars().count() + 1
        };
        if out.chars().count() + added > target_char_len {
            break;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Distinct document sentences in random order, appended until the target
/// length is reached or the sentences are exhausted.
pub fn random_sentences_summary(document: &Document, target_char_len: usize, seed: u64) -> String {
    let mut order: Vec<usize> = (0..document.sentences.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut out = String::new();
    for idx in order {
        if !out.is_empty() && out.chars().count() >= target_char_len {
            break;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&document.sentences[idx]);
    }
    out
}

/// Replace the chosen sentences (1-based indices into a 3-sentence
/// summary) with random-words spans of equal character length drawn from
/// the document.
pub fn spoil_summary(
    summary: &str,
    replace_indices: &BTreeSet<usize>,
    document: &Document,
    seed: u64,
) -> Result<String> {
    let sentences = split_sentences(summary);
    if sentences.len() != 3 {
        return Err(Error::Precondition(format!(
            "spoil_summary needs a 3-sentence summary, got {}",
            sentences.len()
        )));
    }
    if replace_indices.iter().any(|&i| !(1..=3).contains(&i)) {
        return Err(Error::Precondition(
            "replacement indices must lie in 1..=3".into(),
        ));
    }
    let spoiled: Vec<String> = sentences
        .iter()
        .enumerate()
        .map(|(i, sentence)| {
            if replace_indices.contains(&(i + 1)) {
                random_words_summary(
                    document,
                    sentence.chars().count(),
                    seed.wrapping_add(i as u64),
                )
            } else {
                sentence.clone()
            }
        })
        .collect();
    Ok(spoiled.join(" "))
}

/// One row of the deterioration experiment: the mean score over all
/// C(3,k) replacement choices, two seeded runs each.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeteriorationRow {
    pub doc_id: String,
    pub pair_index: usize,
    pub spoiled_sentences: usize,
    pub mean: f64,
    pub scores: Vec<f64>,
    /// The k = 0 score of the same pair, used for sorting.
    pub original: f64,
}

#[derive(Debug, Clone)]
pub struct PairError {
    pub pair_index: usize,
    pub doc_id: String,
    pub message: String,
}

/// Spoil each 3-sentence summary with k = 0..=3 random-words sentence
/// replacements and average BLANC-help over all choices, two runs each.
/// Rows come back sorted by the original (k = 0) score, descending.
/// Scorer errors are collected per pair; the batch continues.
pub fn deterioration_experiment(
    pairs: &[(Document, String)],
    params: &BlancParams,
    backend: &dyn MaskedLm,
    seed: u64,
    tok: &Tokenizer,
) -> (Vec<DeteriorationRow>, Vec<PairError>) {
    let mut rows = Vec::new();
    let mut errors = Vec::new();

    'pairs: for (pair_index, (document, summary)) in pairs.iter().enumerate() {
        let mut pair_rows = Vec::new();
        let original = match score_help(document, summary, params, backend, tok) {
            Ok(score) => score.value,
            Err(e) => {
                errors.push(PairError {
                    pair_index,
                    doc_id: document.id.clone(),
                    message: e.to_string(),
                });
                continue;
            }
        };
        for k in 0..=3usize {
            let mut scores = Vec::new();
            if k == 0 {
                scores.push(original);
            } else {
                for combo in combinations_of_three(k) {
                    for run in 0..2u64 {
                        let combo_seed = mix_seed(seed, pair_index as u64, k as u64, &combo, run);
                        let spoiled = match spoil_summary(summary, &combo, document, combo_seed) {
                            Ok(s) => s,
                            Err(e) => {
                                errors.push(PairError {
                                    pair_index,
                                    doc_id: document.id.clone(),
                                    message: e.to_string(),
                                });
                                continue 'pairs;
                            }
                        };
                        match score_help(document, &spoiled, params, backend, tok) {
                            Ok(score) => scores.push(score.value),
                            Err(e) => {
                                errors.push(PairError {
                                    pair_index,
                                    doc_id: document.id.clone(),
                                    message: e.to_string(),
                                });
                                continue 'pairs;
                            }
                        }
                    }
                }
            }
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            pair_rows.push(DeteriorationRow {
                doc_id: document.id.clone(),
                pair_index,
                spoiled_sentences: k,
                mean,
                scores,
                original,
            });
        }
        rows.extend(pair_rows);
    }

    rows.sort_by(|a, b| {
        b.original
            .partial_cmp(&a.original)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.pair_index.cmp(&b.pair_index))
            .then(a.spoiled_sentences.cmp(&b.spoiled_sentences))
    });
    (rows, errors)
}

fn combinations_of_three(k: usize) -> Vec<BTreeSet<usize>> {
    let all = [1usize, 2, 3];
    let mut combos = Vec::new();
    for mask in 0u8..8 {
        let set: BTreeSet<usize> = all
            .iter()
            .filter(|&&i| mask & (1 << (i - 1)) != 0)
            .copied()
            .collect();
        if set.len() == k {
            combos.push(set);
        }
    }
    combos
}

fn mix_seed(seed: u64, pair: u64, k: u64, combo: &BTreeSet<usize>, run: u64) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for part in [pair, k, run, combo.iter().map(|&i| 1u64 << i).sum::<u64>()] {
        h = h
            .wrapping_mul(0x100_0000_01b3)
            .wrapping_add(part)
            .rotate_left(17);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm_backend::CopycatLm;

    const LN2: f64 = std::f64::consts::LN_2;

    fn no_prep() -> PrepFlags {
        PrepFlags {
            filter_stopwords: false,
            stem: false,
        }
    }

    #[test]
    fn identical_distributions_give_zero() {
        let doc = Document::new("d", "wolves howled loudly");
        assert!(js_divergence("wolves howled loudly", &doc, no_prep()).unwrap() < 1e-15);
        assert_eq!(neg_js_quality("wolves howled loudly", &doc, no_prep()).unwrap(), -0.0);
    }

    #[test]
    fn disjoint_support_gives_ln2() {
        let doc = Document::new("d", "mountain forest river");
        let js = js_divergence("wolves howled loudly", &doc, no_prep()).unwrap();
        assert!((js - LN2).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_mixture_value() {
        // P = {a: 1}, Q = {a: 1/2, b: 1/2}
        let doc = Document::new("d", "aq bq");
        let js = js_divergence("aq", &doc, no_prep()).unwrap();
        assert!((js - 0.215_761_554_338_835_65).abs() < 1e-12);
    }

    #[test]
    fn js_is_symmetric() {
        let p = UnigramDistribution::from_text("wolves wolves howled night", no_prep()).unwrap();
        let q = UnigramDistribution::from_text("howled loudly loudly overnight", no_prep()).unwrap();
        assert!((js_between(&p, &q) - js_between(&q, &p)).abs() < 1e-12);
    }

    #[test]
    fn empty_side_is_degenerate() {
        let doc = Document::new("d", "wolves howled");
        assert!(matches!(
            js_divergence("", &doc, no_prep()),
            Err(Error::DegenerateInput(_))
        ));
        let empty_doc = Document::new("d", "");
        assert!(matches!(
            js_divergence("wolves", &empty_doc, no_prep()),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn stopwords_and_stemming_apply() {
        let terms = preprocess("The wolves were howling loudly", PrepFlags::default());
        assert!(!terms.contains(&"the".to_string()));
        assert!(terms.contains(&"wolve".to_string()) || terms.contains(&"wolves".to_string()));
        assert!(terms.contains(&"howl".to_string()));
    }

    #[test]
    fn symmetrized_kl_is_finite_on_disjoint_support() {
        let doc = Document::new("d", "mountain forest river");
        let v = symmetrized_kl_smoothed("wolves howled", &doc, no_prep()).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn random_words_target_zero_is_empty() {
        let doc = Document::new("d", "wolves howled loudly");
        assert_eq!(random_words_summary(&doc, 0, 1), "");
    }

    #[test]
    fn random_words_is_deterministic() {
        let doc = Document::new("d", "wolves howled loudly overnight in the forest");
        assert_eq!(
            random_words_summary(&doc, 30, 9),
            random_words_summary(&doc, 30, 9)
        );
    }

    #[test]
    fn random_words_length_is_close_to_target() {
        let doc = Document::new("d", "wolves howled loudly overnight in the winter forest");
        let longest = doc
            .text
            .split_whitespace()
            .map(|w| w.chars().count())
            .max()
            .unwrap();
        for seed in 0..50 {
            let out = random_words_summary(&doc, 40, seed);
            let len = out.chars().count();
            assert!(len <= 40, "seed {seed}: {len}");
            assert!(len + longest + 1 > 40, "seed {seed}: {len}");
            for word in out.split_whitespace() {
                assert!(doc.text.split_whitespace().any(|w| w == word));
            }
        }
    }

    #[test]
    fn random_sentences_minimum_one() {
        let doc = Document::new("d", "Wolves howled loudly. Winter came early.");
        let out = random_sentences_summary(&doc, 1, 3);
        assert!(split_sentences(&out).len() == 1);
    }

    #[test]
    fn random_sentences_exhaustion_takes_all() {
        let doc = Document::new("d", "Wolves howled loudly. Winter came early. Forests fell silent.");
        let out = random_sentences_summary(&doc, doc.char_len * 2, 3);
        assert_eq!(split_sentences(&out).len(), 3);
        assert_eq!(random_sentences_summary(&doc, doc.char_len * 2, 3), out);
    }

    #[test]
    fn spoil_nothing_keeps_summary_joined() {
        let doc = Document::new("d", "Wolves howled loudly overnight in the forest.");
        let summary = "Wolves howled. Winter came. Forests slept.";
        let out = spoil_summary(summary, &BTreeSet::new(), &doc, 5).unwrap();
        assert_eq!(out, summary.to_string());
    }

    #[test]
    fn spoil_all_preserves_length_roughly() {
        let doc = Document::new("d", "Wolves howled loudly overnight in the cold winter forest.");
        let summary = "Wolves howled loudly. Winter came early. Forests fell silent.";
        let out = spoil_summary(summary, &[1, 2, 3].into(), &doc, 5).unwrap();
        let diff = (out.chars().count() as i64 - summary.chars().count() as i64).abs();
        // each replaced span may undershoot by up to one word
        assert!(diff <= 3 * 11, "diff {diff}");
    }

    #[test]
    fn spoil_leaves_unchosen_sentences_alone() {
        let doc = Document::new("d", "Wolves howled loudly overnight in the cold winter forest.");
        let summary = "Wolves howled loudly. Winter came early. Forests fell silent.";
        let a = spoil_summary(summary, &[1].into(), &doc, 5).unwrap();
        let b = spoil_summary(summary, &[1].into(), &doc, 99).unwrap();
        assert!(a.contains("Winter came early.") && a.contains("Forests fell silent."));
        assert!(b.contains("Winter came early.") && b.contains("Forests fell silent."));
        assert_ne!(
            a.split(". ").next(),
            b.split(". ").next(),
            "different seeds should usually differ in the replaced span"
        );
    }

    #[test]
    fn spoil_rejects_wrong_sentence_count() {
        let doc = Document::new("d", "Wolves howled.");
        assert!(matches!(
            spoil_summary("One sentence only.", &[1].into(), &doc, 5),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn deterioration_row_counts() {
        let backend = CopycatLm::new(512);
        let tok = Tokenizer::default();
        let params = BlancParams::default();
        let doc = Document::new(
            "d",
            "Wolves howled loudly overnight. Winter forest mountain river. Question answer sentence letter.",
        );
        let summary = "Wolves howled overnight. Winter mountain river. Question sentence letter.";
        let pairs = vec![(doc, summary.to_string())];
        let (rows, errors) = deterioration_experiment(&pairs, &params, &backend, 7, &tok);
        assert!(errors.is_empty(), "{errors:?}");
        assert_eq!(rows.len(), 4);
        let by_k: BTreeMap<usize, &DeteriorationRow> =
            rows.iter().map(|r| (r.spoiled_sentences, r)).collect();
        assert_eq!(by_k[&0].scores.len(), 1);
        assert_eq!(by_k[&0].mean, by_k[&0].original);
        assert_eq!(by_k[&1].scores.len(), 6); // C(3,1) * 2 runs
        assert_eq!(by_k[&2].scores.len(), 6);
        assert_eq!(by_k[&3].scores.len(), 2);
    }
}
