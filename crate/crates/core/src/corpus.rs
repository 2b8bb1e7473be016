//! Corpus ingestion: JSONL loading, sentence segmentation, and length
//! statistics.
//!
//! JSONL schema (one object per line, UTF-8): required `id`, `text`,
//! `summary`; optional `summary_id`, `source`, `human_scores`
//! (annotator -> integer in 0..=4), `external_scores` (metric -> float).
//! Lines sharing an `id` are grouped into one record; unknown fields are
//! ignored.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");

fn abbreviation_set() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| {
        ABBREVIATIONS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect()
    })
}

/// A source text with its sentence segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub sentences: Vec<String>,
    /// Number of characters in `text`, whitespace included.
    pub char_len: usize,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Self {
            id: id.into(),
            sentences: split_sentences(&text),
            char_len: text.chars().count(),
            text,
        }
    }
}

/// A summary tied to a document, with optional human and external scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub id: String,
    pub doc_id: String,
    pub text: String,
    pub source: String,
    pub human_scores: Option<BTreeMap<String, u8>>,
    pub external_scores: Option<BTreeMap<String, f64>>,
}

impl SummaryRecord {
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub document: Document,
    pub summaries: Vec<SummaryRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawLine {
    id: String,
    text: String,
    summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    summary_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    human_scores: Option<BTreeMap<String, u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    external_scores: Option<BTreeMap<String, f64>>,
}

/// Load a JSONL corpus, grouping summaries by document id in first-seen
/// order.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusRecord>> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);

    let mut records: Vec<CorpusRecord> = Vec::new();
    let mut doc_index: HashMap<String, usize> = HashMap::new();
    let mut summary_ids: HashSet<String> = HashSet::new();

    for (line_no, line) in reader.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;

        let idx = match doc_index.get(&raw.id) {
            Some(&idx) => {
                if records[idx].document.text != raw.text {
                    return Err(Error::Validation(format!(
                        "document '{}' appears with two different texts (line {line_no})",
                        raw.id
                    )));
                }
                idx
            }
            None => {
                doc_index.insert(raw.id.clone(), records.len());
                records.push(CorpusRecord {
                    document: Document::new(raw.id.clone(), raw.text.clone()),
                    summaries: Vec::new(),
                });
                records.len() - 1
            }
        };

        let summary_id = raw
            .summary_id
            .unwrap_or_else(|| format!("{}#{}", raw.id, records[idx].summaries.len()));
        if !summary_ids.insert(summary_id.clone()) {
            return Err(Error::Validation(format!(
                "duplicate summary id '{summary_id}' (line {line_no})"
            )));
        }
        if let Some(scores) = &raw.human_scores {
            for (annotator, &score) in scores {
                if score > 4 {
                    return Err(Error::Validation(format!(
                        "human score {score} from '{annotator}' outside 0..=4 (line {line_no})"
                    )));
                }
            }
        }

        records[idx].summaries.push(SummaryRecord {
            id: summary_id,
            doc_id: raw.id,
            text: raw.summary,
            source: raw.source.unwrap_or_default(),
            human_scores: raw.human_scores,
            external_scores: raw.external_scores,
        });
    }

    Ok(records)
}

/// Serialize a corpus back to JSONL, one line per summary.
pub fn write_corpus(records: &[CorpusRecord], path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut writer = BufWriter::new(file);
    for record in records {
        for summary in &record.summaries {
            let raw = RawLine {
                id: record.document.id.clone(),
                text: record.document.text.clone(),
                summary: summary.text.clone(),
                summary_id: Some(summary.id.clone()),
                source: if summary.source.is_empty() {
                    None
                } else {
                    Some(summary.source.clone())
                },
                human_scores: summary.human_scores.clone(),
                external_scores: summary.external_scores.clone(),
            };
            serde_json::to_writer(&mut writer, &raw)
                .map_err(|e| Error::Validation(e.to_string()))?;
            writer.write_all(b"\n")?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Rule-based sentence segmentation. Splits after terminal punctuation
/// (`.` `!` `?`, plus any closing quotes/brackets) followed by whitespace
/// and an uppercase letter or opening quote. Periods after known
/// abbreviations or single-letter initials do not split. Sentences are
/// trimmed; only whitespace is dropped between them.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '.' || c == '!' || c == '?' {
            let mut end = i + 1;
            while end < chars.len() && matches!(chars[end], '"' | '\'' | '\u{201d}' | '\u{2019}' | ')' | ']') {
                end += 1;
            }
            if is_sentence_boundary(&chars, i, end) {
                push_trimmed(&mut sentences, &chars[start..end]);
                start = end;
                i = end;
                continue;
            }
        }
        i += 1;
    }
    push_trimmed(&mut sentences, &chars[start..]);
    sentences
}

fn push_trimmed(out: &mut Vec<String>, chars: &[char]) {
    let s: String = chars.iter().collect();
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

fn is_sentence_boundary(chars: &[char], punct_idx: usize, end: usize) -> bool {
    let mut j = end;
    if j >= chars.len() {
        return true;
    }
    if !chars[j].is_whitespace() {
        return false;
    }
    while j < chars.len() && chars[j].is_whitespace() {
        j += 1;
    }
    if j >= chars.len() {
        return true;
    }
    let next = chars[j];
    if !(next.is_uppercase() || matches!(next, '"' | '\u{201c}' | '\'' | '\u{2018}')) {
        return false;
    }
    if chars[punct_idx] == '.' {
        // Walk back to the previous whitespace to recover the word that
        // carries the period.
        let mut k = punct_idx;
        while k > 0 && !chars[k - 1].is_whitespace() {
            k -= 1;
        }
        let word: String = chars[k..=punct_idx].iter().collect::<String>().to_lowercase();
        if abbreviation_set().contains(&word) {
            return false;
        }
        // Single-letter initial like "J."
        let core: Vec<char> = word.chars().filter(|c| c.is_alphabetic()).collect();
        if core.len() == 1 {
            return false;
        }
    }
    true
}

/// Summary length divided by document length, in characters.
pub fn compression_factor(summary: &SummaryRecord, document: &Document) -> Result<f64> {
    if document.char_len == 0 {
        return Err(Error::DegenerateInput(format!(
            "document '{}' has zero length",
            document.id
        )));
    }
    Ok(summary.char_len() as f64 / document.char_len as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    

    fn summary(doc_id: &str, text: &str) -> SummaryRecord {
        SummaryRecord {
            id: format!("{doc_id}#0"),
            doc_id: doc_id.to_string(),
            text: text.to_string(),
            source: String::new(),
            human_scores: None,
            external_scores: None,
        }
    }

    #[test]
    fn splits_on_terminal_periods() {
        assert_eq!(
            split_sentences("Alpha beta. Gamma delta."),
            vec!["Alpha beta.", "Gamma delta."]
        );
    }

    #[test]
    fn empty_text_gives_no_sentences() {
        assert_eq!(split_sentences(""), Vec::<String>::new());
        assert_eq!(split_sentences("   \n "), Vec::<String>::new());
    }

    #[test]
    fn no_terminal_punctuation_is_one_sentence() {
        assert_eq!(
            split_sentences("No terminal punctuation"),
            vec!["No terminal punctuation"]
        );
    }

    #[test]
    fn abbreviations_do_not_split() {
        assert_eq!(
            split_sentences("Dr. Smith arrived. He left."),
            vec!["Dr. Smith arrived.", "He left."]
        );
        assert_eq!(
            split_sentences("See e.g. The report. It ends."),
            vec!["See e.g. The report.", "It ends."]
        );
    }

    #[test]
    fn decimals_and_lowercase_do_not_split() {
        assert_eq!(split_sentences("Pi is 3.14 about."), vec!["Pi is 3.14 about."]);
        assert_eq!(
            split_sentences("It grew. and grew"),
            vec!["It grew. and grew"]
        );
    }

    #[test]
    fn split_is_a_fixed_point() {
        let text = "Wolves howled! \"Quote start. More.\" The end?";
        for s in split_sentences(text) {
            assert_eq!(split_sentences(&s), vec![s.clone()], "sentence: {s:?}");
        }
    }

    #[test]
    fn concatenation_preserves_non_whitespace() {
        let text = " First one.  Second two!\nThird three? trailing bit";
        let joined: String = split_sentences(text).concat();
        let non_ws = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        assert_eq!(non_ws(&joined), non_ws(text));
    }

    #[test]
    fn document_fields_consistent() {
        let doc = Document::new("d1", "A whole sentence. Another one.");
        assert_eq!(doc.char_len, doc.text.chars().count());
        assert_eq!(doc.sentences.len(), 2);
    }

    #[test]
    fn load_basic_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"d1","text":"A b. C d.","summary":"A b."}}"#).unwrap();
        let records = load_corpus(f.path()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].summaries.len(), 1);
        assert_eq!(records[0].summaries[0].text, "A b.");
    }

    #[test]
    fn load_empty_file() {
        let f = tempfile::NamedTempFile::new().unwrap();
        assert!(load_corpus(f.path()).unwrap().is_empty());
    }

    #[test]
    fn human_scores_pass_through() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            r#"{{"id":"d1","text":"T.","summary":"S.","human_scores":{{"a1":4}}}}"#
        )
        .unwrap();
        let records = load_corpus(f.path()).unwrap();
        let scores = records[0].summaries[0].human_scores.as_ref().unwrap();
        assert_eq!(scores.get("a1"), Some(&4));
    }

    #[test]
    fn rejects_out_of_range_human_score() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            r#"{{"id":"d1","text":"T.","summary":"S.","human_scores":{{"a1":5}}}}"#
        )
        .unwrap();
        assert!(matches!(load_corpus(f.path()), Err(Error::Validation(_))));
    }

    #[test]
    fn rejects_duplicate_summary_id() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"d1","text":"T.","summary":"S.","summary_id":"s1"}}"#).unwrap();
        writeln!(f, r#"{{"id":"d1","text":"T.","summary":"S2.","summary_id":"s1"}}"#).unwrap();
        assert!(matches!(load_corpus(f.path()), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_line_names_line_number() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"d1","text":"T.","summary":"S."}}"#).unwrap();
        writeln!(f, "not json").unwrap();
        match load_corpus(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_corpus("/nonexistent/corpus.jsonl"),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn round_trip_is_idempotent() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            r#"{{"id":"d1","text":"A b. C d.","summary":"A b.","summary_id":"s1","source":"gen","human_scores":{{"a1":3}},"external_scores":{{"rouge":0.5}}}}"#
        )
        .unwrap();
        writeln!(f, r#"{{"id":"d1","text":"A b. C d.","summary":"C d.","summary_id":"s2"}}"#).unwrap();
        let first = load_corpus(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_corpus(&first, out.path()).unwrap();
        let second = load_corpus(out.path()).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn compression_factor_values() {
        let doc = Document::new("d", "x".repeat(6000));
        assert_eq!(
            compression_factor(&summary("d", &"y".repeat(300)), &doc).unwrap(),
            0.05
        );
        assert_eq!(
            compression_factor(&summary("d", &"y".repeat(150)), &doc).unwrap(),
            0.025
        );
        let identical = summary("d", &doc.text);
        assert_eq!(compression_factor(&identical, &doc).unwrap(), 1.0);
    }

    #[test]
    fn compression_factor_rejects_empty_document() {
        let doc = Document::new("d", "");
        assert!(matches!(
            compression_factor(&summary("d", "s"), &doc),
            Err(Error::DegenerateInput(_))
        ));
    }
}
