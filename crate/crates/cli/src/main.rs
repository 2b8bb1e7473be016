//! `blanc` — reference-free summary quality estimation from the command
//! line. Subcommands: `score` (batch scoring), `validate` (control-summary
//! experiments), `correlate` (human-judgment analysis).

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use blanc_core::corpus::compression_factor;
use blanc_core::{
    aggregate_human, annotator_split, backend_from_id, blend_scores, deterioration_experiment,
    load_corpus, score_corpus, score_help, BlancParams, CorpusRecord, GuardMode, MaskedLm,
    ScoreMatrix, ScoreVariant, Tokenizer,
};
use config::{FileConfig, Manifest, RunConfig};

const EXIT_CONFIG: u8 = 1;
const EXIT_CORPUS: u8 = 2;
const EXIT_BACKEND: u8 = 3;

#[derive(Parser)]
#[command(name = "blanc", version, about = "Reference-free summary quality estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every (document, summary) pair in a JSONL corpus.
    Score(CommonArgs),
    /// Run control-summary experiments: random words, random sentences,
    /// deterioration.
    Validate(CommonArgs),
    /// Correlate metric scores with human judgments, summary length, and
    /// compression.
    Correlate(CorrelateArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Input corpus (JSONL, one document+summary per line).
    #[arg(long = "in", value_name = "FILE")]
    input: Option<PathBuf>,
    /// Output directory for tables and the run manifest.
    #[arg(long = "out", value_name = "DIR")]
    output: Option<PathBuf>,
    /// Backend id: `reference` or `mlm:<model>`.
    #[arg(long)]
    backend: Option<String>,
    /// Score variant: help, tune, js, or all.
    #[arg(long)]
    variant: Option<String>,
    /// No-copy-pair guard: off, skip_sentence, drop_copy.
    #[arg(long)]
    guard: Option<String>,
    /// Eligibility mode: word or token.
    #[arg(long)]
    mode: Option<String>,
    /// Masking period (every M-th eligible word).
    #[arg(long = "M")]
    masking_period: Option<usize>,
    /// Minimum word length for masking eligibility.
    #[arg(long = "Lmin")]
    min_word_len: Option<usize>,
    /// Masking probability for tuning-set construction.
    #[arg(long = "pmask")]
    p_mask: Option<f64>,
    /// Fine-tuning passes over the tuning set.
    #[arg(long)]
    passes: Option<u32>,
    /// Seed for all randomized steps.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker count: 1 = sequential, 0 = all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Config file mirroring these flags; flags override file values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Maximum model input length in tokens.
    #[arg(long)]
    max_input_len: Option<usize>,
}

#[derive(Args, Clone)]
struct CorrelateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Score table produced by `blanc score` (defaults to <out>/scores.csv).
    #[arg(long, value_name = "FILE")]
    scores: Option<PathBuf>,
    /// Human scores CSV (summary_id,annotator_id,score). Defaults to the
    /// `human_scores` field of the corpus.
    #[arg(long, value_name = "FILE")]
    human: Option<PathBuf>,
    /// Annotators per small group in the split table.
    #[arg(long, default_value_t = 3)]
    group_size: usize,
    /// Map raw grades 0-4 onto custom values, e.g. "0,1,2,3,10".
    #[arg(long, value_name = "V0,V1,V2,V3,V4")]
    value_map: Option<String>,
    /// Blend two metric columns, e.g. "help,tune,0.5,0.5".
    #[arg(long, value_name = "A,B,WA,WB")]
    blend: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Score(args) => resolve(&args, "score").and_then(|c| cmd_score(&c)),
        Command::Validate(args) => resolve(&args, "validate").and_then(|c| cmd_validate(&c)),
        Command::Correlate(args) => {
            resolve(&args.common, "correlate").and_then(|c| cmd_correlate(&c, &args))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

type CmdResult = Result<(), (u8, String)>;
/// Per-variant {summary_id: value} column read back from scores.csv.
type MetricColumn = (String, BTreeMap<String, f64>);
type Inputs = (Vec<CorpusRecord>, Box<dyn MaskedLm>, BlancParams);
/// (summary_id, annotator_id, grade) long-form triple.
type HumanTriple = (String, String, f64);

fn resolve(args: &CommonArgs, _command: &str) -> Result<RunConfig, (u8, String)> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path).map_err(|e| (EXIT_CONFIG, e))?,
        None => FileConfig::default(),
    };
    let config = RunConfig::resolve(
        file,
        args.input.clone(),
        args.output.clone(),
        args.backend.clone(),
        args.variant.clone(),
        args.guard.clone(),
        args.mode.clone(),
        args.masking_period,
        args.min_word_len,
        args.p_mask,
        args.passes,
        args.seed,
        args.jobs,
        args.max_input_len,
    )
    .map_err(|e| (EXIT_CONFIG, e))?;
    // Fail fast on malformed parameter values.
    config.params().map_err(|e| (EXIT_CONFIG, e))?;
    ScoreVariant::parse_selection(&config.variant)
        .ok_or_else(|| (EXIT_CONFIG, format!("unknown variant '{}'", config.variant)))?;
    Ok(config)
}

fn load_inputs(config: &RunConfig) -> Result<Inputs, (u8, String)> {
    let records = load_corpus(&config.input)
        .map_err(|e| (EXIT_CORPUS, format!("{}: {e}", config.input.display())))?;
    if records.is_empty() {
        return Err((EXIT_CORPUS, format!("{}: empty corpus", config.input.display())));
    }
    let backend = backend_from_id(&config.backend, config.max_input_len)
        .map_err(|e| (EXIT_BACKEND, e.to_string()))?;
    let params = config.params().map_err(|e| (EXIT_CONFIG, e))?;
    std::fs::create_dir_all(&config.output)
        .map_err(|e| (EXIT_CONFIG, format!("cannot create {}: {e}", config.output.display())))?;
    Ok((records, backend, params))
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<std::fs::File>, (u8, String)> {
    let path = dir.join(name);
    csv::Writer::from_path(&path)
        .map_err(|e| (EXIT_CONFIG, format!("cannot write {}: {e}", path.display())))
}

// Shortest round-trip representation; deterministic across runs.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn cmd_score(config: &RunConfig) -> CmdResult {
    let (records, backend, params) = load_inputs(config)?;
    let variants = ScoreVariant::parse_selection(&config.variant).expect("validated");
    let tok = Tokenizer::default();

    let (rows, failures) =
        score_corpus(&records, &variants, &params, backend.as_ref(), &tok, config.jobs);

    let mut w = csv_writer(&config.output, "scores.csv")?;
    w.write_record([
        "doc_id",
        "summary_id",
        "variant",
        "value",
        "s00",
        "s01",
        "s10",
        "s11",
        "guard_skips",
        "seed",
        "passes",
        "params",
    ])
    .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    for row in &rows {
        let counts = row.counts.unwrap_or_default();
        let (s00, s01, s10, s11) = if row.counts.is_some() {
            (
                counts.s00.to_string(),
                counts.s01.to_string(),
                counts.s10.to_string(),
                counts.s11.to_string(),
            )
        } else {
            (String::new(), String::new(), String::new(), String::new())
        };
        w.write_record([
            row.doc_id.as_str(),
            row.summary_id.as_str(),
            row.variant.as_str(),
            &fmt_f64(row.value),
            &s00,
            &s01,
            &s10,
            &s11,
            &row.guard_skips.to_string(),
            &row.seed.to_string(),
            &row.passes.to_string(),
            row.params_fingerprint.as_str(),
        ])
        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    }
    w.flush().map_err(|e| (EXIT_CONFIG, e.to_string()))?;

    // Wide companion table: one row per summary, one column per variant.
    let mut wide: BTreeMap<(String, String), BTreeMap<String, f64>> = BTreeMap::new();
    let mut pair_order: Vec<(String, String)> = Vec::new();
    for row in &rows {
        let key = (row.doc_id.clone(), row.summary_id.clone());
        if !wide.contains_key(&key) {
            pair_order.push(key.clone());
        }
        wide.entry(key).or_default().insert(row.variant.clone(), row.value);
    }
    let mut w = csv_writer(&config.output, "scores_wide.csv")?;
    let mut header = vec!["doc_id".to_string(), "summary_id".to_string()];
    header.extend(variants.iter().map(|v| v.name().to_string()));
    w.write_record(&header).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    for key in &pair_order {
        let values = &wide[key];
        let mut record = vec![key.0.clone(), key.1.clone()];
        for v in &variants {
            record.push(values.get(v.name()).map(|&x| fmt_f64(x)).unwrap_or_default());
        }
        w.write_record(&record).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    }
    w.flush().map_err(|e| (EXIT_CONFIG, e.to_string()))?;

    for failure in &failures {
        eprintln!(
            "warn: {}/{} [{}]: {}",
            failure.doc_id, failure.summary_id, failure.variant, failure.message
        );
    }

    Manifest::new("score", config)
        .write(&config.output)
        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    println!(
        "scored {} rows ({} failures) -> {}",
        rows.len(),
        failures.len(),
        config.output.display()
    );
    Ok(())
}

fn cmd_validate(config: &RunConfig) -> CmdResult {
    let (records, backend, params) = load_inputs(config)?;
    let tok = Tokenizer::default();

    // Random-words and random-sentences controls: score the original
    // summary and an equal-length generated one for every pair.
    let mut sentence_params = params.clone();
    sentence_params.guard = GuardMode::DropCopy;

    let mut words = csv_writer(&config.output, "random_words.csv")?;
    words
        .write_record(["doc_id", "summary_id", "original", "random", "seed"])
        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    let mut sents = csv_writer(&config.output, "random_sentences.csv")?;
    sents
        .write_record(["doc_id", "summary_id", "original", "random", "seed"])
        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;

    let mut det_pairs: Vec<(blanc_core::Document, String)> = Vec::new();
    for record in &records {
        for summary in &record.summaries {
            let doc = &record.document;
            let target = summary.char_len();
            let original = score_help(doc, &summary.text, &params, backend.as_ref(), &tok);
            let rw = blanc_core::random_words_summary(doc, target, config.seed);
            let random_w = score_help(doc, &rw, &params, backend.as_ref(), &tok);
            match (&original, &random_w) {
                (Ok(o), Ok(r)) => {
                    words
                        .write_record([
                            doc.id.as_str(),
                            summary.id.as_str(),
                            &fmt_f64(o.value),
                            &fmt_f64(r.value),
                            &config.seed.to_string(),
                        ])
                        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
                }
                _ => eprintln!("warn: {}/{}: random-words pair skipped", doc.id, summary.id),
            }

            let rs = blanc_core::random_sentences_summary(doc, target, config.seed);
            let orig_s = score_help(doc, &summary.text, &sentence_params, backend.as_ref(), &tok);
            let random_s = score_help(doc, &rs, &sentence_params, backend.as_ref(), &tok);
            match (&orig_s, &random_s) {
                (Ok(o), Ok(r)) => {
                    sents
                        .write_record([
                            doc.id.as_str(),
                            summary.id.as_str(),
                            &fmt_f64(o.value),
                            &fmt_f64(r.value),
                            &config.seed.to_string(),
                        ])
                        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
                }
                _ => eprintln!("warn: {}/{}: random-sentences pair skipped", doc.id, summary.id),
            }

            det_pairs.push((doc.clone(), summary.text.clone()));
        }
    }
    words.flush().map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    sents.flush().map_err(|e| (EXIT_CONFIG, e.to_string()))?;

    // Deterioration: only 3-sentence summaries qualify; errors logged.
    let (det_rows, det_errors) =
        deterioration_experiment(&det_pairs, &params, backend.as_ref(), config.seed, &tok);
    let mut det = csv_writer(&config.output, "deterioration.csv")?;
    det.write_record(["doc_id", "pair_index", "k0", "k1", "k2", "k3"])
        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    let mut by_pair: BTreeMap<usize, (String, [Option<f64>; 4])> = BTreeMap::new();
    let mut order: Vec<usize> = Vec::new();
    for row in &det_rows {
        let entry = by_pair
            .entry(row.pair_index)
            .or_insert_with(|| (row.doc_id.clone(), [None; 4]));
        entry.1[row.spoiled_sentences] = Some(row.mean);
        if !order.contains(&row.pair_index) {
            order.push(row.pair_index);
        }
    }
    for pair_index in order {
        let (doc_id, means) = &by_pair[&pair_index];
        let mut record = vec![doc_id.clone(), pair_index.to_string()];
        record.extend(means.iter().map(|m| m.map(fmt_f64).unwrap_or_default()));
        det.write_record(&record).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    }
    det.flush().map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    for err in &det_errors {
        eprintln!("warn: deterioration pair {} ({}): {}", err.pair_index, err.doc_id, err.message);
    }

    Manifest::new("validate", config)
        .write(&config.output)
        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    println!(
        "validated {} pairs ({} deterioration rows) -> {}",
        det_pairs.len(),
        det_rows.len(),
        config.output.display()
    );
    Ok(())
}

fn cmd_correlate(config: &RunConfig, args: &CorrelateArgs) -> CmdResult {
    let records = load_corpus(&config.input)
        .map_err(|e| (EXIT_CORPUS, format!("{}: {e}", config.input.display())))?;
    std::fs::create_dir_all(&config.output)
        .map_err(|e| (EXIT_CONFIG, format!("cannot create {}: {e}", config.output.display())))?;

    let scores_path =
        args.scores.clone().unwrap_or_else(|| config.output.join("scores.csv"));
    let metric_columns = read_scores_csv(&scores_path)?;

    // Human grades as long-form (summary, annotator, grade) triples.
    let triples = match &args.human {
        Some(path) => read_human_csv(path)?,
        None => {
            let mut out = Vec::new();
            for record in &records {
                for summary in &record.summaries {
                    if let Some(grades) = &summary.human_scores {
                        for (annotator, &grade) in grades {
                            out.push((summary.id.clone(), annotator.clone(), grade as f64));
                        }
                    }
                }
            }
            out
        }
    };
    if triples.is_empty() {
        return Err((EXIT_CORPUS, "no human scores in corpus or --human file".into()));
    }
    let matrix = ScoreMatrix::from_long(&triples);

    let value_map = match &args.value_map {
        Some(raw) => Some(parse_value_map(raw)?),
        None => None,
    };
    let (human, excluded) = aggregate_human(&matrix, value_map.as_ref());
    for id in &excluded {
        eprintln!("warn: summary '{id}' excluded from aggregation (no grades)");
    }

    // Per-summary covariates: length L and compression C.
    let mut length: BTreeMap<String, f64> = BTreeMap::new();
    let mut compression: BTreeMap<String, f64> = BTreeMap::new();
    for record in &records {
        for summary in &record.summaries {
            length.insert(summary.id.clone(), summary.char_len() as f64);
            if let Ok(c) = compression_factor(summary, &record.document) {
                compression.insert(summary.id.clone(), c);
            }
        }
    }

    let mut metrics: Vec<(String, BTreeMap<String, f64>)> = metric_columns;
    if let Some(raw) = &args.blend {
        let (name, column) = parse_blend(raw, &metrics)?;
        metrics.push((name, column));
    }

    let mut w = csv_writer(&config.output, "correlations.csv")?;
    w.write_record(["metric", "target", "n", "pearson_r", "pearson_p", "spearman_r", "spearman_p", "note"])
        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    let targets: [(&str, &BTreeMap<String, f64>); 3] =
        [("human", &human), ("L", &length), ("C", &compression)];
    for (metric_name, metric) in &metrics {
        for (target_name, target) in targets {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (id, &x) in metric {
                if let Some(&y) = target.get(id) {
                    xs.push(x);
                    ys.push(y);
                }
            }
            let record = match (blanc_core::pearson(&xs, &ys), blanc_core::spearman(&xs, &ys)) {
                (Ok((pr, pp)), Ok((sr, sp))) => {
                    // Table-1 convention: unreliable cells are left empty.
                    let p_cell = if pp > 0.05 { String::new() } else { fmt_f64(pr) };
                    let s_cell = if sp > 0.05 { String::new() } else { fmt_f64(sr) };
                    vec![
                        metric_name.clone(),
                        target_name.to_string(),
                        xs.len().to_string(),
                        p_cell,
                        fmt_f64(pp),
                        s_cell,
                        fmt_f64(sp),
                        String::new(),
                    ]
                }
                (Err(e), _) | (_, Err(e)) => vec![
                    metric_name.clone(),
                    target_name.to_string(),
                    xs.len().to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    format!("undefined: {e}"),
                ],
            };
            w.write_record(&record).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
        }
    }
    w.flush().map_err(|e| (EXIT_CONFIG, e.to_string()))?;

    // Annotator-split table for the first metric column.
    if let Some((metric_name, metric)) = metrics.first() {
        match annotator_split(&matrix, metric, args.group_size) {
            Ok(split_rows) => {
                let mut w = csv_writer(&config.output, "annotator_split.csv")?;
                w.write_record([
                    "group",
                    "human_human_r",
                    "human_human_p",
                    "metric_human_r",
                    "metric_human_p",
                ])
                .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
                for row in &split_rows {
                    let (hh_r, hh_p) = reliable_cells(row.human_human);
                    let (mh_r, mh_p) = reliable_cells(row.metric_human);
                    w.write_record([row.group.join(";"), hh_r, hh_p, mh_r, mh_p])
                        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
                }
                w.flush().map_err(|e| (EXIT_CONFIG, e.to_string()))?;
                println!(
                    "correlated metric '{metric_name}': {} split rows -> {}",
                    split_rows.len(),
                    config.output.display()
                );
            }
            Err(e) => eprintln!("warn: annotator split skipped: {e}"),
        }
    }

    Manifest::new("correlate", config)
        .write(&config.output)
        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    Ok(())
}

/// Markers with p > 0.05 are suppressed; the p-value itself stays.
fn reliable_cells(cell: Option<(f64, f64)>) -> (String, String) {
    match cell {
        Some((r, p)) if p <= 0.05 => (fmt_f64(r), fmt_f64(p)),
        Some((_, p)) => (String::new(), fmt_f64(p)),
        None => (String::new(), String::new()),
    }
}

/// Read a tidy scores.csv back into per-variant {summary_id: value} maps.
fn read_scores_csv(path: &Path) -> Result<Vec<MetricColumn>, (u8, String)> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| (EXIT_CORPUS, format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| (EXIT_CORPUS, e.to_string()))?
        .clone();
    let idx = |name: &str| headers.iter().position(|h| h == name);
    let (si, vi, xi) = match (idx("summary_id"), idx("variant"), idx("value")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err((
                EXIT_CORPUS,
                format!("{}: expected summary_id, variant, value columns", path.display()),
            ))
        }
    };
    let mut columns: Vec<(String, BTreeMap<String, f64>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| (EXIT_CORPUS, e.to_string()))?;
        let summary_id = record.get(si).unwrap_or_default().to_string();
        let variant = record.get(vi).unwrap_or_default().to_string();
        let value: f64 = record
            .get(xi)
            .unwrap_or_default()
            .parse()
            .map_err(|e| (EXIT_CORPUS, format!("{}: bad value: {e}", path.display())))?;
        match columns.iter_mut().find(|(name, _)| *name == variant) {
            Some((_, column)) => {
                column.insert(summary_id, value);
            }
            None => {
                columns.push((variant, BTreeMap::from([(summary_id, value)])));
            }
        }
    }
    if columns.is_empty() {
        return Err((EXIT_CORPUS, format!("{}: no score rows", path.display())));
    }
    Ok(columns)
}

fn read_human_csv(path: &Path) -> Result<Vec<HumanTriple>, (u8, String)> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| (EXIT_CORPUS, format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| (EXIT_CORPUS, e.to_string()))?;
        if record.len() < 3 {
            return Err((
                EXIT_CORPUS,
                format!("{}: expected summary_id,annotator_id,score rows", path.display()),
            ));
        }
        let score: f64 = record[2]
            .parse()
            .map_err(|e| (EXIT_CORPUS, format!("{}: bad score: {e}", path.display())))?;
        out.push((record[0].to_string(), record[1].to_string(), score));
    }
    Ok(out)
}

fn parse_value_map(raw: &str) -> Result<[f64; 5], (u8, String)> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|e| (EXIT_CONFIG, format!("bad --value-map: {e}")))?;
    parts
        .try_into()
        .map_err(|_| (EXIT_CONFIG, "--value-map needs exactly 5 values".into()))
}

fn parse_blend(raw: &str, metrics: &[MetricColumn]) -> Result<MetricColumn, (u8, String)> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err((EXIT_CONFIG, "--blend needs metric_a,metric_b,weight_a,weight_b".into()));
    }
    let find = |name: &str| {
        metrics
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c)
            .ok_or((EXIT_CONFIG, format!("--blend: no metric column '{name}'")))
    };
    let a = find(parts[0])?;
    let b = find(parts[1])?;
    let wa: f64 = parts[2].parse().map_err(|e| (EXIT_CONFIG, format!("bad --blend weight: {e}")))?;
    let wb: f64 = parts[3].parse().map_err(|e| (EXIT_CONFIG, format!("bad --blend weight: {e}")))?;
    let column = blend_scores(a, b, (wa, wb)).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    Ok((format!("blend({},{})", parts[0], parts[1]), column))
}
