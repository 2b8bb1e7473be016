//! Correlation harness: Pearson/Spearman with two-sided p-values, human
//! score aggregation, compression normalization, annotator-split
//! experiments, and metric blending.

use std::collections::BTreeMap;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Sample Pearson correlation with a two-sided p-value from the
/// t-distribution with n - 2 degrees of freedom:
/// `t = r * sqrt((n - 2) / (1 - r^2))`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Precondition(format!(
            "pearson needs two equal-length vectors of at least 3 points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxy += (xi - mx) * (yi - my);
        sxx += (xi - mx) * (xi - mx);
        syy += (yi - my) * (yi - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input vector".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    Ok((r, p_value(r, x.len())))
}

fn p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    if denom <= f64::EPSILON {
        return 0.0;
    }
    let t = r.abs() * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t-distribution");
    2.0 * (1.0 - dist.cdf(t))
}

/// Spearman rank correlation: Pearson on fractional ranks, mid-ranks for
/// ties; p-value as in [`pearson`].
pub fn spearman(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Precondition(format!(
            "spearman needs two equal-length vectors of at least 3 points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    pearson(&fractional_ranks(x), &fractional_ranks(y))
}

/// Mid-rank assignment, 1-based; ties share the average of their ranks.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mid;
        }
        i = j + 1;
    }
    ranks
}

/// Rows are summary ids, columns annotator ids or metric names; missing
/// cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl ScoreMatrix {
    /// Build from long-form (summary id, column id, value) triples.
    pub fn from_long(triples: &[(String, String, f64)]) -> Self {
        let mut row_ids: Vec<String> = Vec::new();
        let mut col_ids: Vec<String> = Vec::new();
        for (row, col, _) in triples {
            if !row_ids.contains(row) {
                row_ids.push(row.clone());
            }
            if !col_ids.contains(col) {
                col_ids.push(col.clone());
            }
        }
        let mut cells = vec![vec![None; col_ids.len()]; row_ids.len()];
        for (row, col, value) in triples {
            let r = row_ids.iter().position(|x| x == row).unwrap();
            let c = col_ids.iter().position(|x| x == col).unwrap();
            cells[r][c] = Some(*value);
        }
        Self {
            row_ids,
            col_ids,
            cells,
        }
    }
}

/// Per-summary mean over available annotators, scores optionally remapped
/// through `value_map[score]`. Summaries with no scores are excluded and
/// returned separately.
pub fn aggregate_human(
    matrix: &ScoreMatrix,
    value_map: Option<&[f64; 5]>,
) -> (BTreeMap<String, f64>, Vec<String>) {
    let mut out = BTreeMap::new();
    let mut excluded = Vec::new();
    for (r, row_id) in matrix.row_ids.iter().enumerate() {
        let values: Vec<f64> = matrix.cells[r]
            .iter()
            .flatten()
            .map(|&v| match value_map {
                Some(map) => {
                    let idx = (v.round() as usize).min(4);
                    map[idx]
                }
                None => v,
            })
            .collect();
        if values.is_empty() {
            excluded.push(row_id.clone());
        } else {
            out.insert(row_id.clone(), values.iter().sum::<f64>() / values.len() as f64);
        }
    }
    (out, excluded)
}

/// One annotator-split combination: the small group's mean correlated
/// against the hold-out group's mean, and the metric correlated against
/// the same hold-out mean. Spearman throughout; `None` marks an
/// undefined correlation for that combination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitRow {
    pub group: Vec<String>,
    pub human_human: Option<(f64, f64)>,
    pub metric_human: Option<(f64, f64)>,
}

impl SplitRow {
    /// Per the plotting convention, markers with p > 0.05 are suppressed.
    pub fn human_human_reliable(&self) -> bool {
        matches!(self.human_human, Some((_, p)) if p <= 0.05)
    }

    pub fn metric_human_reliable(&self) -> bool {
        matches!(self.metric_human, Some((_, p)) if p <= 0.05)
    }
}

pub fn annotator_split(
    matrix: &ScoreMatrix,
    metric_scores: &BTreeMap<String, f64>,
    group_size: usize,
) -> Result<Vec<SplitRow>> {
    let n = matrix.col_ids.len();
    if group_size == 0 || group_size >= n {
        return Err(Error::Precondition(format!(
            "group size {group_size} must be between 1 and {} (annotators - 1)",
            n.saturating_sub(1)
        )));
    }
    let mut rows = Vec::new();
    for combo in (0..n).combinations(group_size) {
        let mut small = Vec::new();
        let mut others = Vec::new();
        let mut metric = Vec::new();
        let mut others_for_metric = Vec::new();
        for (r, row_id) in matrix.row_ids.iter().enumerate() {
            let mean_over = |cols: &dyn Fn(usize) -> bool| -> Option<f64> {
                let vals: Vec<f64> = matrix.cells[r]
                    .iter()
                    .enumerate()
                    .filter(|(c, _)| cols(*c))
                    .filter_map(|(_, v)| *v)
                    .collect();
                if vals.is_empty() {
                    None
                } else {
                    Some(vals.iter().sum::<f64>() / vals.len() as f64)
                }
            };
            let in_group = |c: usize| combo.contains(&c);
            let out_group = |c: usize| !combo.contains(&c);
            let small_mean = mean_over(&in_group);
            let others_mean = mean_over(&out_group);
            if let (Some(s), Some(o)) = (small_mean, others_mean) {
                small.push(s);
                others.push(o);
            }
            if let (Some(m), Some(o)) = (metric_scores.get(row_id), others_mean) {
                metric.push(*m);
                others_for_metric.push(o);
            }
        }
        rows.push(SplitRow {
            group: combo.iter().map(|&c| matrix.col_ids[c].clone()).collect(),
            human_human: spearman(&small, &others).ok(),
            metric_human: spearman(&metric, &others_for_metric).ok(),
        });
    }
    Ok(rows)
}

/// Score divided by the compression factor C.
pub fn normalize_by_compression(score: f64, compression: f64) -> Result<f64> {
    if compression <= 0.0 {
        return Err(Error::DegenerateInput(format!(
            "compression factor must be positive, got {compression}"
        )));
    }
    Ok(score / compression)
}

/// Weighted sum `wa * a + wb * b` over the id intersection.
pub fn blend_scores(
    a: &BTreeMap<String, f64>,
    b: &BTreeMap<String, f64>,
    weights: (f64, f64),
) -> Result<BTreeMap<String, f64>> {
    let blended: BTreeMap<String, f64> = a
        .iter()
        .filter_map(|(id, &va)| b.get(id).map(|&vb| (id.clone(), weights.0 * va + weights.1 * vb)))
        .collect();
    if blended.is_empty() {
        return Err(Error::Validation("no shared ids to blend".into()));
    }
    Ok(blended)
}
