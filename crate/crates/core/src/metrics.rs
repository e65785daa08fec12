//! Validation metrics: cosine similarity, sentence BLEU, error reduction
//! rate and corpus-level aggregation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::EmbeddingVector;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("vector has no nonzero entry")]
    ZeroVector,
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("candidate has no tokens")]
    EmptyCandidate,
    #[error("no non-empty reference")]
    NoReferences,
    #[error("no candidate/reference pairs")]
    NoPairs,
}

/// Splits on Unicode whitespace, strips leading and trailing
/// non-alphanumeric characters, lowercases and drops empty tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `a·b / (‖a‖‖b‖)`, computed on max-abs scaled copies to avoid overflow.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    let (sa, sb) = (max_abs(a), max_abs(b));
    if sa == 0.0 || sb == 0.0 || !sa.is_finite() || !sb.is_finite() {
        return Err(MetricsError::ZeroVector);
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (x / sa, y / sb);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuOptions {
    pub max_n: usize,
    /// Add-one smoothing of the precisions for n ≥ 2.
    pub smoothing: bool,
}

impl Default for BleuOptions {
    fn default() -> Self {
        Self {
            max_n: 4,
            smoothing: false,
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for g in tokens.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Clipped matches and total candidate n-grams of order `n`.
pub fn modified_precision(candidate: &[String], references: &[&[String]], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let mut max_ref: HashMap<&[String], usize> = HashMap::new();
    for r in references {
        for (g, c) in ngram_counts(r, n) {
            let m = max_ref.entry(g).or_insert(0);
            *m = (*m).max(c);
        }
    }
    let matched = cand
        .iter()
        .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, candidate.len().saturating_sub(n - 1))
}

/// Reference length closest to `c`; ties go to the shorter one.
pub fn effective_reference_length(c: usize, references: &[&[String]]) -> usize {
    references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0)
}

pub fn brevity_penalty(c: usize, r: usize) -> f64 {
    if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    }
}

/// Sentence BLEU with uniform weights.
///
/// Orders longer than the candidate have no n-grams to score; they are left
/// out and the weights spread over the remaining orders.
pub fn bleu(candidate: &[String], references: &[Vec<String>], opts: BleuOptions) -> Result<f64, MetricsError> {
    if candidate.is_empty() {
        return Err(MetricsError::EmptyCandidate);
    }
    let refs: Vec<&[String]> = references
        .iter()
        .filter(|r| !r.is_empty())
        .map(Vec::as_slice)
        .collect();
    if refs.is_empty() {
        return Err(MetricsError::NoReferences);
    }
    let orders = opts.max_n.max(1).min(candidate.len());
    let w = 1.0 / orders as f64;
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let (mut m, mut t) = modified_precision(candidate, &refs, n);
        if opts.smoothing && n >= 2 {
            m += 1;
            t += 1;
        }
        if m == 0 {
            return Ok(0.0);
        }
        log_sum += w * (m as f64 / t as f64).ln();
    }
    let c = candidate.len();
    let bp = brevity_penalty(c, effective_reference_length(c, &refs));
    Ok((bp * log_sum.exp()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReduction {
    pub percent: f64,
    /// Set when there were no errors to begin with.
    pub no_baseline: bool,
}

/// `100 × (pre − post) / pre`; 0 with `no_baseline` when `pre` is 0.
pub fn error_reduction_rate(pre_errors: usize, post_errors: usize) -> ErrorReduction {
    if pre_errors == 0 {
        return ErrorReduction {
            percent: 0.0,
            no_baseline: true,
        };
    }
    ErrorReduction {
        percent: 100.0 * (pre_errors as f64 - post_errors as f64) / pre_errors as f64,
        no_baseline: false,
    }
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Maps texts to one embedding each, in order.
pub type Embedder<'a, E> = dyn Fn(&[String]) -> Result<Vec<EmbeddingVector>, E> + 'a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub cosine: f64,
    pub bleu: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub cosine: Option<f64>,
    pub bleu: Option<f64>,
    pub err_percent: Option<f64>,
    pub no_baseline: bool,
    pub seconds_per_file: Option<f64>,
    pub n_files: usize,
    pub n_pairs: usize,
    /// Pairs dropped because embedding or scoring failed.
    pub excluded_pairs: usize,
}

/// Scores one pair; `embed` receives `[candidate, reference]`.
pub fn score_pair<E>(
    candidate: &str,
    reference: &str,
    embed: &Embedder<E>,
    opts: BleuOptions,
) -> Option<PairScore> {
    let vectors = embed(&[candidate.to_string(), reference.to_string()]).ok()?;
    let [a, b] = vectors.as_slice() else {
        return None;
    };
    let cosine = cosine_similarity(&a.values, &b.values).ok()?;
    let bleu = bleu(&tokenize(candidate), &[tokenize(reference)], opts).ok()?;
    Some(PairScore { cosine, bleu })
}

/// Mean cosine and BLEU over the pairs, mean seconds over the timings.
pub fn corpus_metrics<E>(
    pairs: &[(String, String)],
    embed: &Embedder<E>,
    timings: &[f64],
    opts: BleuOptions,
) -> Result<MetricReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::NoPairs);
    }
    let scores: Vec<PairScore> = pairs
        .iter()
        .filter_map(|(c, r)| score_pair(c, r, embed, opts))
        .collect();
    let cosines: Vec<f64> = scores.iter().map(|s| s.cosine).collect();
    let bleus: Vec<f64> = scores.iter().map(|s| s.bleu).collect();
    Ok(MetricReport {
        cosine: mean(&cosines),
        bleu: mean(&bleus),
        err_percent: None,
        no_baseline: false,
        seconds_per_file: mean(timings),
        n_files: timings.len(),
        n_pairs: scores.len(),
        excluded_pairs: pairs.len() - scores.len(),
    })
}
