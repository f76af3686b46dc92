//! Accuracy, churn and expected calibration error for binary logit-gap
//! classifiers.
//!
//! A gap `g = m⁺ − m⁻` predicts `+1` when `g >= 0` (ties go to `+1`) and
//! carries the softmax confidence `1 / (1 + e^{−|g|})`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::pool::{ensemble_gaps, ModelPool, ScoreVector};

pub const DEFAULT_BINS: usize = 15;

pub fn predict(gap: f64) -> i8 {
    if gap >= 0.0 {
        1
    } else {
        -1
    }
}

pub fn confidence(gap: f64) -> f64 {
    1.0 / (1.0 + (-gap.abs()).exp())
}

fn check_aligned(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected == 0 {
        return Err(Error::Empty("test set"));
    }
    if expected != found {
        return Err(Error::DimensionMismatch {
            what: what.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

pub fn accuracy(model: &ScoreVector, labels: &[i8]) -> Result<f64> {
    check_aligned(&format!("labels for {}", model.model_id), model.len(), labels.len())?;
    let hits = model
        .gaps
        .iter()
        .zip(labels)
        .filter(|&(&g, &y)| predict(g) == y)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Number of test points on which the two models predict different classes.
pub fn churn(a: &ScoreVector, b: &ScoreVector) -> Result<usize> {
    check_aligned(&format!("{} vs {}", a.model_id, b.model_id), a.len(), b.len())?;
    Ok(a.gaps
        .iter()
        .zip(&b.gaps)
        .filter(|&(&x, &y)| predict(x) != predict(y))
        .count())
}

/// Accuracy and mean confidence of the points whose confidence falls in one
/// of `R` equal, right-closed bins over `[0.5, 1]` (the first bin also holds
/// 0.5 itself). Empty bins report zero accuracy and confidence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub bin_index: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub bin_accuracy: f64,
    pub bin_confidence: f64,
}

fn upper_edge(r: usize, bins: usize) -> f64 {
    if r + 1 == bins {
        1.0
    } else {
        0.5 + (r + 1) as f64 * (0.5 / bins as f64)
    }
}

fn bin_of(conf: f64, bins: usize) -> usize {
    let guess = (((conf - 0.5) / 0.5 * bins as f64).ceil() as usize)
        .saturating_sub(1)
        .min(bins - 1);
    if guess > 0 && conf <= upper_edge(guess - 1, bins) {
        guess - 1
    } else if guess + 1 < bins && conf > upper_edge(guess, bins) {
        guess + 1
    } else {
        guess
    }
}

pub fn ece_bins(model: &ScoreVector, labels: &[i8], bins: usize) -> Result<Vec<BinStats>> {
    check_aligned(&format!("labels for {}", model.model_id), model.len(), labels.len())?;
    if bins == 0 {
        return Err(Error::domain("number of ECE bins must be at least 1"));
    }
    let mut count = vec![0usize; bins];
    let mut hits = vec![0usize; bins];
    let mut conf_sum = vec![0.0f64; bins];
    for (&g, &y) in model.gaps.iter().zip(labels) {
        let c = confidence(g);
        let r = bin_of(c, bins);
        count[r] += 1;
        conf_sum[r] += c;
        if predict(g) == y {
            hits[r] += 1;
        }
    }
    Ok((0..bins)
        .map(|r| {
            let (acc, conf) = if count[r] == 0 {
                (0.0, 0.0)
            } else {
                (hits[r] as f64 / count[r] as f64, conf_sum[r] / count[r] as f64)
            };
            BinStats {
                bin_index: r,
                lower: if r == 0 { 0.5 } else { upper_edge(r - 1, bins) },
                upper: upper_edge(r, bins),
                count: count[r],
                bin_accuracy: acc,
                bin_confidence: conf,
            }
        })
        .collect())
}

pub fn ece(model: &ScoreVector, labels: &[i8], bins: usize) -> Result<f64> {
    let stats = ece_bins(model, labels, bins)?;
    let n = labels.len() as f64;
    Ok(stats
        .iter()
        .map(|b| b.count as f64 / n * (b.bin_accuracy - b.bin_confidence).abs())
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub model_id: String,
    pub accuracy: f64,
    pub churn_vs_ensemble: usize,
    pub churn_vs_ensemble_frac: f64,
    pub avg_pairwise_churn: f64,
    pub avg_pairwise_churn_frac: f64,
    pub ece: f64,
}

/// Per-model metrics for every model in the pool. Churn is measured against
/// the logit-averaged ensemble of `ensemble_ids` and, on average, against
/// every other model in the pool.
pub fn metrics_report<S: AsRef<str>>(
    pool: &ModelPool,
    ensemble_ids: &[S],
    bins: usize,
    execution: Execution,
) -> Result<Vec<MetricsRecord>> {
    if ensemble_ids.is_empty() {
        return Err(Error::Empty("ensemble ids"));
    }
    let ensemble = ensemble_gaps(pool, ensemble_ids)?;
    let n = pool.n_test() as f64;
    let preds: Vec<Vec<i8>> = pool
        .models()
        .iter()
        .map(|m| m.gaps.iter().map(|&g| predict(g)).collect())
        .collect();
    let k = preds.len();
    execution.try_map_indices(k, |i| {
        let model = &pool.models()[i];
        let vs_ens = churn(model, &ensemble)?;
        let pairwise_total: usize = (0..k)
            .filter(|&j| j != i)
            .map(|j| preds[i].iter().zip(&preds[j]).filter(|(a, b)| a != b).count())
            .sum();
        let avg_pairwise = if k > 1 {
            pairwise_total as f64 / (k - 1) as f64
        } else {
            0.0
        };
        Ok(MetricsRecord {
            model_id: model.model_id.clone(),
            accuracy: accuracy(model, pool.labels())?,
            churn_vs_ensemble: vs_ens,
            churn_vs_ensemble_frac: vs_ens as f64 / n,
            avg_pairwise_churn: avg_pairwise,
            avg_pairwise_churn_frac: avg_pairwise / n,
            ece: ece(model, pool.labels(), bins)?,
        })
    })
}
