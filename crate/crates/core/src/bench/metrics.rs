//! Reliability, performance, token and aggregate scores.

use std::collections::{BTreeSet, HashSet};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no successful generations to measure")]
    EmptyRun,
    #[error("token range is degenerate (min equals max)")]
    DegenerateRange,
    #[error("token usage lies outside the given range")]
    OutOfRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Micro-averaged precision, recall and F1 over pooled counts. Failed
/// samples should be passed as empty predictions.
pub fn micro_prf<T: Ord>(predicted: &[BTreeSet<T>], gold: &[BTreeSet<T>]) -> Prf {
    assert_eq!(predicted.len(), gold.len(), "one prediction per gold set");
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, g) in predicted.iter().zip(gold) {
        let hit = p.intersection(g).count();
        tp += hit;
        fp += p.len() - hit;
        fn_ += g.len() - hit;
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Prf { precision, recall, f1 }
}

/// Share of samples predicted exactly; `None` marks a failed sample.
pub fn exact_accuracy<T: Ord>(predicted: &[Option<BTreeSet<T>>], gold: &[BTreeSet<T>]) -> f64 {
    assert_eq!(predicted.len(), gold.len(), "one prediction per gold set");
    let exact = predicted.iter().zip(gold).filter(|(p, g)| p.as_ref() == Some(*g)).count();
    ratio(exact, gold.len())
}

/// Distinct names over all names.
pub fn variety<S: AsRef<str>>(names: &[S]) -> Result<f64, MetricsError> {
    if names.is_empty() {
        return Err(MetricsError::EmptyRun);
    }
    let distinct: HashSet<&str> = names.iter().map(AsRef::as_ref).collect();
    Ok(ratio(distinct.len(), names.len()))
}

pub fn reliability(successes: usize, total: usize) -> f64 {
    ratio(successes, total)
}

/// Normalized token usage: 1 at the minimum of the range, 0 at the maximum.
pub fn ntu(usage: f64, min: f64, max: f64) -> Result<f64, MetricsError> {
    if max <= min {
        return Err(MetricsError::DegenerateRange);
    }
    if usage < min || usage > max {
        return Err(MetricsError::OutOfRange);
    }
    Ok(1.0 - (usage - min) / (max - min))
}

/// Cube root of reliability times the performance factors times NTU.
pub fn gms(reliability: f64, performance: &[f64], ntu: f64) -> f64 {
    (reliability * performance.iter().product::<f64>() * ntu).cbrt()
}

/// `1 - |gms2 - gms0| / gms0`, undefined when `gms0` is zero.
pub fn consistency(gms0: f64, gms2: f64) -> Option<f64> {
    (gms0 != 0.0).then(|| 1.0 - (gms2 - gms0).abs() / gms0)
}
