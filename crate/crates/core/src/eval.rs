//! Confusion counts, metrics and k-fold cross-validation.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{make_folds, DataError, Dataset};
use crate::heuristics::ConfusionCounts;
use crate::interpreter::Evaluator;
use crate::learner::{fit, FitError, Hyperparams};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Positive means predicted / labelled `true`.
pub fn confusion(predictions: &[bool], labels: &[bool]) -> Result<ConfusionCounts, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (true, true) => c.true_pos += 1,
            (false, true) => c.false_neg += 1,
            (false, false) => c.true_neg += 1,
            (true, false) => c.false_pos += 1,
        }
    }
    Ok(c)
}

/// Ratios with a zero denominator are reported as 0 and named in `undefined`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub train_time_ms: f64,
    pub rule_count: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub undefined: Vec<String>,
}

fn ratio(num: usize, den: usize, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    let mut undefined = Vec::new();
    let accuracy = ratio(
        c.true_pos + c.true_neg,
        c.total(),
        "accuracy",
        &mut undefined,
    );
    let precision = ratio(
        c.true_pos,
        c.true_pos + c.false_pos,
        "precision",
        &mut undefined,
    );
    let recall = ratio(
        c.true_pos,
        c.true_pos + c.false_neg,
        "recall",
        &mut undefined,
    );
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        undefined.push("f1".to_string());
        0.0
    };
    Metrics {
        accuracy,
        precision,
        recall,
        f1,
        train_time_ms: 0.0,
        rule_count: 0,
        undefined,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

/// Mean metrics are the plain average over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub target: String,
    pub positive: String,
    pub k: usize,
    pub seed: u64,
    pub ratio: f64,
    pub folds: Vec<FoldReport>,
    pub mean: Metrics,
}

impl CvReport {
    /// Pretty JSON. Without timing every field is a deterministic function
    /// of the inputs.
    pub fn to_json(&self, include_timing: bool) -> String {
        let mut r = self.clone();
        if !include_timing {
            r.mean.train_time_ms = 0.0;
            r.folds
                .iter_mut()
                .for_each(|f| f.metrics.train_time_ms = 0.0);
        }
        let mut s = serde_json::to_string_pretty(&r).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn to_table(&self, include_timing: bool) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "target {} (positive class {}), {} folds, seed {}, ratio {}",
            self.target, self.positive, self.k, self.seed, self.ratio
        );
        let _ = write!(
            out,
            "{:>6} {:>9} {:>9} {:>9} {:>9} {:>6}",
            "fold", "accuracy", "precision", "recall", "f1", "rules"
        );
        if include_timing {
            let _ = write!(out, " {:>10}", "train ms");
        }
        out.push('\n');
        let mut line = |label: &str, m: &Metrics, rules: String| {
            let _ = write!(
                out,
                "{label:>6} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {rules:>6}",
                m.accuracy, m.precision, m.recall, m.f1
            );
            if include_timing {
                let _ = write!(out, " {:>10.3}", m.train_time_ms);
            }
            out.push('\n');
        };
        for f in &self.folds {
            line(
                &(f.fold + 1).to_string(),
                &f.metrics,
                f.metrics.rule_count.to_string(),
            );
        }
        let mean_rules = self
            .folds
            .iter()
            .map(|f| f.metrics.rule_count as f64)
            .sum::<f64>()
            / self.folds.len().max(1) as f64;
        line("mean", &self.mean, format!("{mean_rules:.1}"));
        out
    }
}

fn mean(ms: &[Metrics]) -> Metrics {
    let n = ms.len().max(1) as f64;
    let avg = |f: fn(&Metrics) -> f64| ms.iter().map(f).sum::<f64>() / n;
    let mut undefined: Vec<String> = ms
        .iter()
        .flat_map(|m| m.undefined.iter().cloned())
        .collect();
    undefined.sort();
    undefined.dedup();
    Metrics {
        accuracy: avg(|m| m.accuracy),
        precision: avg(|m| m.precision),
        recall: avg(|m| m.recall),
        f1: avg(|m| m.f1),
        train_time_ms: avg(|m| m.train_time_ms),
        rule_count: (ms.iter().map(|m| m.rule_count).sum::<usize>() as f64 / n).round() as usize,
        undefined,
    }
}

/// Fits on each training fold and scores its test fold. Folds run in
/// parallel; results are in fold order.
pub fn cross_validate(
    d: &Dataset,
    k: usize,
    hp: Hyperparams,
    seed: u64,
) -> Result<CvReport, EvalError> {
    let folds = make_folds(d, k, seed)?;
    let reports = folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| -> Result<FoldReport, EvalError> {
            debug_assert!(fold.train.examples().iter().all(|t| fold
                .test
                .examples()
                .iter()
                .all(|e| e.id != t.id)));
            let started = Instant::now();
            let program = fit(&fold.train, hp)?;
            let train_time_ms = started.elapsed().as_secs_f64() * 1e3;

            let mut ev = Evaluator::new(&program);
            let predictions: Vec<bool> = fold
                .test
                .examples()
                .iter()
                .map(|e| {
                    ev.reset();
                    ev.fired_rule(&e.values).is_some()
                })
                .collect();
            let labels: Vec<bool> = fold.test.examples().iter().map(|e| e.label).collect();
            let counts = confusion(&predictions, &labels)?;
            let mut m = metrics(&counts);
            m.train_time_ms = train_time_ms;
            m.rule_count = program.clause_count();
            Ok(FoldReport {
                fold: i,
                train_rows: fold.train.len(),
                test_rows: fold.test.len(),
                counts,
                metrics: m,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mean = mean(
        &reports
            .iter()
            .map(|r| r.metrics.clone())
            .collect::<Vec<_>>(),
    );
    Ok(CvReport {
        target: d.schema().target_name.clone(),
        positive: d.schema().positive_value.clone(),
        k,
        seed,
        ratio: hp.ratio,
        folds: reports,
        mean,
    })
}
