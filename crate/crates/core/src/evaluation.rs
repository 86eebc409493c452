//! Shared-task metrics: Spearman's rho for graded change, accuracy and
//! macro-F1 for binary change.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::decision::{check_same_keys, Labels};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub word_id: String,
    pub binary: Option<bool>,
    pub graded: Option<f64>,
}

/// Gold annotations keyed by word.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gold(pub BTreeMap<String, GoldRecord>);

impl Gold {
    pub fn binary(&self) -> Result<Labels> {
        self.0
            .values()
            .map(|r| {
                r.binary
                    .map(|b| (r.word_id.clone(), b))
                    .ok_or_else(|| Error::Data(format!("no binary gold label for `{}`", r.word_id)))
            })
            .collect()
    }

    pub fn graded(&self) -> Result<BTreeMap<String, f64>> {
        self.0
            .values()
            .map(|r| {
                r.graded
                    .map(|g| (r.word_id.clone(), g))
                    .ok_or_else(|| Error::Data(format!("no graded gold score for `{}`", r.word_id)))
            })
            .collect()
    }
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation; `None` if either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rho of two aligned slices, `None` when a rank vector is
/// constant.
pub fn spearman_slices(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Spearman's rank correlation between predicted and gold scores over the
/// same word set.
pub fn spearman(pred: &BTreeMap<String, f64>, gold: &BTreeMap<String, f64>) -> Result<f64> {
    check_same_keys(pred.keys(), gold.keys())?;
    if pred.len() < 2 {
        return Err(Error::Data("Spearman correlation needs at least 2 words".into()));
    }
    // Both maps iterate in the same key order.
    let x: Vec<f64> = pred.values().copied().collect();
    let y: Vec<f64> = gold.values().copied().collect();
    spearman_slices(&x, &y).ok_or_else(|| Error::Data("Spearman correlation undefined: constant ranking".into()))
}

pub fn accuracy(pred: &Labels, gold: &Labels) -> Result<f64> {
    check_same_keys(pred.keys(), gold.keys())?;
    if pred.is_empty() {
        return Err(Error::Data("accuracy of an empty word set".into()));
    }
    let correct = pred.iter().filter(|(w, &p)| gold[*w] == p).count();
    Ok(correct as f64 / pred.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroF1 {
    pub value: f64,
    /// F1 of class 0 and class 1.
    pub per_class: [f64; 2],
    /// Classes present in neither predictions nor gold (scored as 0).
    pub absent_classes: Vec<u8>,
}

pub fn macro_f1(pred: &Labels, gold: &Labels) -> Result<MacroF1> {
    check_same_keys(pred.keys(), gold.keys())?;
    let mut per_class = [0.0; 2];
    let mut absent_classes = Vec::new();
    for (class, f1) in per_class.iter_mut().enumerate() {
        let positive = class == 1;
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (w, &p) in pred {
            match (p == positive, gold[w] == positive) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        if tp + fp + fn_ == 0 {
            absent_classes.push(class as u8);
        } else {
            *f1 = 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;
        }
    }
    Ok(MacroF1 {
        value: (per_class[0] + per_class[1]) / 2.0,
        per_class,
        absent_classes,
    })
}
