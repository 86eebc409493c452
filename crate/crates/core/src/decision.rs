//! Rankings and binary change labels.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// Word → changed (`true`) or stable (`false`).
pub type Labels = BTreeMap<String, bool>;

/// Words ordered by descending score, ties by ascending word ID.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ranking(Vec<(String, f64)>);

impl Ranking {
    pub fn entries(&self) -> &[(String, f64)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.0.iter().map(|(_, s)| *s).collect()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(w, _)| w.as_str())
    }

    /// Labels the first `n` words as changed.
    pub fn label_prefix(&self, n: usize) -> Labels {
        self.0
            .iter()
            .enumerate()
            .map(|(i, (w, _))| (w.clone(), i < n))
            .collect()
    }
}

pub fn rank_words<I, S>(scores: I) -> Ranking
where
    I: IntoIterator<Item = (S, f64)>,
    S: Into<String>,
{
    let mut entries: Vec<(String, f64)> = scores.into_iter().map(|(w, s)| (w.into(), s)).collect();
    entries.sort_by(|(wa, sa), (wb, sb)| sb.total_cmp(sa).then_with(|| wa.cmp(wb)));
    Ranking(entries)
}

/// `floor(x + 0.5)`, with a small allowance so that products like
/// `0.15 * 10` that land just under a half still round up.
pub fn round_half_up(x: f64) -> f64 {
    (x + 0.5 + 1e-9).floor()
}

/// Share of words labeled changed by default.
pub const DEFAULT_RATIO: f64 = 0.43;

/// Labels the top `round_half_up(ratio * N)` words as changed.
pub fn classify_topn(ranking: &Ranking, ratio: f64) -> Result<Labels> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::Config(format!("ratio must be in [0, 1], got {ratio}")));
    }
    let n = (round_half_up(ratio * ranking.len() as f64) as usize).min(ranking.len());
    Ok(ranking.label_prefix(n))
}

/// Relative tolerance under which two split costs count as equal; the lower
/// split index then wins.
pub const SPLIT_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ChangePoint {
    /// Number of words before the break, in `1..N`.
    pub breakpoint: usize,
    /// Total within-segment sum of squared deviations at the break.
    pub cost: f64,
    pub labels: Labels,
}

/// Running sums of squared deviations for every prefix of `values`
/// (`out[k]` covers `values[..k]`), via Welford updates.
fn prefix_sse(values: impl Iterator<Item = f64>, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, x) in values.enumerate() {
        let count = (i + 1) as f64;
        let delta = x - mean;
        mean += delta / count;
        m2 += delta * (x - mean);
        out.push(m2.max(0.0));
    }
    out
}

/// Finds the single split of `signal` into a head and a tail that minimizes
/// the summed squared deviations from the segment means. Returns the split
/// index and its cost.
pub fn best_split(signal: &[f64]) -> Option<(usize, f64)> {
    let n = signal.len();
    if n < 2 {
        return None;
    }
    let head = prefix_sse(signal.iter().copied(), n);
    let tail = prefix_sse(signal.iter().rev().copied(), n);
    let tolerance = SPLIT_TIE_TOLERANCE * head[n].max(f64::MIN_POSITIVE);
    let mut best = (1, head[1] + tail[n - 1]);
    for k in 2..n {
        let cost = head[k] + tail[n - k];
        if cost < best.1 - tolerance {
            best = (k, cost);
        }
    }
    Some(best)
}

/// Splits the ranking at its single L2 change point; the words before it are
/// labeled changed.
pub fn classify_changepoint(ranking: &Ranking) -> Result<ChangePoint> {
    if ranking.len() < 3 {
        return Err(Error::Data(format!(
            "change point detection needs at least 3 words, got {}; use a fixed ratio instead",
            ranking.len()
        )));
    }
    let (breakpoint, cost) = best_split(&ranking.scores()).expect("non-empty ranking");
    Ok(ChangePoint {
        breakpoint,
        cost,
        labels: ranking.label_prefix(breakpoint),
    })
}

/// Per-word mean of two label sets, rounded half up, so a word is changed if
/// either labeling says so.
pub fn average_binary(morph: &Labels, synt: &Labels) -> Result<Labels> {
    check_same_keys(morph.keys(), synt.keys())?;
    Ok(morph
        .iter()
        .map(|(w, &m)| {
            let mean = (u8::from(m) + u8::from(synt[w])) as f64 / 2.0;
            (w.clone(), round_half_up(mean) >= 1.0)
        })
        .collect())
}

pub(crate) fn check_same_keys<'a, A, B>(left: A, right: B) -> Result<()>
where
    A: IntoIterator<Item = &'a String>,
    B: IntoIterator<Item = &'a String>,
{
    let left: BTreeSet<&String> = left.into_iter().collect();
    let right: BTreeSet<&String> = right.into_iter().collect();
    if left == right {
        return Ok(());
    }
    Err(Error::KeyMismatch {
        only_left: left.difference(&right).map(|s| s.to_string()).collect(),
        only_right: right.difference(&left).map(|s| s.to_string()).collect(),
    })
}
