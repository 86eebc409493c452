//! Change scores: cosine distances between the grammatical profiles of a
//! word in two periods, under the basic, filtered, category-separated and
//! morphology+syntax variants.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{build_vectors, separate_categories, CategoryProfile, CountMap, Profile};

pub const DEFAULT_FILTER_THRESHOLD: f64 = 0.05;
pub const DEFAULT_ZERO_PROFILE_DISTANCE: f64 = 1.0;

/// Cosine distance `1 - a·b / (|a| |b|)` between non-negative vectors.
///
/// If exactly one vector is all-zero the distance is `zero_profile_distance`;
/// if both are all-zero (or empty) it is 0. The result is clamped to [0, 1].
///
/// Panics if the lengths differ.
pub fn cosine_distance(a: &[f64], b: &[f64], zero_profile_distance: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "cosine_distance: vector lengths differ");
    let (mut dot, mut norm_a, mut norm_b) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    match (norm_a == 0.0, norm_b == 0.0) {
        (true, true) => 0.0,
        (true, false) | (false, true) => zero_profile_distance,
        (false, false) => (1.0 - dot / (norm_a * norm_b).sqrt()).clamp(0.0, 1.0),
    }
}

/// How the frequency threshold is applied to a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FilterMode {
    /// Drop a feature when its occurrences in both periods together are
    /// below `threshold` times the word's occurrences in both periods.
    #[default]
    Summed,
    /// Drop a feature when in each period its count is below `threshold`
    /// times the word's occurrences in that period.
    PerPeriod,
}

/// Removes rare features from both maps. The comparison is strict: a feature
/// exactly at the threshold survives.
pub fn filter_rare(
    counts_a: &CountMap,
    counts_b: &CountMap,
    total_a: u64,
    total_b: u64,
    threshold: f64,
    mode: FilterMode,
) -> (CountMap, CountMap) {
    if total_a + total_b == 0 || threshold <= 0.0 {
        return (counts_a.clone(), counts_b.clone());
    }
    let get = |m: &CountMap, k: &str| m.get(k).copied().unwrap_or(0) as f64;
    let keep = |key: &str| -> bool {
        let (ca, cb) = (get(counts_a, key), get(counts_b, key));
        match mode {
            FilterMode::Summed => ca + cb >= threshold * (total_a + total_b) as f64,
            FilterMode::PerPeriod => {
                (total_a > 0 && ca >= threshold * total_a as f64) || (total_b > 0 && cb >= threshold * total_b as f64)
            }
        }
    };
    let retain = |m: &CountMap| -> CountMap {
        m.iter()
            .filter(|(k, _)| keep(k))
            .map(|(k, &v)| (k.clone(), v))
            .collect()
    };
    (retain(counts_a), retain(counts_b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Morphology,
    Syntax,
    /// Mean of the morphological and syntactic distances.
    Average,
    /// Syntactic distance appended to the per-category distances, then max.
    Combination,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Morphology => "morphology",
            FeatureKind::Syntax => "syntax",
            FeatureKind::Average => "average",
            FeatureKind::Combination => "combination",
        }
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "morphology" => Ok(FeatureKind::Morphology),
            "syntax" => Ok(FeatureKind::Syntax),
            "average" => Ok(FeatureKind::Average),
            "combination" => Ok(FeatureKind::Combination),
            _ => Err(Error::Config(format!("unknown feature kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Max => "max",
            Aggregation::Mean => "mean",
        }
    }

    /// Aggregates distances; `None` for an empty input.
    pub fn apply<I: IntoIterator<Item = f64>>(self, values: I) -> Option<f64> {
        let mut n = 0usize;
        let mut acc = match self {
            Aggregation::Max => f64::NEG_INFINITY,
            Aggregation::Mean => 0.0,
        };
        for v in values {
            n += 1;
            acc = match self {
                Aggregation::Max => acc.max(v),
                Aggregation::Mean => acc + v,
            };
        }
        match (n, self) {
            (0, _) => None,
            (_, Aggregation::Max) => Some(acc),
            (n, Aggregation::Mean) => Some(acc / n as f64),
        }
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Aggregation::Max),
            "mean" => Ok(Aggregation::Mean),
            _ => Err(Error::Config(format!("unknown aggregation `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub feature_kind: FeatureKind,
    pub separation: bool,
    pub aggregation: Aggregation,
    /// Features rarer than this share of word occurrences are dropped
    /// (default 5%); 0 disables filtering.
    pub filter_threshold: f64,
    pub filter_mode: FilterMode,
    pub zero_profile_distance: f64,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            feature_kind: FeatureKind::Morphology,
            separation: false,
            aggregation: Aggregation::Max,
            filter_threshold: DEFAULT_FILTER_THRESHOLD,
            filter_mode: FilterMode::Summed,
            zero_profile_distance: DEFAULT_ZERO_PROFILE_DISTANCE,
        }
    }
}

impl MethodConfig {
    /// The best-performing graded configuration: category separation, 5%
    /// filtering and syntax appended before taking the max.
    pub fn separated_combination() -> Self {
        MethodConfig {
            feature_kind: FeatureKind::Combination,
            separation: true,
            filter_threshold: DEFAULT_FILTER_THRESHOLD,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.filter_threshold) {
            return Err(Error::Config(format!(
                "filter threshold must be in [0, 1), got {}",
                self.filter_threshold
            )));
        }
        if self.feature_kind == FeatureKind::Combination && !self.separation {
            return Err(Error::Config(
                "the combination method requires category separation".into(),
            ));
        }
        if !self.zero_profile_distance.is_finite() || !(0.0..=1.0).contains(&self.zero_profile_distance) {
            return Err(Error::Config(format!(
                "zero-profile distance must be in [0, 1], got {}",
                self.zero_profile_distance
            )));
        }
        Ok(())
    }

    /// Short textual descriptor, e.g. `combination+separate(max)+filter(0.05)`.
    pub fn descriptor(&self) -> String {
        let mut s = self.feature_kind.as_str().to_string();
        if self.separation {
            s += &format!("+separate({})", self.aggregation.as_str());
        }
        if self.filter_threshold > 0.0 {
            s += &format!("+filter({})", self.filter_threshold);
            if self.filter_mode == FilterMode::PerPeriod {
                s += "+per-period";
            }
        }
        s
    }
}

impl fmt::Display for MethodConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor())
    }
}

/// Which map of a [`Profile`] a basic score compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileSide {
    Morphology,
    Syntax,
}

fn side_total(profile: &Profile, side: ProfileSide) -> u64 {
    match side {
        ProfileSide::Morphology => profile.total,
        // Equal to `total` for well-formed profiles.
        ProfileSide::Syntax => profile.synt.values().sum(),
    }
}

/// Distance between whole FEATS bundles or DEPREL distributions, filtered.
pub fn score_basic(a: &Profile, b: &Profile, side: ProfileSide, config: &MethodConfig) -> f64 {
    let (ma, mb) = match side {
        ProfileSide::Morphology => (&a.morph, &b.morph),
        ProfileSide::Syntax => (&a.synt, &b.synt),
    };
    let (fa, fb) = filter_rare(
        ma,
        mb,
        side_total(a, side),
        side_total(b, side),
        config.filter_threshold,
        config.filter_mode,
    );
    let v = build_vectors(&fa, &fb);
    cosine_distance(&v.a, &v.b, config.zero_profile_distance)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparatedScore {
    pub per_category: BTreeMap<String, f64>,
    /// `None` when no category survives.
    pub aggregate: Option<f64>,
}

/// Per-category distances after separation, each category filtered against
/// the word's occurrence totals. Categories with no surviving values are
/// omitted.
pub fn score_separated(a: &CategoryProfile, b: &CategoryProfile, config: &MethodConfig) -> SeparatedScore {
    let empty = CountMap::new();
    let mut names: Vec<&String> = a.categories.keys().chain(b.categories.keys()).collect();
    names.sort();
    names.dedup();
    let mut per_category = BTreeMap::new();
    for name in names {
        let ca = a.categories.get(name).unwrap_or(&empty);
        let cb = b.categories.get(name).unwrap_or(&empty);
        let (fa, fb) = filter_rare(ca, cb, a.total, b.total, config.filter_threshold, config.filter_mode);
        if fa.is_empty() && fb.is_empty() {
            continue;
        }
        let v = build_vectors(&fa, &fb);
        per_category.insert(name.clone(), cosine_distance(&v.a, &v.b, config.zero_profile_distance));
    }
    let aggregate = config.aggregation.apply(per_category.values().copied());
    SeparatedScore {
        per_category,
        aggregate,
    }
}

/// Mean of the two distances, or whichever one is present.
pub fn combine_average(d_morph: Option<f64>, d_synt: Option<f64>) -> Option<f64> {
    match (d_morph, d_synt) {
        (Some(m), Some(s)) => Some((m + s) / 2.0),
        (m, s) => m.or(s),
    }
}

/// Max over the per-category distances together with the syntactic one.
pub fn combine_append_max(per_category: &BTreeMap<String, f64>, d_synt: Option<f64>) -> Result<f64> {
    Aggregation::Max
        .apply(per_category.values().copied().chain(d_synt))
        .ok_or_else(|| Error::Data("no features for word".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeScore {
    pub word_id: String,
    pub period_pair: (String, String),
    pub d_morph: Option<f64>,
    pub d_synt: Option<f64>,
    pub per_category: BTreeMap<String, f64>,
    pub aggregate: f64,
    pub method: String,
}

fn absent_policy(a: &Profile, b: &Profile, config: &MethodConfig) -> f64 {
    if (a.total == 0) != (b.total == 0) {
        config.zero_profile_distance
    } else {
        0.0
    }
}

/// Scores one word under `config`. The profiles must belong to the same word.
pub fn score_word(a: &Profile, b: &Profile, config: &MethodConfig) -> Result<ChangeScore> {
    config.validate()?;
    if a.word_id != b.word_id {
        return Err(Error::Data(format!(
            "cannot compare profiles of `{}` and `{}`",
            a.word_id, b.word_id
        )));
    }
    let d_synt = Some(score_basic(a, b, ProfileSide::Syntax, config));
    let (d_morph, per_category) = if config.separation {
        let sep = score_separated(&separate_categories(a), &separate_categories(b), config);
        (sep.aggregate, sep.per_category)
    } else {
        (
            Some(score_basic(a, b, ProfileSide::Morphology, config)),
            BTreeMap::new(),
        )
    };
    let aggregate = match config.feature_kind {
        FeatureKind::Morphology => d_morph,
        FeatureKind::Syntax => d_synt,
        FeatureKind::Average => combine_average(d_morph, d_synt),
        FeatureKind::Combination => combine_append_max(&per_category, d_synt).ok(),
    }
    .unwrap_or_else(|| absent_policy(a, b, config));
    Ok(ChangeScore {
        word_id: a.word_id.clone(),
        period_pair: (a.period.clone(), b.period.clone()),
        d_morph,
        d_synt,
        per_category,
        aggregate,
        method: config.descriptor(),
    })
}
