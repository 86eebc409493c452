//! Grammatical profiles: per-word, per-period counts of FEATS bundles and
//! dependency relations.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conllu::{self, split_feats, MalformedPolicy, TargetSet, Token};
use crate::error::{Error, Result};

/// Feature → count. Ordered so that iteration and serialization are
/// deterministic. Entries with a zero count are never stored.
pub type CountMap = BTreeMap<String, u64>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub word_id: String,
    pub period: String,
    /// Verbatim FEATS string → count.
    pub morph: CountMap,
    /// DEPREL label → count.
    pub synt: CountMap,
    /// Matched occurrences, including those with empty FEATS.
    pub total: u64,
}

impl Profile {
    pub fn empty(word_id: impl Into<String>, period: impl Into<String>) -> Self {
        Profile {
            word_id: word_id.into(),
            period: period.into(),
            morph: CountMap::new(),
            synt: CountMap::new(),
            total: 0,
        }
    }

    pub fn add_token(&mut self, token: &Token, options: &ExtractOptions) {
        self.total += 1;
        if !token.feats.is_empty() {
            *self.morph.entry(token.feats.clone()).or_insert(0) += 1;
        }
        let deprel = if options.strip_deprel_subtype {
            token.deprel.split(':').next().unwrap_or(&token.deprel)
        } else {
            token.deprel.as_str()
        };
        *self.synt.entry(deprel.to_string()).or_insert(0) += 1;
    }

    /// Adds the counts of `other` (a shard of the same word and period).
    pub fn merge(&mut self, other: &Profile) {
        add_counts(&mut self.morph, &other.morph);
        add_counts(&mut self.synt, &other.synt);
        self.total += other.total;
    }

    /// Checks the count invariants.
    pub fn validate(&self) -> Result<()> {
        let synt: u64 = self.synt.values().sum();
        let morph: u64 = self.morph.values().sum();
        let zero = self.morph.values().chain(self.synt.values()).any(|&c| c == 0);
        if synt != self.total || morph > self.total || zero {
            return Err(Error::Data(format!(
                "inconsistent profile for `{}` in `{}`: total {}, morph sum {morph}, synt sum {synt}",
                self.word_id, self.period, self.total
            )));
        }
        Ok(())
    }
}

fn add_counts(into: &mut CountMap, from: &CountMap) {
    for (key, &count) in from {
        *into.entry(key.clone()).or_insert(0) += count;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractOptions {
    /// Truncate DEPREL at the first `:` (`obl:tmod` → `obl`).
    pub strip_deprel_subtype: bool,
    pub malformed: MalformedPolicy,
}

/// Profiles keyed by `(word_id, period)`.
pub type ProfileMap = BTreeMap<(String, String), Profile>;

/// Counts the target occurrences of one period's sentences.
pub fn count_sentences<I>(
    sentences: I,
    period: &str,
    targets: &TargetSet,
    options: &ExtractOptions,
) -> Result<Vec<Profile>>
where
    I: IntoIterator<Item = Result<conllu::Sentence>>,
{
    let mut profiles: Vec<Profile> = targets
        .specs()
        .iter()
        .map(|spec| Profile::empty(&spec.word_id, period))
        .collect();
    for sentence in sentences {
        let sentence = sentence?;
        for token in &sentence {
            if let Some(i) = targets.match_token(token) {
                profiles[i].add_token(token, options);
            }
        }
    }
    Ok(profiles)
}

/// Counts the target occurrences in one CONLL-U stream.
pub fn count_reader<R: BufRead>(
    reader: R,
    period: &str,
    targets: &TargetSet,
    options: &ExtractOptions,
) -> Result<Vec<Profile>> {
    count_sentences(
        conllu::parse_conllu(reader, options.malformed),
        period,
        targets,
        options,
    )
}

/// One period of a diachronic corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodSource {
    pub label: String,
    pub paths: Vec<PathBuf>,
}

/// Builds a profile for every target in every period. Corpus files are
/// read in parallel and their counts merged.
pub fn extract_profiles(periods: &[PeriodSource], targets: &TargetSet, options: &ExtractOptions) -> Result<ProfileMap> {
    if periods.len() < 2 {
        return Err(Error::Config(format!(
            "at least two periods are required, found {}",
            periods.len()
        )));
    }
    let jobs: Vec<(&str, &PathBuf)> = periods
        .iter()
        .flat_map(|p| p.paths.iter().map(move |path| (p.label.as_str(), path)))
        .collect();
    let shards: Vec<Vec<Profile>> = jobs
        .par_iter()
        .map(|&(period, path)| {
            conllu::open_corpus(path)
                .and_then(|reader| count_reader(reader, period, targets, options))
                .map_err(|e| Error::Corpus {
                    period: period.to_string(),
                    path: path.clone(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;

    let mut out = ProfileMap::new();
    for period in periods {
        for spec in targets.specs() {
            out.insert(
                (spec.word_id.clone(), period.label.clone()),
                Profile::empty(&spec.word_id, &period.label),
            );
        }
    }
    for shard in shards {
        for profile in shard {
            let key = (profile.word_id.clone(), profile.period.clone());
            out.get_mut(&key)
                .expect("shard profiles cover configured targets")
                .merge(&profile);
        }
    }
    Ok(out)
}

/// A profile whose FEATS bundles are split into independent categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryProfile {
    pub word_id: String,
    pub period: String,
    /// Category (e.g. `Tense`) → value (e.g. `Past`) → count.
    pub categories: BTreeMap<String, CountMap>,
    pub synt: CountMap,
    pub total: u64,
}

/// Distributes the count of each FEATS bundle `K1=V1|K2=V2|...` over its
/// categories. Pieces without `=` are skipped with a warning, as are
/// repeated keys within one bundle.
pub fn separate_categories(profile: &Profile) -> CategoryProfile {
    let mut categories: BTreeMap<String, CountMap> = BTreeMap::new();
    for (feats, &count) in &profile.morph {
        let mut seen: Vec<&str> = Vec::new();
        for piece in split_feats(feats) {
            match piece {
                Ok((key, value)) => {
                    if seen.contains(&key) {
                        log::warn!("`{}`: repeated feature `{key}` in `{feats}`", profile.word_id);
                        continue;
                    }
                    seen.push(key);
                    *categories
                        .entry(key.to_string())
                        .or_default()
                        .entry(value.to_string())
                        .or_insert(0) += count;
                }
                Err(bad) => {
                    log::warn!("`{}`: skipping malformed feature `{bad}` in `{feats}`", profile.word_id)
                }
            }
        }
    }
    CategoryProfile {
        word_id: profile.word_id.clone(),
        period: profile.period.clone(),
        categories,
        synt: profile.synt.clone(),
        total: profile.total,
    }
}

/// Two count maps aligned on the sorted union of their keys.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedVectors {
    pub names: Vec<String>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

pub fn build_vectors(counts_a: &CountMap, counts_b: &CountMap) -> AlignedVectors {
    let mut names: Vec<String> = counts_a.keys().chain(counts_b.keys()).cloned().collect();
    names.sort();
    names.dedup();
    let lookup = |m: &CountMap, k: &String| m.get(k).copied().unwrap_or(0) as f64;
    let a = names.iter().map(|k| lookup(counts_a, k)).collect();
    let b = names.iter().map(|k| lookup(counts_b, k)).collect();
    AlignedVectors { names, a, b }
}
