//! On-disk profile store.
//!
//! A JSON-lines file: the first line is a header naming the format and
//! version together with the dataset layout, each following line one
//! [`Profile`].
//!
//! ```text
//! {"format":"gramprof-profiles","version":1,"dataset":"english","periods":["1810-1860","1960-2010"],...}
//! {"word_id":"lass","period":"1810-1860","morph":{"Number=Plur":114,"Number=Sing":338},"synt":{"nsubj":452},"total":452}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{Profile, ProfileMap};
use crate::scoring::{score_word, ChangeScore, MethodConfig};

pub const STORE_FORMAT: &str = "gramprof-profiles";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreHeader {
    pub format: String,
    pub version: u32,
    pub dataset: String,
    pub periods: Vec<String>,
    pub pairs: Vec<(String, String)>,
    pub targets: Vec<String>,
    #[serde(default)]
    pub strip_deprel_subtype: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileStore {
    pub header: StoreHeader,
    pub profiles: ProfileMap,
}

impl ProfileStore {
    pub fn new(
        dataset: impl Into<String>,
        periods: Vec<String>,
        pairs: Vec<(String, String)>,
        targets: Vec<String>,
        profiles: ProfileMap,
    ) -> Result<Self> {
        let store = ProfileStore {
            header: StoreHeader {
                format: STORE_FORMAT.into(),
                version: STORE_VERSION,
                dataset: dataset.into(),
                periods,
                pairs,
                targets,
                strip_deprel_subtype: false,
            },
            profiles,
        };
        store.validate()?;
        Ok(store)
    }

    fn validate(&self) -> Result<()> {
        let h = &self.header;
        if h.format != STORE_FORMAT {
            return Err(Error::Data(format!("not a profile store (format `{}`)", h.format)));
        }
        if h.version != STORE_VERSION {
            return Err(Error::Data(format!("unsupported profile store version {}", h.version)));
        }
        for (a, b) in &h.pairs {
            if !h.periods.contains(a) || !h.periods.contains(b) {
                return Err(Error::Data(format!("pair ({a}, {b}) references an undeclared period")));
            }
        }
        for word in &h.targets {
            for period in &h.periods {
                if !self.profiles.contains_key(&(word.clone(), period.clone())) {
                    return Err(Error::Data(format!("missing profile for `{word}` in `{period}`")));
                }
            }
        }
        for profile in self.profiles.values() {
            profile.validate()?;
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Data(e.to_string());
        serde_json::to_writer(&mut out, &self.header).map_err(|e| Error::Data(e.to_string()))?;
        out.write_all(b"\n").map_err(io)?;
        // Records follow target then period order.
        for word in &self.header.targets {
            for period in &self.header.periods {
                let profile = &self.profiles[&(word.clone(), period.clone())];
                serde_json::to_writer(&mut out, profile).map_err(|e| Error::Data(e.to_string()))?;
                out.write_all(b"\n").map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let parse_err = |line: usize, e: serde_json::Error| Error::Parse {
            line,
            message: e.to_string(),
        };
        let header: StoreHeader = match lines.next() {
            Some((_, line)) => {
                let line = line.map_err(|e| Error::Data(e.to_string()))?;
                serde_json::from_str(&line).map_err(|e| parse_err(1, e))?
            }
            None => return Err(Error::Data("empty profile store".into())),
        };
        let mut profiles = ProfileMap::new();
        for (i, line) in lines {
            let line = line.map_err(|e| Error::Data(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let profile: Profile = serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e))?;
            let key = (profile.word_id.clone(), profile.period.clone());
            if profiles.insert(key, profile).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "duplicate (word, period) record".into(),
                });
            }
        }
        let store = ProfileStore { header, profiles };
        store.validate()?;
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file))
    }

    pub fn profile(&self, word: &str, period: &str) -> Option<&Profile> {
        self.profiles.get(&(word.to_string(), period.to_string()))
    }

    /// Profiles of one word across all periods, in period order.
    pub fn word_profiles(&self, word: &str) -> Result<Vec<&Profile>> {
        if !self.header.targets.iter().any(|t| t == word) {
            return Err(Error::Data(format!("unknown word `{word}`")));
        }
        Ok(self
            .header
            .periods
            .iter()
            .filter_map(|p| self.profile(word, p))
            .collect())
    }

    /// The requested pair, or the first declared pair.
    pub fn resolve_pair(&self, pair: Option<(&str, &str)>) -> Result<(String, String)> {
        match pair {
            Some((a, b)) => {
                let h = &self.header;
                if h.periods.iter().any(|p| p == a) && h.periods.iter().any(|p| p == b) {
                    Ok((a.to_string(), b.to_string()))
                } else {
                    Err(Error::Config(format!(
                        "pair ({a}, {b}) not in store; periods are {}",
                        h.periods.join(", ")
                    )))
                }
            }
            None => self
                .header
                .pairs
                .first()
                .cloned()
                .ok_or_else(|| Error::Config("store declares no period pairs".into())),
        }
    }

    /// Scores every target word on one period pair.
    pub fn score_pair(&self, pair: &(String, String), config: &MethodConfig) -> Result<Vec<ChangeScore>> {
        config.validate()?;
        self.header
            .targets
            .iter()
            .map(|word| {
                let missing = |p: &str| Error::Data(format!("missing profile for `{word}` in `{p}`"));
                let a = self.profile(word, &pair.0).ok_or_else(|| missing(&pair.0))?;
                let b = self.profile(word, &pair.1).ok_or_else(|| missing(&pair.1))?;
                score_word(a, b, config)
            })
            .collect()
    }
}

/// Consecutive pairs, plus (first, last) when there are three or more periods.
pub fn default_pairs(periods: &[String]) -> Vec<(String, String)> {
    let mut pairs: Vec<(String, String)> = periods.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
    if periods.len() >= 3 {
        pairs.push((periods[0].clone(), periods[periods.len() - 1].clone()));
    }
    pairs
}
