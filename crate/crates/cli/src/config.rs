//! Dataset configuration files.
//!
//! ```toml
//! name = "english"
//! targets = "targets.tsv"
//! gold = "gold.tsv"
//! pairs = [["1810-1860", "1960-2010"]]
//!
//! [[periods]]
//! label = "1810-1860"
//! paths = ["ccoha1.conllu.gz"]
//!
//! [[periods]]
//! label = "1960-2010"
//! paths = ["ccoha2.conllu.gz"]
//!
//! [matching]
//! case_fold = false
//! match_form = false
//! strip_deprel_subtype = false
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use gramprof::profiles::PeriodSource;
use gramprof::store::default_pairs;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    pub targets: PathBuf,
    #[serde(default)]
    pub gold: Option<PathBuf>,
    pub periods: Vec<PeriodSpec>,
    #[serde(default)]
    pub pairs: Option<Vec<(String, String)>>,
    #[serde(default)]
    pub matching: Matching,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodSpec {
    pub label: String,
    pub paths: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matching {
    #[serde(default)]
    pub case_fold: bool,
    #[serde(default)]
    pub match_form: bool,
    #[serde(default)]
    pub strip_deprel_subtype: bool,
}

impl DatasetSpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut spec: DatasetSpec =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        spec.resolve(base);
        spec.validate()?;
        Ok(spec)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.targets);
        if let Some(gold) = &mut self.gold {
            join(gold);
        }
        for period in &mut self.periods {
            period.paths.iter_mut().for_each(join);
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.periods.len() < 2 {
            return usage(format!(
                "dataset `{}` declares {} period(s); at least two are required",
                self.name,
                self.periods.len()
            ));
        }
        let labels = self.labels();
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return usage(format!("period `{label}` is declared twice"));
            }
        }
        for period in &self.periods {
            if period.paths.is_empty() {
                return usage(format!("period `{}` lists no corpus files", period.label));
            }
            for path in &period.paths {
                if !path.exists() {
                    return usage(format!(
                        "period `{}`: corpus file {} does not exist",
                        period.label,
                        path.display()
                    ));
                }
            }
        }
        for (a, b) in self.pairs.iter().flatten() {
            if !labels.contains(a) || !labels.contains(b) {
                return usage(format!("pair ({a}, {b}) references an undeclared period"));
            }
        }
        if !self.targets.exists() {
            return usage(format!("target list {} does not exist", self.targets.display()));
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        self.periods.iter().map(|p| p.label.clone()).collect()
    }

    pub fn pairs(&self) -> Vec<(String, String)> {
        match &self.pairs {
            Some(pairs) => pairs.clone(),
            None => default_pairs(&self.labels()),
        }
    }

    pub fn sources(&self) -> Vec<PeriodSource> {
        self.periods
            .iter()
            .map(|p| PeriodSource {
                label: p.label.clone(),
                paths: p.paths.clone(),
            })
            .collect()
    }
}
