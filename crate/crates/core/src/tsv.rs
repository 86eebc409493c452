//! Answer and gold files in the shared-task TSV shapes.
//!
//! * scores: `word_id<TAB>score`, six decimals
//! * labels: `word_id<TAB>0|1`
//! * gold: `word_id<TAB>binary<TAB>graded`, `-` for an absent value

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::decision::{Labels, Ranking};
use crate::error::{Error, Result};
use crate::evaluation::{Gold, GoldRecord};

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').map(str::trim).collect()))
        }
    })
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn insert_unique<V>(map: &mut BTreeMap<String, V>, line: usize, key: &str, value: V) -> Result<()> {
    if map.insert(key.to_string(), value).is_some() {
        return Err(parse_error(line, format!("duplicate word `{key}`")));
    }
    Ok(())
}

fn parse_score(line: usize, s: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_error(line, format!("invalid score `{s}`"))),
    }
}

fn parse_label(line: usize, s: &str) -> Result<bool> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(parse_error(line, format!("invalid binary label `{s}`"))),
    }
}

pub fn read_scores(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (line, cols) in data_lines(text) {
        let [word, score, ..] = cols.as_slice() else {
            return Err(parse_error(line, "expected `word<TAB>score`"));
        };
        insert_unique(&mut out, line, word, parse_score(line, score)?)?;
    }
    Ok(out)
}

pub fn write_scores(ranking: &Ranking) -> String {
    let mut out = String::new();
    for (word, score) in ranking.entries() {
        writeln!(out, "{word}\t{score:.6}").unwrap();
    }
    out
}

pub fn read_labels(text: &str) -> Result<Labels> {
    let mut out = Labels::new();
    for (line, cols) in data_lines(text) {
        let [word, label, ..] = cols.as_slice() else {
            return Err(parse_error(line, "expected `word<TAB>label`"));
        };
        insert_unique(&mut out, line, word, parse_label(line, label)?)?;
    }
    Ok(out)
}

/// Labels in ranking order when a ranking is given, else by word.
pub fn write_labels(labels: &Labels, order: Option<&Ranking>) -> String {
    let mut out = String::new();
    let words: Vec<&str> = match order {
        Some(r) => r.words().collect(),
        None => labels.keys().map(String::as_str).collect(),
    };
    for word in words {
        writeln!(out, "{word}\t{}", u8::from(labels[word])).unwrap();
    }
    out
}

pub fn read_gold(text: &str) -> Result<Gold> {
    let mut out = BTreeMap::new();
    for (line, cols) in data_lines(text) {
        let (word, binary, graded) = match cols.as_slice() {
            [w, b, g, ..] => (*w, *b, *g),
            [w, b] => (*w, *b, "-"),
            _ => return Err(parse_error(line, "expected `word<TAB>binary<TAB>graded`")),
        };
        let binary = match binary {
            "-" | "" => None,
            b => Some(parse_label(line, b)?),
        };
        let graded = match graded {
            "-" | "" => None,
            g => Some(parse_score(line, g)?),
        };
        if binary.is_none() && graded.is_none() {
            return Err(parse_error(line, format!("no gold value for `{word}`")));
        }
        let record = GoldRecord {
            word_id: word.to_string(),
            binary,
            graded,
        };
        insert_unique(&mut out, line, word, record)?;
    }
    Ok(Gold(out))
}
