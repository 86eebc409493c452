//! Streaming CONLL-U reader and target-word matching.
//!
//! Only the columns needed for grammatical profiles are kept: FORM, LEMMA,
//! UPOS, FEATS, HEAD and DEPREL. Multiword-token ranges (`3-4`) and empty
//! nodes (`5.1`) are skipped.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use flate2::read::MultiGzDecoder;

use crate::error::{Error, Result};

const COLUMNS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub form: String,
    pub lemma: String,
    pub upos: String,
    /// Raw FEATS column, empty when the column is `_`.
    pub feats: String,
    pub deprel: String,
    pub head: usize,
}

impl Token {
    /// Iterates the `Key=Value` pairs of the FEATS column. A piece without
    /// `=` is yielded as `Err(piece)`.
    pub fn features(&self) -> impl Iterator<Item = Result<(&str, &str), &str>> {
        split_feats(&self.feats)
    }

    /// Writes the token as a 10-column CONLL-U line with the given ID.
    pub fn to_conllu_line(&self, id: usize) -> String {
        let feats = if self.feats.is_empty() { "_" } else { &self.feats };
        format!(
            "{id}\t{}\t{}\t{}\t_\t{feats}\t{}\t{}\t_\t_",
            self.form, self.lemma, self.upos, self.head, self.deprel
        )
    }
}

/// Splits a FEATS string into `Key=Value` pairs.
pub fn split_feats(feats: &str) -> impl Iterator<Item = Result<(&str, &str), &str>> {
    feats
        .split('|')
        .filter(|piece| !piece.is_empty() && *piece != "_")
        .map(|piece| match piece.split_once('=') {
            Some((key, value)) if !key.is_empty() => Ok((key, value)),
            _ => Err(piece),
        })
}

pub type Sentence = Vec<Token>;

/// What to do with a token line that does not have 10 columns or has an
/// unparsable HEAD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MalformedPolicy {
    /// Log a warning and drop the line.
    #[default]
    Skip,
    /// Stop with a parse error.
    Abort,
}

/// Iterator over the sentences of a CONLL-U stream.
pub struct Sentences<R> {
    reader: R,
    policy: MalformedPolicy,
    line_no: usize,
    skipped: usize,
    buf: String,
    done: bool,
}

impl<R: BufRead> Sentences<R> {
    pub fn new(reader: R, policy: MalformedPolicy) -> Self {
        Sentences {
            reader,
            policy,
            line_no: 0,
            skipped: 0,
            buf: String::new(),
            done: false,
        }
    }

    /// Number of malformed lines dropped so far under [`MalformedPolicy::Skip`].
    pub fn skipped(&self) -> usize {
        self.skipped
    }
}

impl<R: BufRead> Iterator for Sentences<R> {
    type Item = Result<Sentence>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut sentence = Sentence::new();
        loop {
            self.buf.clear();
            let read = match self.reader.read_line(&mut self.buf) {
                Ok(n) => n,
                Err(e) => {
                    self.done = true;
                    return Some(Err(Error::Parse {
                        line: self.line_no + 1,
                        message: e.to_string(),
                    }));
                }
            };
            if read == 0 {
                self.done = true;
                return if sentence.is_empty() { None } else { Some(Ok(sentence)) };
            }
            self.line_no += 1;
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                if sentence.is_empty() {
                    continue;
                }
                return Some(Ok(sentence));
            }
            if line.starts_with('#') {
                continue;
            }
            match parse_token_line(line) {
                Ok(Some(token)) => sentence.push(token),
                Ok(None) => {}
                Err(message) => match self.policy {
                    MalformedPolicy::Skip => {
                        log::warn!("skipping malformed line {}: {message}", self.line_no);
                        self.skipped += 1;
                    }
                    MalformedPolicy::Abort => {
                        self.done = true;
                        return Some(Err(Error::Parse {
                            line: self.line_no,
                            message,
                        }));
                    }
                },
            }
        }
    }
}

/// Parses one token line. Returns `Ok(None)` for multiword ranges and empty
/// nodes.
fn parse_token_line(line: &str) -> Result<Option<Token>, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != COLUMNS {
        return Err(format!("expected {COLUMNS} columns, found {}", cols.len()));
    }
    let id = cols[0];
    if id.contains('-') || id.contains('.') {
        return Ok(None);
    }
    if id.parse::<usize>().is_err() {
        return Err(format!("invalid token ID `{id}`"));
    }
    let head = cols[6]
        .parse::<usize>()
        .map_err(|_| format!("invalid HEAD `{}`", cols[6]))?;
    let deprel = cols[7];
    if deprel.is_empty() {
        return Err("empty DEPREL".to_string());
    }
    let feats = if cols[5] == "_" { "" } else { cols[5] };
    Ok(Some(Token {
        form: cols[1].to_string(),
        lemma: cols[2].to_string(),
        upos: cols[3].to_string(),
        feats: feats.to_string(),
        deprel: deprel.to_string(),
        head,
    }))
}

/// Parses CONLL-U from a buffered reader.
pub fn parse_conllu<R: BufRead>(reader: R, policy: MalformedPolicy) -> Sentences<R> {
    Sentences::new(reader, policy)
}

/// Parses a whole CONLL-U document held in memory.
pub fn parse_str(text: &str, policy: MalformedPolicy) -> Result<Vec<Sentence>> {
    parse_conllu(text.as_bytes(), policy).collect()
}

/// Opens a corpus file, transparently decompressing `.gz` files.
pub fn open_corpus(path: &Path) -> Result<Box<dyn BufRead + Send>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let gz = path.extension().is_some_and(|ext| ext == "gz");
    Ok(if gz {
        Box::new(BufReader::new(MultiGzDecoder::new(file)))
    } else {
        Box::new(BufReader::new(file))
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetSpec {
    pub word_id: String,
    pub lemma: String,
    pub upos_filter: Option<BTreeSet<String>>,
}

impl TargetSpec {
    pub fn new(word_id: impl Into<String>, lemma: impl Into<String>) -> Self {
        TargetSpec {
            word_id: word_id.into(),
            lemma: lemma.into(),
            upos_filter: None,
        }
    }

    pub fn with_upos<I, S>(mut self, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.upos_filter = Some(tags.into_iter().map(Into::into).collect());
        self
    }

    fn accepts_upos(&self, upos: &str) -> bool {
        self.upos_filter.as_ref().is_none_or(|tags| tags.contains(upos))
    }

    fn overlaps(&self, other: &TargetSpec) -> bool {
        match (&self.upos_filter, &other.upos_filter) {
            (Some(a), Some(b)) => !a.is_disjoint(b),
            _ => true,
        }
    }
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}", self.word_id, self.lemma)?;
        if let Some(tags) = &self.upos_filter {
            let tags: Vec<&str> = tags.iter().map(String::as_str).collect();
            write!(f, "\t{}", tags.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatchOptions {
    /// Compare lowercased strings.
    pub case_fold: bool,
    /// Match target lemmas against FORM instead of LEMMA.
    pub match_form: bool,
}

/// A validated set of target words, indexed by lemma for matching.
#[derive(Debug, Clone)]
pub struct TargetSet {
    specs: Vec<TargetSpec>,
    by_lemma: HashMap<String, Vec<usize>>,
    options: MatchOptions,
}

impl TargetSet {
    /// Builds the set. Fails when word IDs repeat, a lemma is empty, or two
    /// specs with the same lemma could both accept one token.
    pub fn new(specs: Vec<TargetSpec>, options: MatchOptions) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Config("target list is empty".into()));
        }
        let mut ids = BTreeSet::new();
        let mut by_lemma: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, spec) in specs.iter().enumerate() {
            if spec.lemma.is_empty() {
                return Err(Error::Config(format!("target `{}` has an empty lemma", spec.word_id)));
            }
            if !ids.insert(spec.word_id.as_str()) {
                return Err(Error::Config(format!("duplicate target id `{}`", spec.word_id)));
            }
            let key = fold(&spec.lemma, options.case_fold);
            let bucket = by_lemma.entry(key).or_default();
            if let Some(&j) = bucket.iter().find(|&&j| specs[j].overlaps(spec)) {
                return Err(Error::Config(format!(
                    "targets `{}` and `{}` share lemma `{}` with overlapping POS filters",
                    specs[j].word_id, spec.word_id, spec.lemma
                )));
            }
            bucket.push(i);
        }
        Ok(TargetSet {
            specs,
            by_lemma,
            options,
        })
    }

    pub fn specs(&self) -> &[TargetSpec] {
        &self.specs
    }

    pub fn options(&self) -> MatchOptions {
        self.options
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Index of the target matching `token`, if any.
    pub fn match_token(&self, token: &Token) -> Option<usize> {
        let text = if self.options.match_form {
            &token.form
        } else {
            &token.lemma
        };
        let bucket = if self.options.case_fold {
            self.by_lemma.get(&text.to_lowercase())
        } else {
            self.by_lemma.get(text.as_str())
        }?;
        bucket
            .iter()
            .copied()
            .find(|&i| self.specs[i].accepts_upos(&token.upos))
    }

    /// All `(word_id, token)` matches in a sentence, in token order.
    pub fn match_targets<'a>(&'a self, sentence: &'a [Token]) -> Vec<(&'a str, &'a Token)> {
        sentence
            .iter()
            .filter_map(|token| self.match_token(token).map(|i| (self.specs[i].word_id.as_str(), token)))
            .collect()
    }
}

fn fold(s: &str, case_fold: bool) -> String {
    if case_fold {
        s.to_lowercase()
    } else {
        s.to_string()
    }
}

/// Reads a target list: `word_id<TAB>lemma[<TAB>UPOS,UPOS]` per line, `#`
/// comments and blank lines ignored. A line with a single column uses the
/// word ID as lemma.
pub fn parse_targets(text: &str) -> Result<Vec<TargetSpec>> {
    let mut specs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        let spec = match cols.as_slice() {
            [id] => TargetSpec::new(*id, *id),
            [id, lemma] => TargetSpec::new(*id, *lemma),
            [id, lemma, tags] => {
                let tags: Vec<&str> = tags.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
                if tags.is_empty() {
                    TargetSpec::new(*id, *lemma)
                } else {
                    TargetSpec::new(*id, *lemma).with_upos(tags)
                }
            }
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected 1-3 tab-separated columns, found {}", cols.len()),
                })
            }
        };
        if spec.word_id.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: "empty word id".into(),
            });
        }
        specs.push(spec);
    }
    Ok(specs)
}
