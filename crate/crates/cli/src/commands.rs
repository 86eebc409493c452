use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use gramprof::analysis::{self, CorrelationOptions, FeatureMatrix, LogRegOptions};
use gramprof::conllu::{parse_targets, MalformedPolicy};
use gramprof::decision::{self, rank_words, DEFAULT_RATIO};
use gramprof::evaluation::{accuracy, macro_f1, spearman};
use gramprof::profiles::{extract_profiles, ExtractOptions};
use gramprof::{tsv, FeatureKind, Labels, MatchOptions, ProfileStore, Ranking, TargetSet};
use serde::Serialize;

use crate::config::DatasetSpec;
use crate::{
    AnalyzeArgs, ClassifyArgs, CliError, EvaluateArgs, ExtractArgs, Format, RankArgs, Report, ScoreArgs, Task,
    TimelineArgs,
};

type CliResult = Result<(), CliError>;

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| {
        let msg = format!("{}: {e}", path.display());
        if e.kind() == io::ErrorKind::NotFound {
            CliError::Usage(msg)
        } else {
            CliError::Data(msg)
        }
    })
}

fn with_path(path: &Path) -> impl Fn(gramprof::Error) -> CliError + '_ {
    move |e| CliError::from(e).prefixed(path)
}

impl CliError {
    fn prefixed(self, path: &Path) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        }
    }
}

fn emit(output: Option<&PathBuf>, text: &str) -> CliResult {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|()| out.flush())
                .map_err(|e| CliError::Data(e.to_string()))
        }
    }
}

fn parse_pair(s: &str) -> Result<(&str, &str), CliError> {
    s.split_once(':')
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .ok_or_else(|| CliError::Usage(format!("period pair must look like OLD:NEW, got `{s}`")))
}

fn load_store(path: &Path) -> Result<ProfileStore, CliError> {
    ProfileStore::load(path).map_err(with_path(path))
}

fn load_ranking(path: &Path) -> Result<Ranking, CliError> {
    let scores = tsv::read_scores(&read_text(path)?).map_err(with_path(path))?;
    Ok(rank_words(scores))
}

pub fn extract(args: &ExtractArgs) -> CliResult {
    let spec = DatasetSpec::load(&args.config)?;
    let specs = parse_targets(&read_text(&spec.targets)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", spec.targets.display())))?;
    let options = MatchOptions {
        case_fold: args.case_fold || spec.matching.case_fold,
        match_form: args.match_form || spec.matching.match_form,
    };
    let targets = TargetSet::new(specs, options)?;
    let strip = args.strip_deprel_subtype || spec.matching.strip_deprel_subtype;
    let extract = ExtractOptions {
        strip_deprel_subtype: strip,
        malformed: if args.strict {
            MalformedPolicy::Abort
        } else {
            MalformedPolicy::Skip
        },
    };
    let profiles = extract_profiles(&spec.sources(), &targets, &extract)?;
    let word_ids: Vec<String> = targets.specs().iter().map(|s| s.word_id.clone()).collect();
    let labels = spec.labels();
    let mut store = ProfileStore::new(&spec.name, labels.clone(), spec.pairs(), word_ids.clone(), profiles)?;
    store.header.strip_deprel_subtype = strip;
    store.save(&args.output).map_err(with_path(&args.output))?;

    let mut report = format!("word\t{}\n", labels.join("\t"));
    for word in &word_ids {
        let counts: Vec<u64> = labels
            .iter()
            .map(|p| store.profile(word, p).map_or(0, |pr| pr.total))
            .collect();
        if counts.iter().all(|&c| c == 0) {
            log::warn!("target `{word}` has no matches in any period");
        }
        let cells: Vec<String> = counts.iter().map(u64::to_string).collect();
        writeln!(report, "{word}\t{}", cells.join("\t")).unwrap();
    }
    emit(None, &report)
}

pub fn score(args: &ScoreArgs) -> CliResult {
    let store = load_store(&args.store)?;
    let pair = store.resolve_pair(args.pair.as_deref().map(parse_pair).transpose()?)?;
    let config = args.method.config();
    let scores = store.score_pair(&pair, &config)?;
    let ranking = rank_words(scores.iter().map(|s| (s.word_id.as_str(), s.aggregate)));
    if !args.explain {
        return emit(args.output.as_ref(), &tsv::write_scores(&ranking));
    }

    let by_word: BTreeMap<&str, _> = scores.iter().map(|s| (s.word_id.as_str(), s)).collect();
    let categories: BTreeSet<&String> = scores.iter().flat_map(|s| s.per_category.keys()).collect();
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
    let mut out = String::from("word\tscore\td_morph\td_synt");
    for c in &categories {
        write!(out, "\t{c}").unwrap();
    }
    out.push('\n');
    for (word, score) in ranking.entries() {
        let s = by_word[word.as_str()];
        write!(out, "{word}\t{score:.6}\t{}\t{}", opt(s.d_morph), opt(s.d_synt)).unwrap();
        for c in &categories {
            write!(out, "\t{}", opt(s.per_category.get(*c).copied())).unwrap();
        }
        out.push('\n');
    }
    emit(args.output.as_ref(), &out)
}

pub fn rank(args: &RankArgs) -> CliResult {
    let store = load_store(&args.store)?;
    let pairs = if args.pair.is_empty() {
        store.header.pairs.clone()
    } else {
        args.pair
            .iter()
            .map(|p| store.resolve_pair(Some(parse_pair(p)?)).map_err(CliError::from))
            .collect::<Result<_, _>>()?
    };
    let config = args.method.config();
    let mut out = String::from("pair\trank\tword\tscore\n");
    for pair in &pairs {
        let scores = store.score_pair(pair, &config)?;
        let ranking = rank_words(scores.iter().map(|s| (s.word_id.as_str(), s.aggregate)));
        for (i, (word, score)) in ranking.entries().iter().take(args.top).enumerate() {
            writeln!(out, "{}:{}\t{}\t{word}\t{score:.6}", pair.0, pair.1, i + 1).unwrap();
        }
    }
    emit(None, &out)
}

pub fn classify(args: &ClassifyArgs) -> CliResult {
    let decide = |path: &Path| -> Result<(Ranking, Labels), CliError> {
        let ranking = load_ranking(path)?;
        let labels = if args.changepoint {
            let cp = decision::classify_changepoint(&ranking).map_err(with_path(path))?;
            log::info!(
                "{}: change point after {} words (cost {:.6})",
                path.display(),
                cp.breakpoint,
                cp.cost
            );
            cp.labels
        } else {
            decision::classify_topn(&ranking, args.ratio.unwrap_or(DEFAULT_RATIO))?
        };
        Ok((ranking, labels))
    };
    let (ranking, mut labels) = decide(&args.scores)?;
    if let Some(other) = &args.with {
        let (_, second) = decide(other)?;
        labels = decision::average_binary(&labels, &second)?;
    }
    emit(args.output.as_ref(), &tsv::write_labels(&labels, Some(&ranking)))
}

#[derive(Serialize)]
struct Metric {
    metric: &'static str,
    value: f64,
}

fn render_metrics(metrics: &[Metric], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Table => {
            for m in metrics {
                writeln!(out, "{:<10} {:.3}", m.metric, m.value).unwrap();
            }
        }
        Format::Tsv => {
            out.push_str("metric\tvalue\n");
            for m in metrics {
                writeln!(out, "{}\t{}", m.metric, m.value).unwrap();
            }
        }
        Format::JsonLines => {
            for m in metrics {
                writeln!(out, "{}", serde_json::to_string(m).unwrap()).unwrap();
            }
        }
    }
    out
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult {
    let gold = tsv::read_gold(&read_text(&args.gold)?).map_err(with_path(&args.gold))?;
    let text = read_text(&args.predictions)?;
    let metrics = match args.task {
        Task::Binary => {
            let pred = tsv::read_labels(&text).map_err(with_path(&args.predictions))?;
            let gold = gold.binary()?;
            let f1 = macro_f1(&pred, &gold)?;
            if !f1.absent_classes.is_empty() {
                log::warn!(
                    "class(es) {:?} occur in neither predictions nor gold; F1 counted as 0",
                    f1.absent_classes
                );
            }
            vec![
                Metric {
                    metric: "accuracy",
                    value: accuracy(&pred, &gold)?,
                },
                Metric {
                    metric: "macro_f1",
                    value: f1.value,
                },
            ]
        }
        Task::Graded => {
            let pred = tsv::read_scores(&text).map_err(with_path(&args.predictions))?;
            vec![Metric {
                metric: "spearman",
                value: spearman(&pred, &gold.graded()?)?,
            }]
        }
    };
    emit(None, &render_metrics(&metrics, args.format))
}

fn analysis_matrix(args: &AnalyzeArgs, store: &ProfileStore) -> Result<FeatureMatrix, CliError> {
    let pair = store.resolve_pair(args.pair.as_deref().map(parse_pair).transpose()?)?;
    let config = args.filter.method(FeatureKind::Morphology, true);
    let scores = store.score_pair(&pair, &config)?;
    let matrix = FeatureMatrix::from_scores(&scores);
    match &args.subset {
        None => Ok(matrix),
        Some(suffix) => {
            let subset = matrix.filter_rows(|w| w.ends_with(suffix.as_str())).drop_zero_columns();
            if subset.n_rows() == 0 {
                return Err(CliError::Usage(format!("no word id ends with `{suffix}`")));
            }
            Ok(subset)
        }
    }
}

pub fn analyze(args: &AnalyzeArgs) -> CliResult {
    let store = load_store(&args.store)?;
    let gold = tsv::read_gold(&read_text(&args.gold)?).map_err(with_path(&args.gold))?;
    let matrix = analysis_matrix(args, &store)?;
    let mut gold = gold;
    if args.subset.is_some() {
        gold.0.retain(|w, _| matrix.rows.contains(w));
    }
    let text = match args.report {
        Report::Logreg => logreg_report(args, &matrix, &gold.binary()?)?,
        Report::Correlation => correlation_report(args, &matrix, &gold.graded()?)?,
    };
    emit(None, &text)
}

fn logreg_report(args: &AnalyzeArgs, matrix: &FeatureMatrix, labels: &Labels) -> Result<String, CliError> {
    let standardized = analysis::standardize(matrix)?;
    for column in &standardized.constant_columns {
        log::warn!("column `{column}` is constant; its standardized values are 0");
    }
    let options = LogRegOptions {
        c: args.c,
        ..Default::default()
    };
    let fit = analysis::train_logreg(&standardized.matrix, labels, &options)?;
    let mut out = String::new();
    match args.format {
        Format::Table => {
            writeln!(out, "{:<16} {:>12}", "column", "coefficient").unwrap();
            for (column, coef) in fit.columns.iter().zip(&fit.coefficients) {
                writeln!(out, "{column:<16} {coef:>12.6}").unwrap();
            }
            writeln!(out, "{:<16} {:>12.6}", "(intercept)", fit.intercept).unwrap();
            writeln!(out).unwrap();
            writeln!(out, "positive  {}", fit.positive.join(", ")).unwrap();
            writeln!(out, "accuracy  {:.3}", fit.accuracy).unwrap();
            writeln!(out, "macro_f1  {:.3}", fit.macro_f1).unwrap();
        }
        Format::Tsv => {
            out.push_str("column\tcoefficient\n");
            for (column, coef) in fit.columns.iter().zip(&fit.coefficients) {
                writeln!(out, "{column}\t{coef}").unwrap();
            }
            writeln!(out, "(intercept)\t{}", fit.intercept).unwrap();
        }
        Format::JsonLines => {
            #[derive(Serialize)]
            struct Row<'a> {
                #[serde(flatten)]
                fit: &'a analysis::LogRegFit,
                constant_columns: &'a [String],
            }
            let row = Row {
                fit: &fit,
                constant_columns: &standardized.constant_columns,
            };
            writeln!(out, "{}", serde_json::to_string(&row).unwrap()).unwrap();
        }
    }
    Ok(out)
}

fn correlation_report(
    args: &AnalyzeArgs,
    matrix: &FeatureMatrix,
    gold: &BTreeMap<String, f64>,
) -> Result<String, CliError> {
    let options = CorrelationOptions {
        missing_as_absent: args.missing_as_absent,
        exact_p: args.exact_p,
    };
    let rows = analysis::category_correlations(matrix, gold, &options)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| v.to_string());
    let mut out = String::new();
    match args.format {
        Format::Table => {
            // Non-significant correlations are shown as `-`.
            writeln!(out, "{:<16} {:>4} {:>7} {:>7}  note", "column", "n", "rho", "p").unwrap();
            for r in &rows {
                let rho = match r.rho {
                    Some(rho) if r.significant => format!("{rho:.3}"),
                    _ => "-".into(),
                };
                let p = r.p_value.map_or_else(|| "-".to_string(), |p| format!("{p:.3}"));
                let note = r.note.as_deref().unwrap_or("");
                writeln!(out, "{:<16} {:>4} {rho:>7} {p:>7}  {note}", r.column, r.n).unwrap();
            }
        }
        Format::Tsv => {
            out.push_str("column\tn\trho\tp_value\tsignificant\tnote\n");
            for r in &rows {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    r.column,
                    r.n,
                    opt(r.rho),
                    opt(r.p_value),
                    u8::from(r.significant),
                    r.note.as_deref().unwrap_or("-")
                )
                .unwrap();
            }
        }
        Format::JsonLines => {
            for r in &rows {
                writeln!(out, "{}", serde_json::to_string(r).unwrap()).unwrap();
            }
        }
    }
    Ok(out)
}

pub fn timeline(args: &TimelineArgs) -> CliResult {
    let store = load_store(&args.store)?;
    let profiles = store.word_profiles(&args.word)?;
    let rows = analysis::timeline(&profiles, &args.category)?;
    let mut out = String::from("period,value,count,proportion\n");
    for r in rows {
        writeln!(out, "{},{},{},{:.6}", r.period, r.value, r.count, r.proportion).unwrap();
    }
    emit(args.output.as_ref(), &out)
}
