//! Which grammatical categories carry the change signal: a standardized
//! logistic regression over per-category distances, per-category Spearman
//! correlations with gold scores, and the distribution of one category over
//! time.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::decision::{check_same_keys, Labels};
use crate::error::{Error, Result};
use crate::evaluation::{self, average_ranks, pearson};
use crate::profiles::{separate_categories, CountMap, Profile};
use crate::scoring::ChangeScore;

/// Column name of the dependency-relation distance.
pub const SYNTAX_COLUMN: &str = "syntax";

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Words × categories matrix of cosine distances. A category a word lacks
/// is stored as 0 with `present` false.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<f64>>,
    pub present: Vec<Vec<bool>>,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<String>, columns: Vec<String>, cells: Vec<Vec<f64>>) -> Result<Self> {
        let unique: BTreeSet<&String> = columns.iter().collect();
        if unique.len() != columns.len() {
            return Err(Error::Data("duplicate column names".into()));
        }
        if cells.len() != rows.len() || cells.iter().any(|r| r.len() != columns.len()) {
            return Err(Error::Data("feature matrix is not rectangular".into()));
        }
        let present = cells.iter().map(|r| vec![true; r.len()]).collect();
        Ok(FeatureMatrix {
            rows,
            columns,
            cells,
            present,
        })
    }

    /// One row per score: the per-category distances plus the syntactic
    /// distance as a final `syntax` column.
    pub fn from_scores(scores: &[ChangeScore]) -> Self {
        let categories: BTreeSet<&String> = scores.iter().flat_map(|s| s.per_category.keys()).collect();
        let mut columns: Vec<String> = categories.into_iter().cloned().collect();
        let with_syntax = scores.iter().any(|s| s.d_synt.is_some());
        if with_syntax {
            columns.push(SYNTAX_COLUMN.to_string());
        }
        let mut cells = Vec::with_capacity(scores.len());
        let mut present = Vec::with_capacity(scores.len());
        for s in scores {
            let mut row = Vec::with_capacity(columns.len());
            let mut mask = Vec::with_capacity(columns.len());
            for col in &columns {
                let value = if with_syntax && col == SYNTAX_COLUMN && !s.per_category.contains_key(col) {
                    s.d_synt
                } else {
                    s.per_category.get(col).copied()
                };
                row.push(value.unwrap_or(0.0));
                mask.push(value.is_some());
            }
            cells.push(row);
            present.push(mask);
        }
        FeatureMatrix {
            rows: scores.iter().map(|s| s.word_id.clone()).collect(),
            columns,
            cells,
            present,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.cells.iter().map(|r| r[j]).collect()
    }

    /// Keeps the rows whose word ID satisfies `keep`.
    pub fn filter_rows(&self, keep: impl Fn(&str) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.rows.len()).filter(|&i| keep(&self.rows[i])).collect();
        FeatureMatrix {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            columns: self.columns.clone(),
            cells: idx.iter().map(|&i| self.cells[i].clone()).collect(),
            present: idx.iter().map(|&i| self.present[i].clone()).collect(),
        }
    }

    /// Drops columns that are zero in every row.
    pub fn drop_zero_columns(&self) -> Self {
        let keep: Vec<usize> = (0..self.columns.len())
            .filter(|&j| self.cells.iter().any(|r| r[j] != 0.0))
            .collect();
        FeatureMatrix {
            rows: self.rows.clone(),
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            cells: self
                .cells
                .iter()
                .map(|r| keep.iter().map(|&j| r[j]).collect())
                .collect(),
            present: self
                .present
                .iter()
                .map(|r| keep.iter().map(|&j| r[j]).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub matrix: FeatureMatrix,
    /// Columns with zero variance, set to all zeros.
    pub constant_columns: Vec<String>,
}

/// Centers every column and scales it to unit population variance.
pub fn standardize(matrix: &FeatureMatrix) -> Result<Standardized> {
    let n = matrix.n_rows();
    if n < 2 {
        return Err(Error::Data(format!("standardization needs at least 2 rows, got {n}")));
    }
    let mut out = matrix.clone();
    let mut constant_columns = Vec::new();
    for j in 0..matrix.columns.len() {
        let col = matrix.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        // Relative guard: float noise around a constant is not variance.
        let constant = sd <= 1e-12 * mean.abs().max(1.0);
        if constant {
            constant_columns.push(matrix.columns[j].clone());
        }
        for (row, x) in out.cells.iter_mut().zip(&col) {
            row[j] = if constant { 0.0 } else { (x - mean) / sd };
        }
    }
    Ok(Standardized {
        matrix: out,
        constant_columns,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRegOptions {
    /// Inverse regularization strength: the objective is
    /// `c * mean_log_loss + |w|² / 2`.
    pub c: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LogRegOptions {
    fn default() -> Self {
        LogRegOptions {
            c: 1.0,
            tolerance: 1e-8,
            max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegFit {
    pub columns: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Columns with a positive coefficient, largest first.
    pub positive: Vec<String>,
    pub iterations: usize,
    pub converged: bool,
}

impl LogRegFit {
    pub fn coefficient(&self, column: &str) -> Option<f64> {
        self.columns
            .iter()
            .position(|c| c == column)
            .map(|j| self.coefficients[j])
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary logistic regression fitted by full-batch gradient descent on the
/// L2-penalized mean log loss (the intercept is not penalized).
pub fn train_logreg(x: &FeatureMatrix, y: &Labels, options: &LogRegOptions) -> Result<LogRegFit> {
    check_same_keys(x.rows.iter(), y.keys())?;
    let targets: Vec<f64> = x.rows.iter().map(|w| if y[w] { 1.0 } else { 0.0 }).collect();
    let positives = targets.iter().filter(|&&t| t == 1.0).count();
    if positives == 0 || positives == targets.len() {
        return Err(Error::Data(
            "logistic regression needs both classes in the labels".into(),
        ));
    }
    if options.c <= 0.0 || !options.c.is_finite() {
        return Err(Error::Config(format!(
            "regularization C must be positive, got {}",
            options.c
        )));
    }
    let n = x.n_rows();
    let d = x.columns.len();
    let nf = n as f64;

    // Step 1/L with L bounding the Hessian: c/(4n)·|[X 1]|²_F + 1.
    let frobenius: f64 = x.cells.iter().flatten().map(|v| v * v).sum::<f64>() + nf;
    let step = 1.0 / (options.c * frobenius / (4.0 * nf) + 1.0);

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut grad_w = vec![0.0; d];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        grad_w.iter_mut().zip(&w).for_each(|(g, wj)| *g = *wj);
        let mut grad_b = 0.0;
        for (row, &t) in x.cells.iter().zip(&targets) {
            let z = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let r = options.c * (sigmoid(z) - t) / nf;
            grad_b += r;
            grad_w.iter_mut().zip(row).for_each(|(g, a)| *g += r * a);
        }
        let max_norm = grad_w.iter().fold(grad_b.abs(), |m, g| m.max(g.abs()));
        if max_norm < options.tolerance {
            converged = true;
            break;
        }
        w.iter_mut().zip(&grad_w).for_each(|(wj, g)| *wj -= step * g);
        b -= step * grad_b;
        iterations += 1;
    }
    if !converged {
        log::warn!("logistic regression stopped after {iterations} iterations without converging");
    }

    let predicted: Labels = x
        .rows
        .iter()
        .zip(&x.cells)
        .map(|(word, row)| {
            let z = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            (word.clone(), z >= 0.0)
        })
        .collect();
    let accuracy = evaluation::accuracy(&predicted, y)?;
    let macro_f1 = evaluation::macro_f1(&predicted, y)?.value;

    let mut positive: Vec<(String, f64)> = x
        .columns
        .iter()
        .cloned()
        .zip(w.iter().copied())
        .filter(|(_, c)| *c > 0.0)
        .collect();
    positive.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    Ok(LogRegFit {
        columns: x.columns.clone(),
        coefficients: w,
        intercept: b,
        accuracy,
        macro_f1,
        positive: positive.into_iter().map(|(c, _)| c).collect(),
        iterations,
        converged,
    })
}

/// Two-tailed p-value of Spearman's rho under the t approximation with
/// `n - 2` degrees of freedom.
pub fn t_test_p_value(rho: f64, n: usize) -> f64 {
    assert!(n > 2, "t approximation needs n > 2");
    let r = rho.abs().min(1.0);
    if r >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t)).min(1.0)
}

/// Largest sample for which [`exact_p_value`] enumerates permutations.
pub const EXACT_P_MAX_N: usize = 10;

/// Two-tailed permutation p-value of Spearman's rho: the share of all
/// orderings of `y` whose |rho| reaches the observed one.
pub fn exact_p_value(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if !(2..=EXACT_P_MAX_N).contains(&n) {
        return None;
    }
    let rx = average_ranks(x);
    let mut ry = average_ranks(y);
    let observed = pearson(&rx, &ry)?.abs();
    let tolerance = 1e-12;
    let (mut hits, mut total) = (0u64, 0u64);
    // Heap's algorithm.
    let mut c = vec![0usize; n];
    let mut visit = |ry: &[f64]| {
        total += 1;
        if pearson(&rx, ry).is_some_and(|r| r.abs() >= observed - tolerance) {
            hits += 1;
        }
    };
    visit(&ry);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                ry.swap(0, i);
            } else {
                ry.swap(c[i], i);
            }
            visit(&ry);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Some(hits as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorrelationOptions {
    /// Use only the words in which a category occurs, instead of counting a
    /// missing category as distance 0.
    pub missing_as_absent: bool,
    /// Permutation p-values for samples of at most [`EXACT_P_MAX_N`] words.
    pub exact_p: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCorrelation {
    pub column: String,
    pub n: usize,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    pub significant: bool,
    pub note: Option<String>,
}

/// Spearman's rho of every column against the gold graded scores, with
/// significance at p < 0.05.
pub fn category_correlations(
    x: &FeatureMatrix,
    gold: &BTreeMap<String, f64>,
    options: &CorrelationOptions,
) -> Result<Vec<CategoryCorrelation>> {
    check_same_keys(x.rows.iter(), gold.keys())?;
    if x.n_rows() < 5 {
        return Err(Error::Data(format!(
            "category correlations need at least 5 words, got {}",
            x.n_rows()
        )));
    }
    let mut out = Vec::with_capacity(x.columns.len());
    for (j, column) in x.columns.iter().enumerate() {
        let rows: Vec<usize> = (0..x.n_rows())
            .filter(|&i| !options.missing_as_absent || x.present[i][j])
            .collect();
        let xs: Vec<f64> = rows.iter().map(|&i| x.cells[i][j]).collect();
        let ys: Vec<f64> = rows.iter().map(|&i| gold[&x.rows[i]]).collect();
        let n = rows.len();
        let mut result = CategoryCorrelation {
            column: column.clone(),
            n,
            rho: None,
            p_value: None,
            significant: false,
            note: None,
        };
        if n < 3 {
            result.note = Some(format!("only {n} words with this category"));
            out.push(result);
            continue;
        }
        let Some(rho) = evaluation::spearman_slices(&xs, &ys) else {
            result.note = Some("constant column".into());
            out.push(result);
            continue;
        };
        let exact = options.exact_p.then(|| exact_p_value(&xs, &ys)).flatten();
        let p = match exact {
            Some(p) => p,
            None => {
                if options.exact_p {
                    result.note = Some(format!("n > {EXACT_P_MAX_N}: t approximation used"));
                }
                t_test_p_value(rho, n)
            }
        };
        result.rho = Some(rho);
        result.p_value = Some(p);
        result.significant = p < SIGNIFICANCE_LEVEL;
        out.push(result);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub period: String,
    pub value: String,
    pub count: u64,
    pub proportion: f64,
}

/// Distribution of one category's values in each period, zero-filled over
/// the values seen in any period. The category `syntax` selects the
/// dependency relations.
pub fn timeline(profiles: &[&Profile], category: &str) -> Result<Vec<TimelineRow>> {
    let distributions: Vec<(String, CountMap)> = profiles
        .iter()
        .map(|p| {
            let counts = if category == SYNTAX_COLUMN {
                p.synt.clone()
            } else {
                separate_categories(p).categories.remove(category).unwrap_or_default()
            };
            (p.period.clone(), counts)
        })
        .collect();
    let values: BTreeSet<&String> = distributions.iter().flat_map(|(_, c)| c.keys()).collect();
    if values.is_empty() {
        let mut available: BTreeSet<String> = profiles
            .iter()
            .flat_map(|p| separate_categories(p).categories.into_keys())
            .collect();
        available.insert(SYNTAX_COLUMN.to_string());
        let available: Vec<String> = available.into_iter().collect();
        return Err(Error::Data(format!(
            "category `{category}` does not occur; available: {}",
            available.join(", ")
        )));
    }
    let mut rows = Vec::new();
    for (period, counts) in &distributions {
        let total: u64 = counts.values().sum();
        for value in &values {
            let count = counts.get(*value).copied().unwrap_or(0);
            let proportion = if total == 0 { 0.0 } else { count as f64 / total as f64 };
            rows.push(TimelineRow {
                period: period.clone(),
                value: (*value).clone(),
                count,
                proportion,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(columns: &[&str], cells: Vec<Vec<f64>>) -> FeatureMatrix {
        let rows = (0..cells.len()).map(|i| format!("w{i:02}")).collect();
        FeatureMatrix::new(rows, columns.iter().map(|c| c.to_string()).collect(), cells).unwrap()
    }

    #[test]
    fn standardize_column() {
        let m = matrix(&["a"], vec![vec![1.0], vec![2.0], vec![3.0]]);
        let s = standardize(&m).unwrap();
        let expected = [-1.224_744_871_391_589, 0.0, 1.224_744_871_391_589];
        for (got, want) in s.matrix.column(0).iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
        let again = standardize(&s.matrix).unwrap();
        for (a, b) in again.matrix.column(0).iter().zip(s.matrix.column(0)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn standardize_constant_column() {
        let m = matrix(&["a"], vec![vec![0.5], vec![0.5], vec![0.5]]);
        let s = standardize(&m).unwrap();
        assert_eq!(s.matrix.column(0), vec![0.0; 3]);
        assert_eq!(s.constant_columns, vec!["a"]);
        assert!(standardize(&matrix(&["a"], vec![vec![1.0]])).is_err());
    }

    fn labels(values: &[u8]) -> Labels {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| (format!("w{i:02}"), v == 1))
            .collect()
    }

    fn separable() -> (FeatureMatrix, Labels) {
        let signal = [0.8, 0.75, 0.85, 0.9, 0.7, 0.1, 0.15, 0.05, 0.12, 0.2];
        let noise = [0.3, 0.1, 0.2, 0.4, 0.25, 0.35, 0.15, 0.3, 0.22, 0.1];
        let cells = signal.iter().zip(noise).map(|(&s, n)| vec![n, s]).collect();
        (
            matrix(&["noise", "signal"], cells),
            labels(&[1, 1, 1, 1, 1, 0, 0, 0, 0, 0]),
        )
    }

    #[test]
    fn logreg_prefers_informative_column() {
        let (m, y) = separable();
        let x = standardize(&m).unwrap().matrix;
        let fit = train_logreg(&x, &y, &LogRegOptions::default()).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.positive.first().map(String::as_str), Some("signal"));
        assert!(fit.coefficient("signal").unwrap() > fit.coefficient("noise").unwrap().abs());
        assert_eq!(fit.accuracy, 1.0);
    }

    #[test]
    fn logreg_without_signal() {
        let x = matrix(&["a", "b"], vec![vec![0.0, 0.0]; 5]);
        let y = labels(&[1, 0, 0, 1, 0]);
        let fit = train_logreg(&x, &y, &LogRegOptions::default()).unwrap();
        assert!(fit.coefficients.iter().all(|c| c.abs() < 1e-9));
        assert!((fit.accuracy - 0.6).abs() < 1e-12);
    }

    #[test]
    fn logreg_label_flip_negates() {
        let (m, y) = separable();
        let x = standardize(&m).unwrap().matrix;
        let flipped: Labels = y.iter().map(|(w, &l)| (w.clone(), !l)).collect();
        let a = train_logreg(&x, &y, &LogRegOptions::default()).unwrap();
        let b = train_logreg(&x, &flipped, &LogRegOptions::default()).unwrap();
        for (ca, cb) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((ca + cb).abs() < 1e-6);
        }
        assert!((a.intercept + b.intercept).abs() < 1e-6);
    }

    #[test]
    fn logreg_single_class_rejected() {
        let (m, _) = separable();
        assert!(train_logreg(&m, &labels(&[1; 10]), &LogRegOptions::default()).is_err());
    }

    #[test]
    fn p_value_for_rho_0402_at_32() {
        // t = 2.4047, df = 30; two-tailed p = 0.022563 by quadrature of the t density.
        let p = t_test_p_value(0.402, 32);
        assert!((p - 0.022_562_872_294_224).abs() < 1e-9, "{p}");
        assert!(p < SIGNIFICANCE_LEVEL);
    }

    #[test]
    fn correlation_of_gold_itself() {
        let gold: BTreeMap<String, f64> = (0..6).map(|i| (format!("w{i:02}"), i as f64 / 10.0)).collect();
        let m = matrix(&["same", "flat"], (0..6).map(|i| vec![i as f64 / 10.0, 0.3]).collect());
        let out = category_correlations(&m, &gold, &CorrelationOptions::default()).unwrap();
        assert!((out[0].rho.unwrap() - 1.0).abs() < 1e-12);
        assert!(out[0].significant);
        assert_eq!(out[1].rho, None);
        assert!(!out[1].significant);
        assert_eq!(out[1].note.as_deref(), Some("constant column"));
    }

    #[test]
    fn exact_p_for_perfect_order() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        // Only the identity and its reverse reach |rho| = 1: 2 / 120.
        let p = exact_p_value(&x, &x).unwrap();
        assert!((p - 2.0 / 120.0).abs() < 1e-15);
        assert!(exact_p_value(&[0.0; 11], &[0.0; 11]).is_none());
    }

    #[test]
    fn missing_as_absent_drops_rows() {
        let gold: BTreeMap<String, f64> = (0..6).map(|i| (format!("w{i:02}"), i as f64)).collect();
        let mut m = matrix(&["c"], (0..6).map(|i| vec![i as f64]).collect());
        m.present[0][0] = false;
        let opts = CorrelationOptions {
            missing_as_absent: true,
            ..Default::default()
        };
        assert_eq!(category_correlations(&m, &gold, &opts).unwrap()[0].n, 5);
    }

    fn profile(period: &str, morph: &[(&str, u64)]) -> Profile {
        let mut p = Profile::empty("lass", period);
        for &(k, v) in morph {
            p.morph.insert(k.into(), v);
            p.synt.insert("obj".into(), p.synt.get("obj").unwrap_or(&0) + v);
            p.total += v;
        }
        p
    }

    #[test]
    fn timeline_rows() {
        let a = profile("1810", &[("Number=Sing", 30), ("Number=Plur", 10)]);
        let b = profile("1960", &[("Number=Sing", 5)]);
        let rows = timeline(&[&a, &b], "Number").unwrap();
        assert_eq!(rows.len(), 4);
        let sum_a: f64 = rows.iter().filter(|r| r.period == "1810").map(|r| r.proportion).sum();
        assert!((sum_a - 1.0).abs() < 1e-12);
        let plur_b = rows.iter().find(|r| r.period == "1960" && r.value == "Plur").unwrap();
        assert_eq!((plur_b.count, plur_b.proportion), (0, 0.0));
        assert_eq!(timeline(&[&a], "Number").unwrap().len(), 2);
        let err = timeline(&[&a, &b], "Tense").unwrap_err().to_string();
        assert!(err.contains("Number") && err.contains("syntax"), "{err}");
        assert_eq!(timeline(&[&a, &b], "syntax").unwrap().len(), 2);
    }

    #[test]
    fn matrix_from_scores() {
        let score = |w: &str, cats: &[(&str, f64)], synt: f64| ChangeScore {
            word_id: w.into(),
            period_pair: ("a".into(), "b".into()),
            d_morph: None,
            d_synt: Some(synt),
            per_category: cats.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            aggregate: 0.0,
            method: String::new(),
        };
        let m = FeatureMatrix::from_scores(&[score("x", &[("Number", 0.2)], 0.1), score("y", &[("Tense", 0.4)], 0.3)]);
        assert_eq!(m.columns, vec!["Number", "Tense", "syntax"]);
        assert_eq!(m.cells[0], vec![0.2, 0.0, 0.1]);
        assert_eq!(m.present[0], vec![true, false, true]);
    }
}
