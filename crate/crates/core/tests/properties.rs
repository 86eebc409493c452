use std::collections::BTreeMap;

use gramprof::analysis::{
    category_correlations, standardize, t_test_p_value, timeline, train_logreg, CorrelationOptions, FeatureMatrix,
    LogRegOptions,
};
use gramprof::conllu::{parse_str, MalformedPolicy, MatchOptions, TargetSet, TargetSpec, Token};
use gramprof::decision::{classify_changepoint, classify_topn, rank_words, round_half_up, Labels};
use gramprof::evaluation::{accuracy, spearman};
use gramprof::profiles::{build_vectors, count_reader, separate_categories, CountMap, ExtractOptions, Profile};
use gramprof::scoring::{
    combine_append_max, cosine_distance, filter_rare, score_separated, score_word, Aggregation, FeatureKind,
    FilterMode, MethodConfig,
};
use proptest::prelude::*;

const CATEGORIES: &[(&str, &[&str])] = &[
    ("Case", &["Nom", "Acc", "Gen"]),
    ("Number", &["Sing", "Plur"]),
    ("Tense", &["Past", "Pres"]),
];

fn feats_strategy() -> impl Strategy<Value = String> {
    proptest::collection::vec(proptest::option::of(0usize..3), CATEGORIES.len()).prop_map(|choice| {
        let parts: Vec<String> = CATEGORIES
            .iter()
            .zip(choice)
            .filter_map(|((k, vals), c)| c.map(|i| format!("{k}={}", vals[i % vals.len()])))
            .collect();
        parts.join("|")
    })
}

fn profile_strategy(period: &'static str) -> impl Strategy<Value = Profile> {
    (
        proptest::collection::btree_map(feats_strategy(), 1u64..200, 0..8),
        proptest::collection::btree_map("(obj|nsubj|obl|nmod)", 1u64..200, 1..4),
        0u64..50,
    )
        .prop_map(move |(morph, synt, bare)| {
            let morph: CountMap = morph.into_iter().filter(|(k, _)| !k.is_empty()).collect();
            let morph_total: u64 = morph.values().sum();
            // Spread morph_total + bare occurrences over the relations.
            let mut synt: CountMap = synt.into_keys().map(|k| (k, 0)).collect();
            let keys: Vec<String> = synt.keys().cloned().collect();
            for i in 0..(morph_total + bare) {
                *synt.get_mut(&keys[(i as usize) % keys.len()]).unwrap() += 1;
            }
            synt.retain(|_, v| *v > 0);
            Profile {
                word_id: "w".into(),
                period: period.into(),
                total: morph_total + bare,
                morph,
                synt,
            }
        })
}

fn counts_strategy() -> impl Strategy<Value = CountMap> {
    proptest::collection::btree_map("[a-f]", 1u64..100, 0..6)
}

fn token_strategy() -> impl Strategy<Value = Token> {
    (
        "[a-z]{1,6}",
        "[a-z]{1,6}",
        "(NOUN|VERB|ADJ)",
        feats_strategy(),
        "(obj|nsubj|obl:tmod)",
        0usize..10,
    )
        .prop_map(|(form, lemma, upos, feats, deprel, head)| Token {
            form,
            lemma,
            upos,
            feats,
            deprel,
            head,
        })
}

proptest! {
    #[test]
    fn conllu_round_trip(sentences in proptest::collection::vec(proptest::collection::vec(token_strategy(), 1..6), 1..5)) {
        let mut text = String::new();
        for sentence in &sentences {
            for (i, token) in sentence.iter().enumerate() {
                text += &token.to_conllu_line(i + 1);
                text.push('\n');
            }
            text.push('\n');
        }
        let parsed = parse_str(&text, MalformedPolicy::Abort).unwrap();
        prop_assert_eq!(parsed, sentences);
    }

    #[test]
    fn matching_independent_of_sentence_order(
        sentences in proptest::collection::vec(proptest::collection::vec(token_strategy(), 1..6), 1..6),
        seed in any::<u64>(),
    ) {
        let targets = TargetSet::new(
            ["a", "b", "c"].iter().map(|l| TargetSpec::new(*l, *l)).chain([TargetSpec::new("stab_nn", "stab").with_upos(["NOUN"])]).collect(),
            MatchOptions { case_fold: true, match_form: false },
        ).unwrap();
        let collect = |ss: &[Vec<Token>]| {
            let mut out: Vec<(String, Token)> = ss.iter()
                .flat_map(|s| targets.match_targets(s).into_iter().map(|(w, t)| (w.to_string(), t.clone())))
                .collect();
            out.sort_by(|x, y| format!("{x:?}").cmp(&format!("{y:?}")));
            out
        };
        let mut shuffled = sentences.clone();
        let k = (seed as usize) % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        prop_assert_eq!(collect(&sentences), collect(&shuffled));
    }

    #[test]
    fn shard_merge_equals_concatenation(tokens in proptest::collection::vec(token_strategy(), 1..40), cut in 0usize..40) {
        let targets = TargetSet::new(vec![TargetSpec::new("x", "x"), TargetSpec::new("y", "y")], MatchOptions::default()).unwrap();
        let tokens: Vec<Token> = tokens.into_iter().enumerate().map(|(i, mut t)| { t.lemma = if i % 2 == 0 { "x".into() } else { "y".into() }; t }).collect();
        let render = |ts: &[Token]| ts.iter().map(|t| t.to_conllu_line(1) + "\n\n").collect::<String>();
        let cut = cut.min(tokens.len());
        let opts = ExtractOptions::default();
        let whole = count_reader(render(&tokens).as_bytes(), "p", &targets, &opts).unwrap();
        let mut left = count_reader(render(&tokens[..cut]).as_bytes(), "p", &targets, &opts).unwrap();
        let right = count_reader(render(&tokens[cut..]).as_bytes(), "p", &targets, &opts).unwrap();
        for (l, r) in left.iter_mut().zip(&right) {
            l.merge(r);
        }
        prop_assert_eq!(left, whole);
    }

    #[test]
    fn build_vectors_is_deterministic(a in counts_strategy(), b in counts_strategy()) {
        let v1 = build_vectors(&a, &b);
        let v2 = build_vectors(&a.clone(), &b.clone());
        prop_assert_eq!(&v1, &v2);
        prop_assert!(v1.names.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(v1.a.len(), v1.b.len());
    }

    #[test]
    fn cosine_symmetric_scale_invariant_bounded(
        pairs in proptest::collection::vec((0u32..500, 0u32..500), 1..30),
        scale in 1u32..1000,
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let scaled: Vec<f64> = a.iter().map(|x| x * scale as f64).collect();
        let d = cosine_distance(&a, &b, 1.0);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, cosine_distance(&b, &a, 1.0));
        prop_assert!((d - cosine_distance(&scaled, &b, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn filter_monotone_in_threshold(a in counts_strategy(), b in counts_strategy(), t1 in 0.0f64..0.5, dt in 0.0f64..0.49) {
        let (ta, tb) = (a.values().sum::<u64>(), b.values().sum::<u64>());
        for mode in [FilterMode::Summed, FilterMode::PerPeriod] {
            let (la, lb) = filter_rare(&a, &b, ta, tb, t1, mode);
            let (ha, hb) = filter_rare(&a, &b, ta, tb, t1 + dt, mode);
            prop_assert!(ha.len() <= la.len() && hb.len() <= lb.len());
            prop_assert!(ha.keys().all(|k| la.contains_key(k)));
        }
    }

    #[test]
    fn aggregation_dominance(values in proptest::collection::vec(0.0f64..=1.0, 1..10)) {
        let max = Aggregation::Max.apply(values.iter().copied()).unwrap();
        let mean = Aggregation::Mean.apply(values.iter().copied()).unwrap();
        prop_assert!(max >= mean - 1e-15 && mean >= 0.0);
    }

    #[test]
    fn method_invariants(a in profile_strategy("a"), b in profile_strategy("b"), scale in 1u64..20, threshold in prop_oneof![Just(0.0), Just(0.05), 0.0f64..0.3]) {
        let mut scaled = a.clone();
        scaled.morph.values_mut().for_each(|v| *v *= scale);
        scaled.synt.values_mut().for_each(|v| *v *= scale);
        scaled.total *= scale;
        let kinds = [
            (FeatureKind::Morphology, false), (FeatureKind::Syntax, false), (FeatureKind::Average, false),
            (FeatureKind::Morphology, true), (FeatureKind::Average, true), (FeatureKind::Combination, true),
        ];
        for (kind, separation) in kinds {
            for aggregation in [Aggregation::Max, Aggregation::Mean] {
                let cfg = MethodConfig { feature_kind: kind, separation, aggregation, filter_threshold: threshold, ..Default::default() };
                let ab = score_word(&a, &b, &cfg).unwrap();
                let mut b_as_a = b.clone();
                b_as_a.word_id = a.word_id.clone();
                let ba = score_word(&b_as_a, &a, &cfg).unwrap();
                prop_assert!((ab.aggregate - ba.aggregate).abs() < 1e-12);
                let all = ab.per_category.values().copied().chain(ab.d_morph).chain(ab.d_synt).chain([ab.aggregate]);
                for d in all {
                    prop_assert!((0.0..=1.0).contains(&d));
                }
                // Summed filtering compares against both periods' totals, so
                // rescaling one period legitimately moves the threshold.
                if threshold > 0.0 {
                    continue;
                }
                let sc = score_word(&scaled, &b, &cfg).unwrap();
                prop_assert!((ab.aggregate - sc.aggregate).abs() < 1e-12, "{} vs {}", ab.aggregate, sc.aggregate);
            }
        }
    }

    #[test]
    fn append_max_dominates_morphology(a in profile_strategy("a"), b in profile_strategy("b")) {
        let cfg = MethodConfig { separation: true, filter_threshold: 0.05, ..Default::default() };
        let sep = score_separated(&separate_categories(&a), &separate_categories(&b), &cfg);
        let d_synt = score_word(&a, &b, &cfg).unwrap().d_synt;
        if let (Some(morph), Ok(combined)) = (sep.aggregate, combine_append_max(&sep.per_category, d_synt)) {
            prop_assert!(combined >= morph);
        }
    }

    #[test]
    fn separation_preserves_counts(p in profile_strategy("a")) {
        let sep = separate_categories(&p);
        for (category, values) in &sep.categories {
            let needle = format!("{category}=");
            let expected: u64 = p.morph.iter()
                .filter(|(feats, _)| feats.split('|').any(|piece| piece.starts_with(&needle)))
                .map(|(_, c)| c).sum();
            prop_assert_eq!(values.values().sum::<u64>(), expected);
        }
    }

    #[test]
    fn ranking_and_topn(scores in proptest::collection::btree_map("[a-z]{1,4}", 0.0f64..1.0, 1..40), ratio in 0.0f64..=1.0) {
        let r = rank_words(scores.clone());
        let mut words: Vec<&str> = r.words().collect();
        words.sort();
        prop_assert_eq!(words, scores.keys().map(String::as_str).collect::<Vec<_>>());
        prop_assert!(r.scores().windows(2).all(|w| w[0] >= w[1]));
        let labels = classify_topn(&r, ratio).unwrap();
        let expected = (round_half_up(ratio * scores.len() as f64) as usize).min(scores.len());
        prop_assert_eq!(labels.values().filter(|&&l| l).count(), expected);

        // Strictly increasing transform keeps order and top-n labels.
        let transformed: BTreeMap<String, f64> = scores.iter().map(|(k, v)| (k.clone(), (3.0 * v).exp() + 1.0)).collect();
        let rt = rank_words(transformed);
        prop_assert_eq!(r.words().collect::<Vec<_>>(), rt.words().collect::<Vec<_>>());
        prop_assert_eq!(labels, classify_topn(&rt, ratio).unwrap());
    }

    #[test]
    fn changepoint_labels_are_a_prefix(scores in proptest::collection::vec(0.0f64..1.0, 3..40)) {
        let r = rank_words(scores.iter().enumerate().map(|(i, &s)| (format!("w{i:03}"), s)));
        let cp = classify_changepoint(&r).unwrap();
        let ordered: Vec<bool> = r.words().map(|w| cp.labels[w]).collect();
        let first_zero = ordered.iter().position(|l| !l).unwrap_or(ordered.len());
        prop_assert!(ordered[first_zero..].iter().all(|l| !l));
        prop_assert_eq!(first_zero, cp.breakpoint);
        prop_assert!(cp.breakpoint >= 1 && cp.breakpoint < scores.len());
    }

    #[test]
    fn spearman_properties(pairs in proptest::collection::vec((0u8..20, 0u8..20), 3..30)) {
        let x: BTreeMap<String, f64> = pairs.iter().enumerate().map(|(i, p)| (format!("w{i}"), p.0 as f64)).collect();
        let y: BTreeMap<String, f64> = pairs.iter().enumerate().map(|(i, p)| (format!("w{i}"), p.1 as f64)).collect();
        let injective: BTreeMap<String, f64> = (0..pairs.len()).map(|i| (format!("w{i}"), (i * 7 % 31) as f64)).collect();
        prop_assert!((spearman(&injective, &injective).unwrap() - 1.0).abs() < 1e-12);
        if let (Ok(xy), Ok(yx)) = (spearman(&x, &y), spearman(&y, &x)) {
            prop_assert!((xy - yx).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&xy));
            let tx: BTreeMap<String, f64> = x.iter().map(|(k, v)| (k.clone(), v.powi(3) + 2.0)).collect();
            prop_assert!((spearman(&tx, &y).unwrap() - xy).abs() < 1e-12);
        }
    }

    #[test]
    fn accuracy_complement(values in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..30)) {
        let pred: Labels = values.iter().enumerate().map(|(i, p)| (format!("w{i}"), p.0)).collect();
        let gold: Labels = values.iter().enumerate().map(|(i, p)| (format!("w{i}"), p.1)).collect();
        let flipped: Labels = pred.iter().map(|(k, v)| (k.clone(), !v)).collect();
        prop_assert!((accuracy(&pred, &gold).unwrap() + accuracy(&flipped, &gold).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standardized_columns(cells in proptest::collection::vec(proptest::collection::vec(0.0f64..=1.0, 3), 2..30)) {
        let rows = (0..cells.len()).map(|i| format!("w{i}")).collect();
        let m = FeatureMatrix::new(rows, vec!["a".into(), "b".into(), "c".into()], cells).unwrap();
        let s = standardize(&m).unwrap();
        for (j, name) in m.columns.iter().enumerate() {
            if s.constant_columns.contains(name) {
                continue;
            }
            let col = s.matrix.column(j);
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn correlations_invariant_under_monotone_gold(cells in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 5..25)) {
        let rows: Vec<String> = (0..cells.len()).map(|i| format!("w{i:02}")).collect();
        let m = FeatureMatrix::new(rows.clone(), vec!["c".into()], cells.iter().map(|c| vec![c.0]).collect()).unwrap();
        let gold: BTreeMap<String, f64> = rows.iter().cloned().zip(cells.iter().map(|c| c.1)).collect();
        let gold_t: BTreeMap<String, f64> = gold.iter().map(|(k, v)| (k.clone(), 10.0 * v.powi(3) - 4.0)).collect();
        let a = category_correlations(&m, &gold, &CorrelationOptions::default()).unwrap();
        let b = category_correlations(&m, &gold_t, &CorrelationOptions::default()).unwrap();
        match (a[0].rho, b[0].rho) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
            (x, y) => prop_assert_eq!(x, y),
        }
    }

    #[test]
    fn p_value_monotone_in_rho(r1 in 0.0f64..0.99, dr in 0.0f64..0.5, n in 5usize..100) {
        let r2 = (r1 + dr).min(0.999);
        prop_assert!(t_test_p_value(r2, n) <= t_test_p_value(r1, n) + 1e-15);
        prop_assert!((t_test_p_value(r1, n) - t_test_p_value(-r1, n)).abs() < 1e-15);
    }

    #[test]
    fn timeline_proportions_sum_to_one(a in profile_strategy("a"), b in profile_strategy("b")) {
        for category in ["Number", "Case", "syntax"] {
            let Ok(rows) = timeline(&[&a, &b], category) else { continue };
            for period in ["a", "b"] {
                let sel: Vec<_> = rows.iter().filter(|r| r.period == period).collect();
                if sel.iter().map(|r| r.count).sum::<u64>() > 0 {
                    let sum: f64 = sel.iter().map(|r| r.proportion).sum();
                    prop_assert!((sum - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn logreg_invariant_to_row_duplication(
        rows in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, any::<bool>()), 6..20)
    ) {
        prop_assume!(rows.iter().any(|r| r.2) && rows.iter().any(|r| !r.2));
        let build = |copies: usize| {
            let mut names = Vec::new();
            let mut cells = Vec::new();
            let mut labels = Labels::new();
            for c in 0..copies {
                for (i, r) in rows.iter().enumerate() {
                    let name = format!("w{i:02}_{c}");
                    labels.insert(name.clone(), r.2);
                    names.push(name);
                    cells.push(vec![r.0, r.1]);
                }
            }
            let m = FeatureMatrix::new(names, vec!["a".into(), "b".into()], cells).unwrap();
            (standardize(&m).unwrap().matrix, labels)
        };
        let (x1, y1) = build(1);
        let (x2, y2) = build(2);
        let f1 = train_logreg(&x1, &y1, &LogRegOptions::default()).unwrap();
        let f2 = train_logreg(&x2, &y2, &LogRegOptions::default()).unwrap();
        for (a, b) in f1.coefficients.iter().zip(&f2.coefficients) {
            prop_assert!((a - b).abs() < 1e-6);
        }
        prop_assert!((f1.intercept - f2.intercept).abs() < 1e-6);
    }
}
