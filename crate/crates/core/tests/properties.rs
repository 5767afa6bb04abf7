mod support;

use std::collections::HashSet;

use foldrpp::heuristics::{best_info_gain_counted, tally_feature, SearchStats};
use foldrpp::learner::covers;
use foldrpp::{
    classify, confusion, emit_asp, find_best_literal, fit, fit_traced, ig, justify, parse_asp,
    split_examples, ConfusionCounts, Example, Hyperparams, Literal, Program, Rule, Value,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use support::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ig_is_never_positive(tp in 0usize..50, fn_ in 0usize..50, tn in 0usize..50, fp in 0usize..50) {
        let s = ig(ConfusionCounts::new(tp, fn_, tn, fp));
        prop_assert!(s <= 0.0);
    }

    #[test]
    fn confusion_matches_recount(pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 0..60)) {
        let (p, l): (Vec<bool>, Vec<bool>) = pairs.iter().copied().unzip();
        let c = confusion(&p, &l).unwrap();
        let count = |a: bool, b: bool| pairs.iter().filter(|&&(x, y)| x == a && y == b).count();
        prop_assert_eq!(c, ConfusionCounts::new(count(true, true), count(false, true), count(false, false), count(true, false)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    /// Counts from the prefix sums equal counts from classifying every example.
    #[test]
    fn prefix_sums_match_recount(seed in any::<u64>()) {
        let d = random_dataset(&mut rng(seed), 500, 5);
        let (pos, neg) = split_examples(&d);
        for f in 0..d.schema().feature_count() {
            let t = tally_feature(&pos, &neg, f);
            for (lit, counts) in t.candidates(f) {
                prop_assert_eq!(counts, recount(&lit, &pos, &neg), "{}", lit);
            }
            for (j, x) in t.xs.iter().enumerate() {
                let le = |set: &[&Example]| set.iter().filter(|e| e.values[f].as_f64().is_some_and(|v| v <= *x)).count();
                prop_assert_eq!(t.pos_le[j], le(&pos));
                prop_assert_eq!(t.neg_le[j], le(&neg));
            }
        }
    }

    #[test]
    fn work_is_two_scores_per_distinct_value(seed in any::<u64>()) {
        let d = random_dataset(&mut rng(seed), 200, 3);
        let (pos, neg) = split_examples(&d);
        let t = tally_feature(&pos, &neg, 0);
        let mut stats = SearchStats::default();
        best_info_gain_counted(&pos, &neg, 0, &HashSet::new(), &mut stats);
        prop_assert_eq!(stats.ig_evaluations, 2 * t.xs.len() + 2 * t.cs.len());
        prop_assert_eq!(stats.sorts, 1);
    }

    #[test]
    fn search_matches_enumeration(seed in any::<u64>()) {
        let d = random_dataset(&mut rng(seed), 120, 3);
        let (pos, neg) = split_examples(&d);
        let n = d.schema().feature_count();
        let fast = find_best_literal(&pos, &neg, n, &HashSet::new());
        let slow = oracle_best(&pos, &neg, n, &HashSet::new());
        prop_assert_eq!(fast.map(|b| (b.score, b.literal)), slow.map(|(s, l, _)| (s, l)));
    }

    /// Scaling every score by a positive constant keeps the chosen literal an argmax.
    #[test]
    fn selection_ignores_log_base(seed in any::<u64>()) {
        let d = random_dataset(&mut rng(seed), 150, 3);
        let (pos, neg) = split_examples(&d);
        let n = d.schema().feature_count();
        let Some(best) = find_best_literal(&pos, &neg, n, &HashSet::new()) else { return Ok(()) };
        let scale = std::f64::consts::LOG2_E;
        let mut top = f64::NEG_INFINITY;
        for f in 0..n {
            for (_, c) in tally_feature(&pos, &neg, f).candidates(f) {
                top = top.max(ig(c) * scale);
            }
        }
        let chosen = ig(recount(&best.literal, &pos, &neg)) * scale;
        prop_assert!((chosen - top).abs() <= 1e-12 * top.abs().max(1.0));
    }

    /// Rule coverage agrees with a direct reading of the semantics.
    #[test]
    fn covers_matches_truth_table(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..5);
        let p = random_program(&mut r, n);
        let examples: Vec<Example> = (0..40)
            .map(|id| Example { id, values: random_record(&mut r, n), label: false })
            .collect();
        let refs: Vec<&Example> = examples.iter().collect();
        for rule in p.rules().iter().chain(p.ab_rules().values().flatten()) {
            for sign in [true, false] {
                let got: Vec<usize> = covers(rule, &refs, sign, &p).iter().map(|e| e.id).collect();
                let want: Vec<usize> = examples.iter().filter(|e| truth_table(&p, rule, &e.values) == sign).map(|e| e.id).collect();
                prop_assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn justification_agrees_with_classify(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..5);
        let p = random_program(&mut r, n);
        let depth = p.check_stratified().unwrap();
        for i in 0..10 {
            let v = random_record(&mut r, n);
            let pred = justify(&p, &v, None, &i.to_string()).unwrap();
            prop_assert_eq!(pred.label, classify(&p, &v).unwrap());
            prop_assert_eq!(pred.label, pred.fired_rule.is_some());
            prop_assert_eq!(pred.tree.holds, pred.label);
            prop_assert!(pred.tree.depth() <= depth + 1);
            if let Some(i) = pred.fired_rule {
                let rule = &p.rules()[i];
                prop_assert_eq!(pred.tree.children.len(), rule.defaults.len() + rule.exceptions.len());
                for (node, lit) in pred.tree.children.iter().zip(&rule.defaults) {
                    let negated = lit.op == foldrpp::Op::Ne;
                    prop_assert_eq!(node.holds, !negated);
                }
                for node in &pred.tree.children[rule.defaults.len()..] {
                    prop_assert!(!node.holds);
                }
            } else {
                prop_assert_eq!(pred.tree.children.len(), p.rules().len());
            }
        }
    }

    /// Emit then parse gives back the same program, tokens with quotes and
    /// unicode included.
    #[test]
    fn text_round_trip(seed in any::<u64>(), token in "[a-z'\\\\ é]{1,6}") {
        let mut r = rng(seed);
        let n = r.gen_range(1..5);
        let mut p = random_program(&mut r, n);
        p.push_rule(Rule::new(vec![Literal::eq(0, token.clone()), Literal::ne(n - 1, token)], vec![]));
        let text = emit_asp(&p).unwrap();
        let back = parse_asp(&text, &p.schema().feature_names).unwrap();
        prop_assert_eq!(emit_asp(&back).unwrap(), text.clone());
        if !p.rules().is_empty() {
            prop_assert_eq!(back.rules(), p.rules());
            prop_assert_eq!(back.ab_rules(), p.ab_rules());
        }
    }

    #[test]
    fn numeric_constants_round_trip(x in -1e9f64..1e9) {
        let mut p = Program::new(schema(1));
        p.push_rule(Rule::new(vec![Literal::le(0, x)], vec![]));
        let back = parse_asp(&emit_asp(&p).unwrap(), &p.schema().feature_names).unwrap();
        prop_assert_eq!(&back.rules()[0].defaults[0].constant, &Value::Numeric(x));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Every selection made while fitting is the exhaustive argmax for the
    /// examples and exclusions in force at that moment.
    #[test]
    fn fit_selections_are_argmax(seed in any::<u64>()) {
        let d = random_dataset(&mut rng(seed), 60, 3);
        let (_, trace) = fit_traced(&d, Hyperparams::default()).unwrap();
        let by_id = |ids: &[usize]| -> Vec<&Example> { ids.iter().map(|&i| &d.examples()[i]).collect() };
        for s in &trace {
            let (pos, neg) = (by_id(&s.pos_ids), by_id(&s.neg_ids));
            let excluded: HashSet<Literal> = s.excluded.iter().cloned().collect();
            let want = oracle_best(&pos, &neg, d.schema().feature_count(), &excluded).map(|(_, l, _)| l);
            prop_assert_eq!(s.chosen.as_ref().map(|c| c.literal.clone()), want);
        }
    }

    #[test]
    fn fitted_programs_are_well_formed(seed in any::<u64>(), ratio in 0.0f64..2.0) {
        let d = random_dataset(&mut rng(seed), 150, 4);
        let hp = Hyperparams { ratio };
        let p = fit(&d, hp).unwrap();
        p.check_stratified().unwrap();
        prop_assert_eq!(emit_asp(&p).unwrap(), emit_asp(&fit(&d, hp).unwrap()).unwrap());

        // Learner and interpreter agree on training rows.
        let all: Vec<&Example> = d.examples().iter().collect();
        let mut covered = vec![false; d.len()];
        for rule in p.rules() {
            for e in covers(rule, &all, true, &p) {
                covered[e.id] = true;
            }
        }
        for e in d.examples() {
            prop_assert_eq!(classify(&p, &e.values).unwrap(), covered[e.id]);
        }

        // Every referenced abnormal predicate is defined in the text.
        let text = emit_asp(&p).unwrap();
        for id in p.ab_rules().values().flatten().chain(p.rules()).flat_map(|r| r.exceptions.iter()) {
            let head = format!("ab{id}(X) :-");
            let fact = format!("ab{id}(X).");
            prop_assert!(text.contains(&head) || text.contains(&fact));
        }
    }

    #[test]
    fn zero_ratio_learns_no_exceptions(seed in any::<u64>()) {
        let d = random_dataset(&mut rng(seed), 100, 3);
        let p = fit(&d, Hyperparams { ratio: 0.0 }).unwrap();
        prop_assert!(p.ab_rules().is_empty());
    }
}

#[test]
fn mixed_feature_positives_are_all_covered() {
    let (pos, neg) = mixed_feature();
    let examples: Vec<Example> = pos.into_iter().chain(neg).collect();
    let d = foldrpp::Dataset::new(schema(1), examples).unwrap();
    let p = fit(&d, Hyperparams::default()).unwrap();
    for e in d.examples().iter().filter(|e| e.label) {
        assert!(
            classify(&p, &e.values).unwrap(),
            "example {} not covered",
            e.id
        );
    }
}

#[test]
fn penguin_fit_recovers_the_program() {
    let p = fit(&penguins(), Hyperparams::default()).unwrap();
    assert_eq!(
        emit_asp(&p).unwrap(),
        "fly(X) :- bird(X), not ab0(X).\nab0(X) :- penguin(X).\n"
    );
}

#[test]
fn titanic_first_rule_has_several_exceptions() {
    let path = data_dir().join("titanic_train.csv");
    if !path.exists() {
        eprintln!("skipping: {} not present", path.display());
        return;
    }
    let d = foldrpp::load_csv(&path, "status", "0").unwrap();
    let p = fit(&d, Hyperparams::default()).unwrap();
    assert_eq!(p.rules()[0].defaults, vec![Literal::eq(4, "male")]);
    assert_eq!(p.rules()[0].exceptions.len(), 3);
}
