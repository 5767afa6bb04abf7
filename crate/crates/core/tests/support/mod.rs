#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};
use std::path::PathBuf;

use foldrpp::{
    evaluate_literal, ig, infer_value, ConfusionCounts, Dataset, Example, Literal, Op, Program,
    Rule, Schema, Value,
};
use rand::Rng;

pub fn data_dir() -> PathBuf {
    match std::env::var_os("FOLDRPP_DATA_DIR") {
        Some(d) => PathBuf::from(d),
        None => PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"),
    }
}

pub fn schema(n_features: usize) -> Schema {
    Schema {
        feature_names: (0..n_features).map(|i| format!("f{i}")).collect(),
        target_name: "label".into(),
        positive_value: "yes".into(),
    }
}

/// A random cell for a feature of the given kind: 0 numeric, 1 categorical,
/// 2 mixed. Small domains so that ties and repeats are common.
pub fn random_value(rng: &mut impl Rng, kind: u8) -> Value {
    let roll = rng.gen_range(0..20);
    if roll == 0 {
        return Value::Missing;
    }
    let numeric = match kind {
        0 => true,
        1 => false,
        _ => roll % 2 == 0,
    };
    if numeric {
        Value::Numeric(f64::from(rng.gen_range(-5..15)) * 0.5)
    } else {
        Value::categorical(["a", "b", "c", "d"][rng.gen_range(0..4)])
    }
}

pub fn random_dataset(rng: &mut impl Rng, max_rows: usize, max_features: usize) -> Dataset {
    let n_features = rng.gen_range(1..=max_features);
    let kinds: Vec<u8> = (0..n_features).map(|_| rng.gen_range(0..3)).collect();
    let rows = rng.gen_range(1..=max_rows);
    let examples = (0..rows)
        .map(|id| Example {
            id,
            values: kinds.iter().map(|&k| random_value(rng, k)).collect(),
            label: rng.gen_bool(0.45),
        })
        .collect();
    Dataset::new(schema(n_features), examples).unwrap()
}

/// Every literal that can be formed from the values present in the column.
pub fn all_literals(examples: &[&Example], feature: usize) -> Vec<Literal> {
    let mut numbers = Vec::new();
    let mut tokens = BTreeSet::new();
    for e in examples {
        match &e.values[feature] {
            Value::Numeric(x) => numbers.push(*x),
            v => {
                tokens.insert(v.clone());
            }
        }
    }
    numbers.sort_by(f64::total_cmp);
    numbers.dedup();
    let mut out = Vec::new();
    for x in numbers {
        out.push(Literal::le(feature, x));
        out.push(Literal::gt(feature, x));
    }
    for t in tokens {
        out.push(Literal::new(feature, Op::Eq, t.clone()));
        out.push(Literal::new(feature, Op::Ne, t));
    }
    out
}

/// Counts obtained by classifying every example with the literal.
pub fn recount(lit: &Literal, pos: &[&Example], neg: &[&Example]) -> ConfusionCounts {
    let tp = pos
        .iter()
        .filter(|e| evaluate_literal(lit, &e.values[lit.feature]))
        .count();
    let fp = neg
        .iter()
        .filter(|e| evaluate_literal(lit, &e.values[lit.feature]))
        .count();
    ConfusionCounts::new(tp, pos.len() - tp, neg.len() - fp, fp)
}

/// Exhaustive literal search: enumerate, classify, score. Ties go to the
/// smaller literal.
pub fn oracle_best(
    pos: &[&Example],
    neg: &[&Example],
    n_features: usize,
    excluded: &HashSet<Literal>,
) -> Option<(f64, Literal, ConfusionCounts)> {
    let all: Vec<&Example> = pos.iter().chain(neg).copied().collect();
    let mut best: Option<(f64, Literal, ConfusionCounts)> = None;
    for f in 0..n_features {
        for lit in all_literals(&all, f) {
            let c = recount(&lit, pos, neg);
            let score = ig(c);
            if score == f64::NEG_INFINITY || excluded.contains(&lit) {
                continue;
            }
            let better = match &best {
                None => true,
                Some((s, l, _)) => score > *s || (score == *s && lit < *l),
            };
            if better {
                best = Some((score, lit, c));
            }
        }
    }
    best
}

fn random_rule(rng: &mut impl Rng, n_features: usize, below: usize) -> Rule {
    let defaults = (0..rng.gen_range(0..4))
        .map(|_| {
            let f = rng.gen_range(0..n_features);
            let token = ["a", "b", "c", "d"][rng.gen_range(0..4)];
            match rng.gen_range(0..4) {
                0 => Literal::le(f, f64::from(rng.gen_range(-5..15)) * 0.5),
                1 => Literal::gt(f, f64::from(rng.gen_range(-5..15)) * 0.5),
                2 => Literal::eq(f, token),
                _ => Literal::ne(f, token),
            }
        })
        .collect();
    let mut exceptions: Vec<usize> = match below {
        0 => Vec::new(),
        _ => (0..rng.gen_range(0..3))
            .map(|_| rng.gen_range(0..below))
            .collect(),
    };
    exceptions.sort_unstable();
    exceptions.dedup();
    Rule::new(defaults, exceptions)
}

/// A random stratified program: abnormal predicate `k` only refers to ids
/// below `k`, so the dependency graph is acyclic by construction.
pub fn random_program(rng: &mut impl Rng, n_features: usize) -> Program {
    let mut p = Program::new(schema(n_features));
    let n_ab = rng.gen_range(0..6);
    for id in 0..n_ab {
        for _ in 0..rng.gen_range(1..3) {
            let r = random_rule(rng, n_features, id);
            p.define_abnormal(id, r);
        }
    }
    for _ in 0..rng.gen_range(0..4) {
        let r = random_rule(rng, n_features, n_ab);
        p.push_rule(r);
    }
    p
}

pub fn random_record(rng: &mut impl Rng, n_features: usize) -> Vec<Value> {
    (0..n_features).map(|_| random_value(rng, 2)).collect()
}

/// Direct reading of the rule semantics, written without the library's
/// evaluator: defaults all hold and no exception predicate has a holding
/// clause.
pub fn truth_table(p: &Program, rule: &Rule, values: &[Value]) -> bool {
    let defaults = rule
        .defaults
        .iter()
        .all(|l| evaluate_literal(l, &values[l.feature]));
    let excepted = rule.exceptions.iter().any(|id| {
        p.abnormal(*id)
            .unwrap()
            .iter()
            .any(|r| truth_table(p, r, values))
    });
    defaults && !excepted
}

/// The 13-value mixed feature from the worked split-scoring example.
pub fn mixed_feature() -> (Vec<Example>, Vec<Example>) {
    let make = |tokens: &[&str], label: bool, offset: usize| -> Vec<Example> {
        tokens
            .iter()
            .enumerate()
            .map(|(i, t)| Example {
                id: offset + i,
                values: vec![infer_value(t)],
                label,
            })
            .collect()
    };
    (
        make(&["1", "2", "3", "3", "5", "6", "6", "b"], true, 0),
        make(&["2", "4", "6", "7", "a"], false, 8),
    )
}

pub fn penguins() -> Dataset {
    let rows = [
        ("true", "false", "false", true),
        ("true", "false", "false", true),
        ("false", "false", "true", false),
        ("true", "true", "false", false),
    ];
    let examples = rows
        .iter()
        .enumerate()
        .map(|(id, (b, p, c, label))| Example {
            id,
            values: vec![infer_value(b), infer_value(p), infer_value(c)],
            label: *label,
        })
        .collect();
    let schema = Schema {
        feature_names: vec!["bird".into(), "penguin".into(), "cat".into()],
        target_name: "fly".into(),
        positive_value: "true".into(),
    };
    Dataset::new(schema, examples).unwrap()
}
