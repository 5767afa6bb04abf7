//! Synthetic data for benchmarks.

use foldrpp::{Dataset, Example, Schema, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One numeric feature with `rows` examples drawn from `distinct` values.
/// Labels follow a noisy threshold so that splits have finite scores.
pub fn numeric_column(rows: usize, distinct: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let distinct = distinct.max(1);
    let examples = (0..rows)
        .map(|id| {
            let v = rng.gen_range(0..distinct);
            let label = (v < distinct / 2) ^ rng.gen_bool(0.1);
            Example {
                id,
                values: vec![Value::Numeric(v as f64)],
                label,
            }
        })
        .collect();
    Dataset::new(schema(1), examples).expect("valid synthetic dataset")
}

/// A table of `features` columns, alternating numeric and categorical, whose
/// label is a rule with an exception plus 5% noise.
pub fn mixed_table(rows: usize, features: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = features.max(2);
    let tokens = ["red", "green", "blue", "grey"];
    let examples = (0..rows)
        .map(|id| {
            let values: Vec<Value> = (0..features)
                .map(|f| {
                    if f % 2 == 0 {
                        Value::Numeric(f64::from(rng.gen_range(0..100)))
                    } else {
                        Value::categorical(tokens[rng.gen_range(0..tokens.len())])
                    }
                })
                .collect();
            let x = values[0].as_f64().unwrap_or(0.0);
            let exception = values[1] == Value::categorical("red");
            let label = (x <= 60.0 && !exception) ^ rng.gen_bool(0.05);
            Example { id, values, label }
        })
        .collect();
    Dataset::new(schema(features), examples).expect("valid synthetic dataset")
}

fn schema(features: usize) -> Schema {
    Schema {
        feature_names: (0..features).map(|i| format!("f{i}")).collect(),
        target_name: "label".into(),
        positive_value: "yes".into(),
    }
}
