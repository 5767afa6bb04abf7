//! Learning default rules with exceptions from mixed tabular data.
//!
//! [`fit`] turns a labelled [`Dataset`] into a stratified [`Program`]: target
//! rules whose exceptions are themselves learned rules. [`emit_asp`] prints
//! the program as answer-set-program text, [`classify`] and [`justify`]
//! evaluate it on new records, and [`cross_validate`] measures it.
//!
//! ```
//! use foldrpp::{classify, emit_asp, fit, infer_value, Dataset, Example, Hyperparams, Schema};
//!
//! let schema = Schema {
//!     feature_names: vec!["bird".into(), "penguin".into()],
//!     target_name: "fly".into(),
//!     positive_value: "true".into(),
//! };
//! let rows = [("true", "false", true), ("true", "false", true), ("true", "true", false), ("false", "false", false)];
//! let examples = rows
//!     .iter()
//!     .enumerate()
//!     .map(|(id, (b, p, label))| Example { id, values: vec![infer_value(b), infer_value(p)], label: *label })
//!     .collect();
//! let data = Dataset::new(schema, examples).unwrap();
//! let program = fit(&data, Hyperparams::default()).unwrap();
//! assert_eq!(emit_asp(&program).unwrap(), "fly(X) :- bird(X), not ab0(X).\nab0(X) :- penguin(X).\n");
//! assert!(!classify(&program, &[infer_value("true"), infer_value("true")]).unwrap());
//! ```

pub mod data;
pub mod eval;
pub mod heuristics;
pub mod interpreter;
pub mod learner;
pub mod program;

pub use data::{
    format_number, infer_value, load_csv, load_records, make_folds, split_examples, DataError,
    Dataset, Example, Fold, RecordTable, Schema, Value, MISSING_TOKEN,
};
pub use eval::{confusion, cross_validate, metrics, CvReport, EvalError, FoldReport, Metrics};
pub use heuristics::{
    best_info_gain, evaluate_literal, find_best_literal, ig, ConfusionCounts, Literal, Op,
    ScoredLiteral,
};
pub use interpreter::{
    classify, classify_all, fixpoint_oracle, justify, Evaluator, InterpretError, JustificationNode,
    Prediction,
};
pub use learner::{
    fit, fit_traced, AbId, FitError, Hyperparams, Program, Rule, StratificationError,
};
pub use program::{
    emit_asp, emit_pred_decls, explain_rules_english, model_head, parse_asp, predicate_name,
    PredTemplate, PredTemplates, ProgramError,
};
