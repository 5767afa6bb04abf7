//! Literal scoring.
//!
//! Each feature is tallied once: numeric values are sorted and turned into
//! prefix sums of positive/negative counts, so the confusion counts of every
//! `≤ x` / `> x` candidate are read off in constant time. Categorical values
//! (and the missing token) feed the `=` / `≠` candidates. Values of the other
//! kind never satisfy a comparison, which is why numeric totals appear in the
//! categorical candidates' counts and vice versa.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{Example, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Op {
    Le,
    Gt,
    Eq,
    Ne,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Le => "=<",
            Op::Gt => ">",
            Op::Eq => "=",
            Op::Ne => "\\=",
        }
    }
}

/// A test on one feature. The derived ordering (feature, op, constant) is the
/// tie-break order used when two candidates score the same.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub feature: usize,
    pub op: Op,
    pub constant: Value,
}

impl Literal {
    pub fn le(feature: usize, x: f64) -> Literal {
        Literal::new(feature, Op::Le, Value::Numeric(x))
    }

    pub fn gt(feature: usize, x: f64) -> Literal {
        Literal::new(feature, Op::Gt, Value::Numeric(x))
    }

    pub fn eq(feature: usize, token: impl Into<String>) -> Literal {
        Literal::new(feature, Op::Eq, Value::Categorical(token.into()))
    }

    pub fn ne(feature: usize, token: impl Into<String>) -> Literal {
        Literal::new(feature, Op::Ne, Value::Categorical(token.into()))
    }

    /// # Panics
    /// When the constant's kind does not fit the operator.
    pub fn new(feature: usize, op: Op, constant: Value) -> Literal {
        let numeric_op = matches!(op, Op::Le | Op::Gt);
        assert_eq!(
            numeric_op,
            constant.is_numeric(),
            "literal {op:?} cannot take constant {constant:?}"
        );
        Literal {
            feature,
            op,
            constant,
        }
    }

    /// Evaluates the literal against a full row.
    pub fn holds(&self, values: &[Value]) -> bool {
        evaluate_literal(self, &values[self.feature])
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "f{} {} {}",
            self.feature,
            self.op.symbol(),
            self.constant
        )
    }
}

/// `≤`/`>` only hold on numbers; `=` compares tokens (the missing token
/// included); `≠` is the plain negation of `=`, so it holds on every number.
pub fn evaluate_literal(l: &Literal, v: &Value) -> bool {
    match l.op {
        Op::Le | Op::Gt => match (v.as_f64(), l.constant.as_f64()) {
            (Some(x), Some(c)) => {
                if l.op == Op::Le {
                    x <= c
                } else {
                    x > c
                }
            }
            _ => false,
        },
        Op::Eq => token_eq(v, &l.constant),
        Op::Ne => !token_eq(v, &l.constant),
    }
}

fn token_eq(v: &Value, c: &Value) -> bool {
    matches!((v.token(), c.token()), (Some(a), Some(b)) if a == b)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
    pub false_pos: usize,
}

impl ConfusionCounts {
    /// Arguments in the `(tp, fn, tn, fp)` order of the scoring function.
    pub const fn new(tp: usize, fn_: usize, tn: usize, fp: usize) -> ConfusionCounts {
        ConfusionCounts {
            true_pos: tp,
            false_neg: fn_,
            true_neg: tn,
            false_pos: fp,
        }
    }

    pub fn total(&self) -> usize {
        self.true_pos + self.false_neg + self.true_neg + self.false_pos
    }
}

/// Guarded information gain. Returns `-inf` when the literal misclassifies
/// more than it gets right, or when either side of the split is empty.
/// Natural logarithms; every finite result is `<= 0`.
pub fn ig(c: ConfusionCounts) -> f64 {
    let ConfusionCounts {
        true_pos: tp,
        false_neg: fn_,
        true_neg: tn,
        false_pos: fp,
    } = c;
    if fp + fn_ > tp + tn {
        return f64::NEG_INFINITY;
    }
    let pos = tp + fp;
    let neg = tn + fn_;
    let tot = pos + neg;
    if pos == 0 || neg == 0 || tot == 0 {
        return f64::NEG_INFINITY;
    }
    let tot = tot as f64;
    let term = |n: usize, d: usize| {
        if n > 0 {
            n as f64 / tot * (n as f64 / d as f64).ln()
        } else {
            0.0
        }
    };
    term(tp, pos) + term(fp, pos) + term(tn, neg) + term(fn_, neg)
}

/// Per-feature value counts over the current examples.
///
/// `pos_le[j]` / `neg_le[j]` hold prefix sums: the number of positive /
/// negative examples whose numeric value is `<= xs[j]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTally {
    pub xs: Vec<f64>,
    pub pos_le: Vec<usize>,
    pub neg_le: Vec<usize>,
    /// Categorical tokens and `Missing`, in `Value` order.
    pub cs: Vec<Value>,
    pub pos_cat: Vec<usize>,
    pub neg_cat: Vec<usize>,
    pub xp: usize,
    pub xn: usize,
    pub cp: usize,
    pub cn: usize,
}

pub fn tally_feature(pos: &[&Example], neg: &[&Example], feature: usize) -> FeatureTally {
    let mut nums: HashMap<u64, (usize, usize)> = HashMap::new();
    let mut cats: BTreeMap<&Value, (usize, usize)> = BTreeMap::new();
    let mut t = FeatureTally::default();

    for (examples, positive) in [(pos, true), (neg, false)] {
        for e in examples {
            let v = &e.values[feature];
            let slot = match v {
                Value::Numeric(x) => {
                    if positive {
                        t.xp += 1;
                    } else {
                        t.xn += 1;
                    }
                    nums.entry(x.to_bits()).or_default()
                }
                _ => {
                    if positive {
                        t.cp += 1;
                    } else {
                        t.cn += 1;
                    }
                    cats.entry(v).or_default()
                }
            };
            if positive {
                slot.0 += 1;
            } else {
                slot.1 += 1;
            }
        }
    }

    let mut xs: Vec<(f64, usize, usize)> = nums
        .into_iter()
        .map(|(bits, (p, n))| (f64::from_bits(bits), p, n))
        .collect();
    xs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    t.xs.reserve(xs.len());
    t.pos_le.reserve(xs.len());
    t.neg_le.reserve(xs.len());
    let (mut p_acc, mut n_acc) = (0, 0);
    for (x, p, n) in xs {
        p_acc += p;
        n_acc += n;
        t.xs.push(x);
        t.pos_le.push(p_acc);
        t.neg_le.push(n_acc);
    }
    for (v, (p, n)) in cats {
        t.cs.push(v.clone());
        t.pos_cat.push(p);
        t.neg_cat.push(n);
    }
    t
}

impl FeatureTally {
    /// Every candidate literal on `feature` with the confusion counts it
    /// would produce, in `≤`, `>` per numeric value then `=`, `≠` per token.
    pub fn candidates(
        &self,
        feature: usize,
    ) -> impl Iterator<Item = (Literal, ConfusionCounts)> + '_ {
        let (xp, xn, cp, cn) = (self.xp, self.xn, self.cp, self.cn);
        let numeric = self.xs.iter().enumerate().flat_map(move |(j, &x)| {
            let (p, n) = (self.pos_le[j], self.neg_le[j]);
            [
                (
                    Literal::le(feature, x),
                    ConfusionCounts::new(p, xp - p + cp, xn - n + cn, n),
                ),
                (
                    Literal::gt(feature, x),
                    ConfusionCounts::new(xp - p, p + cp, n + cn, xn - n),
                ),
            ]
        });
        let categorical = self.cs.iter().enumerate().flat_map(move |(j, c)| {
            let (p, n) = (self.pos_cat[j], self.neg_cat[j]);
            [
                (
                    Literal::new(feature, Op::Eq, c.clone()),
                    ConfusionCounts::new(p, cp - p + xp, cn - n + xn, n),
                ),
                (
                    Literal::new(feature, Op::Ne, c.clone()),
                    ConfusionCounts::new(cp - p + xp, p, n, cn - n + xn),
                ),
            ]
        });
        numeric.chain(categorical)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredLiteral {
    pub score: f64,
    pub literal: Literal,
}

impl ScoredLiteral {
    /// Higher score wins; equal scores fall back to the literal order.
    pub fn beats(&self, other: &ScoredLiteral) -> bool {
        self.score > other.score || (self.score == other.score && self.literal < other.literal)
    }
}

/// Work done by a search, for checking the linear-time claim.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub ig_evaluations: usize,
    pub sorts: usize,
}

pub fn best_info_gain(
    pos: &[&Example],
    neg: &[&Example],
    feature: usize,
    excluded: &HashSet<Literal>,
) -> Option<ScoredLiteral> {
    best_info_gain_counted(pos, neg, feature, excluded, &mut SearchStats::default())
}

/// Best literal on one feature. All `2·|xs| + 2·|cs|` candidates are scored;
/// excluded literals are skipped only at selection time.
pub fn best_info_gain_counted(
    pos: &[&Example],
    neg: &[&Example],
    feature: usize,
    excluded: &HashSet<Literal>,
    stats: &mut SearchStats,
) -> Option<ScoredLiteral> {
    let tally = tally_feature(pos, neg, feature);
    stats.sorts += 1;
    let mut best: Option<ScoredLiteral> = None;
    for (literal, counts) in tally.candidates(feature) {
        let score = ig(counts);
        stats.ig_evaluations += 1;
        if score == f64::NEG_INFINITY || excluded.contains(&literal) {
            continue;
        }
        let cand = ScoredLiteral { score, literal };
        if best.as_ref().is_none_or(|b| cand.beats(b)) {
            best = Some(cand);
        }
    }
    best
}

/// Best literal over all `n_features` features; `None` means no literal has
/// a finite score.
pub fn find_best_literal(
    pos: &[&Example],
    neg: &[&Example],
    n_features: usize,
    excluded: &HashSet<Literal>,
) -> Option<ScoredLiteral> {
    if pos.is_empty() && neg.is_empty() {
        return None;
    }
    let mut best: Option<ScoredLiteral> = None;
    for feature in 0..n_features {
        if let Some(cand) = best_info_gain(pos, neg, feature, excluded) {
            if best.as_ref().is_none_or(|b| cand.beats(b)) {
                best = Some(cand);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::infer_value;

    fn examples(tokens: &[&str], label: bool) -> Vec<Example> {
        tokens
            .iter()
            .enumerate()
            .map(|(id, t)| Example {
                id,
                values: vec![infer_value(t)],
                label,
            })
            .collect()
    }

    /// The 13-example mixed feature used throughout these tests.
    fn mixed() -> (Vec<Example>, Vec<Example>) {
        (
            examples(&["1", "2", "3", "3", "5", "6", "6", "b"], true),
            examples(&["2", "4", "6", "7", "a"], false),
        )
    }

    #[test]
    fn ig_reference_values() {
        assert!((ig(ConfusionCounts::new(8, 0, 1, 4)) + 0.588).abs() < 1e-3);
        assert!((ig(ConfusionCounts::new(7, 1, 2, 3)) + 0.616).abs() < 1e-3);
        assert_eq!(ig(ConfusionCounts::new(1, 7, 5, 0)), f64::NEG_INFINITY);
        assert_eq!(ig(ConfusionCounts::new(0, 0, 0, 0)), f64::NEG_INFINITY);
    }

    #[test]
    fn ig_guards_empty_sides() {
        assert_eq!(ig(ConfusionCounts::new(0, 3, 5, 0)), f64::NEG_INFINITY);
        assert_eq!(ig(ConfusionCounts::new(4, 0, 0, 1)), f64::NEG_INFINITY);
        assert_eq!(ig(ConfusionCounts::new(3, 0, 2, 0)), 0.0);
    }

    #[test]
    fn tally_prefix_sums() {
        let (p, n) = mixed();
        let (p, n): (Vec<_>, Vec<_>) = (p.iter().collect(), n.iter().collect());
        let t = tally_feature(&p, &n, 0);
        assert_eq!(t.xs, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert_eq!(t.pos_le, vec![1, 2, 4, 4, 5, 7, 7]);
        assert_eq!(t.neg_le, vec![0, 1, 1, 2, 2, 3, 4]);
        assert_eq!(t.cs, vec![Value::categorical("a"), Value::categorical("b")]);
        assert_eq!(t.pos_cat, vec![0, 1]);
        assert_eq!(t.neg_cat, vec![1, 0]);
        assert_eq!((t.xp, t.xn, t.cp, t.cn), (7, 4, 1, 1));
    }

    #[test]
    fn tally_without_categories() {
        let p = examples(&["1", "2"], true);
        let n = examples(&["3"], false);
        let t = tally_feature(
            &p.iter().collect::<Vec<_>>(),
            &n.iter().collect::<Vec<_>>(),
            0,
        );
        assert!(t.cs.is_empty());
        assert_eq!((t.cp, t.cn), (0, 0));
    }

    #[test]
    fn missing_is_its_own_category() {
        let p = examples(&["?", "1"], true);
        let n = examples(&["", "x"], false);
        let t = tally_feature(
            &p.iter().collect::<Vec<_>>(),
            &n.iter().collect::<Vec<_>>(),
            0,
        );
        assert_eq!(t.cs, vec![Value::categorical("x"), Value::Missing]);
        assert_eq!(t.pos_cat, vec![0, 1]);
        assert_eq!(t.neg_cat, vec![1, 1]);
    }

    #[test]
    fn best_on_mixed_feature() {
        let (p, n) = mixed();
        let (p, n): (Vec<_>, Vec<_>) = (p.iter().collect(), n.iter().collect());
        let best = best_info_gain(&p, &n, 0, &HashSet::new()).unwrap();
        assert_eq!(best.literal, Literal::ne(0, "a"));
        assert!((best.score + 0.588).abs() < 1e-3);

        // Next best finite entry of the reference table is `≤ 6` at -0.616.
        let excluded = HashSet::from([Literal::ne(0, "a")]);
        let next = best_info_gain(&p, &n, 0, &excluded).unwrap();
        assert_eq!(next.literal, Literal::le(0, 6.0));
        assert!((next.score + 0.616).abs() < 1e-3);
    }

    #[test]
    fn no_examples_no_literal() {
        assert!(best_info_gain(&[], &[], 0, &HashSet::new()).is_none());
        assert!(find_best_literal(&[], &[], 3, &HashSet::new()).is_none());
    }

    #[test]
    fn evaluate_literal_cross_type() {
        assert!(evaluate_literal(&Literal::le(0, 6.0), &Value::Numeric(6.0)));
        assert!(!evaluate_literal(
            &Literal::le(0, 6.0),
            &Value::categorical("b")
        ));
        assert!(!evaluate_literal(&Literal::gt(0, 6.0), &Value::Missing));
        assert!(evaluate_literal(&Literal::ne(0, "a"), &Value::Numeric(7.0)));
        assert!(!evaluate_literal(&Literal::eq(0, "c"), &Value::Missing));
        assert!(evaluate_literal(
            &Literal::new(0, Op::Eq, Value::Missing),
            &Value::Missing
        ));
        assert!(evaluate_literal(&Literal::ne(0, "c"), &Value::Missing));
    }

    #[test]
    #[should_panic]
    fn numeric_op_rejects_token() {
        Literal::new(0, Op::Le, Value::categorical("a"));
    }

    #[test]
    fn counted_search_scores_every_candidate() {
        let (p, n) = mixed();
        let (p, n): (Vec<_>, Vec<_>) = (p.iter().collect(), n.iter().collect());
        let mut stats = SearchStats::default();
        let excluded = HashSet::from([Literal::ne(0, "a")]);
        best_info_gain_counted(&p, &n, 0, &excluded, &mut stats);
        assert_eq!(stats.ig_evaluations, 2 * 7 + 2 * 2);
        assert_eq!(stats.sorts, 1);
    }

    #[test]
    fn tie_break_prefers_lower_feature_then_eq() {
        // Two identical boolean columns: both separate perfectly.
        let row = |a: &str, label| Example {
            id: 0,
            values: vec![infer_value(a), infer_value(a)],
            label,
        };
        let p = [row("yes", true), row("yes", true)];
        let n = [row("no", false)];
        let best = find_best_literal(
            &p.iter().collect::<Vec<_>>(),
            &n.iter().collect::<Vec<_>>(),
            2,
            &HashSet::new(),
        )
        .unwrap();
        // `= yes` and `≠ no` on both features all score 0.
        assert_eq!(best.literal, Literal::eq(0, "yes"));
        assert_eq!(best.score, 0.0);
    }
}
