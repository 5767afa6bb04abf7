//! Sequential covering with default literals and recursively learned
//! exceptions.
//!
//! A rule first collects default literals until the negatives it still
//! covers are few enough relative to the positives (`ratio`). Those residual
//! negatives then become the positives of a recursive call whose rules are
//! installed as abnormal predicates `abN` and referenced as `not abN(X)`.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{split_examples, Dataset, Example, Schema};
use crate::heuristics::{find_best_literal, Literal, ScoredLiteral};
use crate::interpreter::Evaluator;

pub type AbId = usize;

/// `head :- defaults, not ab<e1>(X), not ab<e2>(X), ...`
///
/// The head is implied by where the rule lives in its [`Program`]: target
/// rules conclude the schema's positive class, abnormal rules their id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Rule {
    pub defaults: Vec<Literal>,
    pub exceptions: Vec<AbId>,
}

impl Rule {
    pub fn new(defaults: Vec<Literal>, exceptions: Vec<AbId>) -> Rule {
        Rule {
            defaults,
            exceptions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StratificationError {
    #[error("ab{0} is referenced but never defined")]
    Dangling(AbId),
    #[error("ab{0} depends on its own negation")]
    Cycle(AbId),
}

/// Learned (or parsed) rule set.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    schema: Schema,
    rules: Vec<Rule>,
    ab_rules: BTreeMap<AbId, Vec<Rule>>,
    next_ab: AbId,
}

impl Program {
    pub fn new(schema: Schema) -> Program {
        Program {
            schema,
            rules: Vec::new(),
            ab_rules: BTreeMap::new(),
            next_ab: 0,
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Target rules, in evaluation order.
    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn ab_rules(&self) -> &BTreeMap<AbId, Vec<Rule>> {
        &self.ab_rules
    }

    pub fn abnormal(&self, id: AbId) -> Option<&[Rule]> {
        self.ab_rules.get(&id).map(Vec::as_slice)
    }

    pub fn push_rule(&mut self, rule: Rule) {
        self.rules.push(rule);
    }

    /// Installs `rule` under a fresh abnormal id.
    pub fn add_abnormal(&mut self, rule: Rule) -> AbId {
        let id = self.next_ab;
        self.next_ab += 1;
        self.ab_rules.insert(id, vec![rule]);
        id
    }

    /// Adds one more clause for `id` (parsed programs may define an abnormal
    /// predicate with several clauses).
    pub fn define_abnormal(&mut self, id: AbId, rule: Rule) {
        self.ab_rules.entry(id).or_default().push(rule);
        self.next_ab = self.next_ab.max(id + 1);
    }

    /// Number of emitted clauses.
    pub fn clause_count(&self) -> usize {
        self.rules.len() + self.ab_rules.values().map(Vec::len).sum::<usize>()
    }

    fn rollback_abnormal(&mut self, mark: AbId) {
        self.ab_rules.split_off(&mark);
        self.next_ab = mark;
    }

    /// Checks every exception reference resolves and no abnormal predicate
    /// reaches itself. Returns the maximum nesting depth of abnormal
    /// predicates (0 when there are none).
    pub fn check_stratified(&self) -> Result<usize, StratificationError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Active,
            Done(usize),
        }
        fn visit(
            p: &Program,
            id: AbId,
            marks: &mut BTreeMap<AbId, Mark>,
        ) -> Result<usize, StratificationError> {
            match marks.get(&id) {
                Some(Mark::Done(d)) => return Ok(*d),
                Some(Mark::Active) => return Err(StratificationError::Cycle(id)),
                None => {}
            }
            let clauses = p
                .ab_rules
                .get(&id)
                .ok_or(StratificationError::Dangling(id))?;
            marks.insert(id, Mark::Active);
            let mut depth = 1;
            for r in clauses {
                for &e in &r.exceptions {
                    depth = depth.max(1 + visit(p, e, marks)?);
                }
            }
            marks.insert(id, Mark::Done(depth));
            Ok(depth)
        }

        let mut marks = BTreeMap::new();
        let mut depth = 0;
        for r in &self.rules {
            for &e in &r.exceptions {
                depth = depth.max(visit(self, e, &mut marks)?);
            }
        }
        for &id in self.ab_rules.keys() {
            visit(self, id, &mut marks)?;
        }
        Ok(depth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Residual negatives tolerated per covered positive before exceptions
    /// are learned.
    pub ratio: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams { ratio: 0.5 }
    }
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("cannot fit an empty dataset")]
    EmptyDataset,
    #[error("dataset has no features")]
    NoFeatures,
    #[error("ratio must be a non-negative number, got {0}")]
    BadRatio(f64),
}

/// One `find_best_literal` call made while learning.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub pos_ids: Vec<usize>,
    pub neg_ids: Vec<usize>,
    pub excluded: Vec<Literal>,
    pub chosen: Option<ScoredLiteral>,
}

struct Ctx<'t> {
    hp: Hyperparams,
    trace: Option<&'t mut Vec<Selection>>,
}

fn rule_holds(prog: &Program, rule: &Rule, e: &Example) -> bool {
    Evaluator::new(prog).rule_holds(rule, &e.values)
}

/// Examples whose classification by `rule` equals `sign`.
///
/// # Panics
/// When `rule` or the program references an undefined abnormal predicate;
/// run [`Program::check_stratified`] first on programs not built by this
/// module.
pub fn covers<'a>(
    rule: &Rule,
    examples: &[&'a Example],
    sign: bool,
    prog: &Program,
) -> Vec<&'a Example> {
    examples
        .iter()
        .copied()
        .filter(|e| rule_holds(prog, rule, e) == sign)
        .collect()
}

pub fn learn_rule(
    pos: &[&Example],
    neg: &[&Example],
    used: &HashSet<Literal>,
    hp: Hyperparams,
    prog: &mut Program,
) -> Rule {
    learn_rule_in(&mut Ctx { hp, trace: None }, pos, neg, used, prog)
}

pub fn fold_rpp(
    pos: &[&Example],
    neg: &[&Example],
    used: &HashSet<Literal>,
    hp: Hyperparams,
    prog: &mut Program,
) -> Vec<Rule> {
    fold_rpp_in(&mut Ctx { hp, trace: None }, pos, neg, used, prog)
}

fn learn_rule_in(
    ctx: &mut Ctx<'_>,
    pos: &[&Example],
    neg: &[&Example],
    used: &HashSet<Literal>,
    prog: &mut Program,
) -> Rule {
    let n_features = prog.schema().feature_count();
    let mut pos: Vec<&Example> = pos.to_vec();
    let mut neg: Vec<&Example> = neg.to_vec();
    let mut defaults: Vec<Literal> = Vec::new();
    let mut excluded = used.clone();

    loop {
        let best = find_best_literal(&pos, &neg, n_features, &excluded);
        if let Some(trace) = ctx.trace.as_deref_mut() {
            let mut ex: Vec<Literal> = excluded.iter().cloned().collect();
            ex.sort();
            trace.push(Selection {
                pos_ids: pos.iter().map(|e| e.id).collect(),
                neg_ids: neg.iter().map(|e| e.id).collect(),
                excluded: ex,
                chosen: best.clone(),
            });
        }
        let Some(best) = best else {
            return Rule::new(defaults, Vec::new());
        };
        let lit = best.literal;
        pos.retain(|e| lit.holds(&e.values));
        neg.retain(|e| lit.holds(&e.values));
        excluded.insert(lit.clone());
        defaults.push(lit);
        if neg.len() as f64 <= pos.len() as f64 * ctx.hp.ratio {
            break;
        }
    }

    let mut exceptions = Vec::new();
    if !neg.is_empty() {
        for ab in fold_rpp_in(ctx, &neg, &pos, &excluded, prog) {
            exceptions.push(prog.add_abnormal(ab));
        }
    }
    Rule::new(defaults, exceptions)
}

fn fold_rpp_in(
    ctx: &mut Ctx<'_>,
    pos: &[&Example],
    neg: &[&Example],
    used: &HashSet<Literal>,
    prog: &mut Program,
) -> Vec<Rule> {
    let mut pos: Vec<&Example> = pos.to_vec();
    let mut rules = Vec::new();
    while !pos.is_empty() {
        let mark = prog.next_ab;
        let rule = learn_rule_in(ctx, &pos, neg, used, prog);
        let before = pos.len();
        if !rule.defaults.is_empty() {
            pos.retain(|e| !rule_holds(prog, &rule, e));
        }
        if pos.len() == before {
            // Accept-all or covers nothing new: stop instead of looping.
            prog.rollback_abnormal(mark);
            break;
        }
        rules.push(rule);
    }
    rules
}

fn fit_with(
    d: &Dataset,
    hp: Hyperparams,
    trace: Option<&mut Vec<Selection>>,
) -> Result<Program, FitError> {
    if !(hp.ratio >= 0.0 && hp.ratio.is_finite()) {
        return Err(FitError::BadRatio(hp.ratio));
    }
    if d.is_empty() {
        return Err(FitError::EmptyDataset);
    }
    if d.schema().feature_count() == 0 {
        return Err(FitError::NoFeatures);
    }
    let (pos, neg) = split_examples(d);
    let mut prog = Program::new(d.schema().clone());
    let mut ctx = Ctx { hp, trace };
    for rule in fold_rpp_in(&mut ctx, &pos, &neg, &HashSet::new(), &mut prog) {
        prog.push_rule(rule);
    }
    Ok(prog)
}

/// Learns a program for the dataset's positive class.
pub fn fit(d: &Dataset, hp: Hyperparams) -> Result<Program, FitError> {
    fit_with(d, hp, None)
}

/// Like [`fit`], also returning every literal selection in call order.
pub fn fit_traced(d: &Dataset, hp: Hyperparams) -> Result<(Program, Vec<Selection>), FitError> {
    let mut trace = Vec::new();
    let prog = fit_with(d, hp, Some(&mut trace))?;
    Ok((prog, trace))
}
