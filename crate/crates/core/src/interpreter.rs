//! Classification and justification with a learned [`Program`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{format_number, Value};
use crate::heuristics::{Literal, Op};
use crate::learner::{AbId, Program, Rule, StratificationError};
use crate::program::{comparison_phrase, Phrasing, PredTemplates, ProgramError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterpretError {
    #[error("record has {found} values but the program expects {expected}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Unstratified(#[from] StratificationError),
    #[error(transparent)]
    Phrasing(#[from] ProgramError),
}

/// Top-down evaluator for one record. Abnormal predicates are memoised, so
/// each is evaluated at most once per record.
///
/// Assumes a stratified program; an undefined abnormal id evaluates false.
pub struct Evaluator<'p> {
    program: &'p Program,
    memo: HashMap<AbId, bool>,
}

impl<'p> Evaluator<'p> {
    pub fn new(program: &'p Program) -> Evaluator<'p> {
        Evaluator {
            program,
            memo: HashMap::new(),
        }
    }

    /// Clears the memo before moving on to another record.
    pub fn reset(&mut self) {
        self.memo.clear();
    }

    pub fn rule_holds(&mut self, rule: &Rule, values: &[Value]) -> bool {
        rule.defaults.iter().all(|l| l.holds(values))
            && !rule.exceptions.iter().any(|&id| self.ab_holds(id, values))
    }

    pub fn ab_holds(&mut self, id: AbId, values: &[Value]) -> bool {
        if let Some(&v) = self.memo.get(&id) {
            return v;
        }
        let program = self.program;
        let v = program
            .abnormal(id)
            .is_some_and(|clauses| clauses.iter().any(|r| self.rule_holds(r, values)));
        self.memo.insert(id, v);
        v
    }

    /// Index of the first target rule that holds.
    pub fn fired_rule(&mut self, values: &[Value]) -> Option<usize> {
        let program = self.program;
        program
            .rules()
            .iter()
            .position(|r| self.rule_holds(r, values))
    }
}

fn check(p: &Program, values: &[Value]) -> Result<usize, InterpretError> {
    let expected = p.schema().feature_count();
    if values.len() != expected {
        return Err(InterpretError::SchemaMismatch {
            expected,
            found: values.len(),
        });
    }
    Ok(p.check_stratified()?)
}

/// True iff some target rule holds for the record.
pub fn classify(p: &Program, values: &[Value]) -> Result<bool, InterpretError> {
    check(p, values)?;
    Ok(Evaluator::new(p).fired_rule(values).is_some())
}

/// Classifies many records, validating the program once.
pub fn classify_all<'r>(
    p: &Program,
    records: impl IntoIterator<Item = &'r [Value]>,
) -> Result<Vec<bool>, InterpretError> {
    p.check_stratified()?;
    let mut ev = Evaluator::new(p);
    let mut out = Vec::new();
    for values in records {
        let expected = p.schema().feature_count();
        if values.len() != expected {
            return Err(InterpretError::SchemaMismatch {
                expected,
                found: values.len(),
            });
        }
        ev.reset();
        out.push(ev.fired_rule(values).is_some());
    }
    Ok(out)
}

/// Independent check of [`classify`]: assigns each abnormal predicate a
/// stratum, then derives the model of the ground program bottom-up, one
/// stratum at a time, without recursion or memoisation.
pub fn fixpoint_oracle(p: &Program, values: &[Value]) -> bool {
    let ids: Vec<AbId> = p.ab_rules().keys().copied().collect();
    let mut level: BTreeMap<AbId, usize> = ids.iter().map(|&id| (id, 0)).collect();
    // Relax level(id) > level(e) for every exception e in a clause of id.
    for _ in 0..=ids.len() {
        let mut changed = false;
        for (&id, clauses) in p.ab_rules() {
            for r in clauses {
                for e in &r.exceptions {
                    let need = level.get(e).copied().unwrap_or(0) + 1;
                    if level[&id] < need {
                        level.insert(id, need);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    let body = |r: &Rule, model: &BTreeSet<AbId>| {
        r.defaults.iter().all(|l| l.holds(values))
            && r.exceptions.iter().all(|e| !model.contains(e))
    };
    let top = level.values().copied().max().unwrap_or(0);
    let mut model = BTreeSet::new();
    for stratum in 0..=top {
        let derived: Vec<AbId> = p
            .ab_rules()
            .iter()
            .filter(|(id, _)| level[*id] == stratum)
            .filter(|(_, clauses)| clauses.iter().any(|r| body(r, &model)))
            .map(|(&id, _)| id)
            .collect();
        model.extend(derived);
    }
    p.rules().iter().any(|r| body(r, &model))
}

/// One step of a proof. `holds` is the truth of the atom the sentence talks
/// about; a false atom is phrased as "there is no evidence that ...".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JustificationNode {
    pub sentence: String,
    pub holds: bool,
    pub children: Vec<JustificationNode>,
}

impl JustificationNode {
    fn leaf(sentence: String, holds: bool) -> Self {
        JustificationNode {
            sentence,
            holds,
            children: Vec::new(),
        }
    }

    /// Longest path to a leaf, in edges.
    pub fn depth(&self) -> usize {
        self.children
            .iter()
            .map(|c| 1 + c.depth())
            .max()
            .unwrap_or(0)
    }

    /// Indented text, one sentence per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out, 0, true);
        out
    }

    fn render_into(&self, out: &mut String, depth: usize, last: bool) {
        let tail = if !self.children.is_empty() {
            ", because"
        } else if !last {
            ", and"
        } else if depth == 0 {
            "."
        } else {
            ""
        };
        let _ = writeln!(out, "{}{}{}", "    ".repeat(depth), self.sentence, tail);
        let n = self.children.len();
        for (i, c) in self.children.iter().enumerate() {
            c.render_into(out, depth + 1, i + 1 == n);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: bool,
    /// Index into [`Program::rules`] of the first rule that held.
    pub fired_rule: Option<usize>,
    pub tree: JustificationNode,
}

fn negated(sentence: String, holds: bool) -> String {
    if holds {
        sentence
    } else {
        format!("there is no evidence that {sentence}")
    }
}

struct Justifier<'a> {
    ev: Evaluator<'a>,
    phrasing: Phrasing<'a>,
    values: &'a [Value],
    subject: &'a str,
}

impl Justifier<'_> {
    fn literal(&self, lit: &Literal) -> Result<JustificationNode, ProgramError> {
        let s = self.subject;
        let value = &self.values[lit.feature];
        Ok(match lit.op {
            Op::Eq | Op::Ne => {
                let atom_true = (lit.op == Op::Eq) == lit.holds(self.values);
                JustificationNode::leaf(
                    negated(self.phrasing.token_atom(lit, s)?, atom_true),
                    atom_true,
                )
            }
            Op::Le | Op::Gt => {
                let c = lit.constant.as_f64().unwrap_or_default();
                let holds = lit.holds(self.values);
                let sentence = match value.as_f64() {
                    Some(v) if holds => {
                        let shown = format_number(v);
                        format!(
                            "{}, and {}",
                            self.phrasing.value_atom(lit.feature, s, &shown)?,
                            comparison_phrase(lit.op, &shown, c)
                        )
                    }
                    _ => {
                        let observed = match value {
                            Value::Missing => "missing".to_string(),
                            other => other.to_string(),
                        };
                        format!(
                            "there is no evidence that {} where {} (observed {observed})",
                            self.phrasing.value_atom(lit.feature, s, "Y")?,
                            comparison_phrase(lit.op, "Y", c)
                        )
                    }
                };
                JustificationNode::leaf(sentence, holds)
            }
        })
    }

    /// Node for `abK`, with the body of its first firing clause, or the
    /// first failing condition of each clause.
    fn abnormal(&mut self, id: AbId) -> Result<JustificationNode, ProgramError> {
        let holds = self.ev.ab_holds(id, self.values);
        let sentence = negated(self.phrasing.abnormal(id, self.subject)?, holds);
        let program = self.ev.program;
        let clauses = program.abnormal(id).unwrap_or_default();
        let children = if holds {
            let fired = clauses
                .iter()
                .find(|r| self.ev.rule_holds(r, self.values))
                .expect("a holding abnormal predicate has a holding clause");
            self.body(fired)?
        } else {
            clauses
                .iter()
                .map(|r| self.first_failure(r))
                .collect::<Result<Vec<_>, _>>()?
        };
        Ok(JustificationNode {
            sentence,
            holds,
            children,
        })
    }

    fn body(&mut self, rule: &Rule) -> Result<Vec<JustificationNode>, ProgramError> {
        let mut out = Vec::with_capacity(rule.defaults.len() + rule.exceptions.len());
        for l in &rule.defaults {
            out.push(self.literal(l)?);
        }
        for &id in &rule.exceptions {
            out.push(self.abnormal(id)?);
        }
        Ok(out)
    }

    /// Leftmost condition of a rule that is not satisfied.
    fn first_failure(&mut self, rule: &Rule) -> Result<JustificationNode, ProgramError> {
        if let Some(l) = rule.defaults.iter().find(|l| !l.holds(self.values)) {
            return self.literal(l);
        }
        match rule
            .exceptions
            .iter()
            .find(|&&id| self.ev.ab_holds(id, self.values))
        {
            Some(&id) => self.abnormal(id),
            None => unreachable!("first_failure called on a rule that holds"),
        }
    }
}

/// Classifies the record and builds its proof tree. Sentences use
/// `templates` when given (falling back to generic phrasing for anything
/// they lack), otherwise atoms as they appear in the program text.
/// `subject` names the record in sentences.
pub fn justify(
    p: &Program,
    values: &[Value],
    templates: Option<&PredTemplates>,
    subject: &str,
) -> Result<Prediction, InterpretError> {
    check(p, values)?;
    let ab_ids = p.ab_rules().keys().copied();
    let templates = match templates {
        Some(t) => t.clone().with_defaults(p.schema(), ab_ids),
        None => PredTemplates::raw(p.schema(), ab_ids),
    };
    let mut j = Justifier {
        ev: Evaluator::new(p),
        phrasing: Phrasing::new(p.schema(), &templates),
        values,
        subject,
    };
    let fired = j.ev.fired_rule(values);
    let head = j.phrasing.head(subject)?;
    let tree = match fired {
        Some(i) => JustificationNode {
            sentence: head,
            holds: true,
            children: j.body(&p.rules()[i])?,
        },
        None => JustificationNode {
            sentence: negated(head, false),
            holds: false,
            children: p
                .rules()
                .iter()
                .map(|r| j.first_failure(r))
                .collect::<Result<Vec<_>, _>>()?,
        },
    };
    Ok(Prediction {
        label: fired.is_some(),
        fired_rule: fired,
        tree,
    })
}
