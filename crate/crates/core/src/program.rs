//! Answer-set-program text for learned rule sets.
//!
//! The emitted fragment is small: every clause is
//!
//! ```text
//! head(X[,c]) :- item, item, ... .
//! ```
//!
//! where an item is `feat(X,'c')`, `not feat(X,'c')`, `feat(X)` / `not
//! feat(X)` for the token `true`, `feat(X,Ni), Ni=<v` / `Ni>v` for numeric
//! comparisons, or `not abK(X)`. [`parse_asp`] reads exactly this fragment
//! back; it also accepts a repeated `feat(X,Ni)` atom before each
//! comparison. `#pred` declarations attach English templates to predicates.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::data::{format_number, Schema, Value, MISSING_TOKEN};
use crate::heuristics::{Literal, Op};
use crate::learner::{AbId, Program, Rule, StratificationError};

/// Token rendered as a unary atom (`bird(X)` rather than `bird(X,'true')`).
pub const FLAG_TOKEN: &str = "true";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: unknown predicate `{name}`")]
    UnknownPredicate {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("{line}:{col}: predicate `{name}` used with arity {arity}")]
    Arity {
        line: usize,
        col: usize,
        name: String,
        arity: usize,
    },
    #[error("{line}:{col}: {message}")]
    Semantic {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("program is not stratified: {0}")]
    Unstratified(#[from] StratificationError),
    #[error("predicate name `{0}` is ambiguous (feature names clash after normalisation)")]
    NameClash(String),
    #[error("no #pred template for `{0}`")]
    MissingTemplate(String),
}

/// Lower-case identifier used as the predicate for a feature or target name.
pub fn predicate_name(name: &str) -> String {
    let mut out: String = name
        .trim()
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    if !out.starts_with(|c: char| c.is_ascii_lowercase()) {
        out.insert_str(0, "f_");
    }
    out
}

fn ab_name(id: AbId) -> String {
    format!("ab{id}")
}

fn parse_ab_name(name: &str) -> Option<AbId> {
    let digits = name.strip_prefix("ab")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Predicate names for every feature, checked for clashes with each other,
/// the target and the `abN` namespace.
fn feature_predicates(schema: &Schema) -> Result<Vec<String>, ProgramError> {
    let target = predicate_name(&schema.target_name);
    let names: Vec<String> = schema
        .feature_names
        .iter()
        .map(|f| predicate_name(f))
        .collect();
    let mut seen = BTreeSet::new();
    for n in &names {
        if !seen.insert(n.as_str()) || *n == target || parse_ab_name(n).is_some() {
            return Err(ProgramError::NameClash(n.clone()));
        }
    }
    Ok(names)
}

fn quote(token: &str) -> String {
    let mut s = String::with_capacity(token.len() + 2);
    s.push('\'');
    for c in token.chars() {
        if c == '\'' || c == '\\' {
            s.push('\\');
        }
        s.push(c);
    }
    s.push('\'');
    s
}

fn head_atom(schema: &Schema) -> String {
    let name = predicate_name(&schema.target_name);
    let class = &schema.positive_value;
    if class == FLAG_TOKEN {
        format!("{name}(X)")
    } else if !class.is_empty() && class.bytes().all(|b| b.is_ascii_digit()) {
        format!("{name}(X,{class})")
    } else {
        format!("{name}(X,{})", quote(class))
    }
}

fn body_items(rule: &Rule, preds: &[String]) -> Vec<String> {
    let mut items = Vec::new();
    let mut bound = BTreeSet::new();
    for lit in &rule.defaults {
        let name = &preds[lit.feature];
        match lit.op {
            Op::Eq | Op::Ne => {
                let token = lit.constant.token().unwrap_or_default();
                let atom = if token == FLAG_TOKEN {
                    format!("{name}(X)")
                } else {
                    format!("{name}(X,{})", quote(token))
                };
                items.push(if lit.op == Op::Ne {
                    format!("not {atom}")
                } else {
                    atom
                });
            }
            Op::Le | Op::Gt => {
                let var = format!("N{}", lit.feature + 1);
                let value = format_number(lit.constant.as_f64().unwrap_or_default());
                let cmp = format!("{var}{}{value}", lit.op.symbol());
                if bound.insert(lit.feature) {
                    items.push(format!("{name}(X,{var}), {cmp}"));
                } else {
                    items.push(cmp);
                }
            }
        }
    }
    items.extend(
        rule.exceptions
            .iter()
            .map(|&id| format!("not {}(X)", ab_name(id))),
    );
    items
}

fn clause(head: &str, rule: &Rule, preds: &[String]) -> String {
    let items = body_items(rule, preds);
    if items.is_empty() {
        format!("{head}.\n")
    } else {
        format!("{head} :- {}.\n", items.join(", "))
    }
}

/// Renders the program, target rules first, then abnormal clauses by id.
pub fn emit_asp(p: &Program) -> Result<String, ProgramError> {
    p.check_stratified()?;
    let preds = feature_predicates(p.schema())?;
    let head = head_atom(p.schema());
    let mut out = String::new();
    for r in p.rules() {
        out.push_str(&clause(&head, r, &preds));
    }
    for (&id, clauses) in p.ab_rules() {
        let head = format!("{}(X)", ab_name(id));
        for r in clauses {
            out.push_str(&clause(&head, r, &preds));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Number(String),
    Quoted(String),
    LParen,
    RParen,
    Comma,
    Dot,
    If,
    Le,
    Gt,
    DoubleColon,
    Directive(String),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, line: usize, col: usize, message: impl Into<String>) -> ProgramError {
        ProgramError::Syntax {
            line,
            col,
            message: message.into(),
        }
    }

    fn take_while(&mut self, mut f: impl FnMut(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(&c) = self.chars.peek() {
            if !f(c) {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, ProgramError> {
        let mut out = Vec::new();
        loop {
            self.take_while(char::is_whitespace);
            let (line, col) = (self.line, self.col);
            let Some(&c) = self.chars.peek() else {
                return Ok(out);
            };
            let tok = match c {
                '%' => {
                    self.take_while(|c| c != '\n');
                    continue;
                }
                '(' | ')' | ',' | '.' | '>' => {
                    self.bump();
                    match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        ',' => Tok::Comma,
                        '.' => Tok::Dot,
                        _ => Tok::Gt,
                    }
                }
                ':' => {
                    self.bump();
                    match self.bump() {
                        Some('-') => Tok::If,
                        Some(':') => Tok::DoubleColon,
                        _ => return Err(self.err(line, col, "expected `:-` or `::`")),
                    }
                }
                '=' => {
                    self.bump();
                    match self.bump() {
                        Some('<') => Tok::Le,
                        _ => return Err(self.err(line, col, "expected `=<`")),
                    }
                }
                '\'' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            None => {
                                return Err(self.err(line, col, "unterminated quoted constant"))
                            }
                            Some('\'') => break,
                            Some('\\') => match self.bump() {
                                Some(e) => s.push(e),
                                None => {
                                    return Err(self.err(line, col, "unterminated quoted constant"))
                                }
                            },
                            Some(c) => s.push(c),
                        }
                    }
                    Tok::Quoted(s)
                }
                '#' => {
                    self.bump();
                    Tok::Directive(self.take_while(|c| c.is_ascii_alphanumeric() || c == '_'))
                }
                c if c.is_ascii_digit() || c == '-' => {
                    let mut s = String::new();
                    if c == '-' {
                        self.bump();
                        s.push('-');
                    }
                    s.push_str(&self.take_while(|c| c.is_ascii_digit()));
                    // A dot is part of the number only when a digit follows;
                    // otherwise it terminates the clause.
                    let mut look = self.chars.clone();
                    if look.next() == Some('.') && look.next().is_some_and(|d| d.is_ascii_digit()) {
                        self.bump();
                        s.push('.');
                        s.push_str(&self.take_while(|c| c.is_ascii_digit()));
                    }
                    if matches!(self.chars.peek(), Some('e' | 'E')) {
                        s.push(self.bump().unwrap_or('e'));
                        if matches!(self.chars.peek(), Some('+' | '-')) {
                            s.push(self.bump().unwrap_or('+'));
                        }
                        s.push_str(&self.take_while(|c| c.is_ascii_digit()));
                    }
                    if s == "-" || s.parse::<f64>().is_err() {
                        return Err(self.err(line, col, format!("malformed number `{s}`")));
                    }
                    Tok::Number(s)
                }
                c if c.is_alphabetic() || c == '_' => {
                    let word = self.take_while(|c| c.is_alphanumeric() || c == '_');
                    if c.is_uppercase() || c == '_' {
                        Tok::Var(word)
                    } else {
                        Tok::Ident(word)
                    }
                }
                other => {
                    return Err(self.err(line, col, format!("unexpected character `{other}`")))
                }
            };
            out.push(Spanned { tok, line, col });
        }
    }
}

// ---------------------------------------------------------------------------
// Syntax tree

#[derive(Debug, Clone, PartialEq)]
enum Arg {
    Var(String),
    Const(String),
}

#[derive(Debug, Clone)]
struct Atom {
    name: String,
    args: Vec<Arg>,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
enum Item {
    Pos(Atom),
    Neg(Atom),
    Cmp {
        var: String,
        op: Op,
        value: f64,
        line: usize,
        col: usize,
    },
}

#[derive(Debug, Clone)]
struct Clause {
    head: Atom,
    body: Vec<Item>,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    fn new(text: &str) -> Result<Parser, ProgramError> {
        let toks = Lexer::new(text).tokens()?;
        let lines = text.split('\n').count();
        let last_col = text.rsplit('\n').next().map_or(0, |l| l.chars().count());
        Ok(Parser {
            toks,
            pos: 0,
            eof: (lines.max(1), last_col + 1),
        })
    }

    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn at(&self) -> (usize, usize) {
        self.peek().map_or(self.eof, |s| (s.line, s.col))
    }

    fn err(&self, message: impl Into<String>) -> ProgramError {
        let (line, col) = self.at();
        ProgramError::Syntax {
            line,
            col,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ProgramError> {
        match self.peek() {
            Some(s) if s.tok == want => {
                self.pos += 1;
                Ok(())
            }
            Some(s) => {
                let found = format!("{:?}", s.tok);
                Err(self.err(format!("expected {what}, found {found}")))
            }
            None => Err(self.err(format!("expected {what}, found end of input"))),
        }
    }

    fn atom(&mut self) -> Result<Atom, ProgramError> {
        let (line, col) = self.at();
        let name = match self.next() {
            Some(Spanned {
                tok: Tok::Ident(n), ..
            }) => n,
            _ => {
                self.pos -= 1;
                return Err(self.err("expected a predicate name"));
            }
        };
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        loop {
            let arg = match self.next().map(|s| s.tok) {
                Some(Tok::Var(v)) => Arg::Var(v),
                Some(Tok::Quoted(q)) => Arg::Const(q),
                Some(Tok::Number(n)) => Arg::Const(n),
                Some(Tok::Ident(i)) => Arg::Const(i),
                _ => {
                    self.pos -= 1;
                    return Err(self.err("expected an argument"));
                }
            };
            args.push(arg);
            match self.next().map(|s| s.tok) {
                Some(Tok::Comma) => continue,
                Some(Tok::RParen) => break,
                _ => {
                    self.pos -= 1;
                    return Err(self.err("expected `,` or `)`"));
                }
            }
        }
        Ok(Atom {
            name,
            args,
            line,
            col,
        })
    }

    fn item(&mut self) -> Result<Item, ProgramError> {
        let (line, col) = self.at();
        match self.peek().map(|s| &s.tok) {
            Some(Tok::Ident(n)) if n == "not" => {
                self.pos += 1;
                Ok(Item::Neg(self.atom()?))
            }
            Some(Tok::Var(v)) => {
                let var = v.clone();
                self.pos += 1;
                let op = match self.next().map(|s| s.tok) {
                    Some(Tok::Le) => Op::Le,
                    Some(Tok::Gt) => Op::Gt,
                    _ => {
                        self.pos -= 1;
                        return Err(self.err("expected `=<` or `>`"));
                    }
                };
                let value = match self.next().map(|s| s.tok) {
                    Some(Tok::Number(n)) => n.parse::<f64>().unwrap_or(f64::NAN),
                    _ => {
                        self.pos -= 1;
                        return Err(self.err("expected a number"));
                    }
                };
                if !value.is_finite() {
                    return Err(ProgramError::Syntax {
                        line,
                        col,
                        message: "comparison constant is not finite".into(),
                    });
                }
                Ok(Item::Cmp {
                    var,
                    op,
                    value,
                    line,
                    col,
                })
            }
            _ => Ok(Item::Pos(self.atom()?)),
        }
    }

    fn clauses(&mut self) -> Result<Vec<Clause>, ProgramError> {
        let mut out = Vec::new();
        while self.peek().is_some() {
            let head = self.atom()?;
            let mut body = Vec::new();
            match self.next().map(|s| s.tok) {
                Some(Tok::Dot) => {}
                Some(Tok::If) => loop {
                    body.push(self.item()?);
                    match self.next().map(|s| s.tok) {
                        Some(Tok::Comma) => continue,
                        Some(Tok::Dot) => break,
                        _ => {
                            self.pos -= 1;
                            return Err(self.err("expected `,` or `.`"));
                        }
                    }
                },
                _ => {
                    self.pos -= 1;
                    return Err(self.err("expected `:-` or `.`"));
                }
            }
            out.push(Clause { head, body });
        }
        Ok(out)
    }
}

fn semantic(line: usize, col: usize, message: impl Into<String>) -> ProgramError {
    ProgramError::Semantic {
        line,
        col,
        message: message.into(),
    }
}

fn head_class(head: &Atom) -> Result<(String, String), ProgramError> {
    let subject_ok = matches!(head.args.first(), Some(Arg::Var(_)));
    match (&head.args[..], subject_ok) {
        ([_], true) => Ok((head.name.clone(), FLAG_TOKEN.to_string())),
        ([_, Arg::Const(c)], true) => Ok((head.name.clone(), c.clone())),
        _ => Err(ProgramError::Arity {
            line: head.line,
            col: head.col,
            name: head.name.clone(),
            arity: head.args.len(),
        }),
    }
}

/// Target predicate and class of the first non-abnormal head in `text`.
pub fn model_head(text: &str) -> Result<Option<(String, String)>, ProgramError> {
    let clauses = Parser::new(text)?.clauses()?;
    clauses
        .iter()
        .find(|c| parse_ab_name(&c.head.name).is_none())
        .map(|c| head_class(&c.head))
        .transpose()
}

struct Resolver<'s> {
    features: HashMap<String, usize>,
    schema: &'s Schema,
}

impl Resolver<'_> {
    fn subject<'a>(&self, atom: &'a Atom) -> Result<&'a str, ProgramError> {
        match atom.args.first() {
            Some(Arg::Var(v)) => Ok(v),
            _ => Err(semantic(
                atom.line,
                atom.col,
                format!("first argument of `{}` must be a variable", atom.name),
            )),
        }
    }

    fn rule(&self, clause: &Clause) -> Result<Rule, ProgramError> {
        let subject = self.subject(&clause.head)?;
        let mut rule = Rule::default();
        let mut bound: HashMap<String, usize> = HashMap::new();
        let mut compared: BTreeSet<String> = BTreeSet::new();
        let mut pending: Vec<(String, usize, usize)> = Vec::new();

        for item in &clause.body {
            match item {
                Item::Cmp {
                    var,
                    op,
                    value,
                    line,
                    col,
                } => {
                    let &feature = bound.get(var).ok_or_else(|| {
                        semantic(
                            *line,
                            *col,
                            format!("variable `{var}` is not bound by a feature atom"),
                        )
                    })?;
                    compared.insert(var.clone());
                    rule.defaults
                        .push(Literal::new(feature, *op, Value::Numeric(*value)));
                }
                Item::Pos(atom) | Item::Neg(atom) => {
                    let negated = matches!(item, Item::Neg(_));
                    if self.subject(atom)? != subject {
                        return Err(semantic(
                            atom.line,
                            atom.col,
                            "atom is about a different subject than the head",
                        ));
                    }
                    if let Some(id) = parse_ab_name(&atom.name) {
                        if atom.args.len() != 1 {
                            return Err(ProgramError::Arity {
                                line: atom.line,
                                col: atom.col,
                                name: atom.name.clone(),
                                arity: atom.args.len(),
                            });
                        }
                        if !negated {
                            return Err(semantic(
                                atom.line,
                                atom.col,
                                "abnormal predicates may only appear negated",
                            ));
                        }
                        rule.exceptions.push(id);
                        continue;
                    }
                    let &feature = self.features.get(&atom.name).ok_or_else(|| {
                        ProgramError::UnknownPredicate {
                            line: atom.line,
                            col: atom.col,
                            name: atom.name.clone(),
                        }
                    })?;
                    let op = if negated { Op::Ne } else { Op::Eq };
                    match &atom.args[..] {
                        [_] => rule.defaults.push(Literal::new(
                            feature,
                            op,
                            Value::categorical(FLAG_TOKEN),
                        )),
                        [_, Arg::Const(c)] => {
                            let constant = if c == MISSING_TOKEN {
                                Value::Missing
                            } else {
                                Value::categorical(c.clone())
                            };
                            rule.defaults.push(Literal::new(feature, op, constant));
                        }
                        [_, Arg::Var(v)] => {
                            if negated {
                                return Err(semantic(
                                    atom.line,
                                    atom.col,
                                    "a negated atom cannot bind a variable",
                                ));
                            }
                            if let Some(&prev) = bound.get(v) {
                                if prev != feature {
                                    return Err(semantic(
                                        atom.line,
                                        atom.col,
                                        format!("variable `{v}` bound to two features"),
                                    ));
                                }
                            } else {
                                bound.insert(v.clone(), feature);
                                pending.push((v.clone(), atom.line, atom.col));
                            }
                        }
                        _ => {
                            return Err(ProgramError::Arity {
                                line: atom.line,
                                col: atom.col,
                                name: atom.name.clone(),
                                arity: atom.args.len(),
                            })
                        }
                    }
                }
            }
        }
        if let Some((v, line, col)) = pending.into_iter().find(|(v, ..)| !compared.contains(v)) {
            return Err(semantic(
                line,
                col,
                format!("variable `{v}` is bound but never compared"),
            ));
        }
        Ok(rule)
    }
}

/// Parses emitted program text against the given feature columns. Target
/// name and positive class are taken from the clause heads.
pub fn parse_asp(text: &str, features: &[String]) -> Result<Program, ProgramError> {
    let clauses = Parser::new(text)?.clauses()?;

    let mut target: Option<(String, String)> = None;
    for c in &clauses {
        if parse_ab_name(&c.head.name).is_some() {
            if c.head.args.len() != 1 {
                return Err(ProgramError::Arity {
                    line: c.head.line,
                    col: c.head.col,
                    name: c.head.name.clone(),
                    arity: c.head.args.len(),
                });
            }
            continue;
        }
        let hc = head_class(&c.head)?;
        match &target {
            None => target = Some(hc),
            Some(t) if *t == hc => {}
            Some(_) => {
                return Err(semantic(
                    c.head.line,
                    c.head.col,
                    "clauses conclude different target classes",
                ));
            }
        }
    }
    let (target_name, positive_value) = target.unwrap_or_default();
    let schema = Schema {
        feature_names: features.to_vec(),
        target_name,
        positive_value,
    };
    let resolver = Resolver {
        features: feature_predicates(&schema)?
            .into_iter()
            .enumerate()
            .map(|(i, n)| (n, i))
            .collect(),
        schema: &schema,
    };

    let mut program = Program::new(schema.clone());
    for c in &clauses {
        let rule = resolver.rule(c)?;
        match parse_ab_name(&c.head.name) {
            Some(id) => program.define_abnormal(id, rule),
            None => program.push_rule(rule),
        }
    }
    let _ = resolver.schema;
    program.check_stratified()?;
    Ok(program)
}

// ---------------------------------------------------------------------------
// #pred templates

/// An English rendering for one predicate shape, e.g.
/// `#pred age(X,Y) :: 'person @(X) is of age @(Y)'.` or the
/// constant-specific `#pred sex(X,'male') :: 'person @(X) is male'.`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredTemplate {
    pub name: String,
    /// `None` for a variable position, `Some(c)` for a fixed constant.
    pub args: Vec<Option<String>>,
    vars: Vec<String>,
    pub text: String,
}

impl PredTemplate {
    /// Builds a template whose arguments are all variables named `vars`.
    pub fn new(name: &str, vars: &[&str], text: &str) -> Result<PredTemplate, ProgramError> {
        Self::build(
            name.to_string(),
            vars.iter().map(|v| Arg::Var(v.to_string())).collect(),
            text.to_string(),
            (0, 0),
        )
    }

    fn build(
        name: String,
        args: Vec<Arg>,
        text: String,
        at: (usize, usize),
    ) -> Result<PredTemplate, ProgramError> {
        let vars: Vec<String> = args
            .iter()
            .filter_map(|a| match a {
                Arg::Var(v) => Some(v.clone()),
                Arg::Const(_) => None,
            })
            .collect();
        let placeholders = placeholders(&text);
        let mut declared: Vec<&str> = vars.iter().map(String::as_str).collect();
        declared.sort_unstable();
        let mut used: Vec<&str> = placeholders.iter().map(String::as_str).collect();
        used.sort_unstable();
        used.dedup();
        if declared != used || placeholders.len() != vars.len() {
            return Err(semantic(
                at.0,
                at.1,
                format!(
                    "template for `{name}` must use each of its {} variable(s) exactly once",
                    vars.len()
                ),
            ));
        }
        Ok(PredTemplate {
            name,
            args: args
                .into_iter()
                .map(|a| match a {
                    Arg::Var(_) => None,
                    Arg::Const(c) => Some(c),
                })
                .collect(),
            vars,
            text,
        })
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    fn render(&self, bindings: &[&str]) -> String {
        let mut out = self.text.clone();
        let mut k = 0;
        for (i, a) in self.args.iter().enumerate() {
            if a.is_none() {
                out = out.replace(&format!("@({})", self.vars[k]), bindings[i]);
                k += 1;
            }
        }
        out
    }

    fn declaration(&self) -> String {
        let mut k = 0;
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| match a {
                Some(c) => quote(c),
                None => {
                    k += 1;
                    self.vars[k - 1].clone()
                }
            })
            .collect();
        format!(
            "#pred {}({}) :: {}.\n",
            self.name,
            args.join(","),
            quote(&self.text)
        )
    }
}

fn placeholders(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(i) = rest.find("@(") {
        let after = &rest[i + 2..];
        match after.find(')') {
            Some(j) => {
                out.push(after[..j].to_string());
                rest = &after[j + 1..];
            }
            None => break,
        }
    }
    out
}

/// A set of `#pred` templates. Lookups prefer a template whose constants
/// match the atom exactly, then a fully variable template of the same arity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredTemplates {
    list: Vec<PredTemplate>,
}

impl PredTemplates {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: PredTemplate) {
        self.list.push(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &PredTemplate> {
        self.list.iter()
    }

    /// Reads `#pred` lines; anything else in the text is a syntax error.
    pub fn parse(text: &str) -> Result<PredTemplates, ProgramError> {
        let mut p = Parser::new(text)?;
        let mut out = PredTemplates::new();
        while p.peek().is_some() {
            match p.next().map(|s| s.tok) {
                Some(Tok::Directive(d)) if d == "pred" => {}
                _ => {
                    p.pos -= 1;
                    return Err(p.err("expected `#pred`"));
                }
            }
            let atom = p.atom()?;
            p.expect(Tok::DoubleColon, "`::`")?;
            let text = match p.next().map(|s| s.tok) {
                Some(Tok::Quoted(q)) => q,
                _ => {
                    p.pos -= 1;
                    return Err(p.err("expected a quoted template"));
                }
            };
            p.expect(Tok::Dot, "`.`")?;
            out.push(PredTemplate::build(
                atom.name,
                atom.args,
                text,
                (atom.line, atom.col),
            )?);
        }
        Ok(out)
    }

    fn lookup(&self, name: &str, constants: &[Option<&str>]) -> Option<&PredTemplate> {
        let fits = |t: &&PredTemplate, exact: bool| {
            t.name == name
                && t.args.len() == constants.len()
                && t.args.iter().zip(constants).all(|(a, c)| match (a, c) {
                    (None, _) => !exact || c.is_none(),
                    (Some(x), Some(y)) => x == y,
                    (Some(_), None) => false,
                })
        };
        self.list
            .iter()
            .find(|t| fits(t, true))
            .or_else(|| self.list.iter().find(|t| fits(t, false)))
    }

    /// Renders `name(args...)`. `constants[i]` is `Some` where the atom has a
    /// fixed constant and `bindings[i]` is the text substituted for variables.
    fn render(&self, name: &str, constants: &[Option<&str>], bindings: &[&str]) -> Option<String> {
        self.lookup(name, constants).map(|t| t.render(bindings))
    }

    /// Generic templates for every feature, the target class and the given
    /// abnormal ids.
    pub fn defaults(schema: &Schema, ab_ids: impl IntoIterator<Item = AbId>) -> PredTemplates {
        let mut t = PredTemplates::new();
        let target = predicate_name(&schema.target_name);
        let class = &schema.positive_value;
        let head_text = format!("the {} of @(X) is {}", schema.target_name, class);
        if class == FLAG_TOKEN {
            t.list.push(template_unchecked(
                &target,
                vec![None],
                &["X"],
                &format!("@(X) is {}", schema.target_name),
            ));
        } else {
            t.list.push(template_unchecked(
                &target,
                vec![None, Some(class.clone())],
                &["X"],
                &head_text,
            ));
        }
        for f in &schema.feature_names {
            let name = predicate_name(f);
            t.list.push(template_unchecked(
                &name,
                vec![None, None],
                &["X", "Y"],
                &format!("the {f} of @(X) is @(Y)"),
            ));
            t.list.push(template_unchecked(
                &name,
                vec![None],
                &["X"],
                &format!("@(X) is {f}"),
            ));
        }
        for id in ab_ids {
            t.list.push(ab_template(id));
        }
        t
    }

    /// Templates that spell atoms the way the program text does, with the
    /// subject substituted, e.g. `sex(926,male)`.
    pub fn raw(schema: &Schema, ab_ids: impl IntoIterator<Item = AbId>) -> PredTemplates {
        let mut t = PredTemplates::new();
        let target = predicate_name(&schema.target_name);
        let class = &schema.positive_value;
        if class == FLAG_TOKEN {
            t.list.push(template_unchecked(
                &target,
                vec![None],
                &["X"],
                &format!("{target}(@(X))"),
            ));
        } else {
            t.list.push(template_unchecked(
                &target,
                vec![None, Some(class.clone())],
                &["X"],
                &format!("{target}(@(X),{class})"),
            ));
        }
        for f in &schema.feature_names {
            let name = predicate_name(f);
            t.list.push(template_unchecked(
                &name,
                vec![None, None],
                &["X", "Y"],
                &format!("{name}(@(X),@(Y))"),
            ));
            t.list.push(template_unchecked(
                &name,
                vec![None],
                &["X"],
                &format!("{name}(@(X))"),
            ));
        }
        for id in ab_ids {
            let name = ab_name(id);
            t.list.push(template_unchecked(
                &name,
                vec![None],
                &["X"],
                &format!("{name}(@(X))"),
            ));
        }
        t
    }

    /// `self` with defaults appended for anything it does not cover.
    pub fn with_defaults(
        mut self,
        schema: &Schema,
        ab_ids: impl IntoIterator<Item = AbId>,
    ) -> PredTemplates {
        self.list
            .extend(PredTemplates::defaults(schema, ab_ids).list);
        self
    }
}

fn template_unchecked(
    name: &str,
    args: Vec<Option<String>>,
    vars: &[&str],
    text: &str,
) -> PredTemplate {
    PredTemplate {
        name: name.to_string(),
        args,
        vars: vars.iter().map(|v| v.to_string()).collect(),
        text: text.to_string(),
    }
}

fn ab_template(id: AbId) -> PredTemplate {
    template_unchecked(
        &ab_name(id),
        vec![None],
        &["X"],
        &format!("abnormal case {id} holds for @(X)"),
    )
}

/// `#pred` lines: for each feature every template naming it (generic
/// first), then one per abnormal id; target templates are included when
/// `templates` has one.
pub fn emit_pred_decls(
    schema: &Schema,
    ab_ids: impl IntoIterator<Item = AbId>,
    templates: &PredTemplates,
) -> String {
    let mut out = String::new();
    let target = predicate_name(&schema.target_name);
    for t in templates
        .iter()
        .filter(|t| t.name == target && !schema.target_name.is_empty())
    {
        out.push_str(&t.declaration());
    }
    for f in &schema.feature_names {
        let name = predicate_name(f);
        let mut own: Vec<&PredTemplate> = templates.iter().filter(|t| t.name == name).collect();
        own.sort_by_key(|t| t.args.iter().filter(|a| a.is_some()).count());
        match own.first() {
            Some(_) => own.iter().for_each(|t| out.push_str(&t.declaration())),
            None => {
                let _ = writeln!(
                    out,
                    "#pred {name}(X,Y) :: {}.",
                    quote(&format!("the {f} of @(X) is @(Y)"))
                );
            }
        }
    }
    for id in ab_ids {
        let name = ab_name(id);
        let t = templates
            .iter()
            .find(|t| t.name == name && t.arity() == 1)
            .cloned()
            .unwrap_or_else(|| ab_template(id));
        out.push_str(&t.declaration());
    }
    out
}

// ---------------------------------------------------------------------------
// English

/// Turns atoms of a program into sentences using `#pred` templates.
pub struct Phrasing<'a> {
    schema: &'a Schema,
    preds: Vec<String>,
    templates: &'a PredTemplates,
}

impl<'a> Phrasing<'a> {
    pub fn new(schema: &'a Schema, templates: &'a PredTemplates) -> Phrasing<'a> {
        Phrasing {
            schema,
            preds: schema
                .feature_names
                .iter()
                .map(|f| predicate_name(f))
                .collect(),
            templates,
        }
    }

    pub fn head(&self, subject: &str) -> Result<String, ProgramError> {
        let name = predicate_name(&self.schema.target_name);
        let class = self.schema.positive_value.as_str();
        let rendered = if class == FLAG_TOKEN {
            self.templates
                .render(&name, &[None], &[subject])
                .or_else(|| {
                    self.templates
                        .render(&name, &[None, Some(class)], &[subject, class])
                })
        } else {
            self.templates
                .render(&name, &[None, Some(class)], &[subject, class])
        };
        rendered.ok_or_else(|| ProgramError::MissingTemplate(head_atom(self.schema)))
    }

    pub fn abnormal(&self, id: AbId, subject: &str) -> Result<String, ProgramError> {
        let name = ab_name(id);
        Ok(self
            .templates
            .render(&name, &[None], &[subject])
            .unwrap_or_else(|| ab_template(id).render(&[subject])))
    }

    /// Sentence for the atom behind a `=`/`≠` literal (`sex(X,'male')`).
    pub fn token_atom(&self, lit: &Literal, subject: &str) -> Result<String, ProgramError> {
        let name = &self.preds[lit.feature];
        let token = lit.constant.token().unwrap_or_default();
        let flag = if token == FLAG_TOKEN {
            self.templates.render(name, &[None], &[subject])
        } else {
            None
        };
        flag.or_else(|| {
            self.templates
                .render(name, &[None, Some(token)], &[subject, token])
        })
        .ok_or_else(|| ProgramError::MissingTemplate(format!("{name}/2")))
    }

    /// Sentence for the feature atom `feat(X, value)` of a numeric literal.
    pub fn value_atom(
        &self,
        feature: usize,
        subject: &str,
        value: &str,
    ) -> Result<String, ProgramError> {
        let name = &self.preds[feature];
        self.templates
            .render(name, &[None, None], &[subject, value])
            .ok_or_else(|| ProgramError::MissingTemplate(format!("{name}/2")))
    }
}

pub fn comparison_phrase(op: Op, lhs: &str, rhs: f64) -> String {
    let rel = match op {
        Op::Le => "is less or equal",
        Op::Gt => "is greater than",
        Op::Eq => "is",
        Op::Ne => "is not",
    };
    format!("{lhs} {rel} {}", format_number(rhs))
}

fn rule_english(ph: &Phrasing<'_>, head: &str, rule: &Rule) -> Result<String, ProgramError> {
    let numeric: Vec<usize> = {
        let mut seen = Vec::new();
        for l in &rule.defaults {
            if matches!(l.op, Op::Le | Op::Gt) && !seen.contains(&l.feature) {
                seen.push(l.feature);
            }
        }
        seen
    };
    let var_for = |feature: usize| {
        if numeric.len() == 1 {
            "Y".to_string()
        } else {
            format!(
                "Y{}",
                numeric.iter().position(|&f| f == feature).unwrap_or(0) + 1
            )
        }
    };
    let mut lines = Vec::new();
    let mut introduced = BTreeSet::new();
    for lit in &rule.defaults {
        match lit.op {
            Op::Eq => lines.push(ph.token_atom(lit, "X")?),
            Op::Ne => lines.push(format!(
                "there is no evidence that {}",
                ph.token_atom(lit, "X")?
            )),
            Op::Le | Op::Gt => {
                let var = var_for(lit.feature);
                if introduced.insert(lit.feature) {
                    lines.push(ph.value_atom(lit.feature, "X", &var)?);
                }
                lines.push(comparison_phrase(
                    lit.op,
                    &var,
                    lit.constant.as_f64().unwrap_or_default(),
                ));
            }
        }
    }
    for &id in &rule.exceptions {
        lines.push(format!(
            "there is no evidence that {}",
            ph.abnormal(id, "X")?
        ));
    }
    let mut out = String::new();
    if lines.is_empty() {
        let _ = writeln!(out, "{head}.");
        return Ok(out);
    }
    let _ = writeln!(out, "{head}, if");
    let last = lines.len() - 1;
    for (i, l) in lines.iter().enumerate() {
        let _ = writeln!(out, "    {l}{}", if i == last { "." } else { " and" });
    }
    Ok(out)
}

/// English rendering of every clause, numbered in emission order.
pub fn explain_rules_english(
    p: &Program,
    templates: &PredTemplates,
) -> Result<String, ProgramError> {
    p.check_stratified()?;
    let ph = Phrasing::new(p.schema(), templates);
    let mut out = String::new();
    let mut n = 0;
    let mut emit = |head: String, rule: &Rule, out: &mut String| -> Result<(), ProgramError> {
        n += 1;
        let body = rule_english(&ph, &head, rule)?;
        let _ = write!(out, "({n}) {body}");
        Ok(())
    };
    let head = ph.head("X")?;
    for r in p.rules() {
        emit(head.clone(), r, &mut out)?;
    }
    for (&id, clauses) in p.ab_rules() {
        for r in clauses {
            emit(ph.abnormal(id, "X")?, r, &mut out)?;
        }
    }
    Ok(out)
}
