//! Text format for models: lexer, recursive-descent parser with statement-level
//! error recovery, and the canonical printer.

use std::fmt;
use std::str::FromStr;

use cgm_smt::{CmpOp, Direction};
use num_traits::{One, Zero};
use thiserror::Error;

use crate::formula::{fmt_q, Formula, NumRef, SugarKind, Term};
use crate::model::{
    build_model, Cgm, Decl, DeclKind, ElementKind, ObjectiveBody, Predefined, Preference, RelationEdge, SourceSpan,
    ValidationReport,
};
use crate::Q;

pub const FORMAT: &str = "cgm/1";

/// Words that cannot be used as labels.
pub const KEYWORDS: &[&str] = &[
    "format",
    "goal",
    "assumption",
    "refine",
    "contrib",
    "conflict",
    "bind",
    "prefer",
    "attr",
    "set",
    "formula",
    "assert",
    "objective",
    "sugar",
    "true",
    "false",
    "ite",
    "sat",
    "deny",
    "reward",
    "penalty",
    "prereq",
    "min",
    "max",
];

pub fn is_reserved(word: &str) -> bool {
    KEYWORDS.contains(&word) || SugarKind::from_name(word).is_some()
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{span}: expected {expected}, found {found}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub expected: String,
    pub found: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("{} parse error(s); first: {}", .0.len(), .0[0])]
    Parse(Vec<ParseError>),
    #[error(transparent)]
    Invalid(#[from] ValidationReport),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(String),
    Str(String),
    Sym(&'static str),
    Bad(String),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Num(s) => write!(f, "`{s}`"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Bad(s) => write!(f, "invalid input `{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

// Longest symbols first so that matching is maximal munch.
const SYMBOLS: &[&str] = &[
    "<->", "<-", "<=", "->", "--", ">=", "<", ">", "=", "-", "+", "*", "/", "!", "&", "|", "~", "(", ")", ",", ";",
    ":", ".",
];

fn lex(text: &str) -> Vec<(Tok, SourceSpan)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let advance = |i: &mut usize, line: &mut u32, col: &mut u32, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        let (sl, sc) = (line, col);
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            Tok::Ident(chars[i..j].iter().collect())
        } else if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            Tok::Num(chars[i..j].iter().collect())
        } else if c == '"' {
            let mut j = i + 1;
            let mut s = String::new();
            let mut closed = false;
            while j < chars.len() && chars[j] != '\n' {
                match chars[j] {
                    '"' => {
                        closed = true;
                        j += 1;
                        break;
                    }
                    '\\' if j + 1 < chars.len() => {
                        s.push(chars[j + 1]);
                        j += 2;
                    }
                    ch => {
                        s.push(ch);
                        j += 1;
                    }
                }
            }
            if closed {
                Tok::Str(s)
            } else {
                Tok::Bad(chars[i..j].iter().collect())
            }
        } else {
            let rest: String = chars[i..(i + 3).min(chars.len())].iter().collect();
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(s) => Tok::Sym(s),
                None => Tok::Bad(c.to_string()),
            }
        };
        let len = match &tok {
            Tok::Ident(s) | Tok::Num(s) => s.chars().count(),
            Tok::Sym(s) => s.len(),
            Tok::Bad(s) => s.chars().count().max(1),
            Tok::Str(_) => {
                let mut j = i + 1;
                while chars[j] != '"' {
                    j += if chars[j] == '\\' { 2 } else { 1 };
                }
                j + 1 - i
            }
            Tok::Eof => 0,
        };
        advance(&mut i, &mut line, &mut col, len);
        debug_assert!(i > start);
        out.push((tok, SourceSpan { line: sl, col: sc, end_line: line, end_col: col }));
    }
    out.push((Tok::Eof, SourceSpan { line, col, end_line: line, end_col: col }));
    out
}

type PResult<T> = Result<T, ParseError>;

struct Parser {
    toks: Vec<(Tok, SourceSpan)>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Self {
        Self { toks: lex(text), pos: 0 }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].0
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, SourceSpan) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: impl Into<String>) -> PResult<T> {
        Err(ParseError { span: self.span(), expected: expected.into(), found: self.peek().to_string() })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("`{s}`"))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.is_kw(k) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("`{k}`"))
        }
    }

    fn label(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Tok::Ident(s) if !is_reserved(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.error(what),
        }
    }

    fn rational(&mut self) -> PResult<Q> {
        let neg = self.eat_sym("-");
        let Tok::Num(n) = self.peek().clone() else {
            return self.error("number");
        };
        self.bump();
        let mut q = parse_decimal(&n);
        if self.eat_sym("/") {
            let Tok::Num(d) = self.peek().clone() else {
                return self.error("denominator");
            };
            let d = parse_decimal(&d);
            if d.is_zero() {
                return self.error("non-zero denominator");
            }
            self.bump();
            q /= d;
        }
        Ok(if neg { -q } else { q })
    }

    fn skip_statement(&mut self) {
        while !matches!(self.peek(), Tok::Eof) {
            if let (Tok::Sym(";"), _) = self.bump() {
                return;
            }
        }
    }

    fn statements(&mut self) -> (Vec<Decl>, Vec<ParseError>) {
        let (mut decls, mut errors) = (Vec::new(), Vec::new());
        while !matches!(self.peek(), Tok::Eof) {
            let start = self.span();
            match self.statement() {
                Ok(Some(kind)) => {
                    let end = self.toks[self.pos.saturating_sub(1)].1;
                    let span =
                        SourceSpan { line: start.line, col: start.col, end_line: end.end_line, end_col: end.end_col };
                    decls.push(Decl { kind, span: Some(span) });
                }
                Ok(None) => {}
                Err(e) => {
                    errors.push(e);
                    self.skip_statement();
                }
            }
        }
        (decls, errors)
    }

    fn statement(&mut self) -> PResult<Option<DeclKind>> {
        let Tok::Ident(kw) = self.peek().clone() else {
            return self.error("statement keyword");
        };
        self.bump();
        let kind = match kw.as_str() {
            "format" => {
                match self.bump().0 {
                    Tok::Str(s) if s == FORMAT => {}
                    _ => {
                        self.pos -= 1;
                        return self.error(format!("\"{FORMAT}\""));
                    }
                }
                self.expect_sym(";")?;
                return Ok(None);
            }
            "goal" => self.element(ElementKind::Goal)?,
            "assumption" => self.element(ElementKind::Assumption)?,
            "refine" => self.refine()?,
            "contrib" => {
                let a = self.label("element label")?;
                let mutual = if self.eat_sym("<->") {
                    true
                } else {
                    self.expect_sym("->")?;
                    false
                };
                let b = self.label("element label")?;
                DeclKind::Edge(if mutual {
                    RelationEdge::Mutual { a, b }
                } else {
                    RelationEdge::Contribution { src: a, dst: b }
                })
            }
            "conflict" => {
                let a = self.label("element label")?;
                self.expect_sym("--")?;
                let b = self.label("element label")?;
                DeclKind::Edge(RelationEdge::Conflict { a, b })
            }
            "bind" => {
                let r1 = self.label("refinement label")?;
                self.expect_sym("~")?;
                let r2 = self.label("refinement label")?;
                DeclKind::Edge(RelationEdge::Binding { r1, r2 })
            }
            "prefer" => {
                let preferred = self.label("label")?;
                self.expect_sym(">")?;
                let over = self.label("label")?;
                DeclKind::Prefer(Preference { preferred, over })
            }
            "attr" => {
                let label = self.label("attribute name")?;
                let def = if self.eat_sym("=") { Some(self.term()?) } else { None };
                DeclKind::Attr { label, def }
            }
            "set" => {
                let element = self.label("element label")?;
                self.expect_sym(".")?;
                let attr = self.label("attribute name")?;
                self.expect_kw("sat")?;
                let sat = self.rational()?;
                let deny = if self.is_kw("deny") {
                    self.bump();
                    Some(self.rational()?)
                } else {
                    None
                };
                DeclKind::Set { element, attr, sat, deny }
            }
            "formula" => DeclKind::Formula(self.formula()?),
            "sugar" => {
                let Tok::Ident(name) = self.peek().clone() else {
                    return self.error("sugar name");
                };
                let Some(k) = SugarKind::from_name(&name) else {
                    return self.error("sugar name (Alt, Causes, Requires, AtMostOneOf, AtLeastOneOf, OneOf)");
                };
                self.bump();
                DeclKind::Formula(Formula::Sugar(k, self.label_list()?))
            }
            "assert" => {
                let label = self.label("element label")?;
                let value = if self.is_kw("true") {
                    true
                } else if self.is_kw("false") {
                    false
                } else {
                    return self.error("`true` or `false`");
                };
                self.bump();
                DeclKind::Assert { label, value }
            }
            "objective" => self.objective()?,
            _ => {
                self.pos -= 1;
                return self.error("statement keyword");
            }
        };
        self.expect_sym(";")?;
        Ok(Some(kind))
    }

    fn prereq(&mut self, pos: &mut Option<Formula>, neg: &mut Option<Formula>) -> PResult<bool> {
        if !self.is_kw("prereq") {
            return Ok(false);
        }
        self.bump();
        let slot = if self.eat_sym("+") {
            pos
        } else if self.eat_sym("-") {
            neg
        } else {
            return self.error("`+` or `-`");
        };
        *slot = Some(self.formula()?);
        Ok(true)
    }

    fn element(&mut self, kind: ElementKind) -> PResult<DeclKind> {
        let label = self.label("element label")?;
        let display_name = match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Some(s)
            }
            _ => None,
        };
        let (mut reward, mut penalty, mut prereq_pos, mut prereq_neg) = (None, None, None, None);
        loop {
            if self.is_kw("reward") {
                self.bump();
                reward = Some(self.rational()?);
            } else if self.is_kw("penalty") {
                self.bump();
                penalty = Some(self.rational()?);
            } else if !self.prereq(&mut prereq_pos, &mut prereq_neg)? {
                break;
            }
        }
        Ok(DeclKind::Element { kind, label, display_name, reward, penalty, prereq_pos, prereq_neg })
    }

    fn refine(&mut self) -> PResult<DeclKind> {
        let label = if matches!(self.peek_at(1), Tok::Sym(":")) {
            let l = self.label("refinement label")?;
            self.bump();
            Some(l)
        } else {
            None
        };
        let target = self.label("target element")?;
        self.expect_sym("<-")?;
        let mut sources = vec![self.label("source element")?];
        while self.eat_sym(",") {
            sources.push(self.label("source element")?);
        }
        let (mut prereq_pos, mut prereq_neg) = (None, None);
        while self.prereq(&mut prereq_pos, &mut prereq_neg)? {}
        Ok(DeclKind::Refine { label, target, sources, prereq_pos, prereq_neg })
    }

    fn direction(&mut self) -> PResult<Direction> {
        let d = if self.is_kw("min") {
            Direction::Minimize
        } else if self.is_kw("max") {
            Direction::Maximize
        } else {
            return self.error("`min` or `max`");
        };
        self.bump();
        Ok(d)
    }

    fn objective(&mut self) -> PResult<DeclKind> {
        let label = if self.is_kw("min") || self.is_kw("max") { None } else { Some(self.label("objective name")?) };
        let direction = self.direction()?;
        let body = if label.is_some() && self.is_sym("(") {
            ObjectiveBody::Term(self.term()?)
        } else {
            match self.peek() {
                Tok::Ident(s) if Predefined::from_name(s).is_some() => {
                    let p = Predefined::from_name(s).expect("checked");
                    self.bump();
                    ObjectiveBody::Predefined(p)
                }
                _ => return self.error("predefined objective (weight, numUnsatPrefs, numUnsatRequirements, numSatTasks)"),
            }
        };
        Ok(DeclKind::Objective { label, direction, body })
    }

    fn label_list(&mut self) -> PResult<Vec<String>> {
        self.expect_sym("(")?;
        let mut args = vec![self.label("label")?];
        while self.eat_sym(",") {
            args.push(self.label("label")?);
        }
        self.expect_sym(")")?;
        Ok(args)
    }

    fn formula(&mut self) -> PResult<Formula> {
        let mut a = self.implication()?;
        while self.eat_sym("<->") {
            let b = self.implication()?;
            a = Formula::iff(a, b);
        }
        Ok(a)
    }

    fn implication(&mut self) -> PResult<Formula> {
        let a = self.disjunction()?;
        if self.eat_sym("->") {
            let b = self.implication()?;
            return Ok(Formula::implies(a, b));
        }
        Ok(a)
    }

    fn disjunction(&mut self) -> PResult<Formula> {
        let mut xs = vec![self.conjunction()?];
        while self.eat_sym("|") {
            xs.push(self.conjunction()?);
        }
        Ok(if xs.len() == 1 { xs.pop().expect("one") } else { Formula::Or(xs) })
    }

    fn conjunction(&mut self) -> PResult<Formula> {
        let mut xs = vec![self.unary()?];
        while self.eat_sym("&") {
            xs.push(self.unary()?);
        }
        Ok(if xs.len() == 1 { xs.pop().expect("one") } else { Formula::And(xs) })
    }

    fn unary(&mut self) -> PResult<Formula> {
        if self.eat_sym("!") {
            return Ok(Formula::negate(self.unary()?));
        }
        self.atom()
    }

    fn cmp_op(&self) -> Option<CmpOp> {
        match self.peek() {
            Tok::Sym("<") => Some(CmpOp::Lt),
            Tok::Sym("<=") => Some(CmpOp::Le),
            Tok::Sym("=") => Some(CmpOp::Eq),
            Tok::Sym(">=") => Some(CmpOp::Ge),
            Tok::Sym(">") => Some(CmpOp::Gt),
            _ => None,
        }
    }

    fn atom(&mut self) -> PResult<Formula> {
        if self.is_kw("true") || self.is_kw("false") {
            let b = self.is_kw("true");
            self.bump();
            return Ok(Formula::Const(b));
        }
        if let Tok::Ident(name) = self.peek() {
            if let Some(k) = SugarKind::from_name(name) {
                self.bump();
                return Ok(Formula::Sugar(k, self.label_list()?));
            }
        }
        let save = self.pos;
        if let Ok(lhs) = self.term() {
            if let Some(op) = self.cmp_op() {
                self.bump();
                let rhs = self.term()?;
                if self.cmp_op().is_some() {
                    return self.error("end of comparison (comparison chains are not allowed)");
                }
                return Ok(Formula::Cmp(lhs, op, rhs));
            }
        }
        self.pos = save;
        if self.eat_sym("(") {
            let f = self.formula()?;
            self.expect_sym(")")?;
            return Ok(f);
        }
        match self.peek() {
            Tok::Ident(s) if !is_reserved(s) => {
                let s = s.clone();
                self.bump();
                Ok(Formula::Prop(s))
            }
            _ => self.error("formula"),
        }
    }

    fn term(&mut self) -> PResult<Term> {
        let mut a = self.factor()?;
        loop {
            if self.eat_sym("+") {
                a = Term::plus(a, self.factor()?);
            } else if self.eat_sym("-") {
                a = Term::minus(a, self.factor()?);
            } else {
                return Ok(a);
            }
        }
    }

    fn factor(&mut self) -> PResult<Term> {
        let numeric = matches!(self.peek(), Tok::Num(_))
            || (self.is_sym("-") && matches!(self.peek_at(1), Tok::Num(_)));
        if numeric {
            let q = self.rational()?;
            if self.eat_sym("*") {
                return Ok(Term::Scale(q, Box::new(self.factor()?)));
            }
            return Ok(Term::Const(q));
        }
        if self.eat_sym("-") {
            return Ok(Term::Scale(-Q::one(), Box::new(self.factor()?)));
        }
        if self.eat_sym("(") {
            let t = self.term()?;
            self.expect_sym(")")?;
            return Ok(t);
        }
        if self.is_kw("ite") {
            self.bump();
            self.expect_sym("(")?;
            let c = self.formula()?;
            self.expect_sym(",")?;
            let a = self.term()?;
            self.expect_sym(",")?;
            let b = self.term()?;
            self.expect_sym(")")?;
            return Ok(Term::Ite(Box::new(c), Box::new(a), Box::new(b)));
        }
        let name = self.label("term")?;
        if self.eat_sym(".") {
            let attr = self.label("attribute name")?;
            return Ok(Term::Var(NumRef::Element(name, attr)));
        }
        Ok(Term::Var(NumRef::Global(name)))
    }
}

fn parse_decimal(s: &str) -> Q {
    match s.split_once('.') {
        None => Q::from_str(s).expect("lexer yields digits"),
        Some((int, frac)) => {
            let num = Q::from_str(&format!("{int}{frac}")).expect("digits");
            let den = Q::from_str(&format!("1{}", "0".repeat(frac.len()))).expect("digits");
            num / den
        }
    }
}

/// Parses a model description into declarations, reporting all errors.
pub fn parse(text: &str) -> Result<Vec<Decl>, Vec<ParseError>> {
    let mut p = Parser::new(text);
    let (decls, errors) = p.statements();
    if errors.is_empty() {
        Ok(decls)
    } else {
        Err(errors)
    }
}

fn parse_whole<T>(text: &str, f: impl FnOnce(&mut Parser) -> PResult<T>) -> Result<T, ParseError> {
    let mut p = Parser::new(text);
    let v = f(&mut p)?;
    if !matches!(p.peek(), Tok::Eof) {
        return p.error("end of input");
    }
    Ok(v)
}

pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    parse_whole(text, |p| p.formula())
}

pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    parse_whole(text, |p| p.term())
}

/// Parses and validates a model.
pub fn load(text: &str) -> Result<Cgm, LoadError> {
    let decls = parse(text).map_err(LoadError::Parse)?;
    Ok(build_model(&decls)?)
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn print_decl(out: &mut String, d: &DeclKind) {
    let prereqs = |pos: &Option<Formula>, neg: &Option<Formula>| {
        let mut s = String::new();
        if let Some(f) = pos {
            s.push_str(&format!(" prereq+ ({f})"));
        }
        if let Some(f) = neg {
            s.push_str(&format!(" prereq- ({f})"));
        }
        s
    };
    let line = match d {
        DeclKind::Element { kind, label, display_name, reward, penalty, prereq_pos, prereq_neg } => {
            let mut s = format!("{} {label}", if *kind == ElementKind::Goal { "goal" } else { "assumption" });
            if let Some(n) = display_name {
                s.push_str(&format!(" {}", quote(n)));
            }
            if let Some(q) = reward {
                s.push_str(&format!(" reward {}", fmt_q(q)));
            }
            if let Some(q) = penalty {
                s.push_str(&format!(" penalty {}", fmt_q(q)));
            }
            s + &prereqs(prereq_pos, prereq_neg)
        }
        DeclKind::Refine { label, target, sources, prereq_pos, prereq_neg } => {
            let l = label.as_ref().map(|l| format!("{l}: ")).unwrap_or_default();
            format!("refine {l}{target} <- {}{}", sources.join(", "), prereqs(prereq_pos, prereq_neg))
        }
        DeclKind::Edge(RelationEdge::Contribution { src, dst }) => format!("contrib {src} -> {dst}"),
        DeclKind::Edge(RelationEdge::Mutual { a, b }) => format!("contrib {a} <-> {b}"),
        DeclKind::Edge(RelationEdge::Conflict { a, b }) => format!("conflict {a} -- {b}"),
        DeclKind::Edge(RelationEdge::Binding { r1, r2 }) => format!("bind {r1} ~ {r2}"),
        DeclKind::Prefer(p) => format!("prefer {} > {}", p.preferred, p.over),
        DeclKind::Attr { label, def: None } => format!("attr {label}"),
        DeclKind::Attr { label, def: Some(t) } => format!("attr {label} = ({t})"),
        DeclKind::Set { element, attr, sat, deny } => {
            let d = deny.as_ref().map(|q| format!(" deny {}", fmt_q(q))).unwrap_or_default();
            format!("set {element}.{attr} sat {}{d}", fmt_q(sat))
        }
        DeclKind::Formula(Formula::Sugar(k, args)) => format!("sugar {}({})", k.name(), args.join(", ")),
        DeclKind::Formula(f) => format!("formula ({f})"),
        DeclKind::Assert { label, value } => format!("assert {label} {value}"),
        DeclKind::Objective { label, direction, body } => {
            let dir = if *direction == Direction::Minimize { "min" } else { "max" };
            let name = label.as_ref().map(|l| format!(" {l}")).unwrap_or_default();
            match body {
                ObjectiveBody::Term(t) => format!("objective{name} {dir} ({t})"),
                ObjectiveBody::Predefined(p) => format!("objective{name} {dir} {}", p.name()),
            }
        }
    };
    out.push_str(&line);
    out.push_str(";\n");
}

fn section(d: &DeclKind) -> u8 {
    match d {
        DeclKind::Attr { .. } => 0,
        DeclKind::Element { .. } | DeclKind::Set { .. } => 1,
        DeclKind::Refine { .. } => 2,
        DeclKind::Edge(_) | DeclKind::Prefer(_) => 3,
        DeclKind::Formula(_) => 4,
        DeclKind::Assert { .. } => 5,
        DeclKind::Objective { .. } => 6,
    }
}

/// Canonical text of a model.
pub fn print(m: &Cgm) -> String {
    let mut out = format!("format \"{FORMAT}\";\n");
    let mut last = None;
    for d in m.to_decls() {
        let s = section(&d.kind);
        if last != Some(s) {
            out.push('\n');
            last = Some(s);
        }
        print_decl(&mut out, &d.kind);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_has_no_declarations() {
        assert_eq!(parse("").unwrap(), vec![]);
        assert_eq!(parse("  # only a comment\n").unwrap(), vec![]);
    }

    #[test]
    fn prerequisite_with_strict_comparison() {
        let d = parse("goal LowCost prereq+ (cost < 100);").unwrap();
        let DeclKind::Element { prereq_pos: Some(f), .. } = &d[0].kind else { panic!("{d:?}") };
        assert_eq!(
            *f,
            Formula::Cmp(Term::global("cost"), CmpOp::Lt, Term::Const(Q::from_integer(100.into())))
        );
    }

    #[test]
    fn refinement_with_five_sources() {
        let d = parse(
            "refine R1: ScheduleMeeting <- CharacteriseMeeting, CollectTimetables, FindASuitableRoom, ChooseSchedule, ManageMeeting;",
        )
        .unwrap();
        let DeclKind::Refine { label, sources, .. } = &d[0].kind else { panic!() };
        assert_eq!(label.as_deref(), Some("R1"));
        assert_eq!(sources.len(), 5);
    }

    #[test]
    fn errors_are_collected_per_statement() {
        let errs = parse("goal ;\ngoal B;\nrefine X <- ;\nfoo;").unwrap_err();
        assert_eq!(errs.len(), 3);
        assert_eq!(errs[0].span.line, 1);
        assert_eq!(errs[1].span.line, 3);
        assert_eq!(errs[2].to_string(), "4:1: expected statement keyword, found `foo`");
    }

    #[test]
    fn operator_precedence_and_associativity() {
        let f = parse_formula("!a & b | c -> d -> e <-> f").unwrap();
        let expect = Formula::iff(
            Formula::implies(
                Formula::Or(vec![
                    Formula::And(vec![Formula::negate(Formula::prop("a")), Formula::prop("b")]),
                    Formula::prop("c"),
                ]),
                Formula::implies(Formula::prop("d"), Formula::prop("e")),
            ),
            Formula::prop("f"),
        );
        assert_eq!(f, expect);
    }

    #[test]
    fn comparison_chains_are_rejected() {
        assert!(parse_formula("a < b < c").is_err());
    }

    #[test]
    fn term_forms_reparse() {
        for src in ["2*x - (-3)", "-1/2*(a + b) + ite(p & q, X.cost, 0)", "a - (b - c)", "3*(2*x)", "x + (-2*y)"] {
            let t = parse_term(src).unwrap();
            assert_eq!(parse_term(&t.to_string()).unwrap(), t, "{src} printed as {t}");
        }
    }

    #[test]
    fn decimals_are_exact() {
        let t = parse_term("0.25").unwrap();
        assert_eq!(t, Term::Const(Q::new(1.into(), 4.into())));
    }

    #[test]
    fn garbage_never_panics() {
        for s in ["\"unterminated", "@@@", "goal A prereq+ (", "refine : <-", "set a.b sat 1/0;", "objective x max"] {
            assert!(parse(s).is_err(), "{s}");
        }
    }
}
