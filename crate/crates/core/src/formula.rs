//! Formulas and linear terms over model labels and numeric symbols.

use std::fmt;

use cgm_smt::CmpOp;
use num_traits::{One, Signed, Zero};

use crate::Q;

/// A numeric symbol: a global attribute or objective id, or an element's attribute value.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NumRef {
    Global(String),
    Element(String, String),
}

impl fmt::Display for NumRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumRef::Global(n) => f.write_str(n),
            NumRef::Element(e, a) => write!(f, "{e}.{a}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Const(Q),
    Var(NumRef),
    Scale(Q, Box<Term>),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Ite(Box<Formula>, Box<Term>, Box<Term>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SugarKind {
    Alt,
    Causes,
    Requires,
    AtMostOneOf,
    AtLeastOneOf,
    OneOf,
}

impl SugarKind {
    pub const ALL: [SugarKind; 6] = [
        SugarKind::Alt,
        SugarKind::Causes,
        SugarKind::Requires,
        SugarKind::AtMostOneOf,
        SugarKind::AtLeastOneOf,
        SugarKind::OneOf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SugarKind::Alt => "Alt",
            SugarKind::Causes => "Causes",
            SugarKind::Requires => "Requires",
            SugarKind::AtMostOneOf => "AtMostOneOf",
            SugarKind::AtLeastOneOf => "AtLeastOneOf",
            SugarKind::OneOf => "OneOf",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Accepted argument counts as (min, max).
    pub fn arity(self) -> (usize, Option<usize>) {
        match self {
            SugarKind::Alt | SugarKind::Causes | SugarKind::Requires => (2, Some(2)),
            _ => (1, None),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    Const(bool),
    Prop(String),
    Cmp(Term, CmpOp, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Sugar(SugarKind, Vec<String>),
}

impl Term {
    pub fn constant(q: Q) -> Self {
        Term::Const(q)
    }

    pub fn global(name: &str) -> Self {
        Term::Var(NumRef::Global(name.to_string()))
    }

    pub fn plus(a: Term, b: Term) -> Self {
        Term::Add(Box::new(a), Box::new(b))
    }

    pub fn minus(a: Term, b: Term) -> Self {
        Term::Sub(Box::new(a), Box::new(b))
    }

    /// Copy with every label and attribute name mapped through `f`.
    pub fn renamed(&self, f: &impl Fn(&str) -> String) -> Term {
        match self {
            Term::Const(q) => Term::Const(q.clone()),
            Term::Var(NumRef::Global(n)) => Term::Var(NumRef::Global(f(n))),
            Term::Var(NumRef::Element(e, a)) => Term::Var(NumRef::Element(f(e), f(a))),
            Term::Scale(k, t) => Term::Scale(k.clone(), Box::new(t.renamed(f))),
            Term::Add(a, b) => Term::Add(Box::new(a.renamed(f)), Box::new(b.renamed(f))),
            Term::Sub(a, b) => Term::Sub(Box::new(a.renamed(f)), Box::new(b.renamed(f))),
            Term::Ite(c, a, b) => Term::Ite(Box::new(c.renamed(f)), Box::new(a.renamed(f)), Box::new(b.renamed(f))),
        }
    }

    pub fn for_each_ref(&self, f: &mut impl FnMut(&NumRef)) {
        match self {
            Term::Const(_) => {}
            Term::Var(r) => f(r),
            Term::Scale(_, t) => t.for_each_ref(f),
            Term::Add(a, b) | Term::Sub(a, b) => {
                a.for_each_ref(f);
                b.for_each_ref(f);
            }
            Term::Ite(c, a, b) => {
                c.for_each_ref(f);
                a.for_each_ref(f);
                b.for_each_ref(f);
            }
        }
    }

    pub fn for_each_prop(&self, f: &mut impl FnMut(&str)) {
        match self {
            Term::Const(_) | Term::Var(_) => {}
            Term::Scale(_, t) => t.for_each_prop(f),
            Term::Add(a, b) | Term::Sub(a, b) => {
                a.for_each_prop(f);
                b.for_each_prop(f);
            }
            Term::Ite(c, a, b) => {
                c.for_each_prop(f);
                a.for_each_prop(f);
                b.for_each_prop(f);
            }
        }
    }

    pub fn eval<E: Env>(&self, env: &E) -> Option<Q> {
        Some(match self {
            Term::Const(q) => q.clone(),
            Term::Var(r) => env.num(r)?,
            Term::Scale(k, t) => k * t.eval(env)?,
            Term::Add(a, b) => a.eval(env)? + b.eval(env)?,
            Term::Sub(a, b) => a.eval(env)? - b.eval(env)?,
            Term::Ite(c, a, b) => {
                if c.eval(env)? {
                    a.eval(env)?
                } else {
                    b.eval(env)?
                }
            }
        })
    }
}

impl Formula {
    pub fn prop(name: &str) -> Self {
        Formula::Prop(name.to_string())
    }

    pub fn negate(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Self {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    /// Every label mentioned as a proposition (including sugar arguments).
    /// Copy with every label and attribute name mapped through `f`.
    pub fn renamed(&self, f: &impl Fn(&str) -> String) -> Formula {
        match self {
            Formula::Const(b) => Formula::Const(*b),
            Formula::Prop(p) => Formula::Prop(f(p)),
            Formula::Cmp(a, op, b) => Formula::Cmp(a.renamed(f), *op, b.renamed(f)),
            Formula::Not(x) => Formula::Not(Box::new(x.renamed(f))),
            Formula::And(xs) => Formula::And(xs.iter().map(|x| x.renamed(f)).collect()),
            Formula::Or(xs) => Formula::Or(xs.iter().map(|x| x.renamed(f)).collect()),
            Formula::Implies(a, b) => Formula::Implies(Box::new(a.renamed(f)), Box::new(b.renamed(f))),
            Formula::Iff(a, b) => Formula::Iff(Box::new(a.renamed(f)), Box::new(b.renamed(f))),
            Formula::Sugar(k, args) => Formula::Sugar(*k, args.iter().map(|a| f(a)).collect()),
        }
    }

    pub fn for_each_prop(&self, f: &mut impl FnMut(&str)) {
        match self {
            Formula::Const(_) => {}
            Formula::Prop(p) => f(p),
            Formula::Cmp(a, _, b) => {
                a.for_each_prop(f);
                b.for_each_prop(f);
            }
            Formula::Not(x) => x.for_each_prop(f),
            Formula::And(xs) | Formula::Or(xs) => xs.iter().for_each(|x| x.for_each_prop(f)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.for_each_prop(f);
                b.for_each_prop(f);
            }
            Formula::Sugar(_, args) => args.iter().for_each(|a| f(a)),
        }
    }

    pub fn for_each_ref(&self, f: &mut impl FnMut(&NumRef)) {
        match self {
            Formula::Const(_) | Formula::Prop(_) | Formula::Sugar(..) => {}
            Formula::Cmp(a, _, b) => {
                a.for_each_ref(f);
                b.for_each_ref(f);
            }
            Formula::Not(x) => x.for_each_ref(f),
            Formula::And(xs) | Formula::Or(xs) => xs.iter().for_each(|x| x.for_each_ref(f)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.for_each_ref(f);
                b.for_each_ref(f);
            }
        }
    }

    /// Sugar applications expanded into core connectives.
    pub fn desugar(kind: SugarKind, args: &[String]) -> Formula {
        let p = |i: usize| Formula::Prop(args[i].clone());
        let at_most = || {
            let mut cs = Vec::new();
            for i in 0..args.len() {
                for j in i + 1..args.len() {
                    cs.push(Formula::Or(vec![Formula::negate(p(i)), Formula::negate(p(j))]));
                }
            }
            cs
        };
        match kind {
            SugarKind::Alt => Formula::iff(p(0), Formula::negate(p(1))),
            SugarKind::Causes | SugarKind::Requires => Formula::implies(p(0), p(1)),
            SugarKind::AtMostOneOf => Formula::And(at_most()),
            SugarKind::AtLeastOneOf => Formula::Or((0..args.len()).map(p).collect()),
            SugarKind::OneOf => {
                let mut cs = vec![Formula::Or((0..args.len()).map(p).collect())];
                cs.extend(at_most());
                Formula::And(cs)
            }
        }
    }

    pub fn eval<E: Env>(&self, env: &E) -> Option<bool> {
        Some(match self {
            Formula::Const(b) => *b,
            Formula::Prop(p) => env.prop(p)?,
            Formula::Cmp(a, op, b) => op.holds(&a.eval(env)?, &b.eval(env)?),
            Formula::Not(x) => !x.eval(env)?,
            Formula::And(xs) => {
                let mut all = true;
                for x in xs {
                    all &= x.eval(env)?;
                }
                all
            }
            Formula::Or(xs) => {
                let mut any = false;
                for x in xs {
                    any |= x.eval(env)?;
                }
                any
            }
            Formula::Implies(a, b) => !a.eval(env)? || b.eval(env)?,
            Formula::Iff(a, b) => a.eval(env)? == b.eval(env)?,
            Formula::Sugar(k, args) => Formula::desugar(*k, args).eval(env)?,
        })
    }
}

/// Values for propositions and numeric symbols during evaluation.
pub trait Env {
    fn prop(&self, label: &str) -> Option<bool>;
    fn num(&self, r: &NumRef) -> Option<Q>;
}

/// Rational literal in the modelling language (`80`, `-3/2`).
pub fn fmt_q(q: &Q) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(q) => f.write_str(&fmt_q(q)),
            Term::Var(r) => write!(f, "{r}"),
            Term::Scale(k, t) => {
                let inner = match t.as_ref() {
                    Term::Var(_) | Term::Ite(..) => format!("{t}"),
                    _ => format!("({t})"),
                };
                write!(f, "{}*{inner}", fmt_q(k))
            }
            Term::Add(a, b) | Term::Sub(a, b) => {
                let op = if matches!(self, Term::Add(..)) { "+" } else { "-" };
                let rhs = match b.as_ref() {
                    Term::Add(..) | Term::Sub(..) => format!("({b})"),
                    Term::Const(q) if q.is_negative() => format!("({b})"),
                    Term::Scale(k, _) if k.is_negative() => format!("({b})"),
                    _ => format!("{b}"),
                };
                write!(f, "{a} {op} {rhs}")
            }
            Term::Ite(c, a, b) => write!(f, "ite({c}, {a}, {b})"),
        }
    }
}

fn prec(f: &Formula) -> u8 {
    match f {
        Formula::Iff(..) => 1,
        Formula::Implies(..) => 2,
        Formula::Or(_) => 3,
        Formula::And(_) => 4,
        Formula::Not(_) => 5,
        _ => 6,
    }
}

fn wrap(f: &Formula, min: u8) -> String {
    if prec(f) < min {
        format!("({f})")
    } else {
        format!("{f}")
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Const(b) => write!(f, "{b}"),
            Formula::Prop(p) => f.write_str(p),
            Formula::Cmp(a, op, b) => write!(f, "{a} {} {b}", op.symbol()),
            Formula::Not(x) => write!(f, "!{}", wrap(x, 6)),
            Formula::And(xs) | Formula::Or(xs) => {
                let (sep, p) = if matches!(self, Formula::And(_)) { (" & ", 4) } else { (" | ", 3) };
                if xs.is_empty() {
                    // Empty n-ary connectives print as a neutral parenthesized constant.
                    return write!(f, "{}", matches!(self, Formula::And(_)));
                }
                if xs.len() == 1 {
                    return write!(f, "{}", wrap(&xs[0], 7));
                }
                let parts: Vec<String> = xs.iter().map(|x| wrap(x, p + 1)).collect();
                f.write_str(&parts.join(sep))
            }
            Formula::Implies(a, b) => write!(f, "{} -> {}", wrap(a, 3), wrap(b, 2)),
            Formula::Iff(a, b) => write!(f, "{} <-> {}", wrap(a, 1), wrap(b, 2)),
            Formula::Sugar(k, args) => write!(f, "{}({})", k.name(), args.join(", ")),
        }
    }
}

/// Zero check shared by attribute handling.
pub fn is_zero(q: &Q) -> bool {
    q.is_zero()
}
