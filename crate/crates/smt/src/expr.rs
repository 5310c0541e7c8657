//! Input language of the engine: Boolean structure over propositional variables and linear
//! comparisons over rational variables.

use std::collections::BTreeMap;
use std::fmt;

use crate::scalar::Scalar;

/// Propositional variable of a [`Problem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BoolVar(pub u32);

/// Rational variable of a [`Problem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RealVar(pub u32);

impl fmt::Display for BoolVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

impl fmt::Display for RealVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// `Σ cᵢ·xᵢ + k`, terms sorted by variable with no zero coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LinExpr<S> {
    terms: Vec<(RealVar, S)>,
    constant: S,
}

impl<S: Scalar> LinExpr<S> {
    pub fn constant(k: S) -> Self {
        Self { terms: Vec::new(), constant: k }
    }

    pub fn zero() -> Self {
        Self::constant(S::zero())
    }

    pub fn var(v: RealVar) -> Self {
        Self { terms: vec![(v, S::one())], constant: S::zero() }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (RealVar, S)>, constant: S) -> Self {
        let mut acc: BTreeMap<RealVar, S> = BTreeMap::new();
        for (v, c) in terms {
            let slot = acc.entry(v).or_insert_with(S::zero);
            *slot = slot.clone() + c;
        }
        Self { terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(), constant }
    }

    pub fn terms(&self) -> &[(RealVar, S)] {
        &self.terms
    }

    pub fn constant_term(&self) -> &S {
        &self.constant
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_terms(
            self.terms.iter().chain(other.terms.iter()).cloned(),
            self.constant.clone() + other.constant.clone(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-S::one()))
    }

    pub fn scale(&self, k: &S) -> Self {
        if k.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(v, c)| (*v, c.clone() * k.clone())).collect(),
            constant: self.constant.clone() * k.clone(),
        }
    }

    pub fn eval(&self, reals: &[S]) -> S {
        self.terms.iter().fold(self.constant.clone(), |acc, (v, c)| {
            acc + c.clone() * reals[v.0 as usize].clone()
        })
    }

    pub fn vars(&self) -> impl Iterator<Item = RealVar> + '_ {
        self.terms.iter().map(|(v, _)| *v)
    }
}

impl<S: Scalar> fmt::Display for LinExpr<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "{}", self.constant);
        }
        for (i, (v, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if c.is_one() {
                write!(f, "{v}")?;
            } else {
                write!(f, "{c}*{v}")?;
            }
        }
        if !self.constant.is_zero() {
            write!(f, " + {}", self.constant)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn holds<S: Ord>(self, lhs: &S, rhs: &S) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

/// Quantifier-free formula over [`BoolVar`]s and linear comparisons.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BoolExpr<S> {
    Const(bool),
    Var(BoolVar),
    Not(Box<BoolExpr<S>>),
    And(Vec<BoolExpr<S>>),
    Or(Vec<BoolExpr<S>>),
    Implies(Box<BoolExpr<S>>, Box<BoolExpr<S>>),
    Iff(Box<BoolExpr<S>>, Box<BoolExpr<S>>),
    /// `expr ⋈ 0`
    Cmp(LinExpr<S>, CmpOp),
}

impl<S: Scalar> BoolExpr<S> {
    pub fn var(v: BoolVar) -> Self {
        BoolExpr::Var(v)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Self) -> Self {
        match e {
            BoolExpr::Const(b) => BoolExpr::Const(!b),
            BoolExpr::Not(inner) => *inner,
            other => BoolExpr::Not(Box::new(other)),
        }
    }

    pub fn implies(a: Self, b: Self) -> Self {
        BoolExpr::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Self, b: Self) -> Self {
        BoolExpr::Iff(Box::new(a), Box::new(b))
    }

    /// `lhs ⋈ rhs`, stored as `lhs - rhs ⋈ 0`.
    pub fn cmp(lhs: &LinExpr<S>, op: CmpOp, rhs: &LinExpr<S>) -> Self {
        BoolExpr::Cmp(lhs.sub(rhs), op)
    }

    pub fn eval(&self, bools: &[bool], reals: &[S]) -> bool {
        match self {
            BoolExpr::Const(b) => *b,
            BoolExpr::Var(v) => bools[v.0 as usize],
            BoolExpr::Not(e) => !e.eval(bools, reals),
            BoolExpr::And(es) => es.iter().all(|e| e.eval(bools, reals)),
            BoolExpr::Or(es) => es.iter().any(|e| e.eval(bools, reals)),
            BoolExpr::Implies(a, b) => !a.eval(bools, reals) || b.eval(bools, reals),
            BoolExpr::Iff(a, b) => a.eval(bools, reals) == b.eval(bools, reals),
            BoolExpr::Cmp(e, op) => op.holds(&e.eval(reals), &S::zero()),
        }
    }

    /// Visits every comparison in the formula.
    pub fn for_each_cmp(&self, f: &mut impl FnMut(&LinExpr<S>, CmpOp)) {
        match self {
            BoolExpr::Const(_) | BoolExpr::Var(_) => {}
            BoolExpr::Not(e) => e.for_each_cmp(f),
            BoolExpr::And(es) | BoolExpr::Or(es) => es.iter().for_each(|e| e.for_each_cmp(f)),
            BoolExpr::Implies(a, b) | BoolExpr::Iff(a, b) => {
                a.for_each_cmp(f);
                b.for_each_cmp(f);
            }
            BoolExpr::Cmp(e, op) => f(e, *op),
        }
    }
}

impl<S: Scalar> fmt::Display for BoolExpr<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join<S: Scalar>(
            f: &mut fmt::Formatter<'_>,
            op: &str,
            es: &[BoolExpr<S>],
        ) -> fmt::Result {
            write!(f, "({op}")?;
            for e in es {
                write!(f, " {e}")?;
            }
            write!(f, ")")
        }
        match self {
            BoolExpr::Const(b) => write!(f, "{b}"),
            BoolExpr::Var(v) => write!(f, "{v}"),
            BoolExpr::Not(e) => write!(f, "(not {e})"),
            BoolExpr::And(es) => join(f, "and", es),
            BoolExpr::Or(es) => join(f, "or", es),
            BoolExpr::Implies(a, b) => write!(f, "(=> {a} {b})"),
            BoolExpr::Iff(a, b) => write!(f, "(= {a} {b})"),
            BoolExpr::Cmp(e, op) => write!(f, "({} {e} 0)", op.symbol()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Minimize,
    Maximize,
}

/// A hard constraint together with the group it belongs to (for core extraction).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint<S> {
    pub group: u32,
    pub expr: BoolExpr<S>,
}

/// Conjunction of grouped constraints over a fixed variable universe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem<S> {
    pub num_bools: u32,
    pub num_reals: u32,
    pub constraints: Vec<Constraint<S>>,
}

impl<S: Scalar> Problem<S> {
    pub fn new(num_bools: u32, num_reals: u32) -> Self {
        Self { num_bools, num_reals, constraints: Vec::new() }
    }

    pub fn push(&mut self, group: u32, expr: BoolExpr<S>) {
        self.constraints.push(Constraint { group, expr });
    }

    /// Independent evaluation of every hard constraint.
    pub fn is_satisfied_by(&self, bools: &[bool], reals: &[S]) -> bool {
        self.constraints.iter().all(|c| c.expr.eval(bools, reals))
    }

    /// Groups whose constraints are violated by the assignment.
    pub fn violated_groups(&self, bools: &[bool], reals: &[S]) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .constraints
            .iter()
            .filter(|c| !c.expr.eval(bools, reals))
            .map(|c| c.group)
            .collect();
        out.dedup();
        out
    }

    /// Copy restricted to the given groups.
    pub fn restricted_to(&self, keep: impl Fn(u32) -> bool) -> Self {
        Self {
            num_bools: self.num_bools,
            num_reals: self.num_reals,
            constraints: self.constraints.iter().filter(|c| keep(c.group)).cloned().collect(),
        }
    }
}
