//! Lazy SMT solver for quantifier-free linear real arithmetic with lexicographic
//! optimization, model enumeration and unsat-core extraction.
//!
//! Every component is generic over an exact ordered field `S` (see [`Scalar`]). The
//! aliases at the crate root fix `S` to arbitrary-precision rationals.

pub mod budget;
pub mod expr;
pub mod omt;
pub mod sat;
pub mod scalar;
pub mod simplex;
pub mod solver;

pub use budget::Budget;
pub use expr::{BoolVar, CmpOp, Constraint, Direction, RealVar};
pub use omt::{check, optimize, unsat_core, CoreOutcome, OptValue};
pub use sat::{Lit, SatConfig};
pub use scalar::{DeltaValue, Scalar};
pub use solver::{Extremum, SolverConfig, Verdict};

/// Exact arbitrary-precision rational, the default scalar.
pub type Rational = num_rational::BigRational;

pub type LinExpr = expr::LinExpr<Rational>;
pub type BoolExpr = expr::BoolExpr<Rational>;
pub type Problem = expr::Problem<Rational>;
pub type Model = solver::Model<Rational>;
pub type Objective = omt::Objective<Rational>;
pub type Outcome = omt::Outcome<Rational>;
pub type SmtSolver = solver::SmtSolver<Rational>;
pub type Enumerator = omt::Enumerator<Rational>;

/// Integer-valued rational constant.
pub fn rat(n: i64) -> Rational {
    Rational::from_integer(n.into())
}
