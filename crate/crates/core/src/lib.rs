//! Constrained goal models: a data model with validation, a text format, the
//! lowering to SMT(LRA), and reasoning on top of the `cgm-smt` engine.
//!
//! Numbers are exact rationals ([`Q`]) throughout.

pub mod benchgen;
pub mod dsl;
pub mod encoder;
pub mod fixture;
pub mod formula;
pub mod json;
pub mod model;
pub mod random;
pub mod reasoner;
pub mod rng;
pub mod smtlib;

pub use dsl::{load, parse, print, LoadError, ParseError};
pub use encoder::{encode, EncodeError, EncodedProblem, EvolutionMode, GroupTag, ObjectiveSpec};
pub use formula::{Formula, NumRef, SugarKind, Term};
pub use reasoner::{check_realization, Realization, SolveOptions, SolveOutcome};
pub use model::{build_model, Cgm, Classification, Decl, DeclKind, ElementKind, ValidationReport};

/// Exact rational scalar used by models and results.
pub type Q = cgm_smt::Rational;

pub(crate) use cgm_smt::{BoolExpr, LinExpr, Model, Problem};
