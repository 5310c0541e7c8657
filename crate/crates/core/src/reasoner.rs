//! User-level reasoning: realizability, optimization, enumeration, cores,
//! implicit-constraint discovery and evolution, plus a solver-free checker for
//! realizations.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use cgm_smt::omt::{self, CoreOutcome};
use cgm_smt::{Budget, Direction, OptValue, SolverConfig, Verdict};
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{encode, encode_evolution, EncodeError, EncodedProblem, EvolutionMode, GroupTag, ObjectiveSpec};
use crate::formula::{Env, Formula, NumRef, Term};
use crate::model::{Cgm, ModelError, ObjectiveBody, Predefined, RelationEdge, PENALTY, REWARD};
use crate::{Model, Q};
use cgm_smt::Objective;

/// Default limit for batch runs.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(1000);

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub timeout: Option<Duration>,
    pub max_conflicts: Option<u64>,
    pub seed: u64,
    pub cancel: Option<Arc<AtomicBool>>,
    /// Compute a core when the model is unrealizable.
    pub core: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { timeout: Some(DEFAULT_TIMEOUT), max_conflicts: None, seed: 0, cancel: None, core: true }
    }
}

impl SolveOptions {
    pub fn with_timeout(timeout: Duration) -> Self {
        Self { timeout: Some(timeout), ..Self::default() }
    }

    pub fn budget(&self) -> Budget {
        let mut b = match self.timeout {
            Some(t) => Budget::with_timeout(t),
            None => Budget::unlimited(),
        };
        if let Some(c) = self.max_conflicts {
            b = b.conflicts(c);
        }
        if let Some(flag) = &self.cancel {
            b = b.cancel_flag(flag.clone());
        }
        b
    }

    pub fn config(&self) -> SolverConfig {
        SolverConfig::with_seed(self.seed)
    }
}

/// A decoded model: satisfied labels, numeric values and objective values.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Realization {
    pub satisfied: BTreeSet<String>,
    #[serde(with = "crate::json::q_map")]
    pub numeric_values: BTreeMap<String, Q>,
    #[serde(default)]
    pub objectives: Vec<String>,
    #[serde(with = "crate::json::q_vec", default)]
    pub objective_values: Vec<Q>,
    pub attained: bool,
}

impl Realization {
    pub fn holds(&self, label: &str) -> bool {
        self.satisfied.contains(label)
    }

    /// Value of an objective of this realization by id.
    pub fn objective(&self, id: &str) -> Option<&Q> {
        self.objectives.iter().position(|o| o == id).map(|i| &self.objective_values[i])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SolveOutcome {
    Realizable { realization: Realization },
    /// `core` is present when it was requested and computed within budget.
    Unrealizable { core: Option<Vec<GroupTag>> },
    /// The objective has no finite optimum once earlier ones are fixed.
    Unbounded { objective: String, realization: Realization },
    /// Limits hit. `best` carries the best model found; its first `completed`
    /// objective values are proven optimal.
    Budget { best: Option<Realization>, completed: usize },
}

impl SolveOutcome {
    pub fn realization(&self) -> Option<&Realization> {
        match self {
            SolveOutcome::Realizable { realization } | SolveOutcome::Unbounded { realization, .. } => Some(realization),
            SolveOutcome::Budget { best, .. } => best.as_ref(),
            SolveOutcome::Unrealizable { .. } => None,
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            SolveOutcome::Realizable { .. } => "realizable",
            SolveOutcome::Unrealizable { .. } => "unrealizable",
            SolveOutcome::Unbounded { .. } => "unbounded",
            SolveOutcome::Budget { .. } => "budget",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CoreResult {
    Core { groups: Vec<GroupTag> },
    Realizable,
    Budget,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ReasonError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("the previous realization is not valid for the previous model ({} violation(s))", .0.len())]
    StaleRealization(Vec<Violation>),
}

fn decode(enc: &EncodedProblem, model: &Model, values: Option<&[OptValue<Q>]>) -> Realization {
    let objective_values = match values {
        Some(v) if v.len() == enc.objectives.len() => v.iter().map(|o| o.value.clone()).collect(),
        _ => enc.objective_values(model),
    };
    let attained = values.is_none_or(|v| v.iter().all(|o| o.attained));
    Realization {
        satisfied: enc.satisfied(model),
        numeric_values: enc.numeric_values(model),
        objectives: enc.objectives.iter().map(|o| o.id.clone()).collect(),
        objective_values,
        attained,
    }
}

fn objectives(enc: &EncodedProblem) -> Vec<Objective> {
    enc.objectives
        .iter()
        .map(|o| match o.direction {
            Direction::Minimize => Objective::minimize(o.expr.clone()),
            Direction::Maximize => Objective::maximize(o.expr.clone()),
        })
        .collect()
}

fn run(enc: &EncodedProblem, opts: &SolveOptions) -> SolveOutcome {
    let budget = opts.budget();
    let out = omt::optimize(&enc.problem, &objectives(enc), &opts.config(), &budget);
    match out {
        omt::Outcome::Sat { model, values } => {
            let mut r = decode(enc, &model, Some(&values));
            if values.len() < enc.objectives.len() {
                // An unattained optimum stops the sequence; later values are those of the witness.
                r.attained = false;
            }
            SolveOutcome::Realizable { realization: r }
        }
        omt::Outcome::Unsat => {
            let core = if opts.core { core_groups(enc, opts) } else { None };
            SolveOutcome::Unrealizable { core }
        }
        omt::Outcome::Unbounded { index, model, .. } => SolveOutcome::Unbounded {
            objective: enc.objectives[index].id.clone(),
            realization: decode(enc, &model, None),
        },
        omt::Outcome::Budget { best, completed, .. } => SolveOutcome::Budget {
            best: best.map(|m| {
                let mut r = decode(enc, &m, None);
                r.attained = false;
                r
            }),
            completed,
        },
    }
}

fn core_groups(enc: &EncodedProblem, opts: &SolveOptions) -> Option<Vec<GroupTag>> {
    match omt::unsat_core(&enc.problem, &opts.config(), &opts.budget()) {
        CoreOutcome::Core(gs) => Some(gs.into_iter().map(|g| enc.group_tag(g).clone()).collect()),
        CoreOutcome::Satisfiable | CoreOutcome::Budget => None,
    }
}

/// Realizability check; an unrealizable result carries a core if requested.
pub fn check_realizability(m: &Cgm, opts: &SolveOptions) -> SolveOutcome {
    let enc = encode(m, &[]).expect("encoding without objectives cannot fail");
    run(&enc, opts)
}

/// Lexicographic optimization of the given objectives.
pub fn optimize(m: &Cgm, specs: &[ObjectiveSpec], opts: &SolveOptions) -> Result<SolveOutcome, ReasonError> {
    let enc = encode(m, specs)?;
    Ok(run(&enc, opts))
}

/// Group-minimal unsatisfiable subset of the model's constraint groups.
pub fn unsat_core(m: &Cgm, opts: &SolveOptions) -> CoreResult {
    let enc = encode(m, &[]).expect("encoding without objectives cannot fail");
    match omt::unsat_core(&enc.problem, &opts.config(), &opts.budget()) {
        CoreOutcome::Core(gs) => CoreResult::Core { groups: gs.into_iter().map(|g| enc.group_tag(g).clone()).collect() },
        CoreOutcome::Satisfiable => CoreResult::Realizable,
        CoreOutcome::Budget => CoreResult::Budget,
    }
}

/// Stream of realizations pairwise distinct on element and refinement labels.
pub struct Realizations {
    enc: EncodedProblem,
    inner: cgm_smt::Enumerator,
}

impl Realizations {
    /// True once the stream ended because no further realization exists.
    pub fn exhausted(&self) -> bool {
        self.inner.exhausted()
    }
}

impl Iterator for Realizations {
    type Item = Realization;

    fn next(&mut self) -> Option<Realization> {
        let model = self.inner.next()?;
        Some(decode(&self.enc, &model, None))
    }
}

pub fn enumerate(m: &Cgm, opts: &SolveOptions) -> Realizations {
    let enc = encode(m, &[]).expect("encoding without objectives cannot fail");
    let inner = cgm_smt::Enumerator::new(&enc.problem, enc.projection(), &opts.config(), opts.budget());
    Realizations { enc, inner }
}

struct Probe {
    enc: EncodedProblem,
    solver: cgm_smt::SmtSolver,
    budget: Budget,
}

impl Probe {
    fn new(m: &Cgm, opts: &SolveOptions) -> Self {
        let enc = encode(m, &[]).expect("encoding without objectives cannot fail");
        let solver = cgm_smt::SmtSolver::new(&enc.problem, opts.config());
        Self { enc, solver, budget: opts.budget() }
    }

    /// `Some(true)` if the labels can all hold together.
    fn possible(&mut self, labels: &[&str]) -> Option<bool> {
        let lits: Vec<_> =
            labels.iter().map(|l| self.solver.bool_lit(self.enc.bool_var(l).expect("known label"))).collect();
        match self.solver.solve(&lits, &self.budget) {
            Verdict::Sat => Some(true),
            Verdict::Unsat(_) => Some(false),
            Verdict::Unknown => None,
        }
    }
}

fn require_element(m: &Cgm, label: &str) -> Result<(), ReasonError> {
    match m.lookup(label) {
        None => Err(ModelError::UnknownReference(label.to_string()).into()),
        Some(_) if m.element(label).is_none() => Err(ModelError::KindMismatch {
            label: label.to_string(),
            found: m.lookup(label).expect("present"),
            expected: "an element",
        }
        .into()),
        Some(_) => Ok(()),
    }
}

/// Elements forced false once `antecedent` holds. Candidates are tasks and
/// requirements, or every element when `all_elements` is set. If the
/// antecedent itself cannot hold, every candidate is reported.
pub fn entailed_implications(
    m: &Cgm,
    antecedent: &str,
    all_elements: bool,
    opts: &SolveOptions,
) -> Result<Vec<String>, ReasonError> {
    require_element(m, antecedent)?;
    let class = m.classify();
    let mut probe = Probe::new(m, opts);
    let mut out = Vec::new();
    for e in &m.elements {
        let l = e.label.as_str();
        let candidate = all_elements || class.tasks.contains(l) || class.requirements.contains(l);
        if !candidate || l == antecedent {
            continue;
        }
        if probe.possible(&[antecedent, l]) == Some(false) {
            out.push(l.to_string());
        }
    }
    Ok(out)
}

/// Whether `a` and `b` cannot hold together once `antecedent` holds.
pub fn pair_forbidden(m: &Cgm, antecedent: &str, a: &str, b: &str, opts: &SolveOptions) -> Result<bool, ReasonError> {
    for l in [antecedent, a, b] {
        require_element(m, l)?;
    }
    Ok(Probe::new(m, opts).possible(&[antecedent, a, b]) == Some(false))
}

/// Pairs of tasks that are each possible with `antecedent` but not together.
pub fn entailed_pairs(m: &Cgm, antecedent: &str, opts: &SolveOptions) -> Result<Vec<(String, String)>, ReasonError> {
    require_element(m, antecedent)?;
    let tasks: Vec<String> = m.classify().tasks.into_iter().collect();
    let mut probe = Probe::new(m, opts);
    let alone: Vec<&String> =
        tasks.iter().filter(|t| probe.possible(&[antecedent, t.as_str()]) == Some(true)).collect();
    let mut out = Vec::new();
    for (i, a) in alone.iter().enumerate() {
        for b in &alone[i + 1..] {
            if probe.possible(&[antecedent, a, b]) == Some(false) {
                out.push(((*a).clone(), (*b).clone()));
            }
        }
    }
    Ok(out)
}

/// Realization of `new` minimizing the chosen evolution objective with respect
/// to `old_realization` of `old`.
pub fn evolve(
    old: &Cgm,
    old_realization: &Realization,
    new: &Cgm,
    mode: EvolutionMode,
    scope: Option<&BTreeSet<String>>,
    opts: &SolveOptions,
) -> Result<SolveOutcome, ReasonError> {
    let violations = check_realization(old, old_realization);
    if !violations.is_empty() {
        return Err(ReasonError::StaleRealization(violations));
    }
    let enc = encode_evolution(new, old, &old_realization.satisfied, mode, scope)?;
    Ok(run(&enc, opts))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub at: GroupTag,
    pub message: String,
}

/// Evaluates model symbols for a fixed set of satisfied labels. Attribute sums
/// range over every element, independently of the encoder's support pruning.
pub struct Evaluator<'a> {
    m: &'a Cgm,
    satisfied: &'a BTreeSet<String>,
    depth: std::cell::Cell<usize>,
}

impl<'a> Evaluator<'a> {
    pub fn new(m: &'a Cgm, satisfied: &'a BTreeSet<String>) -> Self {
        Self { m, satisfied, depth: std::cell::Cell::new(0) }
    }

    fn guarded<T>(&self, f: impl FnOnce() -> Option<T>) -> Option<T> {
        let d = self.depth.get();
        if d > self.m.attributes.len() + self.m.objectives.len() + 1 {
            return None;
        }
        self.depth.set(d + 1);
        let out = f();
        self.depth.set(d);
        out
    }

    fn holds(&self, l: &str) -> bool {
        self.satisfied.contains(l)
    }

    pub fn element_value(&self, element: &str, attr: &str) -> Q {
        let Some(e) = self.m.element(element) else { return Q::zero() };
        let map = if self.holds(element) { &e.on_sat } else { &e.on_deny };
        map.get(attr).cloned().unwrap_or_else(Q::zero)
    }

    pub fn attribute(&self, attr: &str) -> Option<Q> {
        let decl = self.m.attribute(attr)?;
        self.guarded(|| match &decl.def {
            Some(t) => t.eval(self),
            None => Some(self.m.elements.iter().map(|e| self.element_value(&e.label, attr)).sum()),
        })
    }

    pub fn predefined(&self, p: Predefined) -> Option<Q> {
        let class = self.m.classify();
        let count = |n: usize| Q::from_integer(n.into());
        Some(match p {
            Predefined::Weight => self.attribute(PENALTY)? - self.attribute(REWARD)?,
            Predefined::NumUnsatPrefs => {
                count(self.m.preferences.iter().filter(|pr| !self.holds(&pr.preferred) && self.holds(&pr.over)).count())
            }
            Predefined::NumUnsatRequirements => count(
                class.requirements.iter().filter(|r| !class.mandatory.contains(*r) && !self.holds(r)).count(),
            ),
            Predefined::NumSatTasks => count(class.tasks.iter().filter(|t| self.holds(t)).count()),
        })
    }

    /// Value of an objective id as resolved for optimization requests.
    pub fn objective(&self, id: &str) -> Option<Q> {
        if let Some(o) = self.m.objective(id) {
            return self.guarded(|| match &o.body {
                ObjectiveBody::Term(t) => t.eval(self),
                ObjectiveBody::Predefined(p) => self.predefined(*p),
            });
        }
        if self.m.attribute(id).is_some() {
            return self.attribute(id);
        }
        self.predefined(Predefined::from_name(id)?)
    }
}

impl Env for Evaluator<'_> {
    fn prop(&self, label: &str) -> Option<bool> {
        Some(self.holds(label))
    }

    fn num(&self, r: &NumRef) -> Option<Q> {
        match r {
            NumRef::Element(e, a) => Some(self.element_value(e, a)),
            NumRef::Global(n) => self.objective(n),
        }
    }
}

/// Solver-free check of the realization conditions and every model constraint.
pub fn check_realization(m: &Cgm, r: &Realization) -> Vec<Violation> {
    let mut out = Vec::new();
    let ev = Evaluator::new(m, &r.satisfied);
    let holds = |l: &str| r.satisfied.contains(l);
    let mut v = |at: GroupTag, message: String| out.push(Violation { at, message });
    for rf in &m.refinements {
        let all = rf.sources.iter().all(|s| holds(s));
        if all != holds(&rf.label) {
            v(
                GroupTag::Backbone { refinement: rf.label.clone() },
                format!("`{}` must hold exactly when all of its sources hold", rf.label),
            );
        }
        if holds(&rf.label) && !holds(&rf.target) {
            v(
                GroupTag::Backbone { refinement: rf.label.clone() },
                format!("`{}` holds but its target `{}` does not", rf.label, rf.target),
            );
        }
    }
    for e in &m.elements {
        let mut refs = m.refinements_of(&e.label).peekable();
        if refs.peek().is_some() && holds(&e.label) && !refs.any(|rf| holds(&rf.label)) {
            v(GroupTag::ClosedWorld { element: e.label.clone() }, format!("`{}` holds without any refinement", e.label));
        }
    }
    let check = |f: &Formula| f.eval(&ev) == Some(true);
    let prereqs = m
        .elements
        .iter()
        .map(|e| (&e.label, &e.prereq_pos, &e.prereq_neg))
        .chain(m.refinements.iter().map(|rf| (&rf.label, &rf.prereq_pos, &rf.prereq_neg)));
    for (label, pos, neg) in prereqs {
        let (f, positive) = if holds(label) { (pos, true) } else { (neg, false) };
        if !check(f) {
            v(GroupTag::Prerequisite { label: label.clone(), positive }, format!("prerequisite of `{label}` fails: {f}"));
        }
    }
    for (index, e) in m.edges.iter().enumerate() {
        let ok = match e {
            RelationEdge::Contribution { src, dst } => !holds(src) || holds(dst),
            RelationEdge::Mutual { a, b } => holds(a) == holds(b),
            RelationEdge::Conflict { a, b } => !(holds(a) && holds(b)),
            RelationEdge::Binding { r1, r2 } => {
                let t = |x: &str| m.refinement(x).map(|rf| holds(&rf.target)).unwrap_or(false);
                !(t(r1) && t(r2)) || holds(r1) == holds(r2)
            }
        };
        if !ok {
            v(GroupTag::RelationEdge { index }, format!("relation edge {e:?} is violated"));
        }
    }
    for (index, f) in m.formulas.iter().enumerate() {
        if !check(f) {
            v(GroupTag::GlobalFormula { index }, format!("formula fails: {f}"));
        }
    }
    for (label, value) in &m.assertions {
        if holds(label) != *value {
            v(
                GroupTag::UserAssertion { label: label.clone(), value: *value },
                format!("`{label}` is asserted {value}"),
            );
        }
    }
    for (name, value) in &r.numeric_values {
        let expected = match name.split_once('.') {
            Some((e, a)) => Some(ev.element_value(e, a)),
            None => ev.attribute(name),
        };
        if expected.as_ref() != Some(value) {
            v(GroupTag::AttributeDef { attr: name.clone() }, format!("`{name}` should be {expected:?}, found {value}"));
        }
    }
    out
}

/// Builds a realization record for a set of satisfied labels, evaluating every
/// attribute and per-element value from the Booleans alone.
pub fn realization_of(m: &Cgm, satisfied: BTreeSet<String>) -> Realization {
    let numeric_values = {
        let ev = Evaluator::new(m, &satisfied);
        m.attributes.iter().filter_map(|a| Some((a.label.clone(), ev.attribute(&a.label)?))).collect()
    };
    Realization { satisfied, numeric_values, objectives: Vec::new(), objective_values: Vec::new(), attained: true }
}

/// Value of a term under a set of satisfied labels.
pub fn eval_term(m: &Cgm, satisfied: &BTreeSet<String>, t: &Term) -> Option<Q> {
    t.eval(&Evaluator::new(m, satisfied))
}
