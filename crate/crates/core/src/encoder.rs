//! Lowering of a model to a grouped SMT(LRA) problem with an ordered objective list.
//!
//! Boolean variables: one per element, then one per refinement, in declaration
//! order. Numeric variables: materialized attributes, then per-element attribute
//! values (only for elements with a non-zero value), then auxiliaries introduced
//! by `ite` elimination.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use cgm_smt::{BoolVar, CmpOp, Direction, RealVar};
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Formula, NumRef, Term};
use crate::model::{Cgm, Classification, ObjectiveBody, Predefined, RelationEdge, PENALTY, REWARD};
use crate::{BoolExpr, LinExpr, Model, Problem, Q};

/// Origin of a hard constraint, in model vocabulary.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupTag {
    Backbone { refinement: String },
    ClosedWorld { element: String },
    RelationEdge { index: usize },
    Prerequisite { label: String, positive: bool },
    GlobalFormula { index: usize },
    UserAssertion { label: String, value: bool },
    AttributeDefault { element: String, attr: String },
    AttributeDef { attr: String },
    ObjectiveDef { id: String },
}

impl GroupTag {
    /// Model labels the constraint group is about.
    pub fn labels(&self, m: &Cgm) -> Vec<String> {
        match self {
            GroupTag::Backbone { refinement } => {
                let mut v = vec![refinement.clone()];
                if let Some(r) = m.refinement(refinement) {
                    v.push(r.target.clone());
                    v.extend(r.sources.iter().cloned());
                }
                v
            }
            GroupTag::ClosedWorld { element } => {
                let mut v = vec![element.clone()];
                v.extend(m.refinements_of(element).map(|r| r.label.clone()));
                v
            }
            GroupTag::RelationEdge { index } => m
                .edges
                .get(*index)
                .map(|e| {
                    let (a, b) = e.endpoints();
                    vec![a.to_string(), b.to_string()]
                })
                .unwrap_or_default(),
            GroupTag::Prerequisite { label, .. } | GroupTag::UserAssertion { label, .. } => vec![label.clone()],
            GroupTag::GlobalFormula { index } => {
                let mut v = Vec::new();
                if let Some(f) = m.formulas.get(*index) {
                    f.for_each_prop(&mut |p| v.push(p.to_string()));
                }
                v
            }
            GroupTag::AttributeDefault { element, attr } => vec![element.clone(), attr.clone()],
            GroupTag::AttributeDef { attr } => vec![attr.clone()],
            GroupTag::ObjectiveDef { id } => vec![id.clone()],
        }
    }
}

impl fmt::Display for GroupTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupTag::Backbone { refinement } => write!(f, "backbone {refinement}"),
            GroupTag::ClosedWorld { element } => write!(f, "closed-world {element}"),
            GroupTag::RelationEdge { index } => write!(f, "edge #{index}"),
            GroupTag::Prerequisite { label, positive } => {
                write!(f, "prereq{} {label}", if *positive { "+" } else { "-" })
            }
            GroupTag::GlobalFormula { index } => write!(f, "formula #{index}"),
            GroupTag::UserAssertion { label, value } => write!(f, "assert {label} {value}"),
            GroupTag::AttributeDefault { element, attr } => write!(f, "value {element}.{attr}"),
            GroupTag::AttributeDef { attr } => write!(f, "attr {attr}"),
            GroupTag::ObjectiveDef { id } => write!(f, "objective {id}"),
        }
    }
}

/// Objective selection: an objective, attribute or predefined id, with an
/// optional direction override.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub id: String,
    #[serde(default, with = "crate::json::opt_direction", skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
}

impl ObjectiveSpec {
    pub fn min(id: &str) -> Self {
        Self { id: id.to_string(), direction: Some(Direction::Minimize) }
    }

    pub fn max(id: &str) -> Self {
        Self { id: id.to_string(), direction: Some(Direction::Maximize) }
    }

    /// Uses the declared (or default minimizing) direction.
    pub fn named(id: &str) -> Self {
        Self { id: id.to_string(), direction: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionMode {
    Hamming,
    NewElements,
    Both,
    Effort,
}

impl EvolutionMode {
    pub fn id(self) -> &'static str {
        match self {
            EvolutionMode::Hamming => "evoHamming",
            EvolutionMode::NewElements => "evoNewElements",
            EvolutionMode::Both => "evoBoth",
            EvolutionMode::Effort => "evoEffort",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("unknown objective `{0}`")]
    UnknownObjective(String),
    #[error("objective `{objective}` needs attribute `{attr}`")]
    MissingAttribute { objective: String, attr: &'static str },
    #[error("cyclic definition through `{0}`")]
    DefinitionCycle(String),
    #[error("unknown label `{0}` in evolution scope")]
    UnknownScopeLabel(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NumericVar {
    Attribute { attr: String },
    ElementValue { element: String, attr: String },
    Aux { group: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedObjective {
    pub id: String,
    pub direction: Direction,
    pub expr: LinExpr,
}

#[derive(Clone, Debug)]
pub struct EncodedProblem {
    pub problem: Problem,
    /// Label of each Boolean variable.
    pub labels: Vec<String>,
    pub numeric: Vec<NumericVar>,
    pub groups: Vec<GroupTag>,
    pub objectives: Vec<EncodedObjective>,
    /// Value of every declared attribute as a linear expression.
    pub attribute_values: BTreeMap<String, LinExpr>,
    bool_index: HashMap<String, BoolVar>,
}

impl EncodedProblem {
    pub fn bool_var(&self, label: &str) -> Option<BoolVar> {
        self.bool_index.get(label).copied()
    }

    /// Enumeration projection: every element and refinement label.
    pub fn projection(&self) -> Vec<BoolVar> {
        (0..self.labels.len() as u32).map(BoolVar).collect()
    }

    /// Numeric variables standing for attributes and per-element values.
    pub fn num_attribute_vars(&self) -> usize {
        self.numeric.iter().filter(|v| !matches!(v, NumericVar::Aux { .. })).count()
    }

    pub fn num_aux_vars(&self) -> usize {
        self.numeric.len() - self.num_attribute_vars()
    }

    pub fn group_tag(&self, g: u32) -> &GroupTag {
        &self.groups[g as usize]
    }

    pub fn var_name(&self, v: RealVar) -> String {
        match &self.numeric[v.0 as usize] {
            NumericVar::Attribute { attr } => attr.clone(),
            NumericVar::ElementValue { element, attr } => format!("{element}.{attr}"),
            NumericVar::Aux { .. } => format!("_u{}", v.0),
        }
    }

    /// Satisfied labels of a solver model.
    pub fn satisfied(&self, model: &Model) -> BTreeSet<String> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(i, _)| model.bools[*i])
            .map(|(_, l)| l.clone())
            .collect()
    }

    /// Attribute values and per-element values of a solver model.
    pub fn numeric_values(&self, model: &Model) -> BTreeMap<String, Q> {
        let mut out: BTreeMap<String, Q> =
            self.attribute_values.iter().map(|(a, e)| (a.clone(), e.eval(&model.reals))).collect();
        for (i, v) in self.numeric.iter().enumerate() {
            if let NumericVar::ElementValue { .. } = v {
                out.insert(self.var_name(RealVar(i as u32)), model.reals[i].clone());
            }
        }
        out
    }

    pub fn objective_values(&self, model: &Model) -> Vec<Q> {
        self.objectives.iter().map(|o| o.expr.eval(&model.reals)).collect()
    }

    /// One line per variable, constraint and objective; stable across runs.
    pub fn debug_dump(&self) -> String {
        let mut s = String::new();
        for (i, l) in self.labels.iter().enumerate() {
            let _ = writeln!(s, "bool b{i} {l}");
        }
        for i in 0..self.numeric.len() {
            let _ = writeln!(s, "real x{i} {}", self.var_name(RealVar(i as u32)));
        }
        for c in &self.problem.constraints {
            let _ = writeln!(s, "[{}] {}", self.groups[c.group as usize], c.expr);
        }
        for o in &self.objectives {
            let d = if o.direction == Direction::Minimize { "minimize" } else { "maximize" };
            let _ = writeln!(s, "{d} {}: {}", o.id, o.expr);
        }
        s
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Visit {
    Active,
    Done,
}

struct Enc<'a> {
    m: &'a Cgm,
    class: Classification,
    labels: Vec<String>,
    bool_index: HashMap<String, BoolVar>,
    numeric: Vec<NumericVar>,
    support: HashMap<(String, String), RealVar>,
    constraints: Vec<(u32, BoolExpr)>,
    groups: Vec<GroupTag>,
    group_ids: HashMap<GroupTag, u32>,
    current: u32,
    attr_state: HashMap<String, Visit>,
    attr_expr: BTreeMap<String, LinExpr>,
    obj_state: HashMap<String, Visit>,
    obj_expr: HashMap<String, LinExpr>,
    predefined: HashMap<Predefined, LinExpr>,
}

impl<'a> Enc<'a> {
    fn new(m: &'a Cgm) -> Self {
        let labels: Vec<String> = m.propositions().map(str::to_string).collect();
        let bool_index = labels.iter().enumerate().map(|(i, l)| (l.clone(), BoolVar(i as u32))).collect();
        Self {
            m,
            class: m.classify(),
            labels,
            bool_index,
            numeric: Vec::new(),
            support: HashMap::new(),
            constraints: Vec::new(),
            groups: Vec::new(),
            group_ids: HashMap::new(),
            current: 0,
            attr_state: HashMap::new(),
            attr_expr: BTreeMap::new(),
            obj_state: HashMap::new(),
            obj_expr: HashMap::new(),
            predefined: HashMap::new(),
        }
    }

    fn enter(&mut self, tag: GroupTag) -> u32 {
        let next = self.groups.len() as u32;
        let id = *self.group_ids.entry(tag.clone()).or_insert_with(|| {
            self.groups.push(tag);
            next
        });
        let prev = self.current;
        self.current = id;
        prev
    }

    fn push(&mut self, e: BoolExpr) {
        self.constraints.push((self.current, e));
    }

    fn var(&self, label: &str) -> BoolExpr {
        BoolExpr::var(self.bool_index[label])
    }

    fn new_real(&mut self, v: NumericVar) -> RealVar {
        self.numeric.push(v);
        RealVar(self.numeric.len() as u32 - 1)
    }

    fn base(&mut self) -> Result<(), EncodeError> {
        let m = self.m;
        // Attributes referenced from another attribute's definition are inlined.
        let mut inlined = BTreeSet::new();
        for a in &m.attributes {
            if let Some(t) = &a.def {
                t.for_each_ref(&mut |r| {
                    if let NumRef::Global(n) = r {
                        if m.attribute(n).is_some() {
                            inlined.insert(n.clone());
                        }
                    }
                });
            }
        }
        let mut materialized = Vec::new();
        for a in &m.attributes {
            if !inlined.contains(&a.label) {
                let v = self.new_real(NumericVar::Attribute { attr: a.label.clone() });
                materialized.push((a.label.clone(), v));
            }
        }
        for a in &m.attributes {
            if a.def.is_some() {
                continue;
            }
            for e in &m.elements {
                let sat = e.on_sat.get(&a.label).cloned().unwrap_or_else(Q::zero);
                let deny = e.on_deny.get(&a.label).cloned().unwrap_or_else(Q::zero);
                if sat.is_zero() && deny.is_zero() {
                    continue;
                }
                let v = self.new_real(NumericVar::ElementValue { element: e.label.clone(), attr: a.label.clone() });
                self.support.insert((e.label.clone(), a.label.clone()), v);
                let prev = self.enter(GroupTag::AttributeDefault { element: e.label.clone(), attr: a.label.clone() });
                let x = LinExpr::var(v);
                let el = self.var(&e.label);
                // Implied range; lets the arithmetic solver bound sums early.
                let (lo, hi) = if sat <= deny { (sat.clone(), deny.clone()) } else { (deny.clone(), sat.clone()) };
                self.push(BoolExpr::implies(el.clone(), BoolExpr::cmp(&x, CmpOp::Eq, &LinExpr::constant(sat))));
                self.push(BoolExpr::implies(BoolExpr::not(el), BoolExpr::cmp(&x, CmpOp::Eq, &LinExpr::constant(deny))));
                self.push(BoolExpr::cmp(&x, CmpOp::Ge, &LinExpr::constant(lo)));
                self.push(BoolExpr::cmp(&x, CmpOp::Le, &LinExpr::constant(hi)));
                self.current = prev;
            }
        }
        for (label, v) in &materialized {
            self.attr_expr.insert(label.clone(), LinExpr::var(*v));
            self.attr_state.insert(label.clone(), Visit::Done);
        }
        for (label, v) in &materialized {
            let prev = self.enter(GroupTag::AttributeDef { attr: label.clone() });
            let value = self.attribute_value(label)?;
            self.push(BoolExpr::cmp(&LinExpr::var(*v), CmpOp::Eq, &value));
            self.current = prev;
        }
        for a in &m.attributes {
            self.attr(&a.label)?;
        }

        for r in &m.refinements {
            let prev = self.enter(GroupTag::Backbone { refinement: r.label.clone() });
            let all = BoolExpr::And(r.sources.iter().map(|s| self.var(s)).collect());
            self.push(BoolExpr::iff(all, self.var(&r.label)));
            self.push(BoolExpr::implies(self.var(&r.label), self.var(&r.target)));
            self.current = prev;
        }
        for e in &m.elements {
            let refs: Vec<BoolExpr> = m.refinements_of(&e.label).map(|r| self.var(&r.label)).collect();
            if refs.is_empty() {
                continue;
            }
            let prev = self.enter(GroupTag::ClosedWorld { element: e.label.clone() });
            self.push(BoolExpr::implies(self.var(&e.label), BoolExpr::Or(refs)));
            self.current = prev;
        }
        let prereqs = m
            .elements
            .iter()
            .map(|e| (&e.label, &e.prereq_pos, &e.prereq_neg))
            .chain(m.refinements.iter().map(|r| (&r.label, &r.prereq_pos, &r.prereq_neg)));
        for (label, pos, neg) in prereqs {
            for (positive, f) in [(true, pos), (false, neg)] {
                if *f == Formula::Const(true) {
                    continue;
                }
                let prev = self.enter(GroupTag::Prerequisite { label: label.clone(), positive });
                let body = self.formula(f)?;
                let guard = if positive { self.var(label) } else { BoolExpr::not(self.var(label)) };
                self.push(BoolExpr::implies(guard, body));
                self.current = prev;
            }
        }
        for (index, e) in m.edges.iter().enumerate() {
            let prev = self.enter(GroupTag::RelationEdge { index });
            match e {
                RelationEdge::Contribution { src, dst } => self.push(BoolExpr::implies(self.var(src), self.var(dst))),
                RelationEdge::Mutual { a, b } => {
                    self.push(BoolExpr::implies(self.var(a), self.var(b)));
                    self.push(BoolExpr::implies(self.var(b), self.var(a)));
                }
                RelationEdge::Conflict { a, b } => {
                    self.push(BoolExpr::not(BoolExpr::And(vec![self.var(a), self.var(b)])))
                }
                RelationEdge::Binding { r1, r2 } => {
                    let t1 = &m.refinement(r1).expect("validated").target;
                    let t2 = &m.refinement(r2).expect("validated").target;
                    let both = BoolExpr::And(vec![self.var(t1), self.var(t2)]);
                    self.push(BoolExpr::implies(both, BoolExpr::iff(self.var(r1), self.var(r2))));
                }
            }
            self.current = prev;
        }
        for (index, f) in m.formulas.iter().enumerate() {
            let prev = self.enter(GroupTag::GlobalFormula { index });
            let e = self.formula(f)?;
            self.push(e);
            self.current = prev;
        }
        for (label, value) in &m.assertions {
            let prev = self.enter(GroupTag::UserAssertion { label: label.clone(), value: *value });
            let v = self.var(label);
            self.push(if *value { v } else { BoolExpr::not(v) });
            self.current = prev;
        }
        Ok(())
    }

    /// Defining expression of an attribute (not its variable).
    fn attribute_value(&mut self, label: &str) -> Result<LinExpr, EncodeError> {
        let decl = self.m.attribute(label).expect("declared attribute");
        match &decl.def {
            Some(t) => self.term(t),
            None => {
                let mut sum = LinExpr::zero();
                for e in &self.m.elements {
                    if let Some(v) = self.support.get(&(e.label.clone(), label.to_string())) {
                        sum = sum.add(&LinExpr::var(*v));
                    }
                }
                Ok(sum)
            }
        }
    }

    fn attr(&mut self, label: &str) -> Result<LinExpr, EncodeError> {
        match self.attr_state.get(label) {
            Some(Visit::Done) => return Ok(self.attr_expr[label].clone()),
            Some(Visit::Active) => return Err(EncodeError::DefinitionCycle(label.to_string())),
            None => {}
        }
        self.attr_state.insert(label.to_string(), Visit::Active);
        let prev = self.enter(GroupTag::AttributeDef { attr: label.to_string() });
        let e = self.attribute_value(label)?;
        self.current = prev;
        self.attr_state.insert(label.to_string(), Visit::Done);
        self.attr_expr.insert(label.to_string(), e.clone());
        Ok(e)
    }

    fn objective_value(&mut self, label: &str) -> Result<LinExpr, EncodeError> {
        match self.obj_state.get(label) {
            Some(Visit::Done) => return Ok(self.obj_expr[label].clone()),
            Some(Visit::Active) => return Err(EncodeError::DefinitionCycle(label.to_string())),
            None => {}
        }
        let decl = self.m.objective(label).expect("declared objective");
        self.obj_state.insert(label.to_string(), Visit::Active);
        let prev = self.enter(GroupTag::ObjectiveDef { id: label.to_string() });
        let e = match &decl.body {
            ObjectiveBody::Term(t) => self.term(t)?,
            ObjectiveBody::Predefined(p) => self.predefined(*p, label)?,
        };
        self.current = prev;
        self.obj_state.insert(label.to_string(), Visit::Done);
        self.obj_expr.insert(label.to_string(), e.clone());
        Ok(e)
    }

    fn indicator_sum(&mut self, conds: Vec<(Formula, i64, i64)>) -> Result<LinExpr, EncodeError> {
        let mut sum = LinExpr::zero();
        for (c, a, b) in conds {
            let t = Term::Ite(Box::new(c), Box::new(Term::Const(Q::from_integer(a.into()))), Box::new(Term::Const(Q::from_integer(b.into()))));
            sum = sum.add(&self.term(&t)?);
        }
        Ok(sum)
    }

    fn predefined(&mut self, p: Predefined, id: &str) -> Result<LinExpr, EncodeError> {
        if let Some(e) = self.predefined.get(&p) {
            return Ok(e.clone());
        }
        let prev = self.enter(GroupTag::ObjectiveDef { id: p.name().to_string() });
        let m = self.m;
        let e = match p {
            Predefined::Weight => {
                for attr in [PENALTY, REWARD] {
                    if m.attribute(attr).is_none() {
                        return Err(EncodeError::MissingAttribute { objective: id.to_string(), attr });
                    }
                }
                self.attr(PENALTY)?.sub(&self.attr(REWARD)?)
            }
            Predefined::NumUnsatPrefs => {
                let conds = m
                    .preferences
                    .iter()
                    .map(|pr| {
                        let ok = Formula::Or(vec![Formula::prop(&pr.preferred), Formula::negate(Formula::prop(&pr.over))]);
                        (ok, 0, 1)
                    })
                    .collect();
                self.indicator_sum(conds)?
            }
            Predefined::NumUnsatRequirements => {
                let conds = self
                    .class
                    .requirements
                    .iter()
                    .filter(|r| !self.class.mandatory.contains(*r))
                    .map(|r| (Formula::prop(r), 0, 1))
                    .collect();
                self.indicator_sum(conds)?
            }
            Predefined::NumSatTasks => {
                let conds = self.class.tasks.iter().map(|t| (Formula::prop(t), 1, 0)).collect();
                self.indicator_sum(conds)?
            }
        };
        self.current = prev;
        self.predefined.insert(p, e.clone());
        Ok(e)
    }

    fn formula(&mut self, f: &Formula) -> Result<BoolExpr, EncodeError> {
        Ok(match f {
            Formula::Const(b) => BoolExpr::Const(*b),
            Formula::Prop(p) => self.var(p),
            Formula::Cmp(a, op, b) => {
                let (a, b) = (self.term(a)?, self.term(b)?);
                BoolExpr::cmp(&a, *op, &b)
            }
            Formula::Not(x) => BoolExpr::not(self.formula(x)?),
            Formula::And(xs) => BoolExpr::And(xs.iter().map(|x| self.formula(x)).collect::<Result<_, _>>()?),
            Formula::Or(xs) => BoolExpr::Or(xs.iter().map(|x| self.formula(x)).collect::<Result<_, _>>()?),
            Formula::Implies(a, b) => BoolExpr::implies(self.formula(a)?, self.formula(b)?),
            Formula::Iff(a, b) => BoolExpr::iff(self.formula(a)?, self.formula(b)?),
            Formula::Sugar(kind, args) => self.formula(&Formula::desugar(*kind, args))?,
        })
    }

    fn term(&mut self, t: &Term) -> Result<LinExpr, EncodeError> {
        Ok(match t {
            Term::Const(q) => LinExpr::constant(q.clone()),
            Term::Var(NumRef::Global(n)) => {
                if self.m.attribute(n).is_some() {
                    self.attr(n)?
                } else {
                    self.objective_value(n)?
                }
            }
            Term::Var(NumRef::Element(e, a)) => match self.support.get(&(e.clone(), a.clone())) {
                Some(v) => LinExpr::var(*v),
                None => LinExpr::zero(),
            },
            Term::Scale(c, x) => self.term(x)?.scale(c),
            Term::Add(a, b) => self.term(a)?.add(&self.term(b)?),
            Term::Sub(a, b) => self.term(a)?.sub(&self.term(b)?),
            Term::Ite(c, a, b) => {
                let (cond, ta, tb) = (self.formula(c)?, self.term(a)?, self.term(b)?);
                let group = self.groups[self.current as usize].to_string();
                let u = LinExpr::var(self.new_real(NumericVar::Aux { group }));
                self.push(BoolExpr::implies(cond.clone(), BoolExpr::cmp(&u, CmpOp::Eq, &ta)));
                self.push(BoolExpr::implies(BoolExpr::not(cond), BoolExpr::cmp(&u, CmpOp::Eq, &tb)));
                if ta.is_constant() && tb.is_constant() {
                    let (a, b) = (ta.constant_term().clone(), tb.constant_term().clone());
                    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                    self.push(BoolExpr::cmp(&u, CmpOp::Ge, &LinExpr::constant(lo)));
                    self.push(BoolExpr::cmp(&u, CmpOp::Le, &LinExpr::constant(hi)));
                }
                u
            }
        })
    }

    fn resolve(&mut self, spec: &ObjectiveSpec) -> Result<EncodedObjective, EncodeError> {
        let m = self.m;
        let (expr, declared) = if let Some(o) = m.objective(&spec.id) {
            (self.objective_value(&spec.id)?, o.direction)
        } else if m.attribute(&spec.id).is_some() {
            (self.attr(&spec.id)?, Direction::Minimize)
        } else if let Some(p) = Predefined::from_name(&spec.id) {
            (self.predefined(p, &spec.id)?, Direction::Minimize)
        } else {
            return Err(EncodeError::UnknownObjective(spec.id.clone()));
        };
        Ok(EncodedObjective { id: spec.id.clone(), direction: spec.direction.unwrap_or(declared), expr })
    }

    fn finish(self, objectives: Vec<EncodedObjective>) -> EncodedProblem {
        let mut problem = Problem::new(self.labels.len() as u32, self.numeric.len() as u32);
        for (g, e) in self.constraints {
            problem.push(g, e);
        }
        EncodedProblem {
            problem,
            labels: self.labels,
            numeric: self.numeric,
            groups: self.groups,
            objectives,
            attribute_values: self.attr_expr,
            bool_index: self.bool_index,
        }
    }
}

/// Encodes a model with the given objectives, in order.
pub fn encode(m: &Cgm, objectives: &[ObjectiveSpec]) -> Result<EncodedProblem, EncodeError> {
    let mut enc = Enc::new(m);
    enc.base()?;
    let objs = objectives.iter().map(|s| enc.resolve(s)).collect::<Result<Vec<_>, _>>()?;
    Ok(enc.finish(objs))
}

/// Encodes `new` with a single evolution objective relative to a realization of
/// `old` given by its satisfied labels. `scope` restricts the elements considered.
pub fn encode_evolution(
    new: &Cgm,
    old: &Cgm,
    old_satisfied: &BTreeSet<String>,
    mode: EvolutionMode,
    scope: Option<&BTreeSet<String>>,
) -> Result<EncodedProblem, EncodeError> {
    if let Some(s) = scope {
        if let Some(bad) = s.iter().find(|l| new.element(l).is_none() && old.element(l).is_none()) {
            return Err(EncodeError::UnknownScopeLabel(bad.clone()));
        }
    }
    let in_scope = |l: &str| scope.is_none_or(|s| s.contains(l));
    let mut enc = Enc::new(new);
    enc.base()?;
    let prev = enc.enter(GroupTag::ObjectiveDef { id: mode.id().to_string() });
    let mut common = Vec::new();
    let mut fresh = Vec::new();
    for e in &new.elements {
        if !in_scope(&e.label) {
            continue;
        }
        if old.element(&e.label).is_some() {
            common.push(e.label.clone());
        } else {
            fresh.push(e.label.clone());
        }
    }
    let was = |l: &String| old_satisfied.contains(l);
    let hamming: Vec<(Formula, i64, i64)> =
        common.iter().map(|l| (Formula::prop(l), if was(l) { 0 } else { 1 }, if was(l) { 1 } else { 0 })).collect();
    let newly: Vec<(Formula, i64, i64)> = fresh.iter().map(|l| (Formula::prop(l), 1, 0)).collect();
    let conds = match mode {
        EvolutionMode::Hamming => hamming,
        EvolutionMode::NewElements => newly,
        EvolutionMode::Both => hamming.into_iter().chain(newly).collect(),
        EvolutionMode::Effort => {
            let tasks = enc.class.tasks.clone();
            fresh
                .iter()
                .chain(common.iter().filter(|l| !was(l)))
                .filter(|l| tasks.contains(*l))
                .map(|l| (Formula::prop(l), 1, 0))
                .collect()
        }
    };
    let expr = enc.indicator_sum(conds)?;
    enc.current = prev;
    let obj = EncodedObjective { id: mode.id().to_string(), direction: Direction::Minimize, expr };
    Ok(enc.finish(vec![obj]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::load;

    fn enc(src: &str) -> EncodedProblem {
        encode(&load(src).unwrap(), &[]).unwrap()
    }

    #[test]
    fn empty_model_is_empty() {
        let e = enc("");
        assert!(e.problem.constraints.is_empty());
        assert_eq!(e.labels.len(), 0);
    }

    #[test]
    fn leaf_has_no_closed_world_constraint() {
        let e = enc("goal G; goal T; refine R: G <- T;");
        assert!(e.groups.contains(&GroupTag::ClosedWorld { element: "G".into() }));
        assert!(!e.groups.contains(&GroupTag::ClosedWorld { element: "T".into() }));
    }

    #[test]
    fn cost_attribute_uses_three_variables() {
        let e = enc("attr cost; goal G; goal A; goal B; refine R1: G <- A; refine R2: G <- B; set A.cost sat 80; set B.cost sat 200;");
        assert_eq!(e.num_attribute_vars(), 3);
        assert_eq!(e.problem.constraints.iter().filter(|c| matches!(e.groups[c.group as usize], GroupTag::AttributeDefault { .. })).count(), 8);
    }

    #[test]
    fn empty_support_sums_to_zero() {
        let e = enc("attr cost;");
        assert_eq!(e.num_attribute_vars(), 1);
        assert_eq!(e.problem.constraints.len(), 1);
        assert_eq!(e.problem.constraints[0].expr.to_string(), "(= x0 0)");
    }

    #[test]
    fn objective_cycles_are_rejected() {
        let m = load("objective a min (b + 1); objective b min (a);").unwrap();
        assert!(matches!(encode(&m, &[ObjectiveSpec::named("a")]), Err(EncodeError::DefinitionCycle(_))));
    }

    #[test]
    fn weight_needs_penalty_and_reward() {
        let m = load("goal G;").unwrap();
        assert!(matches!(encode(&m, &[ObjectiveSpec::named("weight")]), Err(EncodeError::MissingAttribute { .. })));
    }

    #[test]
    fn encoding_is_deterministic() {
        let src = "attr c; goal G prereq+ (c < 3); goal A; goal B; refine G <- A; refine G <- B; set A.c sat 2; prefer A > B; objective o min (ite(A, c, 1));";
        let m = load(src).unwrap();
        let specs = [ObjectiveSpec::named("o"), ObjectiveSpec::named("numUnsatPrefs")];
        assert_eq!(encode(&m, &specs).unwrap().debug_dump(), encode(&m, &specs).unwrap().debug_dump());
    }
}
