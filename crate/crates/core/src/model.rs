//! Validated constrained goal models.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};

use cgm_smt::Direction;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Formula, NumRef, SugarKind, Term};
use crate::Q;

pub const PENALTY: &str = "Penalty";
pub const REWARD: &str = "Reward";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    Goal,
    Assumption,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelKind {
    Goal,
    DomainAssumption,
    Refinement,
    Attribute,
    Objective,
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LabelKind::Goal => "goal",
            LabelKind::DomainAssumption => "domain assumption",
            LabelKind::Refinement => "refinement",
            LabelKind::Attribute => "attribute",
            LabelKind::Objective => "objective",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Element {
    pub label: String,
    pub kind: ElementKind,
    pub display_name: Option<String>,
    pub prereq_pos: Formula,
    pub prereq_neg: Formula,
    /// Non-zero attribute values taken when the element is satisfied.
    pub on_sat: BTreeMap<String, Q>,
    /// Non-zero attribute values taken when the element is denied.
    pub on_deny: BTreeMap<String, Q>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Refinement {
    pub label: String,
    pub target: String,
    pub sources: Vec<String>,
    pub prereq_pos: Formula,
    pub prereq_neg: Formula,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RelationEdge {
    Contribution { src: String, dst: String },
    Mutual { a: String, b: String },
    Conflict { a: String, b: String },
    Binding { r1: String, r2: String },
}

impl RelationEdge {
    pub fn endpoints(&self) -> (&str, &str) {
        match self {
            RelationEdge::Contribution { src, dst } => (src, dst),
            RelationEdge::Mutual { a, b } | RelationEdge::Conflict { a, b } => (a, b),
            RelationEdge::Binding { r1, r2 } => (r1, r2),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Preference {
    pub preferred: String,
    pub over: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AttributeDecl {
    pub label: String,
    /// `None` means the sum over elements of their per-element values.
    pub def: Option<Term>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Predefined {
    Weight,
    NumUnsatPrefs,
    NumUnsatRequirements,
    NumSatTasks,
}

impl Predefined {
    pub const ALL: [Predefined; 4] =
        [Predefined::Weight, Predefined::NumUnsatPrefs, Predefined::NumUnsatRequirements, Predefined::NumSatTasks];

    pub fn name(self) -> &'static str {
        match self {
            Predefined::Weight => "weight",
            Predefined::NumUnsatPrefs => "numUnsatPrefs",
            Predefined::NumUnsatRequirements => "numUnsatRequirements",
            Predefined::NumSatTasks => "numSatTasks",
        }
    }

    /// Accepts the canonical name, plus `Weight` for the weight objective.
    pub fn from_name(s: &str) -> Option<Self> {
        if s == "Weight" {
            return Some(Predefined::Weight);
        }
        Self::ALL.into_iter().find(|p| p.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ObjectiveBody {
    Term(Term),
    Predefined(Predefined),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ObjectiveDecl {
    pub label: String,
    pub direction: Direction,
    pub body: ObjectiveBody,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceSpan {
    pub line: u32,
    pub col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// One statement of a model description, in source order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decl {
    pub kind: DeclKind,
    pub span: Option<SourceSpan>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DeclKind {
    Element {
        kind: ElementKind,
        label: String,
        display_name: Option<String>,
        reward: Option<Q>,
        penalty: Option<Q>,
        prereq_pos: Option<Formula>,
        prereq_neg: Option<Formula>,
    },
    Refine {
        label: Option<String>,
        target: String,
        sources: Vec<String>,
        prereq_pos: Option<Formula>,
        prereq_neg: Option<Formula>,
    },
    Edge(RelationEdge),
    Prefer(Preference),
    Attr { label: String, def: Option<Term> },
    Set { element: String, attr: String, sat: Q, deny: Option<Q> },
    Formula(Formula),
    Assert { label: String, value: bool },
    Objective { label: Option<String>, direction: Direction, body: ObjectiveBody },
}

impl DeclKind {
    /// Copy with every label and attribute name mapped through `f`.
    pub fn renamed(&self, f: &impl Fn(&str) -> String) -> DeclKind {
        let opt = |x: &Option<Formula>| x.as_ref().map(|x| x.renamed(f));
        match self {
            DeclKind::Element { kind, label, display_name, reward, penalty, prereq_pos, prereq_neg } => {
                DeclKind::Element {
                    kind: *kind,
                    label: f(label),
                    display_name: display_name.clone(),
                    reward: reward.clone(),
                    penalty: penalty.clone(),
                    prereq_pos: opt(prereq_pos),
                    prereq_neg: opt(prereq_neg),
                }
            }
            DeclKind::Refine { label, target, sources, prereq_pos, prereq_neg } => DeclKind::Refine {
                label: label.as_deref().map(f),
                target: f(target),
                sources: sources.iter().map(|s| f(s)).collect(),
                prereq_pos: opt(prereq_pos),
                prereq_neg: opt(prereq_neg),
            },
            DeclKind::Edge(e) => DeclKind::Edge(match e {
                RelationEdge::Contribution { src, dst } => RelationEdge::Contribution { src: f(src), dst: f(dst) },
                RelationEdge::Mutual { a, b } => RelationEdge::Mutual { a: f(a), b: f(b) },
                RelationEdge::Conflict { a, b } => RelationEdge::Conflict { a: f(a), b: f(b) },
                RelationEdge::Binding { r1, r2 } => RelationEdge::Binding { r1: f(r1), r2: f(r2) },
            }),
            DeclKind::Prefer(p) => DeclKind::Prefer(Preference { preferred: f(&p.preferred), over: f(&p.over) }),
            DeclKind::Attr { label, def } => DeclKind::Attr { label: f(label), def: def.as_ref().map(|t| t.renamed(f)) },
            DeclKind::Set { element, attr, sat, deny } => {
                DeclKind::Set { element: f(element), attr: f(attr), sat: sat.clone(), deny: deny.clone() }
            }
            DeclKind::Formula(x) => DeclKind::Formula(x.renamed(f)),
            DeclKind::Assert { label, value } => DeclKind::Assert { label: f(label), value: *value },
            DeclKind::Objective { label, direction, body } => DeclKind::Objective {
                label: label.as_deref().map(f),
                direction: *direction,
                body: match body {
                    ObjectiveBody::Term(t) => ObjectiveBody::Term(t.renamed(f)),
                    ObjectiveBody::Predefined(p) => ObjectiveBody::Predefined(*p),
                },
            },
        }
    }
}

impl Decl {
    pub fn new(kind: DeclKind) -> Self {
        Self { kind, span: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorCode {
    DuplicateLabel,
    UnknownReference,
    InvalidLabel,
    RefinementCycle,
    DuplicateSource,
    EmptySources,
    AssumptionRoot,
    AssumptionRefinementSourceKind,
    GoalRefinementSourceKind,
    EdgeKind,
    PreferenceKind,
    ArityError,
    DerivedAttributeValue,
    KindMismatch,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub code: ErrorCode,
    pub span: Option<SourceSpan>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.span {
            Some(s) => write!(f, "{s}: {:?}: {}", self.code, self.message),
            None => write!(f, "{:?}: {}", self.code, self.message),
        }
    }
}

/// Every violation found while building a model.
#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("invalid model ({} issue(s)): {}", .issues.len(), .issues.first().map(|i| i.to_string()).unwrap_or_default())]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn has(&self, code: ErrorCode) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown label `{0}`")]
    UnknownReference(String),
    #[error("`{label}` is a {found}, expected {expected}")]
    KindMismatch { label: String, found: LabelKind, expected: &'static str },
}

impl ModelError {
    pub fn code(&self) -> ErrorCode {
        match self {
            ModelError::UnknownReference(_) => ErrorCode::UnknownReference,
            ModelError::KindMismatch { .. } => ErrorCode::KindMismatch,
        }
    }
}

/// Roots, internals and leaves partition the elements.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub roots: BTreeSet<String>,
    pub internals: BTreeSet<String>,
    pub leaves: BTreeSet<String>,
    pub requirements: BTreeSet<String>,
    pub tasks: BTreeSet<String>,
    pub mandatory: BTreeSet<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Requirement,
    Intermediate,
    Task,
    Assumption,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[derive(Default)]
pub struct Cgm {
    pub elements: Vec<Element>,
    pub refinements: Vec<Refinement>,
    pub edges: Vec<RelationEdge>,
    pub preferences: Vec<Preference>,
    pub attributes: Vec<AttributeDecl>,
    pub objectives: Vec<ObjectiveDecl>,
    pub formulas: Vec<Formula>,
    /// Force True/False marks. Contradictory marks on one label may coexist when
    /// written in the source; [`Cgm::assert_element`] replaces them.
    pub assertions: BTreeSet<(String, bool)>,
    index: BTreeMap<String, (LabelKind, usize)>,
}


pub fn is_valid_label(s: &str) -> bool {
    if crate::dsl::is_reserved(s) {
        return false;
    }
    let mut chars = s.chars();
    let ok_rest = |c: char| c.is_ascii_alphanumeric() || c == '_';
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => chars.all(ok_rest),
        Some('_') => synthetic_index(s).is_some(),
        _ => false,
    }
}

fn synthetic_index(s: &str) -> Option<u64> {
    let digits = s.strip_prefix("_R")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Builds a model from declarations, reporting every violation.
pub fn build_model(decls: &[Decl]) -> Result<Cgm, ValidationReport> {
    Builder::default().run(decls)
}

/// Target, attribute, sat value, deny value and location of a `set`.
type PendingValue<'a> = (ValueTarget<'a>, &'a str, Q, Option<Q>, Option<SourceSpan>);

enum ValueTarget<'a> {
    Index(usize),
    Name(&'a String),
}

#[derive(Default)]
struct Builder {
    issues: Vec<Issue>,
    m: Cgm,
}

impl Builder {
    fn issue(&mut self, code: ErrorCode, span: Option<SourceSpan>, message: impl Into<String>) {
        self.issues.push(Issue { code, span, message: message.into() });
    }

    fn declare(&mut self, label: &str, kind: LabelKind, idx: usize, span: Option<SourceSpan>) {
        if !is_valid_label(label) {
            self.issue(ErrorCode::InvalidLabel, span, format!("`{label}` is not a valid identifier"));
        }
        if self.m.index.contains_key(label) {
            self.issue(ErrorCode::DuplicateLabel, span, format!("label `{label}` is declared more than once"));
        } else {
            self.m.index.insert(label.to_string(), (kind, idx));
        }
    }

    fn run(mut self, decls: &[Decl]) -> Result<Cgm, ValidationReport> {
        self.collect(decls);
        self.check_references(decls);
        if self.issues.is_empty() {
            self.check_structure(decls);
        }
        if self.issues.is_empty() {
            Ok(self.m)
        } else {
            Err(ValidationReport { issues: self.issues })
        }
    }

    fn collect(&mut self, decls: &[Decl]) {
        let mut auto_attrs: Vec<&str> = Vec::new();
        let mut pending_values: Vec<PendingValue<'_>> = Vec::new();
        let mut unlabeled: Vec<usize> = Vec::new();
        for d in decls {
            match &d.kind {
                DeclKind::Element { kind, label, display_name, reward, penalty, prereq_pos, prereq_neg } => {
                    let idx = self.m.elements.len();
                    self.declare(label, element_label_kind(*kind), idx, d.span);
                    self.m.elements.push(Element {
                        label: label.clone(),
                        kind: *kind,
                        display_name: display_name.clone(),
                        prereq_pos: canon(prereq_pos.clone().unwrap_or(Formula::Const(true))),
                        prereq_neg: canon(prereq_neg.clone().unwrap_or(Formula::Const(true))),
                        on_sat: BTreeMap::new(),
                        on_deny: BTreeMap::new(),
                    });
                    for (attr, v) in [(REWARD, reward), (PENALTY, penalty)] {
                        if let Some(v) = v {
                            if !auto_attrs.contains(&attr) {
                                auto_attrs.push(attr);
                            }
                            pending_values.push((ValueTarget::Index(idx), attr, v.clone(), None, d.span));
                        }
                    }
                }
                DeclKind::Refine { label, target, sources, prereq_pos, prereq_neg } => {
                    let idx = self.m.refinements.len();
                    match label {
                        Some(l) => self.declare(l, LabelKind::Refinement, idx, d.span),
                        None => unlabeled.push(idx),
                    }
                    self.m.refinements.push(Refinement {
                        label: label.clone().unwrap_or_default(),
                        target: target.clone(),
                        sources: sources.clone(),
                        prereq_pos: canon(prereq_pos.clone().unwrap_or(Formula::Const(true))),
                        prereq_neg: canon(prereq_neg.clone().unwrap_or(Formula::Const(true))),
                    });
                }
                DeclKind::Edge(e) => self.m.edges.push(e.clone()),
                DeclKind::Prefer(p) => self.m.preferences.push(p.clone()),
                DeclKind::Attr { label, def } => {
                    let idx = self.m.attributes.len();
                    self.declare(label, LabelKind::Attribute, idx, d.span);
                    self.m.attributes.push(AttributeDecl { label: label.clone(), def: def.clone().map(canon_term) });
                }
                DeclKind::Set { element, attr, sat, deny } => {
                    // Resolved once all elements are known.
                    pending_values.push((ValueTarget::Name(element), attr, sat.clone(), deny.clone(), d.span));
                }
                DeclKind::Formula(f) => self.m.formulas.push(canon(f.clone())),
                DeclKind::Assert { label, value } => {
                    self.m.assertions.insert((label.clone(), *value));
                }
                DeclKind::Objective { label, direction, body } => {
                    let label = match (label, body) {
                        (Some(l), _) => l.clone(),
                        (None, ObjectiveBody::Predefined(p)) => p.name().to_string(),
                        (None, ObjectiveBody::Term(_)) => String::new(),
                    };
                    let idx = self.m.objectives.len();
                    self.declare(&label, LabelKind::Objective, idx, d.span);
                    let body = match body {
                        ObjectiveBody::Term(t) => ObjectiveBody::Term(canon_term(t.clone())),
                        other => other.clone(),
                    };
                    self.m.objectives.push(ObjectiveDecl { label, direction: *direction, body });
                }
            }
        }
        for attr in auto_attrs {
            if !self.m.index.contains_key(attr) {
                let idx = self.m.attributes.len();
                self.declare(attr, LabelKind::Attribute, idx, None);
                self.m.attributes.push(AttributeDecl { label: attr.to_string(), def: None });
            }
        }
        let mut next = 1u64;
        for idx in unlabeled {
            while self.m.index.contains_key(&format!("_R{next}")) {
                next += 1;
            }
            let label = format!("_R{next}");
            next += 1;
            self.m.index.insert(label.clone(), (LabelKind::Refinement, idx));
            self.m.refinements[idx].label = label;
        }
        // Per-element attribute values, in declaration order so later writes win.
        for (target, attr, sat, deny, span) in pending_values {
            let elem = match target {
                ValueTarget::Index(i) => Some(i),
                ValueTarget::Name(name) => match self.m.index.get(name.as_str()) {
                    Some((LabelKind::Goal | LabelKind::DomainAssumption, i)) => Some(*i),
                    Some((k, _)) => {
                        let k = *k;
                        self.issue(ErrorCode::KindMismatch, span, format!("`{name}` is a {k}, expected an element"));
                        None
                    }
                    None => {
                        self.issue(ErrorCode::UnknownReference, span, format!("unknown element `{name}`"));
                        None
                    }
                },
            };
            match self.m.index.get(attr) {
                Some((LabelKind::Attribute, a)) => {
                    if self.m.attributes[*a].def.is_some() {
                        self.issue(
                            ErrorCode::DerivedAttributeValue,
                            span,
                            format!("attribute `{attr}` is defined by a term and takes no per-element values"),
                        );
                        continue;
                    }
                }
                Some((k, _)) => {
                    let k = *k;
                    self.issue(ErrorCode::KindMismatch, span, format!("`{attr}` is a {k}, expected an attribute"));
                    continue;
                }
                None => {
                    self.issue(ErrorCode::UnknownReference, span, format!("unknown attribute `{attr}`"));
                    continue;
                }
            }
            let Some(e) = elem else { continue };
            let el = &mut self.m.elements[e];
            put_nonzero(&mut el.on_sat, attr, sat);
            put_nonzero(&mut el.on_deny, attr, deny.unwrap_or_else(Q::zero));
        }
    }

    fn kind_of(&self, label: &str) -> Option<LabelKind> {
        self.m.index.get(label).map(|(k, _)| *k)
    }

    fn expect(&mut self, label: &str, span: Option<SourceSpan>, ok: fn(LabelKind) -> bool, what: &'static str) {
        match self.kind_of(label) {
            None => self.issue(ErrorCode::UnknownReference, span, format!("unknown {what} `{label}`")),
            Some(k) if !ok(k) => {
                let code = if what == "refinement" || what == "element" && k == LabelKind::Refinement {
                    ErrorCode::EdgeKind
                } else {
                    ErrorCode::KindMismatch
                };
                self.issue(code, span, format!("`{label}` is a {k}, expected {what}"))
            }
            Some(_) => {}
        }
    }

    fn check_formula(&mut self, f: &Formula, span: Option<SourceSpan>) {
        let mut props = Vec::new();
        f.for_each_prop(&mut |p| props.push(p.to_string()));
        for p in props {
            self.expect(&p, span, is_proposition, "element or refinement");
        }
        let mut refs = Vec::new();
        f.for_each_ref(&mut |r| refs.push(r.clone()));
        self.check_refs(refs, span);
        self.check_sugar(f, span);
    }

    fn check_term(&mut self, t: &Term, span: Option<SourceSpan>) {
        let mut props = Vec::new();
        t.for_each_prop(&mut |p| props.push(p.to_string()));
        for p in props {
            self.expect(&p, span, is_proposition, "element or refinement");
        }
        let mut refs = Vec::new();
        t.for_each_ref(&mut |r| refs.push(r.clone()));
        self.check_refs(refs, span);
    }

    fn check_refs(&mut self, refs: Vec<NumRef>, span: Option<SourceSpan>) {
        for r in refs {
            match r {
                NumRef::Global(n) => {
                    self.expect(&n, span, |k| matches!(k, LabelKind::Attribute | LabelKind::Objective), "numeric symbol")
                }
                NumRef::Element(e, a) => {
                    self.expect(&e, span, is_element, "element");
                    self.expect(&a, span, |k| k == LabelKind::Attribute, "attribute");
                }
            }
        }
    }

    fn check_sugar(&mut self, f: &Formula, span: Option<SourceSpan>) {
        match f {
            Formula::Sugar(k, args) => {
                let (lo, hi) = k.arity();
                if args.len() < lo || hi.is_some_and(|h| args.len() > h) {
                    self.issue(
                        ErrorCode::ArityError,
                        span,
                        format!("{} takes {} argument(s), got {}", k.name(), arity_text(*k), args.len()),
                    );
                }
            }
            Formula::Not(x) => self.check_sugar(x, span),
            Formula::And(xs) | Formula::Or(xs) => xs.iter().for_each(|x| self.check_sugar(x, span)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                self.check_sugar(a, span);
                self.check_sugar(b, span);
            }
            Formula::Const(_) | Formula::Prop(_) | Formula::Cmp(..) => {}
        }
    }

    fn check_references(&mut self, decls: &[Decl]) {
        let span_of = |pred: &dyn Fn(&DeclKind) -> bool| decls.iter().find(|d| pred(&d.kind)).and_then(|d| d.span);
        let elements = self.m.elements.clone();
        for e in &elements {
            let sp = span_of(&|k| matches!(k, DeclKind::Element { label, .. } if *label == e.label));
            self.check_formula(&e.prereq_pos, sp);
            self.check_formula(&e.prereq_neg, sp);
        }
        let refinements = self.m.refinements.clone();
        let mut rdecls = decls.iter().filter(|d| matches!(d.kind, DeclKind::Refine { .. }));
        for r in &refinements {
            let sp = rdecls.next().and_then(|d| d.span);
            self.expect(&r.target, sp, is_element, "element");
            if r.sources.is_empty() {
                self.issue(ErrorCode::EmptySources, sp, format!("refinement `{}` has no sources", r.label));
            }
            let mut seen = BTreeSet::new();
            for s in &r.sources {
                self.expect(s, sp, is_element, "element");
                if !seen.insert(s) {
                    self.issue(ErrorCode::DuplicateSource, sp, format!("`{s}` listed twice in `{}`", r.label));
                }
            }
            self.check_formula(&r.prereq_pos, sp);
            self.check_formula(&r.prereq_neg, sp);
        }
        let mut edecls = decls.iter().filter(|d| matches!(d.kind, DeclKind::Edge(_)));
        for e in self.m.edges.clone() {
            let sp = edecls.next().and_then(|d| d.span);
            let (a, b) = e.endpoints();
            if matches!(e, RelationEdge::Binding { .. }) {
                self.expect(a, sp, |k| k == LabelKind::Refinement, "refinement");
                self.expect(b, sp, |k| k == LabelKind::Refinement, "refinement");
            } else {
                self.expect(a, sp, is_element, "element");
                self.expect(b, sp, is_element, "element");
            }
        }
        let mut pdecls = decls.iter().filter(|d| matches!(d.kind, DeclKind::Prefer(_)));
        for p in self.m.preferences.clone() {
            let sp = pdecls.next().and_then(|d| d.span);
            for l in [&p.preferred, &p.over] {
                self.expect(l, sp, is_proposition, "element or refinement");
            }
        }
        for a in self.m.attributes.clone() {
            if let Some(t) = &a.def {
                let sp = span_of(&|k| matches!(k, DeclKind::Attr { label, .. } if *label == a.label));
                self.check_term(t, sp);
            }
        }
        let mut fdecls = decls.iter().filter(|d| matches!(d.kind, DeclKind::Formula(_)));
        for f in self.m.formulas.clone() {
            let sp = fdecls.next().and_then(|d| d.span);
            self.check_formula(&f, sp);
        }
        for (l, _) in self.m.assertions.clone() {
            let sp = span_of(&|k| matches!(k, DeclKind::Assert { label, .. } if *label == l));
            self.expect(&l, sp, is_element, "element");
        }
        for o in self.m.objectives.clone() {
            let sp = span_of(&|k| matches!(k, DeclKind::Objective { .. }));
            if let ObjectiveBody::Term(t) = &o.body {
                self.check_term(t, sp);
            }
        }
    }

    fn check_structure(&mut self, decls: &[Decl]) {
        let mut rdecls = decls.iter().filter(|d| matches!(d.kind, DeclKind::Refine { .. }));
        let refinements = self.m.refinements.clone();
        for r in &refinements {
            let sp = rdecls.next().and_then(|d| d.span);
            if r.sources.contains(&r.target) {
                self.issue(ErrorCode::RefinementCycle, sp, format!("`{}` refines `{}` by itself", r.label, r.target));
            }
            let target_kind = self.m.element(&r.target).map(|e| e.kind);
            let source_kinds: Vec<ElementKind> =
                r.sources.iter().filter_map(|s| self.m.element(s)).map(|e| e.kind).collect();
            match target_kind {
                Some(ElementKind::Assumption) if source_kinds.contains(&ElementKind::Goal) => self.issue(
                    ErrorCode::AssumptionRefinementSourceKind,
                    sp,
                    format!("`{}` refines domain assumption `{}` with a goal", r.label, r.target),
                ),
                Some(ElementKind::Goal) if !source_kinds.contains(&ElementKind::Goal) => self.issue(
                    ErrorCode::GoalRefinementSourceKind,
                    sp,
                    format!("`{}` refines goal `{}` without any goal source", r.label, r.target),
                ),
                _ => {}
            }
        }
        if self.issues.is_empty() {
            if let Some(cycle) = find_cycle(&self.m) {
                self.issue(
                    ErrorCode::RefinementCycle,
                    None,
                    format!("refinement cycle through {}", cycle.join(" -> ")),
                );
            }
        }
        let class = self.m.classify();
        for e in &self.m.elements {
            if e.kind == ElementKind::Assumption && class.roots.contains(&e.label) {
                let sp = decls
                    .iter()
                    .find(|d| matches!(&d.kind, DeclKind::Element { label, .. } if *label == e.label))
                    .and_then(|d| d.span);
                self.issues.push(Issue {
                    code: ErrorCode::AssumptionRoot,
                    span: sp,
                    message: format!("domain assumption `{}` is not a source of any refinement", e.label),
                });
            }
        }
        let mut pdecls = decls.iter().filter(|d| matches!(d.kind, DeclKind::Prefer(_)));
        for p in self.m.preferences.clone() {
            let sp = pdecls.next().and_then(|d| d.span);
            let ok = match (self.kind_of(&p.preferred), self.kind_of(&p.over)) {
                (Some(LabelKind::Refinement), Some(LabelKind::Refinement)) => true,
                (Some(LabelKind::Refinement), _) | (_, Some(LabelKind::Refinement)) => false,
                _ => self.m.category(&class, &p.preferred) == self.m.category(&class, &p.over),
            };
            if !ok {
                self.issue(
                    ErrorCode::PreferenceKind,
                    sp,
                    format!("`{}` and `{}` are not of the same kind", p.preferred, p.over),
                );
            }
        }
    }
}

fn arity_text(k: SugarKind) -> String {
    match k.arity() {
        (lo, Some(hi)) if lo == hi => format!("exactly {lo}"),
        (lo, _) => format!("at least {lo}"),
    }
}

fn put_nonzero(map: &mut BTreeMap<String, Q>, attr: &str, v: Q) {
    if v.is_zero() {
        map.remove(attr);
    } else {
        map.insert(attr.to_string(), v);
    }
}

fn element_label_kind(k: ElementKind) -> LabelKind {
    match k {
        ElementKind::Goal => LabelKind::Goal,
        ElementKind::Assumption => LabelKind::DomainAssumption,
    }
}

fn is_element(k: LabelKind) -> bool {
    matches!(k, LabelKind::Goal | LabelKind::DomainAssumption)
}

fn is_proposition(k: LabelKind) -> bool {
    matches!(k, LabelKind::Goal | LabelKind::DomainAssumption | LabelKind::Refinement)
}

/// Normal form used for structural equality: no unary or empty connectives.
pub fn canon(f: Formula) -> Formula {
    match f {
        Formula::Not(x) => Formula::Not(Box::new(canon(*x))),
        Formula::And(xs) | Formula::Or(xs) if xs.len() == 1 => canon(xs.into_iter().next().expect("one")),
        Formula::And(xs) if xs.is_empty() => Formula::Const(true),
        Formula::Or(xs) if xs.is_empty() => Formula::Const(false),
        Formula::And(xs) => Formula::And(xs.into_iter().map(canon).collect()),
        Formula::Or(xs) => Formula::Or(xs.into_iter().map(canon).collect()),
        Formula::Implies(a, b) => Formula::implies(canon(*a), canon(*b)),
        Formula::Iff(a, b) => Formula::iff(canon(*a), canon(*b)),
        Formula::Cmp(a, op, b) => Formula::Cmp(canon_term(a), op, canon_term(b)),
        other => other,
    }
}

pub fn canon_term(t: Term) -> Term {
    match t {
        Term::Scale(k, x) => Term::Scale(k, Box::new(canon_term(*x))),
        Term::Add(a, b) => Term::plus(canon_term(*a), canon_term(*b)),
        Term::Sub(a, b) => Term::minus(canon_term(*a), canon_term(*b)),
        Term::Ite(c, a, b) => Term::Ite(Box::new(canon(*c)), Box::new(canon_term(*a)), Box::new(canon_term(*b))),
        other => other,
    }
}

/// A cycle in the element graph induced by refinements, if any.
fn find_cycle(m: &Cgm) -> Option<Vec<String>> {
    // Edges target -> sources.
    let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in &m.refinements {
        succ.entry(r.target.as_str()).or_default().extend(r.sources.iter().map(String::as_str));
    }
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    for e in &m.elements {
        let mut stack: Vec<(&str, usize)> = vec![(e.label.as_str(), 0)];
        if state.get(e.label.as_str()).copied().unwrap_or(0) != 0 {
            continue;
        }
        state.insert(&e.label, 1);
        while let Some((node, i)) = stack.pop() {
            let next = succ.get(node).and_then(|v| v.get(i)).copied();
            match next {
                None => {
                    state.insert(node, 2);
                }
                Some(n) => {
                    stack.push((node, i + 1));
                    match state.get(n).copied().unwrap_or(0) {
                        0 => {
                            state.insert(n, 1);
                            stack.push((n, 0));
                        }
                        1 => {
                            let mut path: Vec<String> = stack.iter().map(|(s, _)| s.to_string()).collect();
                            let start = path.iter().position(|s| s == n).unwrap_or(0);
                            path.drain(..start);
                            path.push(n.to_string());
                            return Some(path);
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    None
}

impl Cgm {
    pub fn lookup(&self, label: &str) -> Option<LabelKind> {
        self.index.get(label).map(|(k, _)| *k)
    }

    pub fn element(&self, label: &str) -> Option<&Element> {
        match self.index.get(label) {
            Some((LabelKind::Goal | LabelKind::DomainAssumption, i)) => Some(&self.elements[*i]),
            _ => None,
        }
    }

    pub fn refinement(&self, label: &str) -> Option<&Refinement> {
        match self.index.get(label) {
            Some((LabelKind::Refinement, i)) => Some(&self.refinements[*i]),
            _ => None,
        }
    }

    pub fn attribute(&self, label: &str) -> Option<&AttributeDecl> {
        match self.index.get(label) {
            Some((LabelKind::Attribute, i)) => Some(&self.attributes[*i]),
            _ => None,
        }
    }

    pub fn objective(&self, label: &str) -> Option<&ObjectiveDecl> {
        match self.index.get(label) {
            Some((LabelKind::Objective, i)) => Some(&self.objectives[*i]),
            _ => None,
        }
    }

    /// Element and refinement labels, elements first, in declaration order.
    pub fn propositions(&self) -> impl Iterator<Item = &str> {
        self.elements.iter().map(|e| e.label.as_str()).chain(self.refinements.iter().map(|r| r.label.as_str()))
    }

    pub fn num_nodes(&self) -> usize {
        self.elements.len() + self.refinements.len()
    }

    /// Refinements whose target is `label`.
    pub fn refinements_of<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a Refinement> + 'a {
        self.refinements.iter().filter(move |r| r.target == label)
    }

    pub fn classify(&self) -> Classification {
        let sources: BTreeSet<&str> =
            self.refinements.iter().flat_map(|r| r.sources.iter().map(String::as_str)).collect();
        let targets: BTreeSet<&str> = self.refinements.iter().map(|r| r.target.as_str()).collect();
        let mut c = Classification::default();
        for e in &self.elements {
            let l = e.label.clone();
            if !sources.contains(l.as_str()) {
                if e.kind == ElementKind::Goal {
                    c.requirements.insert(l.clone());
                    if self.assertions.contains(&(l.clone(), true)) {
                        c.mandatory.insert(l.clone());
                    }
                }
                c.roots.insert(l);
            } else if !targets.contains(l.as_str()) {
                if e.kind == ElementKind::Goal {
                    c.tasks.insert(l.clone());
                }
                c.leaves.insert(l);
            } else {
                c.internals.insert(l);
            }
        }
        c
    }

    pub fn category(&self, class: &Classification, label: &str) -> Option<Category> {
        let e = self.element(label)?;
        Some(match e.kind {
            ElementKind::Assumption => Category::Assumption,
            ElementKind::Goal if class.roots.contains(label) => Category::Requirement,
            ElementKind::Goal if class.leaves.contains(label) => Category::Task,
            ElementKind::Goal => Category::Intermediate,
        })
    }

    /// Sets (`Some`) or clears (`None`) the user assertion on an element.
    pub fn assert_element(&self, label: &str, value: Option<bool>) -> Result<Cgm, ModelError> {
        match self.lookup(label) {
            None => return Err(ModelError::UnknownReference(label.to_string())),
            Some(k @ (LabelKind::Refinement | LabelKind::Attribute | LabelKind::Objective)) => {
                return Err(ModelError::KindMismatch { label: label.to_string(), found: k, expected: "an element" })
            }
            Some(_) => {}
        }
        let mut m = self.clone();
        m.assertions.retain(|(l, _)| l != label);
        if let Some(v) = value {
            m.assertions.insert((label.to_string(), v));
        }
        Ok(m)
    }

    /// Replaces every assertion with the given map.
    pub fn with_assertions(&self, assertions: &BTreeMap<String, bool>) -> Result<Cgm, ModelError> {
        let mut m = self.clone();
        m.assertions.clear();
        for (l, v) in assertions {
            m = m.assert_element(l, Some(*v))?;
        }
        Ok(m)
    }

    pub fn structural_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }

    /// Declarations that rebuild this model exactly.
    pub fn to_decls(&self) -> Vec<Decl> {
        let mut out = Vec::new();
        for a in &self.attributes {
            out.push(Decl::new(DeclKind::Attr { label: a.label.clone(), def: a.def.clone() }));
        }
        let opt = |f: &Formula| if *f == Formula::Const(true) { None } else { Some(f.clone()) };
        for e in &self.elements {
            let inline = |attr: &str| {
                if e.on_deny.contains_key(attr) {
                    None
                } else {
                    e.on_sat.get(attr).cloned()
                }
            };
            let (reward, penalty) = (inline(REWARD), inline(PENALTY));
            out.push(Decl::new(DeclKind::Element {
                kind: e.kind,
                label: e.label.clone(),
                display_name: e.display_name.clone(),
                reward: reward.clone(),
                penalty: penalty.clone(),
                prereq_pos: opt(&e.prereq_pos),
                prereq_neg: opt(&e.prereq_neg),
            }));
            let attrs: BTreeSet<&String> = e.on_sat.keys().chain(e.on_deny.keys()).collect();
            for attr in attrs {
                if (attr == REWARD && reward.is_some()) || (attr == PENALTY && penalty.is_some()) {
                    continue;
                }
                let deny = e.on_deny.get(attr).cloned();
                out.push(Decl::new(DeclKind::Set {
                    element: e.label.clone(),
                    attr: attr.clone(),
                    sat: e.on_sat.get(attr).cloned().unwrap_or_else(Q::zero),
                    deny,
                }));
            }
        }
        for r in &self.refinements {
            out.push(Decl::new(DeclKind::Refine {
                label: Some(r.label.clone()),
                target: r.target.clone(),
                sources: r.sources.clone(),
                prereq_pos: opt(&r.prereq_pos),
                prereq_neg: opt(&r.prereq_neg),
            }));
        }
        out.extend(self.edges.iter().cloned().map(|e| Decl::new(DeclKind::Edge(e))));
        out.extend(self.preferences.iter().cloned().map(|p| Decl::new(DeclKind::Prefer(p))));
        out.extend(self.formulas.iter().cloned().map(|f| Decl::new(DeclKind::Formula(f))));
        for (label, value) in &self.assertions {
            out.push(Decl::new(DeclKind::Assert { label: label.clone(), value: *value }));
        }
        for o in &self.objectives {
            let label = match o.body {
                ObjectiveBody::Predefined(p) if p.name() == o.label => None,
                _ => Some(o.label.clone()),
            };
            out.push(Decl::new(DeclKind::Objective { label, direction: o.direction, body: o.body.clone() }));
        }
        out
    }
}
