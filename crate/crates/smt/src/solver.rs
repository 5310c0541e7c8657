//! DPLL(T): Tseitin clausification, atom normalization, and the arithmetic theory.

use std::collections::{BTreeMap, HashMap};

use crate::budget::Budget;
use crate::expr::{BoolExpr, BoolVar, CmpOp, LinExpr, Problem, RealVar};
use crate::sat::{Lit, SatConfig, SatResult, SatSolver, Theory, Var};
use crate::scalar::{DeltaValue, Scalar};
use crate::simplex::{OptResult, Simplex};

#[derive(Clone, Debug)]
struct Atom<S> {
    svar: usize,
    /// Positive literal means `svar ≤ bound`; otherwise `svar ≥ bound`.
    upper: bool,
    bound: S,
}

/// Linear real arithmetic as a [`Theory`].
pub struct LraTheory<S> {
    pub simplex: Simplex<S>,
    atoms: Vec<Option<Atom<S>>>,
    processed: usize,
}

impl<S: Scalar> LraTheory<S> {
    fn new() -> Self {
        Self { simplex: Simplex::new(), atoms: Vec::new(), processed: 0 }
    }

    fn register(&mut self, var: Var, atom: Atom<S>) {
        let i = var as usize;
        if self.atoms.len() <= i {
            self.atoms.resize(i + 1, None);
        }
        self.atoms[i] = Some(atom);
    }
}

impl<S: Scalar> Theory for LraTheory<S> {
    fn push_level(&mut self) {
        self.simplex.push_level();
    }

    fn backtrack(&mut self, level: usize, trail_len: usize) {
        self.simplex.backtrack(level);
        self.processed = self.processed.min(trail_len);
    }

    fn check(&mut self, trail: &[Lit]) -> Result<(), Vec<Lit>> {
        let mut dirty = false;
        while self.processed < trail.len() {
            let lit = trail[self.processed];
            self.processed += 1;
            let Some(Some(atom)) = self.atoms.get(lit.var() as usize) else { continue };
            let (upper, value) = match (atom.upper, lit.is_positive()) {
                (true, true) => (true, DeltaValue::exact(atom.bound.clone())),
                (true, false) => (false, DeltaValue::new(atom.bound.clone(), S::one())),
                (false, true) => (false, DeltaValue::exact(atom.bound.clone())),
                (false, false) => (true, DeltaValue::new(atom.bound.clone(), -S::one())),
            };
            let svar = atom.svar;
            self.simplex
                .assert_bound(svar, upper, value, lit)
                .map_err(|r| r.into_iter().map(|l| !l).collect::<Vec<_>>())?;
            dirty = true;
        }
        if dirty {
            self.simplex.check().map_err(|r| r.into_iter().map(|l| !l).collect())
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Debug)]
#[derive(Default)]
pub struct SolverConfig {
    pub sat: SatConfig,
    /// Guard every constraint group with a selector literal so cores can be extracted.
    pub track_groups: bool,
}


impl SolverConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { sat: SatConfig { seed, ..SatConfig::default() }, ..Self::default() }
    }
}

/// Total assignment over the problem's variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model<S> {
    pub bools: Vec<bool>,
    pub reals: Vec<S>,
}

impl<S: Scalar> Model<S> {
    pub fn bool(&self, v: BoolVar) -> bool {
        self.bools[v.0 as usize]
    }

    pub fn real(&self, v: RealVar) -> &S {
        &self.reals[v.0 as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Sat,
    /// Failed assumptions (a subset of those passed in).
    Unsat(Vec<Lit>),
    Unknown,
}

/// Extremum of an objective under the current Boolean model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Extremum<S> {
    /// `value` is the δ-free part; `attained` is false for a strict infimum/supremum.
    Finite { value: S, attained: bool },
    Unbounded,
}

/// Normalized form of `Σ cᵢ·xᵢ ⋈ k`: the leading coefficient is scaled to 1.
struct NormAtom<S> {
    form: Vec<(usize, S)>,
    op: CmpOp,
    bound: S,
}

pub struct SmtSolver<S: Scalar> {
    sat: SatSolver<LraTheory<S>>,
    num_reals: u32,
    bool_vars: Vec<Var>,
    forms: HashMap<Vec<(usize, S)>, usize>,
    atoms: HashMap<(usize, bool, S), Var>,
    atoms_of: HashMap<usize, Vec<(bool, S, Var)>>,
    defs: HashMap<BoolExpr<S>, Lit>,
    selectors: BTreeMap<u32, Lit>,
    true_lit: Lit,
    track_groups: bool,
}

/// The bound a literal over a bound atom imposes: direction and δ-value.
fn lit_bound<S: Scalar>(positive: bool, upper: bool, bound: &S) -> (bool, DeltaValue<S>) {
    match (upper, positive) {
        (true, true) => (true, DeltaValue::exact(bound.clone())),
        (true, false) => (false, DeltaValue::new(bound.clone(), S::one())),
        (false, true) => (false, DeltaValue::exact(bound.clone())),
        (false, false) => (true, DeltaValue::new(bound.clone(), -S::one())),
    }
}

/// Binary clauses relating two atoms over the same variable: implications
/// between bounds of one direction and exclusions between incompatible ones.
fn bound_axioms<S: Scalar>(a: (Lit, bool, &S), b: (Lit, bool, &S), out: &mut Vec<[Lit; 2]>) {
    for pa in [true, false] {
        for pb in [true, false] {
            let la = if pa { a.0 } else { !a.0 };
            let lb = if pb { b.0 } else { !b.0 };
            let (ua, va) = lit_bound(pa, a.1, a.2);
            let (ub, vb) = lit_bound(pb, b.1, b.2);
            let clause = match (ua, ub) {
                (true, true) if va <= vb => [!la, lb],
                (true, true) if vb <= va => [!lb, la],
                (false, false) if va >= vb => [!la, lb],
                (false, false) if vb >= va => [!lb, la],
                (true, false) if va < vb => [!la, !lb],
                (false, true) if vb < va => [!la, !lb],
                _ => continue,
            };
            if !out.iter().any(|c| c == &clause || c == &[clause[1], clause[0]]) {
                out.push(clause);
            }
        }
    }
}

impl<S: Scalar> SmtSolver<S> {
    pub fn new(problem: &Problem<S>, config: SolverConfig) -> Self {
        let mut theory = LraTheory::new();
        for _ in 0..problem.num_reals {
            theory.simplex.new_var();
        }
        let mut sat = SatSolver::new(theory, config.sat);
        let bool_vars: Vec<Var> = (0..problem.num_bools).map(|_| sat.new_var()).collect();
        let t = sat.new_var();
        let true_lit = Lit::pos(t);
        sat.add_clause(&[true_lit]);
        let mut s = Self {
            sat,
            num_reals: problem.num_reals,
            bool_vars,
            forms: HashMap::new(),
            atoms: HashMap::new(),
            atoms_of: HashMap::new(),
            defs: HashMap::new(),
            selectors: BTreeMap::new(),
            true_lit,
            track_groups: config.track_groups,
        };
        for c in &problem.constraints {
            s.assert_in_group(c.group, &c.expr);
        }
        s
    }

    pub fn bool_lit(&self, v: BoolVar) -> Lit {
        Lit::pos(self.bool_vars[v.0 as usize])
    }

    pub fn num_sat_vars(&self) -> usize {
        self.sat.num_vars()
    }

    pub fn num_clauses(&self) -> usize {
        self.sat.num_clauses()
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn stats(&self) -> crate::sat::Stats {
        self.sat.stats
    }

    /// Selector literals of the constraint groups, when group tracking is on.
    pub fn selectors(&self) -> &BTreeMap<u32, Lit> {
        &self.selectors
    }

    pub fn fresh_lit(&mut self) -> Lit {
        Lit::pos(self.sat.new_var())
    }

    pub fn add_clause(&mut self, lits: &[Lit]) {
        self.sat.add_clause(lits);
    }

    /// Adds `expr` as a permanent constraint outside any group.
    pub fn assert(&mut self, expr: &BoolExpr<S>) {
        let mut clauses = Vec::new();
        self.top_level(expr, &mut Vec::new(), &mut clauses);
        for c in clauses {
            self.sat.add_clause(&c);
        }
    }

    fn assert_in_group(&mut self, group: u32, expr: &BoolExpr<S>) {
        let mut clauses = Vec::new();
        self.top_level(expr, &mut Vec::new(), &mut clauses);
        let guard = if self.track_groups {
            let sel = match self.selectors.get(&group) {
                Some(l) => *l,
                None => {
                    let l = self.fresh_lit();
                    self.selectors.insert(group, l);
                    l
                }
            };
            Some(!sel)
        } else {
            None
        };
        for mut c in clauses {
            if let Some(g) = guard {
                c.push(g);
            }
            self.sat.add_clause(&c);
        }
    }

    /// Clauses for `prefix ∨ expr`, flattening the top-level structure.
    fn top_level(&mut self, expr: &BoolExpr<S>, prefix: &mut Vec<Lit>, out: &mut Vec<Vec<Lit>>) {
        match expr {
            BoolExpr::Const(true) => {}
            BoolExpr::Const(false) => out.push(prefix.clone()),
            BoolExpr::And(es) if prefix.is_empty() => {
                for e in es {
                    self.top_level(e, prefix, out);
                }
            }
            BoolExpr::Or(es) => {
                let n = prefix.len();
                for e in es {
                    let l = self.lit_for(e);
                    prefix.push(l);
                }
                out.push(prefix.clone());
                prefix.truncate(n);
            }
            BoolExpr::Implies(a, b) => {
                let n = prefix.len();
                match a.as_ref() {
                    BoolExpr::And(xs) => {
                        for x in xs {
                            let l = self.lit_for(x);
                            prefix.push(!l);
                        }
                    }
                    other => {
                        let l = self.lit_for(other);
                        prefix.push(!l);
                    }
                }
                self.top_level(b, prefix, out);
                prefix.truncate(n);
            }
            BoolExpr::Iff(a, b) if prefix.is_empty() => {
                let la = self.lit_for(a);
                let lb = self.lit_for(b);
                out.push(vec![!la, lb]);
                out.push(vec![la, !lb]);
            }
            BoolExpr::Not(inner) => match inner.as_ref() {
                BoolExpr::And(es) => {
                    let n = prefix.len();
                    for e in es {
                        let l = self.lit_for(e);
                        prefix.push(!l);
                    }
                    out.push(prefix.clone());
                    prefix.truncate(n);
                }
                BoolExpr::Or(es) if prefix.is_empty() => {
                    for e in es {
                        self.top_level(&BoolExpr::not(e.clone()), prefix, out);
                    }
                }
                _ => {
                    let l = self.lit_for(expr);
                    let mut c = prefix.clone();
                    c.push(l);
                    out.push(c);
                }
            },
            BoolExpr::Cmp(_, CmpOp::Eq) if prefix.is_empty() => {
                let (le, ge) = self.eq_parts(expr);
                out.push(vec![le]);
                out.push(vec![ge]);
            }
            _ => {
                let l = self.lit_for(expr);
                let mut c = prefix.clone();
                c.push(l);
                out.push(c);
            }
        }
    }

    fn eq_parts(&mut self, expr: &BoolExpr<S>) -> (Lit, Lit) {
        let BoolExpr::Cmp(e, _) = expr else { unreachable!("equality atom") };
        let le = self.lit_for(&BoolExpr::Cmp(e.clone(), CmpOp::Le));
        let ge = self.lit_for(&BoolExpr::Cmp(e.clone(), CmpOp::Ge));
        (le, ge)
    }

    /// Literal equivalent to `expr`, introducing definitions as needed.
    pub fn lit_for(&mut self, expr: &BoolExpr<S>) -> Lit {
        match expr {
            BoolExpr::Const(true) => return self.true_lit,
            BoolExpr::Const(false) => return !self.true_lit,
            BoolExpr::Var(v) => return self.bool_lit(*v),
            BoolExpr::Not(e) => return !self.lit_for(e),
            BoolExpr::Cmp(e, op) if *op != CmpOp::Eq => return self.atom_lit(e, *op),
            _ => {}
        }
        if let Some(l) = self.defs.get(expr) {
            return *l;
        }
        let t = self.fresh_lit();
        match expr {
            BoolExpr::And(es) | BoolExpr::Or(es) => {
                let is_and = matches!(expr, BoolExpr::And(_));
                let ls: Vec<Lit> = es.iter().map(|e| self.lit_for(e)).collect();
                // And: t ↔ ∧ls.  Or: ¬t ↔ ∧¬ls.
                let (head, body): (Lit, Vec<Lit>) =
                    if is_and { (t, ls) } else { (!t, ls.into_iter().map(|l| !l).collect()) };
                let mut big = vec![head];
                for &l in &body {
                    self.sat.add_clause(&[!head, l]);
                    big.push(!l);
                }
                self.sat.add_clause(&big);
            }
            BoolExpr::Implies(a, b) => {
                let la = self.lit_for(a);
                let lb = self.lit_for(b);
                self.sat.add_clause(&[!t, !la, lb]);
                self.sat.add_clause(&[t, la]);
                self.sat.add_clause(&[t, !lb]);
            }
            BoolExpr::Iff(a, b) => {
                let la = self.lit_for(a);
                let lb = self.lit_for(b);
                self.sat.add_clause(&[!t, !la, lb]);
                self.sat.add_clause(&[!t, la, !lb]);
                self.sat.add_clause(&[t, la, lb]);
                self.sat.add_clause(&[t, !la, !lb]);
            }
            BoolExpr::Cmp(_, _) => {
                let (le, ge) = self.eq_parts(expr);
                self.sat.add_clause(&[!t, le]);
                self.sat.add_clause(&[!t, ge]);
                self.sat.add_clause(&[t, !le, !ge]);
            }
            _ => unreachable!("handled above"),
        }
        self.defs.insert(expr.clone(), t);
        t
    }

    fn normalize(&mut self, e: &LinExpr<S>, op: CmpOp) -> Result<NormAtom<S>, bool> {
        if e.is_constant() {
            return Err(op.holds(e.constant_term(), &S::zero()));
        }
        let lead = e.terms()[0].1.clone();
        let form: Vec<(usize, S)> =
            e.terms().iter().map(|(v, c)| (v.0 as usize, c.clone() / lead.clone())).collect();
        let bound = -(e.constant_term().clone()) / lead.clone();
        let op = if lead.is_negative() {
            match op {
                CmpOp::Lt => CmpOp::Gt,
                CmpOp::Le => CmpOp::Ge,
                CmpOp::Ge => CmpOp::Le,
                CmpOp::Gt => CmpOp::Lt,
                CmpOp::Eq => CmpOp::Eq,
            }
        } else {
            op
        };
        Ok(NormAtom { form, op, bound })
    }

    fn form_var(&mut self, form: Vec<(usize, S)>) -> usize {
        if form.len() == 1 {
            return form[0].0;
        }
        if let Some(&v) = self.forms.get(&form) {
            return v;
        }
        let v = self.sat.theory.simplex.add_row(&form);
        self.forms.insert(form, v);
        v
    }

    fn bound_atom(&mut self, svar: usize, upper: bool, bound: S) -> Lit {
        let key = (svar, upper, bound);
        if let Some(&v) = self.atoms.get(&key) {
            return Lit::pos(v);
        }
        let v = self.sat.new_var();
        // Bound atoms are mostly fixed by propagation; guessing them early
        // only produces theory conflicts.
        self.sat.decide_late(v);
        self.sat.theory.register(v, Atom { svar, upper, bound: key.2.clone() });
        let others = self.atoms_of.entry(svar).or_default();
        let mut axioms = Vec::new();
        for (up, b, w) in others.iter() {
            bound_axioms((Lit::pos(v), upper, &key.2), (Lit::pos(*w), *up, b), &mut axioms);
        }
        others.push((upper, key.2.clone(), v));
        self.atoms.insert(key, v);
        for c in axioms {
            self.sat.add_clause(&c);
        }
        Lit::pos(v)
    }

    fn atom_lit(&mut self, e: &LinExpr<S>, op: CmpOp) -> Lit {
        let n = match self.normalize(e, op) {
            Ok(n) => n,
            Err(true) => return self.true_lit,
            Err(false) => return !self.true_lit,
        };
        let svar = self.form_var(n.form);
        match n.op {
            CmpOp::Le => self.bound_atom(svar, true, n.bound),
            CmpOp::Ge => self.bound_atom(svar, false, n.bound),
            CmpOp::Lt => !self.bound_atom(svar, false, n.bound),
            CmpOp::Gt => !self.bound_atom(svar, true, n.bound),
            CmpOp::Eq => unreachable!("equalities are split before reaching atoms"),
        }
    }

    pub fn solve(&mut self, assumptions: &[Lit], budget: &Budget) -> Verdict {
        match self.sat.solve(assumptions, budget) {
            SatResult::Sat => Verdict::Sat,
            SatResult::Unsat(core) => Verdict::Unsat(core),
            SatResult::Unknown => Verdict::Unknown,
        }
    }

    /// Reads the model of the last `Sat` answer.
    pub fn model(&self) -> Model<S> {
        let bools = self.bool_vars.iter().map(|&v| self.sat.model_value(v)).collect();
        let simplex = &self.sat.theory.simplex;
        let delta = simplex.concrete_delta();
        let reals = (0..self.num_reals as usize).map(|v| simplex.value(v).materialize(&delta)).collect();
        Model { bools, reals }
    }

    pub fn lit_value(&self, l: Lit) -> bool {
        self.sat.model_value(l.var()) == l.is_positive()
    }

    /// Minimizes `obj` over the polytope of the last `Sat` answer's Boolean model.
    /// The model read afterwards realizes the extremum (up to the chosen δ).
    pub fn minimize_current(&mut self, obj: &LinExpr<S>) -> Extremum<S> {
        if obj.is_constant() {
            return Extremum::Finite { value: obj.constant_term().clone(), attained: true };
        }
        let lead = obj.terms()[0].1.clone();
        let form: Vec<(usize, S)> =
            obj.terms().iter().map(|(v, c)| (v.0 as usize, c.clone() / lead.clone())).collect();
        let svar = if form.len() == 1 {
            form[0].0
        } else {
            match self.forms.get(&form) {
                Some(&v) => v,
                None => {
                    let v = self.sat.theory.simplex.add_row(&form);
                    self.forms.insert(form, v);
                    v
                }
            }
        };
        let minimize = lead.is_positive();
        match self.sat.theory.simplex.optimize(svar, minimize) {
            OptResult::Unbounded => Extremum::Unbounded,
            OptResult::Optimal(v) => {
                let scaled = v.scale(&lead);
                Extremum::Finite {
                    value: scaled.real + obj.constant_term().clone(),
                    attained: scaled.delta.is_zero(),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::CmpOp;
    use num_rational::BigRational;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn contradictory_bounds_are_unsat() {
        let mut p = Problem::new(0, 1);
        let x = LinExpr::var(RealVar(0));
        p.push(0, BoolExpr::cmp(&x, CmpOp::Ge, &LinExpr::constant(q(3))));
        p.push(1, BoolExpr::cmp(&x, CmpOp::Lt, &LinExpr::constant(q(3))));
        let mut s = SmtSolver::new(&p, SolverConfig::default());
        assert!(matches!(s.solve(&[], &Budget::unlimited()), Verdict::Unsat(_)));
    }

    #[test]
    fn strict_bounds_get_concrete_witness() {
        let mut p = Problem::new(1, 2);
        let x = LinExpr::var(RealVar(0));
        let y = LinExpr::var(RealVar(1));
        p.push(0, BoolExpr::cmp(&x, CmpOp::Gt, &LinExpr::constant(q(1))));
        p.push(0, BoolExpr::cmp(&x.add(&y), CmpOp::Lt, &LinExpr::constant(q(2))));
        p.push(0, BoolExpr::cmp(&y, CmpOp::Ge, &LinExpr::zero()));
        p.push(
            0,
            BoolExpr::iff(BoolExpr::var(BoolVar(0)), BoolExpr::cmp(&y, CmpOp::Eq, &LinExpr::zero())),
        );
        let mut s = SmtSolver::new(&p, SolverConfig::default());
        assert_eq!(s.solve(&[], &Budget::unlimited()), Verdict::Sat);
        let m = s.model();
        assert!(p.is_satisfied_by(&m.bools, &m.reals), "{m:?}");
    }
}
