//! Optimization, enumeration and core extraction on top of [`SmtSolver`].

use std::collections::BTreeSet;

use crate::budget::Budget;
use crate::expr::{BoolExpr, BoolVar, CmpOp, Direction, LinExpr, Problem};
use crate::sat::Lit;
use crate::scalar::Scalar;
use crate::solver::{Extremum, Model, SmtSolver, SolverConfig, Verdict};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Objective<S> {
    pub expr: LinExpr<S>,
    pub direction: Direction,
}

impl<S: Scalar> Objective<S> {
    pub fn minimize(expr: LinExpr<S>) -> Self {
        Self { expr, direction: Direction::Minimize }
    }

    pub fn maximize(expr: LinExpr<S>) -> Self {
        Self { expr, direction: Direction::Maximize }
    }

    fn as_min(&self) -> LinExpr<S> {
        match self.direction {
            Direction::Minimize => self.expr.clone(),
            Direction::Maximize => self.expr.scale(&-S::one()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OptValue<S> {
    pub value: S,
    pub attained: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome<S> {
    /// `values[i]` is the optimum of objective `i`, in its own direction.
    Sat { model: Model<S>, values: Vec<OptValue<S>> },
    Unsat,
    /// Objective `index` has no finite optimum once the previous ones are fixed.
    Unbounded { index: usize, model: Model<S>, values: Vec<OptValue<S>> },
    /// Limits hit; `values` holds the objective values of `best`, whose leading
    /// `completed` entries are proven optimal.
    Budget { best: Option<Model<S>>, values: Vec<S>, completed: usize },
}

impl<S: Scalar> Outcome<S> {
    pub fn model(&self) -> Option<&Model<S>> {
        match self {
            Outcome::Sat { model, .. } | Outcome::Unbounded { model, .. } => Some(model),
            Outcome::Budget { best, .. } => best.as_ref(),
            Outcome::Unsat => None,
        }
    }
}

/// Satisfiability check of all constraints.
pub fn check<S: Scalar>(problem: &Problem<S>, config: &SolverConfig, budget: &Budget) -> Outcome<S> {
    optimize(problem, &[], config, budget)
}

/// Lexicographic optimization by linear search, one objective at a time.
pub fn optimize<S: Scalar>(
    problem: &Problem<S>,
    objectives: &[Objective<S>],
    config: &SolverConfig,
    budget: &Budget,
) -> Outcome<S> {
    let mut solver = SmtSolver::new(problem, SolverConfig { track_groups: false, ..config.clone() });
    optimize_with(&mut solver, objectives, budget)
}

fn eval_all<S: Scalar>(objectives: &[Objective<S>], m: &Model<S>) -> Vec<S> {
    objectives.iter().map(|o| o.expr.eval(&m.reals)).collect()
}

/// Runs the lexicographic loop on an existing solver. Stage optima are asserted
/// permanently, so the solver is left constrained to the optimal set.
pub fn optimize_with<S: Scalar>(
    solver: &mut SmtSolver<S>,
    objectives: &[Objective<S>],
    budget: &Budget,
) -> Outcome<S> {
    match solver.solve(&[], budget) {
        Verdict::Sat => {}
        Verdict::Unsat(_) => return Outcome::Unsat,
        Verdict::Unknown => return Outcome::Budget { best: None, values: Vec::new(), completed: 0 },
    }
    let mut best = solver.model();
    let mut values: Vec<OptValue<S>> = Vec::new();
    for (index, obj) in objectives.iter().enumerate() {
        let expr = obj.as_min();
        let act = solver.fresh_lit();
        let mut incumbent: Option<OptValue<S>> = None;
        // Proven strict lower bound on the objective, once a probe fails.
        let mut lower: Option<S> = None;
        let mut gallop = S::one();
        // Alternates probes below the incumbent (galloping, then bisection
        // once a lower bound is known) with plain improvement steps; the
        // plain steps alone guarantee termination.
        let mut probe_next = true;
        let mut stale_probe: Option<Lit> = None;
        loop {
            match solver.minimize_current(&expr) {
                Extremum::Unbounded => {
                    let model = solver.model();
                    return Outcome::Unbounded { index, model, values };
                }
                Extremum::Finite { value, attained } => {
                    let improves = match &incumbent {
                        None => true,
                        Some(inc) => value < inc.value || (value == inc.value && attained && !inc.attained),
                    };
                    if improves {
                        best = solver.model();
                        incumbent = Some(OptValue { value: value.clone(), attained });
                    }
                }
            }
            // Adding clauses resets the assignment, so this waits until the model is read.
            if let Some(p) = stale_probe.take() {
                solver.add_clause(&[!p]);
            }
            let inc = incumbent.clone().expect("incumbent set");
            let verdict = loop {
                if probe_next {
                    let target = match &lower {
                        Some(lb) => (lb.clone() + inc.value.clone()) / <S as Scalar>::from_i64(2),
                        None => inc.value.clone() - gallop.clone(),
                    };
                    let probe = solver.fresh_lit();
                    let bound = BoolExpr::cmp(&expr, CmpOp::Le, &LinExpr::constant(target.clone()));
                    let l = solver.lit_for(&bound);
                    solver.add_clause(&[!probe, l]);
                    let v = solver.solve(&[act, probe], budget);
                    match v {
                        Verdict::Sat => {
                            gallop = gallop.clone() + gallop.clone();
                            stale_probe = Some(probe);
                            break Verdict::Sat;
                        }
                        Verdict::Unsat(_) => {
                            solver.add_clause(&[!probe]);
                            lower = Some(target);
                            probe_next = false;
                        }
                        Verdict::Unknown => break Verdict::Unknown,
                    }
                } else {
                    let op = if inc.attained { CmpOp::Lt } else { CmpOp::Le };
                    let bound = BoolExpr::cmp(&expr, op, &LinExpr::constant(inc.value.clone()));
                    let l = solver.lit_for(&bound);
                    solver.add_clause(&[!act, l]);
                    probe_next = true;
                    break solver.solve(&[act], budget);
                }
            };
            match verdict {
                Verdict::Sat => {}
                Verdict::Unsat(_) => break,
                Verdict::Unknown => {
                    let vals = eval_all(objectives, &best);
                    return Outcome::Budget { best: Some(best), values: vals, completed: index };
                }
            }
        }
        solver.add_clause(&[!act]);
        let inc = incumbent.expect("at least one model per stage");
        log::debug!("objective {index}: optimum {} attained={}", inc.value, inc.attained);
        let reported = match obj.direction {
            Direction::Minimize => inc.value.clone(),
            Direction::Maximize => -inc.value.clone(),
        };
        values.push(OptValue { value: reported, attained: inc.attained });
        if !inc.attained {
            // Later objectives cannot be fixed at an unattained value.
            let model = best;
            return Outcome::Sat { model, values };
        }
        let fix = BoolExpr::cmp(&expr, CmpOp::Eq, &LinExpr::constant(inc.value));
        solver.assert(&fix);
        if index + 1 < objectives.len() {
            match solver.solve(&[], budget) {
                Verdict::Sat => {}
                Verdict::Unsat(_) => unreachable!("optimum witnessed by incumbent model"),
                Verdict::Unknown => {
                    let vals = eval_all(objectives, &best);
                    return Outcome::Budget { best: Some(best), values: vals, completed: index + 1 };
                }
            }
        }
    }
    Outcome::Sat { model: best, values }
}

/// Lazily enumerates models that differ on `projection`.
pub struct Enumerator<S: Scalar> {
    solver: SmtSolver<S>,
    projection: Vec<BoolVar>,
    budget: Budget,
    done: bool,
    exhausted: bool,
}

impl<S: Scalar> Enumerator<S> {
    pub fn new(problem: &Problem<S>, projection: Vec<BoolVar>, config: &SolverConfig, budget: Budget) -> Self {
        let solver = SmtSolver::new(problem, SolverConfig { track_groups: false, ..config.clone() });
        Self { solver, projection, budget, done: false, exhausted: false }
    }

    /// True once the stream ended because no further model exists.
    pub fn exhausted(&self) -> bool {
        self.exhausted
    }
}

impl<S: Scalar> Iterator for Enumerator<S> {
    type Item = Model<S>;

    fn next(&mut self) -> Option<Model<S>> {
        if self.done {
            return None;
        }
        match self.solver.solve(&[], &self.budget) {
            Verdict::Sat => {}
            Verdict::Unsat(_) => {
                self.done = true;
                self.exhausted = true;
                return None;
            }
            Verdict::Unknown => {
                self.done = true;
                return None;
            }
        }
        let model = self.solver.model();
        let block: Vec<Lit> = self
            .projection
            .iter()
            .map(|&v| {
                let l = self.solver.bool_lit(v);
                if model.bool(v) {
                    !l
                } else {
                    l
                }
            })
            .collect();
        if block.is_empty() {
            self.done = true;
            self.exhausted = true;
        } else {
            self.solver.add_clause(&block);
        }
        Some(model)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CoreOutcome {
    /// Group-minimal unsatisfiable subset of groups, sorted.
    Core(Vec<u32>),
    Satisfiable,
    Budget,
}

/// Deletion-based minimal unsatisfiable subset over constraint groups.
pub fn unsat_core<S: Scalar>(problem: &Problem<S>, config: &SolverConfig, budget: &Budget) -> CoreOutcome {
    let mut solver = SmtSolver::new(problem, SolverConfig { track_groups: true, ..config.clone() });
    let selectors: Vec<(u32, Lit)> = solver.selectors().iter().map(|(g, l)| (*g, *l)).collect();
    let group_of = |l: Lit| selectors.iter().find(|(_, s)| *s == l).map(|(g, _)| *g);
    let all: Vec<Lit> = selectors.iter().map(|(_, l)| *l).collect();
    let mut core: BTreeSet<Lit> = match solver.solve(&all, budget) {
        Verdict::Sat => return CoreOutcome::Satisfiable,
        Verdict::Unknown => return CoreOutcome::Budget,
        Verdict::Unsat(failed) => failed.into_iter().collect(),
    };
    let mut pending: Vec<Lit> = core.iter().copied().collect();
    while let Some(candidate) = pending.pop() {
        if !core.contains(&candidate) {
            continue;
        }
        let trial: Vec<Lit> = core.iter().copied().filter(|&l| l != candidate).collect();
        match solver.solve(&trial, budget) {
            Verdict::Sat => {}
            Verdict::Unsat(failed) => {
                core = failed.into_iter().collect();
            }
            Verdict::Unknown => return CoreOutcome::Budget,
        }
    }
    let mut groups: Vec<u32> = core.into_iter().filter_map(group_of).collect();
    groups.sort_unstable();
    CoreOutcome::Core(groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::RealVar;
    use num_rational::BigRational;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn disjunction_has_three_models() {
        let mut p: Problem<BigRational> = Problem::new(2, 0);
        p.push(0, BoolExpr::Or(vec![BoolExpr::var(BoolVar(0)), BoolExpr::var(BoolVar(1))]));
        let e = Enumerator::new(&p, vec![BoolVar(0), BoolVar(1)], &SolverConfig::default(), Budget::unlimited());
        assert_eq!(e.count(), 3);
    }

    #[test]
    fn guarded_costs_minimize() {
        // a → x = 5, ¬a → x = 0, b → y = 3, ¬b → y = 0, a ∨ b; minimize x + y.
        let mut p = Problem::new(2, 2);
        let (a, b) = (BoolExpr::var(BoolVar(0)), BoolExpr::var(BoolVar(1)));
        let (x, y) = (LinExpr::var(RealVar(0)), LinExpr::var(RealVar(1)));
        let k = |n| LinExpr::constant(q(n));
        p.push(0, BoolExpr::implies(a.clone(), BoolExpr::cmp(&x, CmpOp::Eq, &k(5))));
        p.push(0, BoolExpr::implies(BoolExpr::not(a.clone()), BoolExpr::cmp(&x, CmpOp::Eq, &k(0))));
        p.push(0, BoolExpr::implies(b.clone(), BoolExpr::cmp(&y, CmpOp::Eq, &k(3))));
        p.push(0, BoolExpr::implies(BoolExpr::not(b.clone()), BoolExpr::cmp(&y, CmpOp::Eq, &k(0))));
        p.push(0, BoolExpr::Or(vec![a, b]));
        let objs = [Objective::minimize(x.add(&y)), Objective::maximize(x.clone())];
        match optimize(&p, &objs, &SolverConfig::default(), &Budget::unlimited()) {
            Outcome::Sat { values, model } => {
                assert_eq!(values[0].value, q(3));
                assert_eq!(values[1].value, q(0));
                assert!(p.is_satisfied_by(&model.bools, &model.reals));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn core_of_direct_contradiction() {
        let mut p: Problem<BigRational> = Problem::new(2, 0);
        p.push(0, BoolExpr::var(BoolVar(0)));
        p.push(1, BoolExpr::var(BoolVar(1)));
        p.push(2, BoolExpr::not(BoolExpr::var(BoolVar(0))));
        assert_eq!(unsat_core(&p, &SolverConfig::default(), &Budget::unlimited()), CoreOutcome::Core(vec![0, 2]));
    }
}
