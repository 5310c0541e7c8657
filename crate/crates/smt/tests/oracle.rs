//! Random Boolean + linear-arithmetic problems checked against exhaustive enumeration
//! with Fourier–Motzkin elimination.

use std::collections::BTreeSet;

use cgm_smt::expr::{BoolExpr, BoolVar, CmpOp, LinExpr, Problem, RealVar};
use cgm_smt::omt::{self, CoreOutcome, Enumerator, Objective, Outcome};
use cgm_smt::{rat, Budget, Rational, SolverConfig};
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

type Q = Rational;

/// `Σ coeffs·x + k ⋈ 0` with ⋈ ∈ {<, ≤}.
#[derive(Clone, Debug)]
struct Ineq {
    coeffs: Vec<Q>,
    k: Q,
    strict: bool,
}

fn ineqs_of(e: &LinExpr<Q>, op: CmpOp, truth: bool, n: usize) -> Vec<Ineq> {
    let mut coeffs = vec![Q::zero(); n];
    for (v, c) in e.terms() {
        coeffs[v.0 as usize] = c.clone();
    }
    let k = e.constant_term().clone();
    let le = |s: bool| Ineq { coeffs: coeffs.clone(), k: k.clone(), strict: s };
    let ge = |s: bool| Ineq { coeffs: coeffs.iter().map(|c| -c.clone()).collect(), k: -k.clone(), strict: s };
    match (op, truth) {
        (CmpOp::Le, true) | (CmpOp::Gt, false) => vec![le(false)],
        (CmpOp::Lt, true) | (CmpOp::Ge, false) => vec![le(true)],
        (CmpOp::Ge, true) | (CmpOp::Lt, false) => vec![ge(false)],
        (CmpOp::Gt, true) | (CmpOp::Le, false) => vec![ge(true)],
        (CmpOp::Eq, true) => vec![le(false), ge(false)],
        (CmpOp::Eq, false) => unreachable!("disequalities are split by the caller"),
    }
}

/// Eliminates variable `v`; the result no longer mentions it.
fn eliminate(sys: Vec<Ineq>, v: usize) -> Vec<Ineq> {
    let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
    for i in sys {
        if i.coeffs[v].is_positive() {
            pos.push(i);
        } else if i.coeffs[v].is_negative() {
            neg.push(i);
        } else {
            rest.push(i);
        }
    }
    for p in &pos {
        for n in &neg {
            let a = p.coeffs[v].clone();
            let b = -n.coeffs[v].clone();
            let coeffs = p.coeffs.iter().zip(&n.coeffs).map(|(x, y)| x * &b + y * &a).collect();
            rest.push(Ineq { coeffs, k: &p.k * &b + &n.k * &a, strict: p.strict || n.strict });
        }
    }
    rest
}

fn feasible(mut sys: Vec<Ineq>, n: usize) -> bool {
    for v in 0..n {
        sys = eliminate(sys, v);
    }
    sys.iter().all(|i| if i.strict { i.k.is_negative() } else { !i.k.is_positive() })
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Inf {
    Empty,
    Unbounded,
    Value(Q, bool),
}

/// Infimum of `obj` over the system, projecting onto an extra variable `t = obj`.
fn infimum(sys: &[Ineq], obj: &LinExpr<Q>, n: usize) -> Inf {
    let mut ext: Vec<Ineq> = sys
        .iter()
        .map(|i| {
            let mut c = i.coeffs.clone();
            c.push(Q::zero());
            Ineq { coeffs: c, k: i.k.clone(), strict: i.strict }
        })
        .collect();
    let mut t_eq = vec![Q::zero(); n + 1];
    for (v, c) in obj.terms() {
        t_eq[v.0 as usize] = c.clone();
    }
    t_eq[n] = -Q::one();
    let k = obj.constant_term().clone();
    ext.push(Ineq { coeffs: t_eq.clone(), k: k.clone(), strict: false });
    ext.push(Ineq { coeffs: t_eq.iter().map(|c| -c.clone()).collect(), k: -k, strict: false });
    for v in 0..n {
        ext = eliminate(ext, v);
    }
    let mut lower: Option<(Q, bool)> = None;
    for i in &ext {
        let a = &i.coeffs[n];
        if a.is_zero() {
            let ok = if i.strict { i.k.is_negative() } else { !i.k.is_positive() };
            if !ok {
                return Inf::Empty;
            }
        }
    }
    let mut upper: Option<(Q, bool)> = None;
    for i in &ext {
        let a = &i.coeffs[n];
        if a.is_negative() {
            // a·t + k ⋈ 0 with a < 0  ⇒  t ⋈' -k/a from below
            let b = -(&i.k) / a;
            let better = match &lower {
                None => true,
                Some((v, s)) => b > *v || (b == *v && i.strict && !*s),
            };
            if better {
                lower = Some((b, i.strict));
            }
        } else if a.is_positive() {
            let b = -(&i.k) / a;
            let better = match &upper {
                None => true,
                Some((v, s)) => b < *v || (b == *v && i.strict && !*s),
            };
            if better {
                upper = Some((b, i.strict));
            }
        }
    }
    if let (Some((l, ls)), Some((u, us))) = (&lower, &upper) {
        if l > u || (l == u && (*ls || *us)) {
            return Inf::Empty;
        }
    }
    match lower {
        None => Inf::Unbounded,
        Some((v, strict)) => Inf::Value(v, !strict),
    }
}

#[derive(Clone, Debug)]
struct Instance {
    problem: Problem<Q>,
    objective: LinExpr<Q>,
}

fn collect_atoms(e: &BoolExpr<Q>, out: &mut Vec<(LinExpr<Q>, CmpOp)>) {
    e.for_each_cmp(&mut |l, op| {
        if !out.iter().any(|(a, b)| a == l && *b == op) {
            out.push((l.clone(), op));
        }
    });
}

fn eval_with_atoms(e: &BoolExpr<Q>, bools: &[bool], atoms: &[(LinExpr<Q>, CmpOp)], vals: &[bool]) -> bool {
    match e {
        BoolExpr::Const(b) => *b,
        BoolExpr::Var(v) => bools[v.0 as usize],
        BoolExpr::Not(x) => !eval_with_atoms(x, bools, atoms, vals),
        BoolExpr::And(xs) => xs.iter().all(|x| eval_with_atoms(x, bools, atoms, vals)),
        BoolExpr::Or(xs) => xs.iter().any(|x| eval_with_atoms(x, bools, atoms, vals)),
        BoolExpr::Implies(a, b) => {
            !eval_with_atoms(a, bools, atoms, vals) || eval_with_atoms(b, bools, atoms, vals)
        }
        BoolExpr::Iff(a, b) => eval_with_atoms(a, bools, atoms, vals) == eval_with_atoms(b, bools, atoms, vals),
        BoolExpr::Cmp(l, op) => {
            let i = atoms.iter().position(|(a, b)| a == l && b == op).expect("collected atom");
            vals[i]
        }
    }
}

/// Every convex region the problem decomposes into, with the Boolean part it belongs to.
fn regions(p: &Problem<Q>) -> Vec<(Vec<bool>, Vec<Ineq>)> {
    let mut atoms = Vec::new();
    for c in &p.constraints {
        collect_atoms(&c.expr, &mut atoms);
    }
    let nb = p.num_bools as usize;
    let nr = p.num_reals as usize;
    let mut out = Vec::new();
    for av in 0u32..(1 << atoms.len()) {
        let vals: Vec<bool> = (0..atoms.len()).map(|i| av >> i & 1 == 1).collect();
        // Disequalities split into two strict halves.
        let mut systems: Vec<Vec<Ineq>> = vec![Vec::new()];
        for ((l, op), &t) in atoms.iter().zip(&vals) {
            if *op == CmpOp::Eq && !t {
                let mut next = Vec::new();
                for s in &systems {
                    for half in [CmpOp::Lt, CmpOp::Gt] {
                        let mut s2 = s.clone();
                        s2.extend(ineqs_of(l, half, true, nr));
                        next.push(s2);
                    }
                }
                systems = next;
            } else {
                for s in &mut systems {
                    s.extend(ineqs_of(l, *op, t, nr));
                }
            }
        }
        let systems: Vec<Vec<Ineq>> = systems.into_iter().filter(|s| feasible(s.clone(), nr)).collect();
        if systems.is_empty() {
            continue;
        }
        for bv in 0u32..(1 << nb) {
            let bools: Vec<bool> = (0..nb).map(|i| bv >> i & 1 == 1).collect();
            if p.constraints.iter().all(|c| eval_with_atoms(&c.expr, &bools, &atoms, &vals)) {
                for s in &systems {
                    out.push((bools.clone(), s.clone()));
                }
            }
        }
    }
    out
}

fn oracle_min(p: &Problem<Q>, obj: &LinExpr<Q>) -> Inf {
    let mut best = Inf::Empty;
    for (_, sys) in regions(p) {
        let v = infimum(&sys, obj, p.num_reals as usize);
        best = match (best, v) {
            (Inf::Unbounded, _) | (_, Inf::Unbounded) => Inf::Unbounded,
            (Inf::Empty, x) | (x, Inf::Empty) => x,
            (Inf::Value(a, aa), Inf::Value(b, ba)) => {
                if a < b {
                    Inf::Value(a, aa)
                } else if b < a {
                    Inf::Value(b, ba)
                } else {
                    Inf::Value(a, aa || ba)
                }
            }
        };
    }
    best
}

const NB: u32 = 6;
const NR: u32 = 2;

fn lin() -> impl Strategy<Value = LinExpr<Q>> {
    (prop::collection::vec(-3i64..=3, NR as usize), -6i64..=6).prop_map(|(cs, k)| {
        LinExpr::from_terms(cs.into_iter().enumerate().map(|(i, c)| (RealVar(i as u32), rat(c))), rat(k))
    })
}

fn op() -> impl Strategy<Value = CmpOp> {
    prop_oneof![Just(CmpOp::Lt), Just(CmpOp::Le), Just(CmpOp::Eq), Just(CmpOp::Ge), Just(CmpOp::Gt)]
}

fn formula() -> impl Strategy<Value = BoolExpr<Q>> {
    let leaf = prop_oneof![
        3 => (0..NB).prop_map(|v| BoolExpr::Var(BoolVar(v))),
        2 => (lin(), op()).prop_map(|(l, o)| BoolExpr::Cmp(l, o)),
    ];
    leaf.prop_recursive(3, 12, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(BoolExpr::not),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(BoolExpr::And),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(BoolExpr::Or),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| BoolExpr::implies(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| BoolExpr::iff(a, b)),
        ]
    })
}

fn instance() -> impl Strategy<Value = Instance> {
    (prop::collection::vec(formula(), 1..=4), lin()).prop_filter_map("at most 6 atoms", |(fs, obj)| {
        let mut problem = Problem::new(NB, NR);
        for (g, f) in fs.into_iter().enumerate() {
            problem.push(g as u32, f);
        }
        let mut atoms = Vec::new();
        for c in &problem.constraints {
            collect_atoms(&c.expr, &mut atoms);
        }
        (atoms.len() <= 6).then_some(Instance { problem, objective: obj })
    })
}

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn verdict_and_model_match_oracle(inst in instance()) {
        let p = &inst.problem;
        let expected = !regions(p).is_empty();
        match omt::check(p, &cfg(), &Budget::unlimited()) {
            Outcome::Sat { model, .. } => {
                prop_assert!(expected, "solver sat, oracle unsat");
                prop_assert!(p.is_satisfied_by(&model.bools, &model.reals));
            }
            Outcome::Unsat => prop_assert!(!expected, "solver unsat, oracle sat"),
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }

    #[test]
    fn minimum_matches_oracle(inst in instance()) {
        let p = &inst.problem;
        let expected = oracle_min(p, &inst.objective);
        let got = omt::optimize(p, &[Objective::minimize(inst.objective.clone())], &cfg(), &Budget::unlimited());
        match (expected, got) {
            (Inf::Empty, Outcome::Unsat) => {}
            (Inf::Unbounded, Outcome::Unbounded { model, .. }) => {
                prop_assert!(p.is_satisfied_by(&model.bools, &model.reals));
            }
            (Inf::Value(v, attained), Outcome::Sat { model, values }) => {
                prop_assert_eq!(&values[0].value, &v);
                prop_assert_eq!(values[0].attained, attained);
                prop_assert!(p.is_satisfied_by(&model.bools, &model.reals));
                let at = inst.objective.eval(&model.reals);
                if attained {
                    prop_assert_eq!(at, v);
                } else {
                    prop_assert!(at > v);
                }
            }
            (e, g) => prop_assert!(false, "oracle {:?}, solver {:?}", e, g),
        }
    }

    #[test]
    fn enumeration_matches_oracle(inst in instance()) {
        let p = &inst.problem;
        let expected: BTreeSet<Vec<bool>> = regions(p).into_iter().map(|(b, _)| b).collect();
        let proj: Vec<BoolVar> = (0..NB).map(BoolVar).collect();
        let mut got = BTreeSet::new();
        for m in Enumerator::new(p, proj, &cfg(), Budget::unlimited()) {
            prop_assert!(p.is_satisfied_by(&m.bools, &m.reals));
            prop_assert!(got.insert(m.bools.clone()), "duplicate projection");
        }
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn cores_are_group_minimal(inst in instance()) {
        let p = &inst.problem;
        match omt::unsat_core(p, &cfg(), &Budget::unlimited()) {
            CoreOutcome::Satisfiable => prop_assert!(!regions(p).is_empty()),
            CoreOutcome::Core(groups) => {
                prop_assert!(regions(p).is_empty());
                let sub = p.restricted_to(|g| groups.contains(&g));
                prop_assert!(regions(&sub).is_empty());
                for &g in &groups {
                    let smaller = p.restricted_to(|h| h != g && groups.contains(&h));
                    prop_assert!(!regions(&smaller).is_empty(), "group {} is redundant", g);
                }
            }
            CoreOutcome::Budget => prop_assert!(false, "no budget was set"),
        }
    }

    #[test]
    fn lex_head_equals_single_objective(inst in instance(), second in lin()) {
        let p = &inst.problem;
        let single = omt::optimize(p, &[Objective::minimize(inst.objective.clone())], &cfg(), &Budget::unlimited());
        let lex = omt::optimize(
            p,
            &[Objective::minimize(inst.objective.clone()), Objective::maximize(second.clone())],
            &cfg(),
            &Budget::unlimited(),
        );
        match (single, lex) {
            (Outcome::Sat { values: a, .. }, Outcome::Sat { values: b, model }) => {
                prop_assert_eq!(&a[0], &b[0]);
                prop_assert!(p.is_satisfied_by(&model.bools, &model.reals));
            }
            (Outcome::Sat { values: a, .. }, Outcome::Unbounded { values: b, index, .. }) => {
                prop_assert_eq!(index, 1);
                prop_assert_eq!(&a[0], &b[0]);
            }
            (Outcome::Unsat, Outcome::Unsat) => {}
            (Outcome::Unbounded { .. }, Outcome::Unbounded { index, .. }) => prop_assert_eq!(index, 0),
            (a, b) => prop_assert!(false, "single {:?} vs lex {:?}", a, b),
        }
    }
}

#[test]
fn generic_over_machine_rationals() {
    use cgm_smt::expr;
    use num_rational::Ratio;
    type R = Ratio<i64>;
    let mut p: expr::Problem<R> = expr::Problem::new(1, 1);
    let x = expr::LinExpr::var(RealVar(0));
    let a = expr::BoolExpr::var(BoolVar(0));
    p.push(0, expr::BoolExpr::implies(a.clone(), expr::BoolExpr::cmp(&x, CmpOp::Ge, &expr::LinExpr::constant(R::new(7, 2)))));
    p.push(0, expr::BoolExpr::implies(expr::BoolExpr::not(a), expr::BoolExpr::cmp(&x, CmpOp::Gt, &expr::LinExpr::constant(R::from_integer(5)))));
    match omt::optimize(&p, &[omt::Objective::minimize(x)], &cfg(), &Budget::unlimited()) {
        Outcome::Sat { values, model } => {
            assert_eq!(values[0].value, R::new(7, 2));
            assert!(values[0].attained);
            assert!(model.bools[0]);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn retracting_a_bound_restores_feasibility() {
    use cgm_smt::sat::Lit;
    use cgm_smt::simplex::Simplex;
    use cgm_smt::DeltaValue;
    let mut s: Simplex<Q> = Simplex::new();
    let x = s.new_var();
    let y = s.new_var();
    let d = s.add_row(&[(x, rat(1)), (y, rat(-1))]);
    s.assert_bound(x, true, DeltaValue::exact(rat(0)), Lit::pos(0)).unwrap();
    s.assert_bound(y, false, DeltaValue::exact(rat(0)), Lit::pos(1)).unwrap();
    assert!(s.check().is_ok());
    s.push_level();
    s.assert_bound(d, false, DeltaValue::new(rat(0), rat(1)), Lit::pos(2)).unwrap();
    assert!(s.check().is_err());
    s.backtrack(0);
    assert!(s.check().is_ok());
    assert!(s.rows_consistent());
}

#[test]
fn optimal_values_do_not_depend_on_seed() {
    let mut p: Problem<Q> = Problem::new(3, 1);
    let x = LinExpr::var(RealVar(0));
    let vars: Vec<BoolExpr<Q>> = (0..3).map(|i| BoolExpr::var(BoolVar(i))).collect();
    p.push(0, BoolExpr::Or(vars.clone()));
    for (i, v) in vars.iter().enumerate() {
        p.push(0, BoolExpr::implies(v.clone(), BoolExpr::cmp(&x, CmpOp::Ge, &LinExpr::constant(rat(i as i64 + 1)))));
    }
    for seed in [0, 1, 42] {
        match omt::optimize(&p, &[Objective::minimize(x.clone())], &SolverConfig::with_seed(seed), &Budget::unlimited()) {
            Outcome::Sat { values, .. } => assert_eq!(values[0].value, rat(1)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
