//! Solver-free reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use cgm_core::reasoner::{realization_of, Evaluator};
use cgm_core::{check_realization, Cgm, Q};

/// Every realization, by exhaustive assignment of all labels. Assignments
/// where a refinement disagrees with the conjunction of its sources are
/// skipped before the full check, since no realization can contain them.
pub fn realizations(m: &Cgm) -> Vec<BTreeSet<String>> {
    let labels: Vec<&str> = m.propositions().collect();
    assert!(labels.len() <= 20, "model too large for brute force");
    let pos = |l: &str| labels.iter().position(|x| *x == l).expect("known label");
    let refs: Vec<(usize, Vec<usize>)> =
        m.refinements.iter().map(|r| (pos(&r.label), r.sources.iter().map(|s| pos(s)).collect())).collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << labels.len()) {
        let bit = |i: usize| mask >> i & 1 == 1;
        if refs.iter().any(|(r, src)| bit(*r) != src.iter().all(|s| bit(*s))) {
            continue;
        }
        let sat: BTreeSet<String> = (0..labels.len()).filter(|i| bit(*i)).map(|i| labels[i].to_string()).collect();
        if check_realization(m, &realization_of(m, sat.clone())).is_empty() {
            out.push(sat);
        }
    }
    out
}

/// Lexicographic optimum over an explicit realization set. `None` if some
/// objective cannot be evaluated, `Some(None)` if the set is empty.
pub fn lex_optimum(m: &Cgm, all: &[BTreeSet<String>], specs: &[(&str, bool)]) -> Option<Option<Vec<Q>>> {
    let nothing = BTreeSet::new();
    for (id, _) in specs {
        Evaluator::new(m, &nothing).objective(id)?;
    }
    let mut pool: Vec<&BTreeSet<String>> = all.iter().collect();
    let mut values = Vec::new();
    for (id, maximize) in specs {
        let mut scored = Vec::new();
        for r in &pool {
            let v = Evaluator::new(m, r).objective(id)?;
            scored.push((v, *r));
        }
        let best = if *maximize {
            scored.iter().map(|(v, _)| v.clone()).max()
        } else {
            scored.iter().map(|(v, _)| v.clone()).min()
        };
        let Some(best) = best else { return Some(None) };
        pool = scored.into_iter().filter(|(v, _)| *v == best).map(|(_, r)| r).collect();
        values.push(best);
    }
    if pool.is_empty() {
        return Some(None);
    }
    Some(Some(values))
}

use cgm_core::reasoner::{self, SolveOptions, SolveOutcome};
use cgm_core::ObjectiveSpec;

/// Objective requests checked for every random model.
const REQUESTS: &[&[(&str, bool)]] = &[
    &[("weight", false)],
    &[("weight", true)],
    &[("numUnsatPrefs", false)],
    &[("numUnsatRequirements", false)],
    &[("numSatTasks", false)],
    &[("numSatTasks", true)],
    &[("cost", false)],
    &[("score", true)],
    &[("mix", false), ("numSatTasks", true)],
    &[("weight", false), ("numUnsatPrefs", false), ("numSatTasks", false)],
];

/// Compares realizability, the enumerated realization set and predefined and
/// user objective optima against brute force.
pub fn compare_with_oracle(m: &Cgm) -> Result<(), String> {
    let opts = SolveOptions::default();
    let all = realizations(m);
    let expected: BTreeSet<BTreeSet<String>> = all.iter().cloned().collect();

    let verdict = reasoner::check_realizability(m, &opts);
    match (&verdict, all.is_empty()) {
        (SolveOutcome::Realizable { realization }, false) => {
            if !expected.contains(&realization.satisfied) {
                return Err(format!("check returned a non-realization {:?}", realization.satisfied));
            }
        }
        (SolveOutcome::Unrealizable { .. }, true) => {}
        _ => return Err(format!("verdict {} but oracle found {} realizations", verdict.status(), all.len())),
    }

    let mut it = reasoner::enumerate(m, &opts);
    let mut got = BTreeSet::new();
    for r in it.by_ref() {
        if !got.insert(r.satisfied.clone()) {
            return Err(format!("duplicate realization {:?}", r.satisfied));
        }
    }
    if !it.exhausted() || got != expected {
        return Err(format!("enumerated {} realizations, oracle {}", got.len(), expected.len()));
    }

    for specs in REQUESTS {
        let req: Vec<ObjectiveSpec> =
            specs.iter().map(|(id, max)| if *max { ObjectiveSpec::max(id) } else { ObjectiveSpec::min(id) }).collect();
        let oracle = lex_optimum(m, &all, specs);
        let got = reasoner::optimize(m, &req, &opts);
        match (oracle, got) {
            (None, Err(_)) => {}
            (Some(None), Ok(SolveOutcome::Unrealizable { .. })) => {}
            (Some(Some(values)), Ok(SolveOutcome::Realizable { realization })) => {
                if realization.objective_values != values || !realization.attained {
                    return Err(format!("{specs:?}: got {:?}, oracle {values:?}", realization.objective_values));
                }
                if !check_realization(m, &realization).is_empty() {
                    return Err(format!("{specs:?}: optimum is not a realization"));
                }
            }
            (o, g) => return Err(format!("{specs:?}: oracle {o:?}, solver {g:?}")),
        }
    }
    Ok(())
}

use cgm_core::{encode, EvolutionMode, GroupTag};
use cgm_smt::{Budget, Outcome, SolverConfig};

fn satisfiable(p: &cgm_smt::Problem) -> bool {
    match cgm_smt::check(p, &SolverConfig::default(), &Budget::unlimited()) {
        Outcome::Sat { .. } => true,
        Outcome::Unsat => false,
        other => panic!("unexpected outcome {other:?}"),
    }
}

/// Checks that the groups are jointly unsatisfiable and that dropping any one
/// of them leaves a satisfiable problem.
pub fn core_is_group_minimal(m: &Cgm, core: &[GroupTag]) -> Result<(), String> {
    let enc = encode(m, &[]).map_err(|e| e.to_string())?;
    let mut ids = Vec::new();
    for tag in core {
        let id = enc.groups.iter().position(|g| g == tag).ok_or_else(|| format!("unknown group {tag:?}"))?;
        ids.push(id as u32);
    }
    if satisfiable(&enc.problem.restricted_to(|g| ids.contains(&g))) {
        return Err(format!("core {core:?} is satisfiable"));
    }
    for drop in &ids {
        if !satisfiable(&enc.problem.restricted_to(|g| g != *drop && ids.contains(&g))) {
            return Err(format!("core {core:?} stays unsatisfiable without {:?}", enc.groups[*drop as usize]));
        }
    }
    Ok(())
}

/// Evolution objective of a realization `now` of `new` against the satisfied
/// labels `was` of a realization of `old`.
pub fn evolution_cost(
    old: &Cgm,
    was: &BTreeSet<String>,
    new: &Cgm,
    now: &BTreeSet<String>,
    mode: EvolutionMode,
) -> usize {
    let tasks = new.classify().tasks;
    let mut n = 0;
    for e in &new.elements {
        let l = &e.label;
        let common = old.element(l).is_some();
        let changed = common && was.contains(l) != now.contains(l);
        let fresh = !common && now.contains(l);
        n += match mode {
            EvolutionMode::Hamming => changed as usize,
            EvolutionMode::NewElements => fresh as usize,
            EvolutionMode::Both => (changed || fresh) as usize,
            EvolutionMode::Effort => (tasks.contains(l) && now.contains(l) && !was.contains(l)) as usize,
        };
    }
    n
}
