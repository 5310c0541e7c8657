//! Cross-check of the SMT-LIB export against z3, skipped when `z3` is not on PATH.

use std::io::Write;
use std::process::{Command, Stdio};

use cgm_core::fixture::meeting_scheduler;
use cgm_core::random::{random_model, RandomConfig};
use cgm_core::reasoner;
use cgm_core::{smtlib, Cgm, ObjectiveSpec, SolveOptions, SolveOutcome, Q};

fn z3_available() -> bool {
    Command::new("z3").arg("-version").output().is_ok_and(|o| o.status.success())
}

/// Runs z3 on the script; `:id` annotations are removed since z3 does not accept them.
fn z3(script: &str) -> String {
    let script: String = script
        .lines()
        .map(|l| match (l.starts_with("(minimize") || l.starts_with("(maximize"), l.rfind(" :id ")) {
            (true, Some(i)) => format!("{})", &l[..i]),
            _ => l.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n");
    let mut child = Command::new("z3").arg("-in").stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(script.as_bytes()).unwrap();
    String::from_utf8(child.wait_with_output().unwrap().stdout).unwrap()
}

/// Parses the value of the single objective reported by `(get-objectives)`:
/// the last s-expression inside the first entry.
fn objective_value(out: &str) -> Q {
    let line = out.lines().find(|l| l.starts_with(" (")).expect("objective line").trim();
    let inner = &line[1..line.len() - 1];
    let start = if inner.ends_with(')') {
        let mut depth = 0;
        let mut at = 0;
        for (i, c) in inner.char_indices().rev() {
            match c {
                ')' => depth += 1,
                '(' => depth -= 1,
                _ => {}
            }
            if depth == 0 {
                at = i;
                break;
            }
        }
        at
    } else {
        inner.rfind(' ').expect("name and value") + 1
    };
    let value = &inner[start..];
    let neg = value.starts_with("(-");
    let nums: Vec<i64> =
        value.split(|c: char| !c.is_ascii_digit()).filter(|t| !t.is_empty()).map(|t| t.parse().unwrap()).collect();
    let q = match nums[..] {
        [n] => Q::from_integer(n.into()),
        [n, d] => Q::new(n.into(), d.into()),
        _ => panic!("unexpected value {value}"),
    };
    if neg {
        -q
    } else {
        q
    }
}

fn compare(m: &Cgm, spec: ObjectiveSpec) {
    let ours = reasoner::optimize(m, std::slice::from_ref(&spec), &SolveOptions::default()).unwrap();
    let out = z3(&smtlib::export(m, &[spec]).unwrap());
    match ours {
        SolveOutcome::Realizable { realization } => {
            assert!(out.starts_with("sat"), "{out}");
            assert_eq!(objective_value(&out), realization.objective_values[0], "{out}\n{}", cgm_core::print(m));
        }
        SolveOutcome::Unrealizable { .. } => assert!(out.starts_with("unsat"), "{out}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn fixture_weight_matches_z3() {
    if !z3_available() {
        eprintln!("z3 not found; skipping");
        return;
    }
    compare(&meeting_scheduler(), ObjectiveSpec::min("Weight"));
}

#[test]
fn random_models_match_z3() {
    if !z3_available() {
        eprintln!("z3 not found; skipping");
        return;
    }
    for i in 0..40 {
        let m = random_model(404, i, &RandomConfig::default());
        compare(&m, ObjectiveSpec::min("numSatTasks"));
        if m.attribute("cost").is_some() {
            compare(&m, ObjectiveSpec::max("cost"));
        }
    }
}
