use std::collections::BTreeSet;
use std::time::Instant;

use cgm_core::fixture::{meeting_scheduler, REDUCED_DROP};
use cgm_core::reasoner::{self, Realization};
use cgm_core::{check_realization, encode, ObjectiveSpec, SolveOptions, SolveOutcome, Q};

fn q(n: i64) -> Q {
    Q::from_integer(n.into())
}

fn solve(specs: &[ObjectiveSpec]) -> Realization {
    let m = meeting_scheduler();
    let out = reasoner::optimize(&m, specs, &SolveOptions::default()).unwrap();
    match out {
        SolveOutcome::Realizable { realization } => {
            assert!(realization.attained);
            assert!(check_realization(&m, &realization).is_empty());
            realization
        }
        other => panic!("unexpected outcome {other:?}"),
    }
}

#[test]
fn sizes() {
    let m = meeting_scheduler();
    let enc = encode(&m, &[]).unwrap();
    assert_eq!(enc.labels.len(), 54);
    assert_eq!(enc.num_attribute_vars(), 30);
    let class = m.classify();
    assert_eq!(class.requirements.len(), 5);
    assert_eq!(class.tasks.len(), 18);
    assert_eq!(class.mandatory.len(), 1);
}

#[test]
fn reduced_sizes() {
    let mut m = meeting_scheduler();
    let drop: BTreeSet<&str> = REDUCED_DROP.iter().copied().collect();
    m.elements.retain(|e| !drop.contains(e.label.as_str()));
    m.refinements.retain(|r| !drop.contains(r.label.as_str()));
    assert_eq!(m.elements.len() + m.refinements.len(), 44);
}

#[test]
fn min_weight() {
    let t = Instant::now();
    let r = solve(&[ObjectiveSpec::min("Weight")]);
    assert_eq!(r.objective_values, vec![q(-65)]);
    assert!(t.elapsed().as_secs() < 5);
}

#[test]
fn lex_weight_worktime_cost() {
    let r = solve(&[ObjectiveSpec::min("Weight"), ObjectiveSpec::min("workTime"), ObjectiveSpec::min("cost")]);
    assert_eq!(r.objective_values, vec![q(-65), q(2), q(0)]);
    let expected = [
        "BookLocalRoom", "BySystem", "CancelLessImportantMeeting", "CharacteriseMeeting", "ChooseSchedule",
        "CollectFromSystemCalendar", "CollectTimetables", "CollectionEffort", "ConfirmOccurrence",
        "FastSchedule", "FindASuitableRoom", "FreeUpLocalRoom", "GetRoomSuggestions", "GoodParticipation",
        "GoodQualitySchedule", "LocalRoomAvailable", "LowCost", "ManageMeeting", "MatchingEffort",
        "MinimalConflicts", "MinimalEffort", "ParticipantsUseSystemCalendar", "R1", "R11", "R12", "R14",
        "R16", "R17", "R19", "R2", "R20", "R5", "R7", "ScheduleAutomatically", "ScheduleMeeting",
        "UseLocalRoom",
    ];
    let expected: BTreeSet<String> = expected.iter().map(|s| s.to_string()).collect();
    assert_eq!(r.satisfied, expected);
}

#[test]
fn lex_weight_prefs() {
    let r = solve(&[ObjectiveSpec::min("Weight"), ObjectiveSpec::min("numUnsatPrefs")]);
    assert_eq!(r.objective_values, vec![q(-65), q(0)]);
}

#[test]
fn lex_requirements_prefs_tasks() {
    let r = solve(&[
        ObjectiveSpec::min("numUnsatRequirements"),
        ObjectiveSpec::min("numUnsatPrefs"),
        ObjectiveSpec::min("numSatTasks"),
    ]);
    assert_eq!(r.objective_values, vec![q(0), q(0), q(10)]);
}

#[test]
fn single_objective_extremes() {
    assert_eq!(solve(&[ObjectiveSpec::max("Weight")]).objective_values, vec![q(150)]);
    assert_eq!(solve(&[ObjectiveSpec::min("workTime")]).objective_values, vec![q(2)]);
    assert_eq!(solve(&[ObjectiveSpec::min("cost")]).objective_values, vec![q(0)]);
    assert_eq!(solve(&[ObjectiveSpec::min("numSatTasks")]).objective_values, vec![q(5)]);
}

#[test]
fn enumeration_count() {
    let m = meeting_scheduler();
    let mut it = reasoner::enumerate(&m, &SolveOptions::default());
    let mut seen = BTreeSet::new();
    for r in it.by_ref() {
        assert!(seen.insert(r.satisfied));
    }
    assert!(it.exhausted());
    assert_eq!(seen.len(), 27680);
}
