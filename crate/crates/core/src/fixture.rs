//! The bundled meeting-scheduler model.

use crate::dsl::load;
use crate::model::Cgm;

pub const MEETING_SCHEDULER: &str = include_str!("../fixtures/meeting_scheduler.cgm");

/// Labels removed by the reduced benchmark variant: the four nice-to-have
/// requirements, their refinements and their direct sub-tasks.
pub const REDUCED_DROP: [&str; 10] = [
    "LowCost",
    "FastSchedule",
    "MinimalEffort",
    "GoodQualitySchedule",
    "R19",
    "R20",
    "CollectionEffort",
    "MatchingEffort",
    "GoodParticipation",
    "MinimalConflicts",
];

pub fn meeting_scheduler() -> Cgm {
    load(MEETING_SCHEDULER).expect("bundled fixture is valid")
}
