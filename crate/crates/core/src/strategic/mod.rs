//! The strategic layer: a prioritized goal agenda per robot, utility-based
//! plan selection over a hand-authored plan library, action rendering into
//! commands or utterances, execution monitoring, and a log of thoughts that
//! can be turned into causal explanations.
//!
//! Every robot runs its own [`StrategicCore`]. Cores adopt the same goal
//! from a team-addressed request, choose plans deterministically, execute
//! only the steps assigned to their own robot and tell each other about
//! step outcomes through [`TeamUpdate`]s.

mod agenda;
mod core;
mod explain;
mod plans;
mod utility;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{Addressee, AgentKind, Filler, Kb};
use crate::sim::{GridMap, Room};
use crate::types::{AgentId, Params, Point};

pub use self::core::{
    CycleInput, CycleOutput, Decision, Event, Heard, Rendered, StrategicCore,
    DEFAULT_DEADLINE_TICKS, FOUND_CONFIDENCE,
};
pub use agenda::{Agenda, AgendaEntry};
pub use explain::explain;
pub use plans::{
    PlanLibrary, PlanTemplate, PlanValidationError, StepTemplate, DERIVED_VARS, FACT_VARS,
};
pub use utility::{assess_confidence, select, UtilityScore, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GoalStatus {
    Pending,
    Active,
    Suspended,
    Achieved,
    Abandoned,
}

impl GoalStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, GoalStatus::Achieved | GoalStatus::Abandoned)
    }

    /// Allowed moves: Pending to Active, Active to and from Suspended, and
    /// Active to a terminal state. A Pending goal with no plan at all may be
    /// abandoned directly.
    pub fn can_become(self, next: GoalStatus) -> bool {
        use GoalStatus::*;
        matches!(
            (self, next),
            (Pending, Active)
                | (Active, Suspended)
                | (Suspended, Active)
                | (Active, Achieved | Abandoned)
                | (Pending, Abandoned)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    FromUtterance { tmr_id: String },
    SelfGenerated { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub goal_id: String,
    pub concept: String,
    pub bindings: BTreeMap<String, Filler>,
    pub priority: f64,
    pub status: GoalStatus,
    pub provenance: Provenance,
    /// Who asked (or, for self-generated goals, who prompted it).
    pub requester: AgentId,
    pub addressee: Addressee,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StepState {
    NotStarted,
    Issued,
    Done,
    Failed,
}

impl StepState {
    pub fn is_terminal(self) -> bool {
        matches!(self, StepState::Done | StepState::Failed)
    }

    fn rank(self) -> u8 {
        match self {
            StepState::NotStarted => 0,
            StepState::Issued => 1,
            StepState::Done | StepState::Failed => 2,
        }
    }

    /// States only move forward.
    pub fn can_become(self, next: StepState) -> bool {
        next.rank() > self.rank()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub concept: String,
    /// Role to value; `?name` values are resolved when the step is rendered.
    pub bindings: Params,
    pub assigned_to: AgentId,
    pub state: StepState,
    /// Runs alongside the step after it.
    pub concurrent: bool,
    /// Failure does not fail the plan.
    pub optional: bool,
    pub command_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub plan_id: String,
    pub goal_id: String,
    pub steps: Vec<PlanStep>,
    pub est_cost: f64,
    pub est_success: f64,
}

impl Plan {
    /// Indices of steps that may start now: every earlier step is finished,
    /// except a run of `concurrent` steps directly before it.
    pub fn runnable(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (i, s) in self.steps.iter().enumerate() {
            if s.state != StepState::NotStarted {
                continue;
            }
            let mut j = i;
            while j > 0 && self.steps[j - 1].concurrent {
                j -= 1;
            }
            if self.steps[..j].iter().all(|p| p.state.is_terminal()) {
                out.push(i);
            }
        }
        out
    }

    /// A required step has failed.
    pub fn has_failed(&self) -> bool {
        self.steps
            .iter()
            .any(|s| s.state == StepState::Failed && !s.optional)
    }

    /// Every step finished and every required one succeeded.
    pub fn is_complete(&self) -> bool {
        self.steps
            .iter()
            .all(|s| s.state == StepState::Done || (s.state == StepState::Failed && s.optional))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ThoughtKind {
    GoalAdopted,
    PlanSelected,
    ActionIssued,
    ReportProcessed,
    GoalAchieved,
    GoalAbandoned,
    ConfidenceAssessed,
    /// Something did not fit: an unmatched report, an ignored event.
    Anomaly,
}

impl ThoughtKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ThoughtKind::GoalAdopted => "GoalAdopted",
            ThoughtKind::PlanSelected => "PlanSelected",
            ThoughtKind::ActionIssued => "ActionIssued",
            ThoughtKind::ReportProcessed => "ReportProcessed",
            ThoughtKind::GoalAchieved => "GoalAchieved",
            ThoughtKind::GoalAbandoned => "GoalAbandoned",
            ThoughtKind::ConfidenceAssessed => "ConfidenceAssessed",
            ThoughtKind::Anomaly => "Anomaly",
        }
    }
}

impl fmt::Display for ThoughtKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ThoughtKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown thought kind `{s}`"))
    }
}

/// One step of the strategic layer's reasoning, kept for explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thought {
    pub thought_id: String,
    pub tick: u64,
    pub robot_id: AgentId,
    pub kind: ThoughtKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_id: Option<String>,
    pub structured_cause: serde_json::Map<String, serde_json::Value>,
    pub rendered_text: String,
}

/// Step outcome or discovered fact shared between teammates' cores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamUpdate {
    pub from: AgentId,
    pub goal_id: String,
    pub plan_id: Option<String>,
    /// `(step index, new state)`.
    pub step: Option<(usize, StepState)>,
    /// Facts such as `found`, `found_room`, `found_instance`.
    pub facts: Params,
}

/// Something a robot says on the team chat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: AgentId,
    pub addressee: Addressee,
    pub text: String,
}

/// What every core knows about its team and surroundings.
#[derive(Debug, Clone, PartialEq)]
pub struct TeamContext {
    /// Robots in id order.
    pub robots: Vec<(AgentId, AgentKind)>,
    pub rooms: Vec<Room>,
    pub width: f64,
    pub height: f64,
}

impl TeamContext {
    pub fn new(
        mut robots: Vec<(AgentId, AgentKind)>,
        rooms: Vec<Room>,
        width: f64,
        height: f64,
    ) -> TeamContext {
        robots.sort();
        TeamContext {
            robots,
            rooms,
            width,
            height,
        }
    }

    pub fn room(&self, name: &str) -> Option<&Room> {
        self.rooms.iter().find(|r| r.name == name)
    }

    /// Room whose concept is `concept` (`KITCHEN` for `kitchen`).
    pub fn room_for_concept(&self, concept: &str) -> Option<&Room> {
        self.rooms
            .iter()
            .find(|r| Kb::room_concept(&r.name) == concept)
    }

    pub fn room_at(&self, p: Point) -> Option<&Room> {
        let c = GridMap::cell_of(p);
        self.rooms.iter().find(|r| r.contains(c))
    }

    pub fn room_names(&self) -> Vec<String> {
        self.rooms.iter().map(|r| r.name.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StrategicError {
    #[error("no plan available for goal {0}")]
    NoPlanAvailable(String),
    #[error("cannot render step {step} of {plan_id}: {reason}")]
    UnrenderableStep {
        plan_id: String,
        step: usize,
        reason: String,
    },
    #[error("unknown explanation target `{0}`")]
    UnknownTarget(String),
    #[error("no goal `{0}` on the agenda")]
    UnknownGoal(String),
}
