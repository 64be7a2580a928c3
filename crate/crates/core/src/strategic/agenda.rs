//! Goal agenda kept in (priority descending, goal id ascending) order.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Goal, Plan, UtilityScore};
use crate::types::Params;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgendaEntry {
    pub goal: Goal,
    /// Scores from the most recent deliberation.
    pub candidates: Vec<UtilityScore>,
    /// The selected plan with its step states.
    pub plan: Option<Plan>,
    /// Needs (re-)deliberation before any further step is taken.
    pub flagged: bool,
    pub failed_plans: BTreeSet<String>,
    /// Facts learned while pursuing the goal (`found`, `found_room`, ...).
    pub facts: Params,
}

impl AgendaEntry {
    pub fn new(goal: Goal) -> AgendaEntry {
        AgendaEntry {
            goal,
            candidates: Vec::new(),
            plan: None,
            flagged: false,
            failed_plans: BTreeSet::new(),
            facts: Params::new(),
        }
    }

    pub fn selected(&self) -> Option<&str> {
        self.plan.as_ref().map(|p| p.plan_id.as_str())
    }
}

fn order(a: &Goal, b: &Goal) -> Ordering {
    b.priority
        .total_cmp(&a.priority)
        .then_with(|| a.goal_id.cmp(&b.goal_id))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Agenda {
    entries: Vec<AgendaEntry>,
}

impl Agenda {
    pub fn new() -> Agenda {
        Agenda::default()
    }

    /// Add a goal in order. Returns false (and changes nothing) when the
    /// goal id is already present.
    pub fn insert(&mut self, goal: Goal) -> bool {
        if self.entry(&goal.goal_id).is_some() {
            return false;
        }
        let at = self
            .entries
            .partition_point(|e| order(&e.goal, &goal) == Ordering::Less);
        self.entries.insert(at, AgendaEntry::new(goal));
        true
    }

    pub fn entries(&self) -> &[AgendaEntry] {
        &self.entries
    }

    pub fn entry(&self, goal_id: &str) -> Option<&AgendaEntry> {
        self.entries.iter().find(|e| e.goal.goal_id == goal_id)
    }

    /// Mutable access to an entry. Priorities are fixed once a goal is on
    /// the agenda, so this cannot break the ordering.
    pub fn entry_mut(&mut self, goal_id: &str) -> Option<&mut AgendaEntry> {
        self.entries.iter_mut().find(|e| e.goal.goal_id == goal_id)
    }

    pub(crate) fn entries_mut(&mut self) -> impl Iterator<Item = &mut AgendaEntry> {
        self.entries.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// First goal in order that is not finished.
    pub fn focus(&self) -> Option<&AgendaEntry> {
        self.entries.iter().find(|e| !e.goal.status.is_terminal())
    }

    pub fn is_ordered(&self) -> bool {
        self.entries
            .windows(2)
            .all(|w| order(&w[0].goal, &w[1].goal) != Ordering::Greater)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::Addressee;
    use crate::strategic::{GoalStatus, Provenance};
    use crate::types::AgentId;

    fn goal(id: &str, p: f64) -> Goal {
        Goal {
            goal_id: id.into(),
            concept: "FIND-OBJECT".into(),
            bindings: Default::default(),
            priority: p,
            status: GoalStatus::Pending,
            provenance: Provenance::SelfGenerated {
                reason: "test".into(),
            },
            requester: AgentId::new("danny"),
            addressee: Addressee::Team,
        }
    }

    #[test]
    fn insert_keeps_order() {
        let mut a = Agenda::new();
        for (id, p) in [("g2", 0.5), ("g1", 0.5), ("g3", 0.9), ("g0", 0.1)] {
            assert!(a.insert(goal(id, p)));
        }
        assert!(!a.insert(goal("g1", 0.7)));
        let ids: Vec<&str> = a
            .entries()
            .iter()
            .map(|e| e.goal.goal_id.as_str())
            .collect();
        assert_eq!(ids, ["g3", "g1", "g2", "g0"]);
        assert!(a.is_ordered());
    }
}
