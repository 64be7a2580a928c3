//! Bidirectional strategic/tactical interface.
//!
//! Each robot owns one [`ChannelPair`]: a bounded downlink of [`Command`]s
//! from its strategic layer and a bounded uplink of [`Report`]s back. No
//! operation blocks. A full downlink is reported as a value so the strategic
//! layer can re-deliberate; a full uplink evicts the oldest non-terminal
//! report, so the tactical layer keeps running however slow the consumer is.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crossbeam_queue::ArrayQueue;
use serde::{Deserialize, Serialize};

use crate::sim::Detection;
use crate::types::{AgentId, Params};

pub const DEFAULT_DOWNLINK_CAPACITY: usize = 16;
pub const DEFAULT_UPLINK_CAPACITY: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verb {
    #[serde(rename = "MOVE-TO")]
    MoveTo,
    #[serde(rename = "SEARCH-AREA")]
    SearchArea,
    #[serde(rename = "PICK-UP")]
    PickUp,
    #[serde(rename = "SCAN")]
    Scan,
    #[serde(rename = "HOVER")]
    Hover,
    #[serde(rename = "RETURN-TO-DOCK")]
    ReturnToDock,
    #[serde(rename = "STOP")]
    Stop,
}

impl Verb {
    pub const ALL: [Verb; 7] = [
        Verb::MoveTo,
        Verb::SearchArea,
        Verb::PickUp,
        Verb::Scan,
        Verb::Hover,
        Verb::ReturnToDock,
        Verb::Stop,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Verb::MoveTo => "MOVE-TO",
            Verb::SearchArea => "SEARCH-AREA",
            Verb::PickUp => "PICK-UP",
            Verb::Scan => "SCAN",
            Verb::Hover => "HOVER",
            Verb::ReturnToDock => "RETURN-TO-DOCK",
            Verb::Stop => "STOP",
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verb {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Verb::ALL
            .iter()
            .find(|v| v.as_str() == s)
            .copied()
            .ok_or_else(|| format!("unknown verb `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub command_id: String,
    pub robot_id: AgentId,
    pub verb: Verb,
    pub params: Params,
    pub priority: f64,
    pub issued_tick: u64,
    pub deadline_ticks: Option<u64>,
}

impl Command {
    pub fn validate(&self) -> Result<(), String> {
        if self.command_id.is_empty() {
            return Err("empty command_id".into());
        }
        if !(0.0..=1.0).contains(&self.priority) {
            return Err(format!("priority {} outside [0,1]", self.priority));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum ReportKind {
    Ack,
    Progress(f64),
    Success,
    Failure(String),
    Preempted,
    Expired,
    SafetyEvent(String),
    PerceptBatch(Vec<Detection>),
}

impl ReportKind {
    /// Success, Failure, Preempted and Expired close a command.
    pub fn is_terminal(&self) -> bool {
        matches!(
            self,
            ReportKind::Success
                | ReportKind::Failure(_)
                | ReportKind::Preempted
                | ReportKind::Expired
        )
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ReportKind::Ack => "ack",
            ReportKind::Progress(_) => "progress",
            ReportKind::Success => "success",
            ReportKind::Failure(_) => "failure",
            ReportKind::Preempted => "preempted",
            ReportKind::Expired => "expired",
            ReportKind::SafetyEvent(_) => "safety_event",
            ReportKind::PerceptBatch(_) => "percept_batch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub report_id: String,
    pub robot_id: AgentId,
    pub command_id: Option<String>,
    pub kind: ReportKind,
    pub tick: u64,
}

impl Report {
    pub fn is_terminal(&self) -> bool {
        self.kind.is_terminal()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendCommandOutcome {
    Queued,
    DownlinkFull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendReportOutcome {
    Queued,
    DroppedOldest,
}

/// One robot's pair of bounded queues.
///
/// Safe for one producer and one consumer per direction on different
/// threads. The downlink is a lock-free ring; the uplink needs a short lock
/// because eviction scans for the oldest non-terminal entry.
pub struct ChannelPair {
    downlink: ArrayQueue<Command>,
    uplink: Mutex<VecDeque<Report>>,
    uplink_capacity: usize,
    dropped_uplink: AtomicU64,
}

impl fmt::Debug for ChannelPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChannelPair")
            .field("downlink_len", &self.downlink.len())
            .field("uplink_len", &self.uplink_len())
            .field("dropped_uplink", &self.dropped_uplink_count())
            .finish()
    }
}

impl Default for ChannelPair {
    fn default() -> Self {
        Self::new(DEFAULT_DOWNLINK_CAPACITY, DEFAULT_UPLINK_CAPACITY)
    }
}

impl ChannelPair {
    /// # Panics
    /// If either capacity is zero.
    pub fn new(downlink_capacity: usize, uplink_capacity: usize) -> Self {
        assert!(
            downlink_capacity > 0 && uplink_capacity > 0,
            "capacities must be positive"
        );
        ChannelPair {
            downlink: ArrayQueue::new(downlink_capacity),
            uplink: Mutex::new(VecDeque::with_capacity(uplink_capacity)),
            uplink_capacity,
            dropped_uplink: AtomicU64::new(0),
        }
    }

    pub fn send_command(&self, command: Command) -> SendCommandOutcome {
        match self.downlink.push(command) {
            Ok(()) => SendCommandOutcome::Queued,
            Err(_) => SendCommandOutcome::DownlinkFull,
        }
    }

    pub fn poll_commands(&self, max_n: usize) -> Vec<Command> {
        let mut out = Vec::new();
        while out.len() < max_n {
            match self.downlink.pop() {
                Some(c) => out.push(c),
                None => break,
            }
        }
        out
    }

    /// Append a report. When the uplink is full the oldest non-terminal
    /// report, counting the incoming one, is dropped. A terminal report that
    /// arrives when every queued entry is terminal is kept even though the
    /// queue then exceeds its nominal capacity.
    pub fn send_report(&self, report: Report) -> SendReportOutcome {
        let mut q = self.uplink.lock().unwrap_or_else(|e| e.into_inner());
        if q.len() < self.uplink_capacity {
            q.push_back(report);
            return SendReportOutcome::Queued;
        }
        if let Some(idx) = q.iter().position(|r| !r.is_terminal()) {
            q.remove(idx);
            q.push_back(report);
        } else if report.is_terminal() {
            q.push_back(report);
            return SendReportOutcome::Queued;
        }
        // otherwise the incoming report is itself the oldest non-terminal one
        self.dropped_uplink.fetch_add(1, Ordering::Relaxed);
        SendReportOutcome::DroppedOldest
    }

    pub fn poll_reports(&self, max_n: usize) -> Vec<Report> {
        let mut q = self.uplink.lock().unwrap_or_else(|e| e.into_inner());
        let n = max_n.min(q.len());
        q.drain(..n).collect()
    }

    pub fn downlink_len(&self) -> usize {
        self.downlink.len()
    }

    pub fn downlink_capacity(&self) -> usize {
        self.downlink.capacity()
    }

    pub fn uplink_len(&self) -> usize {
        self.uplink.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn uplink_capacity(&self) -> usize {
        self.uplink_capacity
    }

    pub fn dropped_uplink_count(&self) -> u64 {
        self.dropped_uplink.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn cmd(n: u64) -> Command {
        Command {
            command_id: format!("c{n}"),
            robot_id: AgentId::new("ugv-1"),
            verb: Verb::MoveTo,
            params: Params::new(),
            priority: 0.5,
            issued_tick: n,
            deadline_ticks: None,
        }
    }

    fn report(n: u64, kind: ReportKind) -> Report {
        Report {
            report_id: format!("r{n}"),
            robot_id: AgentId::new("ugv-1"),
            command_id: Some(format!("c{n}")),
            kind,
            tick: n,
        }
    }

    #[test]
    fn downlink_capacity_rule() {
        let pair = ChannelPair::default();
        assert_eq!(pair.send_command(cmd(0)), SendCommandOutcome::Queued);
        for i in 1..16 {
            assert_eq!(pair.send_command(cmd(i)), SendCommandOutcome::Queued);
        }
        assert_eq!(pair.send_command(cmd(16)), SendCommandOutcome::DownlinkFull);
        assert_eq!(pair.downlink_len(), 16);
    }

    #[test]
    fn poll_commands_limits() {
        let pair = ChannelPair::default();
        assert!(pair.poll_commands(4).is_empty());
        for i in 0..3 {
            pair.send_command(cmd(i));
        }
        let got = pair.poll_commands(2);
        assert_eq!(
            got.iter().map(|c| c.issued_tick).collect::<Vec<_>>(),
            vec![0, 1]
        );
        assert_eq!(pair.poll_commands(5).len(), 1);
    }

    #[test]
    fn uplink_evicts_progress_not_terminal() {
        let pair = ChannelPair::new(4, 4);
        pair.send_report(report(0, ReportKind::Success));
        pair.send_report(report(1, ReportKind::Progress(0.1)));
        pair.send_report(report(2, ReportKind::Expired));
        pair.send_report(report(3, ReportKind::Progress(0.2)));
        assert_eq!(
            pair.send_report(report(4, ReportKind::Progress(0.3))),
            SendReportOutcome::DroppedOldest
        );
        assert_eq!(pair.dropped_uplink_count(), 1);
        let ids: Vec<_> = pair
            .poll_reports(10)
            .into_iter()
            .map(|r| r.report_id)
            .collect();
        assert_eq!(ids, vec!["r0", "r2", "r3", "r4"]);
    }

    #[test]
    fn uplink_all_terminal_keeps_terminal_drops_progress() {
        let pair = ChannelPair::new(1, 2);
        pair.send_report(report(0, ReportKind::Success));
        pair.send_report(report(1, ReportKind::Success));
        assert_eq!(
            pair.send_report(report(2, ReportKind::Progress(0.5))),
            SendReportOutcome::DroppedOldest
        );
        assert_eq!(
            pair.send_report(report(3, ReportKind::Preempted)),
            SendReportOutcome::Queued
        );
        let ids: Vec<_> = pair
            .poll_reports(10)
            .into_iter()
            .map(|r| r.report_id)
            .collect();
        assert_eq!(ids, vec!["r0", "r1", "r3"]);
    }

    #[test]
    fn verb_round_trip_names() {
        for v in Verb::ALL {
            assert_eq!(v.as_str().parse::<Verb>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.as_str()));
        }
    }
}
