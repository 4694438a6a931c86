//! Cruise log: one JSON object per line, the summary last.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::clustering::GroupKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepEvent {
    Subgoal,
    Arrival,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    /// `None` when the scene has no persons.
    pub nearest_person: Option<f64>,
    pub target: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<StepEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub id: u32,
    pub members: Vec<u32>,
    pub kind: GroupKind,
    pub visited: bool,
    /// Observation position, present for static groups.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oop: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping_arg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaze_center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaze_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub node_count: usize,
    pub iterations: usize,
    pub path_length: f64,
    pub cost: f64,
    pub subgoal: [f64; 2],
    pub subgoal_is_final: bool,
}

/// Perception and re-decision at the start, at a sub-goal, after an arrival,
/// or while holding for the scene to settle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub groups: Vec<GroupRecord>,
    /// Visiting order over unvisited static groups.
    pub sequence: Vec<u32>,
    /// Straight-line length of that order from the robot.
    pub tour_length: f64,
    pub target: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmEvent {
    pub t: f64,
    pub old: u32,
    pub new: u32,
}

/// One completed leg: the robot reached a group's observation position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegRecord {
    pub t: f64,
    pub group: u32,
    pub members: Vec<u32>,
    /// Distance driven since the previous arrival (or the start).
    pub path_length: f64,
    pub plans: usize,
    pub node_count: usize,
    pub arrive_rate: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Decision(DecisionRecord),
    Adm(AdmEvent),
    Step(StepRecord),
    Leg(LegRecord),
    Summary(CruiseSummary),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureReason {
    Collision { person: u32, distance: f64 },
    GazeIntrusion { group: u32 },
    Planner { group: u32, message: String },
    Observation { group: u32, message: String },
    Perception { message: String },
    Timeout,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::Collision { .. } => f.write_str("collision"),
            FailureReason::GazeIntrusion { .. } => f.write_str("gaze"),
            FailureReason::Planner { .. } => f.write_str("planner"),
            FailureReason::Observation { .. } => f.write_str("observation"),
            FailureReason::Perception { .. } => f.write_str("perception"),
            FailureReason::Timeout => f.write_str("timeout"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CruiseSummary {
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureReason>,
    pub t_end: f64,
    pub total_path_length: f64,
    pub legs: usize,
    pub adm_count: usize,
    pub plans: usize,
    pub total_nodes: usize,
    pub min_person_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CruiseLog {
    pub records: Vec<LogRecord>,
    pub summary: CruiseSummary,
    /// Wall-clock seconds spent planning. Kept out of the serialized log so
    /// that logs are reproducible byte for byte.
    pub plan_wall_time: f64,
}

impl CruiseLog {
    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Step(s) => Some(s),
            _ => None,
        })
    }

    pub fn decisions(&self) -> impl Iterator<Item = &DecisionRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Decision(d) => Some(d),
            _ => None,
        })
    }

    pub fn legs(&self) -> impl Iterator<Item = &LegRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Leg(l) => Some(l),
            _ => None,
        })
    }

    pub fn adm_events(&self) -> impl Iterator<Item = &AdmEvent> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Adm(a) => Some(a),
            _ => None,
        })
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in self
            .records
            .iter()
            .chain(std::iter::once(&LogRecord::Summary(self.summary.clone())))
        {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Parses a log written by [`CruiseLog::write_jsonl`]. Wall time is not
    /// part of the text and comes back as zero.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, String> {
        let mut records = Vec::new();
        let mut summary = None;
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: LogRecord = serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", n + 1))?;
            match rec {
                LogRecord::Summary(s) => summary = Some(s),
                other => records.push(other),
            }
        }
        let summary = summary.ok_or("log has no summary record")?;
        Ok(Self {
            records,
            summary,
            plan_wall_time: 0.0,
        })
    }
}
