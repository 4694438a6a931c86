//! Auto-cruise: perceive the scene, order the unvisited groups, plan toward
//! the lead group's observation position, drive to the next sub-goal, repeat.
//!
//! Perception is frozen between decisions; decisions happen at sub-goal
//! arrivals, after each group visit, and every [`HOLD_PERIOD`] seconds while
//! the robot waits for walking people to settle.

mod log;
mod subgoal;
mod tsp;

use crate::clock::Stopwatch;
use std::collections::BTreeMap;

pub use log::{
    AdmEvent, CruiseLog, CruiseSummary, DecisionRecord, FailureReason, GroupRecord, LegRecord, LogRecord, PlanRecord,
    StepEvent, StepRecord,
};
pub use subgoal::{next_subgoal, path_from, truncate_path, SubGoal};
pub use tsp::{tour_length, visit_sequence, MAX_EXACT_TSP};

use crate::clustering::{group_persons, GroupKind};
use crate::eval::arrive_rate;
use crate::geometry::{Disc, Pose, Vec2};
use crate::observation::{solve_oop, ObservationPose, OopConstraints};
use crate::planner::{plan, plan_rng, Algorithm, PlanWorld, PlannerConfig};
use crate::scenario::{ParamSet, PersonState, Scenario};

/// Seconds between re-perceptions while no static group is left to visit
/// but people are still walking.
pub const HOLD_PERIOD: f64 = 1.0;
/// Slack for the strict gaze-disc test against rounding on the disc boundary.
const GAZE_TOL: f64 = 1e-9;

/// A group as tracked across re-clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedGroup {
    pub id: u32,
    /// Sorted person ids.
    pub members: Vec<u32>,
    pub kind: GroupKind,
    /// Observation pose, solved for static groups only.
    pub pose: Option<ObservationPose>,
    /// Why a static group has no observation pose.
    pub unobservable: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Mode {
    /// Following `track` toward the current sub-goal.
    Track {
        track: Vec<Vec2>,
        cursor: usize,
        is_final: bool,
    },
    /// Waiting in place until `until`.
    Hold { until: f64 },
}

#[derive(Debug, Clone)]
pub struct CruiseState {
    pub robot: Pose,
    pub t: f64,
    /// Group id -> member set at the time of the visit.
    pub visited: BTreeMap<u32, Vec<u32>>,
    pub current_target: Option<u32>,
    pub pending_path: Option<Vec<Vec2>>,
    pub groups: Vec<TrackedGroup>,
    pub adm_events: Vec<AdmEvent>,
    mode: Mode,
    step_index: u64,
    next_group_id: u32,
    plan_index: u64,
    /// Member ids + poses -> solved observation pose.
    oop_cache: BTreeMap<Vec<u32>, (Vec<[u64; 3]>, ObservationPose)>,
}

impl CruiseState {
    fn new(start: Pose) -> Self {
        Self {
            robot: start,
            t: 0.0,
            visited: BTreeMap::new(),
            current_target: None,
            pending_path: None,
            groups: Vec::new(),
            adm_events: Vec::new(),
            mode: Mode::Hold { until: 0.0 },
            step_index: 0,
            next_group_id: 0,
            plan_index: 0,
            oop_cache: BTreeMap::new(),
        }
    }

    pub fn is_visited(&self, g: &TrackedGroup) -> bool {
        self.visited.get(&g.id) == Some(&g.members)
    }

    fn group(&self, id: u32) -> Option<&TrackedGroup> {
        self.groups.iter().find(|g| g.id == id)
    }
}

/// Carries ids over from `previous` by largest member overlap; new groups get
/// fresh ids in the order given.
fn match_identities(previous: &[TrackedGroup], current: &[Vec<u32>], next_id: &mut u32) -> Vec<u32> {
    let mut pairs = Vec::new();
    for (pi, p) in previous.iter().enumerate() {
        for (ci, c) in current.iter().enumerate() {
            let overlap = c.iter().filter(|m| p.members.binary_search(m).is_ok()).count();
            if overlap > 0 {
                pairs.push((overlap, p.id, pi, ci));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.3.cmp(&b.3)));
    let mut ids = vec![None; current.len()];
    let mut taken = vec![false; previous.len()];
    for (_, id, pi, ci) in pairs {
        if !taken[pi] && ids[ci].is_none() {
            taken[pi] = true;
            ids[ci] = Some(id);
        }
    }
    ids.into_iter()
        .map(|id| {
            id.unwrap_or_else(|| {
                let id = *next_id;
                *next_id += 1;
                id
            })
        })
        .collect()
}

fn pose_key(persons: &[&PersonState]) -> Vec<[u64; 3]> {
    persons
        .iter()
        .map(|p| [p.x.to_bits(), p.y.to_bits(), p.theta.to_bits()])
        .collect()
}

struct Cruise<'a> {
    scenario: &'a Scenario,
    params: &'a ParamSet,
    seed: u64,
    state: CruiseState,
    records: Vec<LogRecord>,
    outcome: Option<Result<(), FailureReason>>,
    driven: f64,
    leg_driven: f64,
    leg_plans: usize,
    leg_nodes: usize,
    plans: usize,
    total_nodes: usize,
    legs: usize,
    min_person: Option<f64>,
    plan_wall: f64,
}

impl<'a> Cruise<'a> {
    fn fail(&mut self, reason: FailureReason) {
        if self.outcome.is_none() {
            self.outcome = Some(Err(reason));
        }
    }

    /// Clusters, carries group identities over and solves observation poses.
    /// Static groups without a solvable pose stay in the scene as
    /// unobservable; they only fail the run if the scene settles with them.
    fn perceive(&mut self, persons: &[PersonState]) -> Result<(), FailureReason> {
        let t = self.state.t;
        let params = self.params;
        let (_, set) =
            group_persons(persons, params, t).map_err(|e| FailureReason::Perception { message: e.to_string() })?;
        let partition: Vec<Vec<u32>> = set
            .iter()
            .map(|g| {
                let mut ids = g.member_ids(persons);
                ids.sort_unstable();
                ids
            })
            .collect();
        let ids = match_identities(&self.state.groups, &partition, &mut self.state.next_group_id);

        let constraints = OopConstraints {
            size: Some(self.scenario.size),
            obstacles: &self.scenario.obstacles,
            persons,
            clearance: params.person_clearance(),
        };
        let mut groups = Vec::with_capacity(set.len());
        for ((g, members), id) in set.iter().zip(partition).zip(ids) {
            let mut unobservable = None;
            let pose = if g.kind == GroupKind::Static {
                let key = pose_key(&g.persons(persons).collect::<Vec<_>>());
                match self.state.oop_cache.get(&members) {
                    Some((k, pose)) if *k == key => Some(*pose),
                    _ => match solve_oop(g, persons, params, &constraints) {
                        Ok(pose) => {
                            self.state.oop_cache.insert(members.clone(), (key, pose));
                            Some(pose)
                        }
                        Err(e) => {
                            unobservable = Some(e.to_string());
                            None
                        }
                    },
                }
            } else {
                None
            };
            groups.push(TrackedGroup {
                id,
                members,
                kind: g.kind,
                pose,
                unobservable,
            });
        }
        groups.sort_by_key(|g| g.id);
        self.state.groups = groups;
        let current = &self.state.groups;
        self.state
            .visited
            .retain(|id, members| current.iter().any(|g| g.id == *id && &g.members == members));
        Ok(())
    }

    fn gaze_discs(&self) -> Vec<(u32, Disc)> {
        self.state
            .groups
            .iter()
            .filter_map(|g| g.pose.map(|p| (g.id, p.gaze_disc())))
            .collect()
    }

    /// Re-perceive, re-order and re-plan. `arrived` marks a decision made
    /// right after visiting the previous target.
    fn decide(&mut self, arrived: bool) {
        let t = self.state.t;
        let persons = self.scenario.state_at(t);
        if let Err(reason) = self.perceive(&persons) {
            self.fail(reason);
            return;
        }
        let robot = self.state.robot.position();
        if let Some((group, _)) = self
            .gaze_discs()
            .into_iter()
            .find(|(_, d)| robot.distance(d.center) < d.radius - GAZE_TOL)
        {
            self.fail(FailureReason::GazeIntrusion { group });
            return;
        }

        let targets: Vec<(u32, Vec2)> = self
            .state
            .groups
            .iter()
            .filter(|g| g.kind == GroupKind::Static && !self.state.is_visited(g))
            .filter_map(|g| g.pose.map(|p| (g.id, p.oop)))
            .collect();
        let sequence = if targets.is_empty() {
            Vec::new()
        } else {
            match visit_sequence(robot, &targets) {
                Ok(s) => s,
                Err(e) => {
                    self.fail(FailureReason::Perception { message: e.to_string() });
                    return;
                }
            }
        };
        let points: Vec<Vec2> = sequence
            .iter()
            .map(|id| targets.iter().find(|(t, _)| t == id).unwrap().1)
            .collect();
        let tour = tour_length(robot, &points);
        let lead = sequence.first().copied();

        if let (Some(old), Some(new)) = (self.state.current_target, lead) {
            if old != new && !arrived {
                let ev = AdmEvent { t, old, new };
                self.state.adm_events.push(ev.clone());
                self.records.push(LogRecord::Adm(ev));
            }
        }
        self.state.current_target = lead;

        let mut decision = DecisionRecord {
            t,
            x: robot.x,
            y: robot.y,
            groups: self.group_records(),
            sequence,
            tour_length: tour,
            target: lead,
            plan: None,
        };

        let Some(target) = lead else {
            self.state.pending_path = None;
            self.records.push(LogRecord::Decision(decision));
            if self.scenario.has_motion_after(t) {
                self.state.mode = Mode::Hold { until: t + HOLD_PERIOD };
            } else if let Some(g) = self.state.groups.iter().find(|g| g.unobservable.is_some()) {
                let reason = FailureReason::Observation {
                    group: g.id,
                    message: g.unobservable.clone().unwrap_or_default(),
                };
                self.fail(reason);
            } else {
                self.outcome = Some(Ok(()));
            }
            return;
        };

        let pose = self
            .state
            .group(target)
            .and_then(|g| g.pose)
            .expect("targets have poses");
        match self.plan_to(&persons, robot, pose.oop) {
            Ok((path, nodes, iterations, cost)) => {
                let sg = next_subgoal(&path, robot, self.params.r_rob);
                let track = truncate_path(&path, sg.along);
                decision.plan = Some(PlanRecord {
                    node_count: nodes,
                    iterations,
                    path_length: crate::geometry::polyline_length(&path),
                    cost,
                    subgoal: [sg.point.x, sg.point.y],
                    subgoal_is_final: sg.is_final,
                });
                self.records.push(LogRecord::Decision(decision));
                self.state.pending_path = Some(path);
                self.state.mode = Mode::Track {
                    track,
                    cursor: 1,
                    is_final: sg.is_final,
                };
            }
            Err(message) => {
                self.records.push(LogRecord::Decision(decision));
                self.fail(FailureReason::Planner { group: target, message });
            }
        }
    }

    fn group_records(&self) -> Vec<GroupRecord> {
        self.state
            .groups
            .iter()
            .map(|g| GroupRecord {
                id: g.id,
                members: g.members.clone(),
                kind: g.kind,
                visited: self.state.is_visited(g),
                oop: g.pose.map(|p| [p.oop.x, p.oop.y]),
                damping_arg: g.pose.map(|p| p.damping_arg),
                gaze_center: g.pose.map(|p| [p.gaze_center.x, p.gaze_center.y]),
                gaze_radius: g.pose.map(|p| p.gaze_radius),
            })
            .collect()
    }

    fn plan_to(
        &mut self,
        persons: &[PersonState],
        robot: Vec2,
        oop: Vec2,
    ) -> Result<(Vec<Vec2>, usize, usize, f64), String> {
        let params = self.params;
        // Keep the start itself outside the person discs when a walker has
        // come closer than the planning clearance (but not below d_thres).
        let nearest = persons
            .iter()
            .map(|p| p.position().distance(robot))
            .fold(f64::INFINITY, f64::min);
        let clearance = params.person_clearance().min(nearest - 1e-3).max(params.d_thres);
        let discs = self.gaze_discs().into_iter().map(|(_, d)| d).collect();
        let world = PlanWorld::from_persons(
            self.scenario.size,
            &self.scenario.obstacles,
            persons,
            discs,
            clearance,
            params,
        );
        let config = PlannerConfig::from_params(params, Algorithm::VmdRrtStar);
        let mut rng = plan_rng(self.seed, self.state.plan_index);
        self.state.plan_index += 1;
        let started = Stopwatch::start();
        let result = plan(
            robot,
            oop,
            Disc::new(oop, params.goal_radius),
            &world,
            &config,
            &mut rng,
        );
        self.plan_wall += started.seconds();
        let out = result.map_err(|e| e.to_string())?;
        self.plans += 1;
        self.leg_plans += 1;
        self.total_nodes += out.tree.len();
        self.leg_nodes += out.tree.len();
        let mut path = out.path.waypoints;
        let last = *path.last().unwrap();
        if last != oop && world.space.segment_free(last, oop) {
            path.push(oop);
        }
        Ok((path, out.tree.len(), out.path.iterations, out.path.total_cost))
    }

    /// Advances one time step and reports whether the current track ended.
    fn advance(&mut self) -> Option<bool> {
        let step = self.params.v_robot * self.params.dt;
        match &mut self.state.mode {
            Mode::Hold { .. } => None,
            Mode::Track {
                track,
                cursor,
                is_final,
            } => {
                let mut left = step;
                let mut pos = self.state.robot.position();
                let mut heading = self.state.robot.theta;
                while left > 0.0 && *cursor < track.len() {
                    let target = track[*cursor];
                    let d = target - pos;
                    let len = d.norm();
                    if len > 0.0 {
                        heading = d.angle();
                    }
                    if len <= left {
                        pos = target;
                        left -= len;
                        *cursor += 1;
                    } else {
                        pos = pos + d * (left / len);
                        left = 0.0;
                    }
                }
                let moved = step - left;
                self.driven += moved;
                self.leg_driven += moved;
                self.state.robot = Pose::new(pos.x, pos.y, heading);
                (*cursor >= track.len()).then_some(*is_final)
            }
        }
    }

    fn arrive(&mut self) {
        let Some(target) = self.state.current_target else {
            return;
        };
        let Some(group) = self.state.group(target).cloned() else {
            return;
        };
        let pose = group.pose.expect("targets have poses");
        let robot = self.state.robot.position();
        self.state.robot = Pose::new(robot.x, robot.y, pose.observation_heading());
        let ar = arrive_rate(self.state.robot, pose.oop, pose.damping_arg);
        self.state.visited.insert(group.id, group.members.clone());
        self.records.push(LogRecord::Leg(LegRecord {
            t: self.state.t,
            group: group.id,
            members: group.members,
            path_length: self.leg_driven,
            plans: self.leg_plans,
            node_count: self.leg_nodes,
            arrive_rate: ar,
            x: self.state.robot.x,
            y: self.state.robot.y,
            theta: self.state.robot.theta,
        }));
        self.legs += 1;
        self.leg_driven = 0.0;
        self.leg_plans = 0;
        self.leg_nodes = 0;
    }

    fn check_safety(&mut self, persons: &[PersonState]) -> Option<f64> {
        let robot = self.state.robot.position();
        let nearest = persons
            .iter()
            .map(|p| (p.id, p.position().distance(robot)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((person, d)) = nearest {
            self.min_person = Some(self.min_person.map_or(d, |m: f64| m.min(d)));
            if d < self.params.d_thres {
                self.fail(FailureReason::Collision { person, distance: d });
            }
        }
        if let Some((group, _)) = self
            .gaze_discs()
            .into_iter()
            .find(|(_, disc)| robot.distance(disc.center) < disc.radius - GAZE_TOL)
        {
            self.fail(FailureReason::GazeIntrusion { group });
        }
        nearest.map(|(_, d)| d)
    }

    fn run(&mut self) {
        let params = self.params;
        let persons = self.scenario.state_at(0.0);
        self.check_safety(&persons);
        if self.outcome.is_some() {
            return;
        }
        self.decide(false);
        while self.outcome.is_none() {
            self.state.step_index += 1;
            self.state.t = self.state.step_index as f64 * params.dt;
            if self.state.t > params.t_max {
                self.fail(FailureReason::Timeout);
                break;
            }
            let ended = self.advance();
            let persons = self.scenario.state_at(self.state.t);
            let event = match ended {
                Some(true) => Some(StepEvent::Arrival),
                Some(false) => Some(StepEvent::Subgoal),
                None => None,
            };
            if ended == Some(true) {
                self.arrive();
            }
            let nearest = self.check_safety(&persons);
            self.records.push(LogRecord::Step(StepRecord {
                t: self.state.t,
                x: self.state.robot.x,
                y: self.state.robot.y,
                theta: self.state.robot.theta,
                nearest_person: nearest,
                target: self.state.current_target,
                event,
            }));
            if self.outcome.is_some() {
                break;
            }
            match (ended, &self.state.mode) {
                (Some(arrived), _) => self.decide(arrived),
                (None, Mode::Hold { until }) if self.state.t >= *until - 1e-9 => self.decide(false),
                _ => {}
            }
        }
    }
}

/// Simulates one cruise over `scenario` with `params` (which replace the
/// scenario's own). Every plan call draws from its own stream of `seed`.
pub fn run_cruise(scenario: &Scenario, params: &ParamSet, seed: u64) -> CruiseLog {
    let mut cruise = Cruise {
        scenario,
        params,
        seed,
        state: CruiseState::new(scenario.robot_start),
        records: Vec::new(),
        outcome: None,
        driven: 0.0,
        leg_driven: 0.0,
        leg_plans: 0,
        leg_nodes: 0,
        plans: 0,
        total_nodes: 0,
        legs: 0,
        min_person: None,
        plan_wall: 0.0,
    };
    cruise.run();
    let failure = match cruise.outcome.take() {
        Some(Ok(())) => None,
        Some(Err(reason)) => Some(reason),
        None => Some(FailureReason::Timeout),
    };
    CruiseLog {
        summary: CruiseSummary {
            success: failure.is_none(),
            failure,
            t_end: cruise.state.t,
            total_path_length: cruise.driven,
            legs: cruise.legs,
            adm_count: cruise.state.adm_events.len(),
            plans: cruise.plans,
            total_nodes: cruise.total_nodes,
            min_person_distance: cruise.min_person,
        },
        records: cruise.records,
        plan_wall_time: cruise.plan_wall,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tracked(id: u32, members: &[u32]) -> TrackedGroup {
        TrackedGroup {
            id,
            members: members.to_vec(),
            kind: GroupKind::Static,
            pose: None,
            unobservable: None,
        }
    }

    #[test]
    fn identities_follow_largest_overlap() {
        let prev = [tracked(0, &[1, 2, 3]), tracked(1, &[4, 5])];
        let mut next = 2;
        // Person 3 migrates from group 0 to group 1.
        let ids = match_identities(&prev, &[vec![1, 2], vec![3, 4, 5]], &mut next);
        assert_eq!(ids, vec![0, 1]);
        // A split leaves the smaller part with a fresh id.
        let ids = match_identities(&prev, &[vec![1], vec![2, 3], vec![4, 5]], &mut next);
        assert_eq!(ids, vec![2, 0, 1]);
        assert_eq!(next, 3);
    }

    #[test]
    fn empty_scene_succeeds_immediately() {
        let s = Scenario::new((5.0, 5.0), Pose::new(1.0, 1.0, 0.0));
        let log = run_cruise(&s, &s.params, 0);
        assert!(log.summary.success);
        assert_eq!(log.summary.legs, 0);
        assert_eq!(log.steps().count(), 0);
    }
}
