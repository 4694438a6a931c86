//! Metrics, batch runs and planner comparisons, plus the aligned-column table
//! format they are reported in.

use crate::clock::Stopwatch;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::{group_persons, GroupKind};
use crate::cruise::{run_cruise, tour_length, visit_sequence, CruiseLog, FailureReason};
use crate::geometry::{Disc, Pose, Vec2};
use crate::observation::{solve_oop, OopConstraints};
use crate::planner::{plan, plan_rng, Algorithm, PlanWorld, PlannerConfig};
use crate::scenario::{ParamSet, Scenario};

/// Pose accuracy at an observation position: position error and heading
/// error against the direction facing the group.
pub fn arrive_rate(robot: Pose, oop: Vec2, damping_arg: f64) -> f64 {
    let dx = robot.x - oop.x;
    let dy = robot.y - oop.y;
    let s = (robot.theta - damping_arg - std::f64::consts::PI).sin();
    (-(dx * dx + dy * dy + s * s)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Success,
    Collision,
    Gaze,
    Planner,
    Observation,
    Perception,
    Timeout,
    /// The run never started (unreadable or invalid scenario).
    Error,
}

impl RunStatus {
    fn from_failure(f: &FailureReason) -> Self {
        match f {
            FailureReason::Collision { .. } => RunStatus::Collision,
            FailureReason::GazeIntrusion { .. } => RunStatus::Gaze,
            FailureReason::Planner { .. } => RunStatus::Planner,
            FailureReason::Observation { .. } => RunStatus::Observation,
            FailureReason::Perception { .. } => RunStatus::Perception,
            FailureReason::Timeout => RunStatus::Timeout,
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RunStatus::Success => "success",
            RunStatus::Collision => "collision",
            RunStatus::Gaze => "gaze",
            RunStatus::Planner => "planner",
            RunStatus::Observation => "observation",
            RunStatus::Perception => "perception",
            RunStatus::Timeout => "timeout",
            RunStatus::Error => "error",
        };
        f.write_str(s)
    }
}

impl FromStr for RunStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "success" => RunStatus::Success,
            "collision" => RunStatus::Collision,
            "gaze" => RunStatus::Gaze,
            "planner" => RunStatus::Planner,
            "observation" => RunStatus::Observation,
            "perception" => RunStatus::Perception,
            "timeout" => RunStatus::Timeout,
            "error" => RunStatus::Error,
            other => return Err(format!("unknown run status `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub status: RunStatus,
    pub path_length: f64,
    pub plan_time: f64,
    pub nodes: usize,
    pub arrive_rates: Vec<f64>,
    pub min_person_distance: Option<f64>,
    pub adm_count: usize,
}

impl RunSummary {
    pub fn success(&self) -> bool {
        self.status == RunStatus::Success
    }

    pub fn from_log(scenario: &str, seed: u64, log: &CruiseLog) -> Self {
        let s = &log.summary;
        Self {
            scenario: scenario.to_string(),
            seed,
            status: s.failure.as_ref().map_or(RunStatus::Success, RunStatus::from_failure),
            path_length: s.total_path_length,
            plan_time: log.plan_wall_time,
            nodes: s.total_nodes,
            arrive_rates: log.legs().map(|l| l.arrive_rate).collect(),
            min_person_distance: s.min_person_distance,
            adm_count: s.adm_count,
        }
    }

    fn errored(scenario: &str, seed: u64) -> Self {
        Self {
            scenario: scenario.to_string(),
            seed,
            status: RunStatus::Error,
            path_length: 0.0,
            plan_time: 0.0,
            nodes: 0,
            arrive_rates: Vec::new(),
            min_person_distance: None,
            adm_count: 0,
        }
    }
}

/// Mean and sample standard deviation (zero for fewer than two values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std })
    }
}

impl fmt::Display for Stat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}±{:.2}", self.mean, self.std)
    }
}

/// Aggregate row over the runs of one scenario (or one planner). Length,
/// time and node statistics cover successful runs only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub label: String,
    pub runs: usize,
    pub successes: usize,
    pub path_length: Option<Stat>,
    pub plan_time: Option<Stat>,
    pub nodes: Option<Stat>,
}

impl Aggregate {
    pub fn over(label: &str, runs: &[RunSummary]) -> Self {
        let ok: Vec<&RunSummary> = runs.iter().filter(|r| r.success()).collect();
        let col = |f: fn(&RunSummary) -> f64| Stat::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
        Self {
            label: label.to_string(),
            runs: runs.len(),
            successes: ok.len(),
            path_length: col(|r| r.path_length),
            plan_time: col(|r| r.plan_time),
            nodes: col(|r| r.nodes as f64),
        }
    }

    pub fn success_rate(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.successes as f64 / self.runs as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    /// Sorted by scenario, then seed.
    pub runs: Vec<RunSummary>,
    /// One per scenario, in scenario order.
    pub aggregates: Vec<Aggregate>,
}

/// Runs every scenario with every seed. Scenarios that failed to load appear
/// as `error` rows. Runs fan out across threads; results come back in input
/// order regardless.
pub fn run_batch(
    scenarios: &[(String, Result<Scenario, String>)],
    seeds: &[u64],
    overrides: &[(String, String)],
) -> BatchReport {
    let jobs: Vec<(usize, u64)> = (0..scenarios.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let run = |&(i, seed): &(usize, u64)| -> RunSummary {
        let (name, scenario) = &scenarios[i];
        let Ok(scenario) = scenario else {
            return RunSummary::errored(name, seed);
        };
        let mut params = scenario.params.clone();
        for (k, v) in overrides {
            if params.set(k, v).is_err() {
                return RunSummary::errored(name, seed);
            }
        }
        if params.validate().is_err() {
            return RunSummary::errored(name, seed);
        }
        RunSummary::from_log(name, seed, &run_cruise(scenario, &params, seed))
    };
    let runs = parallel_map(&jobs, run);
    let aggregates = scenarios
        .iter()
        .enumerate()
        .map(|(i, (name, _))| {
            let rows: Vec<RunSummary> = runs
                .iter()
                .zip(&jobs)
                .filter(|(_, j)| j.0 == i)
                .map(|(r, _)| r.clone())
                .collect();
            Aggregate::over(name, &rows)
        })
        .collect();
    BatchReport { runs, aggregates }
}

#[cfg(feature = "parallel")]
fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(&f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

const RUN_COLUMNS: [&str; 9] = [
    "scenario",
    "seed",
    "status",
    "path_m",
    "plan_s",
    "nodes",
    "arrive_rates",
    "min_person_m",
    "adm",
];

fn emit_aligned(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i + 1 == cells.len() {
                s.push_str(c);
            } else {
                s.push_str(&format!("{c:<w$}  "));
            }
        }
        s.push('\n');
        s
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

/// Per-run table. Floats print in shortest round-trip form so that
/// [`parse_run_table`] recovers every value exactly.
pub fn run_table(runs: &[RunSummary]) -> String {
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            let rates = if r.arrive_rates.is_empty() {
                "-".to_string()
            } else {
                r.arrive_rates.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
            };
            vec![
                r.scenario.clone(),
                r.seed.to_string(),
                r.status.to_string(),
                r.path_length.to_string(),
                r.plan_time.to_string(),
                r.nodes.to_string(),
                rates,
                r.min_person_distance.map_or("-".to_string(), |d| d.to_string()),
                r.adm_count.to_string(),
            ]
        })
        .collect();
    emit_aligned(&RUN_COLUMNS, &rows)
}

pub fn parse_run_table(text: &str) -> Result<Vec<RunSummary>, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or("empty table")?.split_whitespace().collect();
    if header != RUN_COLUMNS {
        return Err(format!("unexpected header {header:?}"));
    }
    let num = |s: &str, what: &str| s.parse::<f64>().map_err(|e| format!("bad {what} `{s}`: {e}"));
    lines
        .map(|line| {
            let c: Vec<&str> = line.split_whitespace().collect();
            if c.len() != RUN_COLUMNS.len() {
                return Err(format!("expected {} columns: `{line}`", RUN_COLUMNS.len()));
            }
            let arrive_rates = if c[6] == "-" {
                Vec::new()
            } else {
                c[6].split(';')
                    .map(|v| num(v, "arrive rate"))
                    .collect::<Result<_, _>>()?
            };
            Ok(RunSummary {
                scenario: c[0].to_string(),
                seed: c[1].parse().map_err(|e| format!("bad seed `{}`: {e}", c[1]))?,
                status: c[2].parse()?,
                path_length: num(c[3], "path length")?,
                plan_time: num(c[4], "plan time")?,
                nodes: c[5].parse().map_err(|e| format!("bad nodes `{}`: {e}", c[5]))?,
                arrive_rates,
                min_person_distance: if c[7] == "-" {
                    None
                } else {
                    Some(num(c[7], "distance")?)
                },
                adm_count: c[8].parse().map_err(|e| format!("bad adm `{}`: {e}", c[8]))?,
            })
        })
        .collect()
}

fn stat_cell(s: Option<Stat>) -> String {
    s.map_or("-".to_string(), |s| s.to_string())
}

/// Aggregate table: success count, then mean±std of plan time, path length and
/// node count.
pub fn aggregate_table(rows: &[Aggregate]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|a| {
            vec![
                a.label.clone(),
                format!("{}/{}", a.successes, a.runs),
                stat_cell(a.plan_time),
                stat_cell(a.path_length),
                stat_cell(a.nodes),
            ]
        })
        .collect();
    emit_aligned(&["label", "success", "plan_s", "path_m", "nodes"], &body)
}

/// Outcome of planning the full visiting tour once with one planner.
#[derive(Debug, Clone, PartialEq)]
pub struct TourPlan {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub sequence: Vec<u32>,
    pub legs: Vec<Vec<Vec2>>,
    pub path_length: f64,
    pub nodes: usize,
    pub plan_time: f64,
}

/// Static scene model shared by all planners in a comparison: the groups at
/// t = 0, their observation positions, and the collision world.
pub struct TourSetup {
    pub start: Vec2,
    /// Observation positions in visiting order, with group index.
    pub targets: Vec<(u32, Vec2)>,
    pub world: PlanWorld,
    /// Straight-line length of the visiting order.
    pub tour_lower_bound: f64,
}

pub fn tour_setup(scenario: &Scenario, params: &ParamSet) -> Result<TourSetup, String> {
    let persons = scenario.state_at(0.0);
    let (_, groups) = group_persons(&persons, params, 0.0).map_err(|e| e.to_string())?;
    let constraints = OopConstraints {
        size: Some(scenario.size),
        obstacles: &scenario.obstacles,
        persons: &persons,
        clearance: params.person_clearance(),
    };
    let mut oops = Vec::new();
    let mut discs = Vec::new();
    for (k, g) in groups.iter().enumerate() {
        if g.kind != GroupKind::Static {
            continue;
        }
        let pose = solve_oop(g, &persons, params, &constraints).map_err(|e| e.to_string())?;
        oops.push((k as u32, pose.oop));
        discs.push(pose.gaze_disc());
    }
    let start = scenario.robot_start.position();
    let order = if oops.is_empty() {
        Vec::new()
    } else {
        visit_sequence(start, &oops).map_err(|e| e.to_string())?
    };
    let targets: Vec<(u32, Vec2)> = order
        .iter()
        .map(|id| *oops.iter().find(|(k, _)| k == id).unwrap())
        .collect();
    let pts: Vec<Vec2> = targets.iter().map(|t| t.1).collect();
    let world = PlanWorld::from_persons(
        scenario.size,
        &scenario.obstacles,
        &persons,
        discs,
        params.person_clearance(),
        params,
    );
    Ok(TourSetup {
        start,
        tour_lower_bound: tour_length(start, &pts),
        targets,
        world,
    })
}

/// Plans every leg of the tour with `algorithm`. Leg `k` draws from stream
/// `k` of `seed` for every algorithm alike.
pub fn plan_tour(setup: &TourSetup, params: &ParamSet, algorithm: Algorithm, seed: u64) -> Result<TourPlan, String> {
    let config = PlannerConfig::from_params(params, algorithm);
    let mut from = setup.start;
    let mut legs = Vec::new();
    let mut nodes = 0;
    let mut time = 0.0;
    for (k, &(_, oop)) in setup.targets.iter().enumerate() {
        let mut rng = plan_rng(seed, k as u64);
        let started = Stopwatch::start();
        let out = plan(
            from,
            oop,
            Disc::new(oop, params.goal_radius),
            &setup.world,
            &config,
            &mut rng,
        )
        .map_err(|e| format!("leg {k}: {e}"))?;
        time += started.seconds();
        nodes += out.tree.len();
        from = *out.path.waypoints.last().unwrap();
        legs.push(out.path.waypoints);
    }
    Ok(TourPlan {
        algorithm,
        seed,
        sequence: setup.targets.iter().map(|t| t.0).collect(),
        path_length: legs.iter().map(|l| crate::geometry::polyline_length(l)).sum(),
        legs,
        nodes,
        plan_time: time,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<Aggregate>,
    pub runs: Vec<(Algorithm, u64, Option<TourPlan>)>,
}

/// Plans the scenario's tour with each algorithm for each seed, on one shared
/// collision world.
pub fn compare(
    scenario: &Scenario,
    params: &ParamSet,
    seeds: &[u64],
    algorithms: &[Algorithm],
) -> Result<Comparison, String> {
    let setup = tour_setup(scenario, params)?;
    let jobs: Vec<(Algorithm, u64)> = algorithms
        .iter()
        .flat_map(|&a| seeds.iter().map(move |&s| (a, s)))
        .collect();
    let results = parallel_map(&jobs, |&(a, s)| plan_tour(&setup, params, a, s).ok());
    let rows = algorithms
        .iter()
        .map(|&a| {
            let summaries: Vec<RunSummary> = jobs
                .iter()
                .zip(&results)
                .filter(|((alg, _), _)| *alg == a)
                .map(|((_, seed), r)| RunSummary {
                    scenario: a.name().to_string(),
                    seed: *seed,
                    status: if r.is_some() {
                        RunStatus::Success
                    } else {
                        RunStatus::Planner
                    },
                    path_length: r.as_ref().map_or(0.0, |p| p.path_length),
                    plan_time: r.as_ref().map_or(0.0, |p| p.plan_time),
                    nodes: r.as_ref().map_or(0, |p| p.nodes),
                    arrive_rates: Vec::new(),
                    min_person_distance: None,
                    adm_count: 0,
                })
                .collect();
            Aggregate::over(a.name(), &summaries)
        })
        .collect();
    let runs = jobs.into_iter().zip(results).map(|((a, s), r)| (a, s, r)).collect();
    Ok(Comparison { rows, runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn arrive_rate_examples() {
        let oop = Vec2::new(1.0, 2.0);
        let arg = 0.3;
        assert_eq!(arrive_rate(Pose::new(1.0, 2.0, arg + PI), oop, arg), 1.0);
        let off = arrive_rate(Pose::new(1.0, 2.0, arg + PI + FRAC_PI_2), oop, arg);
        assert!((off - (-1.0f64).exp()).abs() < 1e-12);
        let pos = arrive_rate(Pose::new(1.2, 2.0, arg + PI), oop, arg);
        assert!((pos - (-0.04f64).exp()).abs() < 1e-12);
        assert!(pos > 0.9);
    }

    #[test]
    fn stat_matches_hand_computation() {
        let s = Stat::of(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!(s.mean, 5.0);
        assert!((s.std - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(Stat::of(&[3.0]).unwrap().std, 0.0);
        assert!(Stat::of(&[]).is_none());
    }

    #[test]
    fn run_table_round_trips() {
        let runs = vec![
            RunSummary {
                scenario: "a".into(),
                seed: 3,
                status: RunStatus::Success,
                path_length: 0.1 + 0.2,
                plan_time: 1.0 / 3.0,
                nodes: 1234,
                arrive_rates: vec![0.999_999_999_1, 1.0],
                min_person_distance: Some(0.412_345_678_901_234_5),
                adm_count: 2,
            },
            RunSummary::errored("missing-file", 9),
        ];
        let text = run_table(&runs);
        assert_eq!(parse_run_table(&text).unwrap(), runs);
    }
}
