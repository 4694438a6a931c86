#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::Deserialize;
use socialnav_core::clustering::{confidence_matrix, group_persons};
use socialnav_core::cruise::{tour_length, visit_sequence, CruiseLog};
use socialnav_core::field::{dipole_raw, person_field, FieldStack};
use socialnav_core::geometry::{Disc, Vec2};
use socialnav_core::planner::{plan, plan_rng, Algorithm, FreeSpaceSpec, PlanWorld, PlannerConfig};
use socialnav_core::scenario::Obstacle;
use socialnav_core::{load_scenario, ParamSet, PersonState, Scenario};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"))
}

pub fn scenario(name: &str) -> Scenario {
    load_scenario(scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[derive(Debug, Deserialize)]
pub struct ClusterScene {
    pub name: String,
    pub persons: Vec<(u32, f64, f64, f64)>,
    pub groups: Vec<Vec<u32>>,
}

impl ClusterScene {
    pub fn persons(&self) -> Vec<PersonState> {
        self.persons
            .iter()
            .map(|&(id, x, y, deg)| PersonState::new(id, x, y, deg.to_radians()))
            .collect()
    }

    pub fn expected(&self) -> Vec<Vec<u32>> {
        let mut g: Vec<Vec<u32>> = self
            .groups
            .iter()
            .map(|g| {
                let mut g = g.clone();
                g.sort_unstable();
                g
            })
            .collect();
        g.sort();
        g
    }

    pub fn clustered(&self, params: &ParamSet) -> Vec<Vec<u32>> {
        let persons = self.persons();
        let (_, groups) = group_persons(&persons, params, 0.0).unwrap();
        groups.id_partition(&persons)
    }
}

pub fn clustering_scenes() -> Vec<ClusterScene> {
    #[derive(Deserialize)]
    struct File {
        scene: Vec<ClusterScene>,
    }
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/clustering_scenes.toml");
    let text = std::fs::read_to_string(path).unwrap();
    toml::from_str::<File>(&text).unwrap().scene
}

pub type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn persons_from(raw: &[(f64, f64, f64)], first_id: u32) -> Vec<PersonState> {
    raw.iter()
        .enumerate()
        .map(|(i, &(x, y, th))| PersonState::new(first_id + i as u32, x, y, th))
        .collect()
}

fn clear_of(persons: &[PersonState], q: Vec2, r: f64) -> bool {
    persons.iter().all(|p| p.position().distance(q) >= r)
}

/// Sum of per-person magnitudes: the scale rounding errors are relative to.
fn field_scale(persons: &[PersonState], q: Vec2, params: &ParamSet) -> f64 {
    persons
        .iter()
        .map(|p| person_field(q, p, params).unwrap().vector().norm())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE)
}

/// Field of scene A ∪ B equals field(A) + field(B).
pub fn check_superposition(a: &[PersonState], b: &[PersonState], q: Vec2, params: &ParamSet) -> Check {
    let all: Vec<PersonState> = a.iter().chain(b).cloned().collect();
    if !clear_of(&all, q, params.r_min) {
        return Ok(());
    }
    let whole = FieldStack::new(&all, params).global(q).unwrap();
    let parts = FieldStack::new(a, params).global(q).unwrap() + FieldStack::new(b, params).global(q).unwrap();
    let scale = field_scale(&all, q, params);
    ensure((whole - parts).norm() <= 1e-9 * scale, || {
        format!(
            "superposition off by {:e} (scale {scale:e}) at {q:?}",
            (whole - parts).norm()
        )
    })
}

/// Rotating the scene about the origin rotates the field identically.
pub fn check_rotation(persons: &[PersonState], q: Vec2, phi: f64, params: &ParamSet) -> Check {
    if !clear_of(persons, q, params.r_min) {
        return Ok(());
    }
    let rotated: Vec<PersonState> = persons
        .iter()
        .map(|p| {
            let r = p.position().rotate(phi);
            PersonState::new(p.id, r.x, r.y, p.theta + phi)
        })
        .collect();
    let direct = FieldStack::new(&rotated, params).global(q.rotate(phi)).unwrap();
    let expected = FieldStack::new(persons, params).global(q).unwrap().rotate(phi);
    let scale = field_scale(persons, q, params);
    ensure((direct - expected).norm() <= 1e-9 * scale, || {
        format!(
            "rotation by {phi} off by {:e} (scale {scale:e})",
            (direct - expected).norm()
        )
    })
}

/// The local y-component is odd in y.
pub fn check_antisymmetry(x: f64, y: f64, params: &ParamSet) -> Check {
    let d = Vec2::new(x, y);
    if d.norm() < params.r_min {
        return Ok(());
    }
    let up = dipole_raw(d, params.alpha);
    let down = dipole_raw(Vec2::new(x, -y), params.alpha);
    ensure(up.y == -down.y && up.x == down.x, || {
        format!("asymmetric at ({x}, {y}): {up:?} vs {down:?}")
    })
}

pub fn check_confidence_symmetry(persons: &[PersonState], params: &ParamSet) -> Check {
    let positions: BTreeSet<(u64, u64)> = persons.iter().map(|p| (p.x.to_bits(), p.y.to_bits())).collect();
    if positions.len() < persons.len() {
        return Ok(());
    }
    let h = confidence_matrix(persons, params).unwrap();
    for i in 0..persons.len() {
        ensure(h.get(i, i) == 0.0, || format!("diagonal {i} is {}", h.get(i, i)))?;
        for j in 0..i {
            ensure(h.get(i, j) == h.get(j, i), || format!("H[{i},{j}] != H[{j},{i}]"))?;
            ensure((0.0..=1.0).contains(&h.get(i, j)), || {
                format!("H[{i},{j}] = {}", h.get(i, j))
            })?;
        }
    }
    Ok(())
}

fn permutations(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Shortest open tour from `start` by exhaustive enumeration.
pub fn brute_force_tour(start: Vec2, points: &[Vec2]) -> f64 {
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..points.len()).collect();
    permutations(&mut idx, 0, &mut |order| {
        let pts: Vec<Vec2> = order.iter().map(|&i| points[i]).collect();
        best = best.min(tour_length(start, &pts));
    });
    best
}

pub fn check_tsp(start: Vec2, points: &[Vec2]) -> Check {
    let targets: Vec<(u32, Vec2)> = points.iter().enumerate().map(|(i, &p)| (i as u32 * 3 + 1, p)).collect();
    let order = visit_sequence(start, &targets).map_err(|e| e.to_string())?;
    let mut seen = order.clone();
    seen.sort_unstable();
    let mut ids: Vec<u32> = targets.iter().map(|t| t.0).collect();
    ids.sort_unstable();
    ensure(seen == ids, || format!("{order:?} is not a permutation of {ids:?}"))?;
    let pts: Vec<Vec2> = order
        .iter()
        .map(|id| targets.iter().find(|t| t.0 == *id).unwrap().1)
        .collect();
    let got = tour_length(start, &pts);
    let best = brute_force_tour(start, points);
    ensure((got - best).abs() <= 1e-9, || format!("tour {got} vs optimum {best}"))
}

/// A small randomized planning world.
#[derive(Debug, Clone)]
pub struct WorldCase {
    pub obstacles: Vec<Obstacle>,
    pub gaze: Vec<(f64, f64, f64)>,
    pub persons: Vec<(f64, f64, f64)>,
    pub start: (f64, f64),
    pub goal: (f64, f64),
    pub seed: u64,
    pub algorithm: Algorithm,
}

pub const WORLD_SIZE: (f64, f64) = (10.0, 10.0);
pub const CLEARANCE: f64 = 0.45;

impl WorldCase {
    pub fn world(&self, params: &ParamSet) -> PlanWorld {
        let persons = persons_from(&self.persons, 1);
        PlanWorld::from_persons(
            WORLD_SIZE,
            &self.obstacles,
            &persons,
            self.gaze
                .iter()
                .map(|&(x, y, r)| Disc::new(Vec2::new(x, y), r))
                .collect(),
            CLEARANCE,
            params,
        )
    }

    pub fn config(&self, params: &ParamSet) -> PlannerConfig {
        let mut c = PlannerConfig::from_params(params, self.algorithm);
        c.max_iter = 3_000;
        c
    }
}

/// Independent point test: bounds, inflated obstacles, open gaze discs and
/// person clearance discs.
pub fn point_free(space: &FreeSpaceSpec, q: Vec2) -> bool {
    let eps = 1e-9;
    q.x >= -eps
        && q.y >= -eps
        && q.x <= space.size.0 + eps
        && q.y <= space.size.1 + eps
        && !space.obstacles.iter().any(|o| o.contains(q, true))
        && space.gaze_discs.iter().all(|d| d.center.distance(q) >= d.radius - eps)
        && space
            .persons
            .iter()
            .all(|p| p.distance(q) >= space.person_clearance - eps)
}

/// Every returned path survives a 0.01 m re-check of all its segments.
pub fn check_path_recheck(case: &WorldCase, params: &ParamSet) -> Check {
    let world = case.world(params);
    let start = Vec2::new(case.start.0, case.start.1);
    let goal = Vec2::new(case.goal.0, case.goal.1);
    if !world.space.is_free(start) || !world.space.is_free(goal) {
        return Ok(());
    }
    let mut rng = plan_rng(case.seed, 0);
    let Ok(out) = plan(
        start,
        goal,
        Disc::new(goal, params.goal_radius),
        &world,
        &case.config(params),
        &mut rng,
    ) else {
        return Ok(());
    };
    out.tree.validate()?;
    let wp = &out.path.waypoints;
    ensure(wp.first() == Some(&start), || "path does not start at the start".into())?;
    let end = *wp.last().unwrap();
    ensure(end.distance(goal) <= params.goal_radius + 1e-12, || {
        format!("path ends at {end:?}")
    })?;
    for seg in wp.windows(2) {
        let n = (seg[0].distance(seg[1]) / 0.01).ceil().max(1.0) as usize;
        for k in 0..=n {
            let q = seg[0].lerp(seg[1], k as f64 / n as f64);
            ensure(point_free(&world.space, q), || {
                format!("sample {q:?} on {seg:?} is not free")
            })?;
        }
    }
    Ok(())
}

/// Same inputs, same seed: identical plans.
pub fn check_plan_determinism(case: &WorldCase, params: &ParamSet) -> Check {
    let world = case.world(params);
    let start = Vec2::new(case.start.0, case.start.1);
    let goal = Vec2::new(case.goal.0, case.goal.1);
    let run = || {
        let mut rng = plan_rng(case.seed, 0);
        plan(
            start,
            goal,
            Disc::new(goal, params.goal_radius),
            &world,
            &case.config(params),
            &mut rng,
        )
    };
    let same = match (run(), run()) {
        (Ok(a), Ok(b)) => a.path == b.path && a.tree == b.tree && a.best_cost_trace == b.best_cost_trace,
        (Err(a), Err(b)) => a == b,
        _ => false,
    };
    ensure(same, || "two runs with one seed differ".into())
}

pub fn check_cruise_determinism(scenario: &Scenario, seed: u64) -> Check {
    let a = socialnav_core::cruise::run_cruise(scenario, &scenario.params, seed).to_jsonl();
    let b = socialnav_core::cruise::run_cruise(scenario, &scenario.params, seed).to_jsonl();
    ensure(a == b, || format!("seed {seed}: logs differ"))
}

/// Safety from the log alone: nearest-person distance never below `d_thres`
/// and no logged position strictly inside a gaze disc known at the time.
pub fn check_log_safety(log: &CruiseLog, d_thres: f64) -> Check {
    for s in log.steps() {
        if let Some(d) = s.nearest_person {
            ensure(d >= d_thres, || format!("t={}: nearest person {d}", s.t))?;
        }
    }
    let decisions: Vec<_> = log.decisions().collect();
    for s in log.steps() {
        let Some(dec) = decisions.iter().rev().find(|d| d.t <= s.t) else {
            continue;
        };
        for g in &dec.groups {
            if let (Some(c), Some(r)) = (g.gaze_center, g.gaze_radius) {
                let d = Vec2::new(c[0], c[1]).distance(Vec2::new(s.x, s.y));
                ensure(d >= r - 1e-9, || {
                    format!("t={}: inside gaze disc of group {}", s.t, g.id)
                })?;
            }
        }
    }
    Ok(())
}

/// Every logged visiting order is as short as the best permutation.
pub fn check_logged_sequences(log: &CruiseLog) -> Check {
    for d in log.decisions() {
        let targets: Vec<Vec2> = d
            .groups
            .iter()
            .filter(|g| !g.visited && g.oop.is_some() && d.sequence.contains(&g.id))
            .map(|g| {
                let o = g.oop.unwrap();
                Vec2::new(o[0], o[1])
            })
            .collect();
        ensure(targets.len() == d.sequence.len(), || {
            format!("t={}: sequence/targets mismatch", d.t)
        })?;
        if targets.is_empty() || targets.len() > 8 {
            continue;
        }
        let best = brute_force_tour(Vec2::new(d.x, d.y), &targets);
        ensure((d.tour_length - best).abs() <= 1e-9, || {
            format!("t={}: logged tour {} vs optimum {best}", d.t, d.tour_length)
        })?;
    }
    Ok(())
}

pub mod strategies {
    use std::f64::consts::PI;

    use proptest::collection::vec;
    use proptest::prelude::*;
    use socialnav_core::planner::Algorithm;
    use socialnav_core::scenario::Obstacle;

    use super::WorldCase;

    pub fn person() -> impl Strategy<Value = (f64, f64, f64)> {
        (-6.0..6.0f64, -6.0..6.0f64, -PI..PI)
    }

    pub fn persons(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        vec(person(), n)
    }

    /// Members of one conversational cluster: within 2 m of a common center.
    pub fn group(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        (-5.0..5.0f64, -5.0..5.0f64, vec((0.0..2.0f64, -PI..PI, -PI..PI), n)).prop_map(|(cx, cy, members)| {
            members
                .into_iter()
                .map(|(r, a, th)| (cx + r * a.cos(), cy + r * a.sin(), th))
                .collect()
        })
    }

    pub fn point() -> impl Strategy<Value = (f64, f64)> {
        (-7.0..7.0f64, -7.0..7.0f64)
    }

    fn obstacle() -> impl Strategy<Value = Obstacle> {
        prop_oneof![
            (0.5..8.0f64, 0.5..8.0f64, 0.2..2.0f64, 0.2..2.0f64).prop_map(|(x, y, w, h)| Obstacle::rect(
                x,
                x + w,
                y,
                y + h
            )),
            (0.5..9.5f64, 0.5..9.5f64, 0.1..0.8f64).prop_map(|(x, y, r)| Obstacle::circle(x, y, r)),
        ]
    }

    pub fn algorithm() -> impl Strategy<Value = Algorithm> {
        prop_oneof![
            Just(Algorithm::Rrt),
            Just(Algorithm::RrtStar),
            Just(Algorithm::VmdRrtStar)
        ]
    }

    pub fn world_case() -> impl Strategy<Value = WorldCase> {
        let inside = || 0.2..9.8f64;
        (
            vec(obstacle(), 0..4),
            vec((inside(), inside(), 0.05..1.0f64), 0..3),
            vec((inside(), inside(), -PI..PI), 0..4),
            (inside(), inside()),
            (inside(), inside()),
            any::<u64>(),
            algorithm(),
        )
            .prop_map(|(obstacles, gaze, persons, start, goal, seed, algorithm)| WorldCase {
                obstacles,
                gaze,
                persons,
                start,
                goal,
                seed,
                algorithm,
            })
    }
}
