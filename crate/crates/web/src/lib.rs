//! Browser bindings. Every export takes scenario TOML and returns JSON, so the
//! page needs no glue beyond `JSON.parse`. Errors come back as plain strings.

use serde::Serialize;
use socialnav_core::clustering::{group_persons, GroupKind};
use socialnav_core::eval::{plan_tour, tour_setup};
use socialnav_core::field::export_field_grid;
use socialnav_core::observation::{solve_oop, OopConstraints};
use socialnav_core::planner::Algorithm;
use socialnav_core::scenario::Obstacle;
use socialnav_core::{Pose, Scenario};
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct GroupView {
    members: Vec<u32>,
    kind: GroupKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    oop: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    heading: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gaze: Option<[f64; 3]>,
}

#[derive(Serialize)]
struct SceneView {
    size: (f64, f64),
    robot: Pose,
    /// `[id, x, y, theta]`
    persons: Vec<[f64; 4]>,
    obstacles: Vec<Obstacle>,
    groups: Vec<GroupView>,
}

#[derive(Serialize)]
struct FieldView {
    nx: usize,
    ny: usize,
    resolution: f64,
    /// Interleaved `vx, vy` per cell, zero where invalid.
    vectors: Vec<f64>,
}

#[derive(Serialize)]
struct TourView {
    algorithm: &'static str,
    legs: Vec<Vec<[f64; 2]>>,
    length: f64,
    nodes: usize,
}

fn parse(toml: &str) -> Result<Scenario, String> {
    Scenario::from_toml_str(toml).map_err(|e| e.to_string())
}

fn json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Groups at t = 0 with observation positions and gaze discs.
#[wasm_bindgen]
pub fn analyze(scenario_toml: &str) -> Result<String, String> {
    let scenario = parse(scenario_toml)?;
    let params = &scenario.params;
    let persons = scenario.state_at(0.0);
    let (_, groups) = group_persons(&persons, params, 0.0).map_err(|e| e.to_string())?;
    let constraints = OopConstraints {
        size: Some(scenario.size),
        obstacles: &scenario.obstacles,
        persons: &persons,
        clearance: params.person_clearance(),
    };
    let groups = groups
        .iter()
        .map(|g| {
            let pose = (g.kind == GroupKind::Static)
                .then(|| solve_oop(g, &persons, params, &constraints).ok())
                .flatten();
            GroupView {
                members: g.member_ids(&persons),
                kind: g.kind,
                oop: pose.map(|p| [p.oop.x, p.oop.y]),
                heading: pose.map(|p| p.observation_heading()),
                gaze: pose.map(|p| [p.gaze_center.x, p.gaze_center.y, p.gaze_radius]),
            }
        })
        .collect();
    json(&SceneView {
        size: scenario.size,
        robot: scenario.robot_start,
        persons: persons.iter().map(|p| [p.id.into(), p.x, p.y, p.theta]).collect(),
        obstacles: scenario.obstacles.clone(),
        groups,
    })
}

#[wasm_bindgen]
pub fn field(scenario_toml: &str, resolution: f64) -> Result<String, String> {
    if !(resolution >= 0.05 && resolution.is_finite()) {
        return Err(format!("resolution must be at least 0.05 m, got {resolution}"));
    }
    let grid = export_field_grid(&parse(scenario_toml)?, 0.0, resolution);
    json(&FieldView {
        nx: grid.nx,
        ny: grid.ny,
        resolution,
        vectors: grid.cells.iter().flat_map(|c| [c.vx, c.vy]).collect(),
    })
}

/// Plans the whole visiting tour at t = 0 with one planner.
#[wasm_bindgen]
pub fn tour(scenario_toml: &str, algorithm: &str, seed: u32) -> Result<String, String> {
    let scenario = parse(scenario_toml)?;
    let algorithm: Algorithm = algorithm.parse()?;
    let setup = tour_setup(&scenario, &scenario.params)?;
    let plan = plan_tour(&setup, &scenario.params, algorithm, seed.into())?;
    json(&TourView {
        algorithm: algorithm.name(),
        legs: plan
            .legs
            .iter()
            .map(|l| l.iter().map(|p| [p.x, p.y]).collect())
            .collect(),
        length: plan.path_length,
        nodes: plan.nodes,
    })
}
