//! Sampling-based planners over the social free space: the vector-field guided
//! RRT* (`Algorithm::VmdRrtStar`) and the plain RRT / RRT* baselines used for
//! ablations. All three share the same tree, steering and collision checks.

mod cost;
mod index;
mod world;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cost::{cost_terms, edge_cost, tree_edge_cost, CostModel, CostTerms};
pub use world::{FreeSpaceSpec, PlanWorld};

use crate::geometry::{polyline_length, Disc, Vec2};
use crate::scenario::ParamSet;
use index::GridIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Rrt,
    #[serde(rename = "rrtstar")]
    RrtStar,
    #[serde(rename = "vmd")]
    VmdRrtStar,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Rrt => "RRT",
            Algorithm::RrtStar => "RRT*",
            Algorithm::VmdRrtStar => "VMD-RRT*",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rrt" => Ok(Algorithm::Rrt),
            "rrtstar" | "rrt*" => Ok(Algorithm::RrtStar),
            "vmd" | "vmd-rrt*" | "vmdrrtstar" => Ok(Algorithm::VmdRrtStar),
            other => Err(format!("unknown planner `{other}` (expected rrt, rrtstar or vmd)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub rewire_radius: f64,
    pub max_iter: usize,
    pub cost: CostModel,
    /// Return as soon as a node lands in the goal region.
    pub stop_at_goal: bool,
    /// Initial major axis of the informed ellipse as a multiple of the
    /// start-goal distance.
    pub ellipse_factor: f64,
    /// Iterations without a solution after which the ellipse grows by half.
    pub ellipse_growth_every: usize,
}

impl PlannerConfig {
    pub fn from_params(params: &ParamSet, algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            epsilon: params.epsilon_steer,
            rewire_radius: params.rewire_radius,
            max_iter: params.max_iter,
            cost: CostModel::from_params(params),
            stop_at_goal: true,
            ellipse_factor: 1.5,
            ellipse_growth_every: 2_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub state: Vec2,
    pub parent: Option<usize>,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanTree {
    pub nodes: Vec<Node>,
    #[serde(skip)]
    children: Vec<Vec<usize>>,
}

impl PlanTree {
    fn with_root(state: Vec2) -> Self {
        Self {
            nodes: vec![Node {
                state,
                parent: None,
                cost: 0.0,
            }],
            children: vec![Vec::new()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, state: Vec2, parent: usize, cost: f64) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            state,
            parent: Some(parent),
            cost,
        });
        self.children.push(Vec::new());
        self.children[parent].push(id);
        id
    }

    fn is_ancestor(&self, candidate: usize, mut node: usize) -> bool {
        while let Some(p) = self.nodes[node].parent {
            if p == candidate {
                return true;
            }
            node = p;
        }
        false
    }

    fn reparent(&mut self, node: usize, new_parent: usize, new_cost: f64) {
        if let Some(old) = self.nodes[node].parent {
            self.children[old].retain(|&c| c != node);
        }
        self.children[new_parent].push(node);
        self.nodes[node].parent = Some(new_parent);
        let delta = new_cost - self.nodes[node].cost;
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            self.nodes[n].cost += delta;
            stack.extend_from_slice(&self.children[n]);
        }
    }

    /// States from the root to `node`.
    pub fn branch(&self, mut node: usize) -> Vec<Vec2> {
        let mut out = vec![self.nodes[node].state];
        while let Some(p) = self.nodes[node].parent {
            out.push(self.nodes[p].state);
            node = p;
        }
        out.reverse();
        out
    }

    /// Checks the single-root, acyclic, parent-in-range structure.
    pub fn validate(&self) -> Result<(), String> {
        let roots = self.nodes.iter().filter(|n| n.parent.is_none()).count();
        if roots != 1 || self.nodes.first().is_some_and(|n| n.parent.is_some()) {
            return Err(format!("expected exactly one root at index 0, found {roots}"));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                if p >= self.nodes.len() || p == i {
                    return Err(format!("node {i} has invalid parent {p}"));
                }
            }
            if !n.cost.is_finite() {
                return Err(format!("node {i} has non-finite cost"));
            }
            let mut seen = 0;
            let mut cur = i;
            while let Some(p) = self.nodes[cur].parent {
                cur = p;
                seen += 1;
                if seen > self.nodes.len() {
                    return Err(format!("cycle through node {i}"));
                }
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "node_id,parent_id,x,y,cost")?;
        for (i, n) in self.nodes.iter().enumerate() {
            let parent = n.parent.map_or(-1, |p| p as i64);
            writeln!(out, "{i},{parent},{},{},{}", n.state.x, n.state.y, n.cost)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Vec2>,
    pub total_cost: f64,
    /// Tree size when the planner stopped.
    pub node_count: usize,
    pub iterations: usize,
}

impl Path {
    pub fn length(&self) -> f64 {
        polyline_length(&self.waypoints)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,y")?;
        for p in &self.waypoints {
            writeln!(out, "{},{}", p.x, p.y)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PlanOutput {
    pub path: Path,
    pub tree: PlanTree,
    /// Cheapest goal-node cost after every iteration once a goal node exists.
    pub best_cost_trace: Vec<f64>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlanError {
    #[error("no path found after {iterations} iterations ({nodes} nodes)")]
    Failure { iterations: usize, nodes: usize },
    #[error("goal region lies outside the map")]
    GoalOutOfBounds,
}

enum Sampler {
    Uniform {
        size: (f64, f64),
    },
    Informed {
        size: (f64, f64),
        start: Vec2,
        goal: Vec2,
        major: f64,
    },
}

impl Sampler {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec2 {
        match *self {
            Sampler::Uniform { size } => uniform(size, rng),
            Sampler::Informed {
                size,
                start,
                goal,
                major,
            } => {
                let focal = start.distance(goal);
                let a = 0.5 * major;
                let b = (a * a - 0.25 * focal * focal).max(0.0).sqrt();
                let center = start.lerp(goal, 0.5);
                let rot = (goal - start).angle();
                for _ in 0..64 {
                    let r = rng.gen::<f64>().sqrt();
                    let phi = rng.gen::<f64>() * std::f64::consts::TAU;
                    let local = Vec2::new(a * r * phi.cos(), b * r * phi.sin());
                    let q = center + local.rotate(rot);
                    if q.x >= 0.0 && q.x <= size.0 && q.y >= 0.0 && q.y <= size.1 {
                        return q;
                    }
                }
                uniform(size, rng)
            }
        }
    }
}

fn uniform(size: (f64, f64), rng: &mut ChaCha8Rng) -> Vec2 {
    Vec2::new(rng.gen::<f64>() * size.0, rng.gen::<f64>() * size.1)
}

fn steer(from: Vec2, toward: Vec2, epsilon: f64) -> Vec2 {
    let d = toward - from;
    let len = d.norm();
    if len <= epsilon {
        toward
    } else {
        from + d * (epsilon / len)
    }
}

/// Deterministic generator for one plan call: `stream` separates the plans of
/// a run that share `seed`.
pub fn plan_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Grows a tree from `start` until a node lands inside `goal_region`.
///
/// `goal` is the point the distance term pulls toward (normally the region
/// center). The start point is accepted as the root even if it is not free.
pub fn plan(
    start: Vec2,
    goal: Vec2,
    goal_region: Disc,
    world: &PlanWorld,
    config: &PlannerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PlanOutput, PlanError> {
    let space = &world.space;
    if !space.in_bounds(goal_region.center) {
        return Err(PlanError::GoalOutOfBounds);
    }
    let mut tree = PlanTree::with_root(start);
    let mut index = GridIndex::new(space.size, config.rewire_radius);
    index.insert(0, start);

    let field = |q: Vec2| world.field.global_unchecked(q);
    let cost = |a: Vec2, b: Vec2| -> f64 {
        match config.algorithm {
            Algorithm::VmdRrtStar => tree_edge_cost(a, b, goal, &config.cost, field),
            Algorithm::Rrt | Algorithm::RrtStar => a.distance(b),
        }
    };
    let focal = start.distance(goal);
    let mut ellipse_factor = config.ellipse_factor;
    let informed_major = |factor: f64| (factor * focal).max(focal + 2.0 * config.rewire_radius);
    let mut sampler = match config.algorithm {
        Algorithm::VmdRrtStar => Sampler::Informed {
            size: space.size,
            start,
            goal,
            major: informed_major(ellipse_factor),
        },
        _ => Sampler::Uniform { size: space.size },
    };

    let rewiring = config.algorithm != Algorithm::Rrt;
    let mut goal_nodes: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut near = Vec::new();

    if goal_region.contains(start) {
        goal_nodes.push(0);
        if config.stop_at_goal {
            return Ok(finish(tree, 0, 0, trace));
        }
    }

    for iter in 1..=config.max_iter {
        if goal_nodes.is_empty() && config.algorithm == Algorithm::VmdRrtStar && iter % config.ellipse_growth_every == 0
        {
            ellipse_factor *= 1.5;
            if let Sampler::Informed { major, .. } = &mut sampler {
                *major = informed_major(ellipse_factor);
            }
        }
        let sample = sampler.sample(rng);
        let nearest = index.nearest(sample, &tree.nodes);
        let s_near = tree.nodes[nearest].state;
        let s_new = steer(s_near, sample, config.epsilon);
        if s_new == s_near || !space.is_free(s_new) {
            record(&tree, &goal_nodes, &mut trace);
            continue;
        }

        let mut best: Option<(usize, f64)> = None;
        let c_nearest = tree.nodes[nearest].cost + cost(s_near, s_new);
        if space.segment_free(s_near, s_new) {
            best = Some((nearest, c_nearest));
        }
        if rewiring {
            index.within(s_new, config.rewire_radius, &tree.nodes, &mut near);
            for &k in &near {
                if k == nearest {
                    continue;
                }
                let s_k = tree.nodes[k].state;
                let c = tree.nodes[k].cost + cost(s_k, s_new);
                if best.map_or(true, |(_, cb)| c < cb) && space.segment_free(s_k, s_new) {
                    best = Some((k, c));
                }
            }
        }
        let Some((parent, c_new)) = best else {
            record(&tree, &goal_nodes, &mut trace);
            continue;
        };
        let new_id = tree.push(s_new, parent, c_new);
        index.insert(new_id, s_new);

        if rewiring {
            for &k in &near {
                if k == parent || tree.is_ancestor(k, new_id) {
                    continue;
                }
                let s_k = tree.nodes[k].state;
                let c = c_new + cost(s_new, s_k);
                if c < tree.nodes[k].cost && space.segment_free(s_new, s_k) {
                    tree.reparent(k, new_id, c);
                }
            }
        }

        if goal_region.contains(s_new) {
            goal_nodes.push(new_id);
            if config.stop_at_goal {
                return Ok(finish(tree, new_id, iter, trace));
            }
        }
        record(&tree, &goal_nodes, &mut trace);
    }

    match best_goal(&tree, &goal_nodes) {
        Some(node) if !config.stop_at_goal => Ok(finish(tree, node, config.max_iter, trace)),
        _ => Err(PlanError::Failure {
            iterations: config.max_iter,
            nodes: tree.len(),
        }),
    }
}

fn best_goal(tree: &PlanTree, goal_nodes: &[usize]) -> Option<usize> {
    goal_nodes
        .iter()
        .copied()
        .min_by(|&a, &b| tree.nodes[a].cost.total_cmp(&tree.nodes[b].cost))
}

fn record(tree: &PlanTree, goal_nodes: &[usize], trace: &mut Vec<f64>) {
    if let Some(g) = best_goal(tree, goal_nodes) {
        trace.push(tree.nodes[g].cost);
    }
}

fn finish(tree: PlanTree, goal: usize, iterations: usize, best_cost_trace: Vec<f64>) -> PlanOutput {
    let path = Path {
        waypoints: tree.branch(goal),
        total_cost: tree.nodes[goal].cost,
        node_count: tree.len(),
        iterations,
    };
    PlanOutput {
        path,
        tree,
        best_cost_trace,
    }
}
