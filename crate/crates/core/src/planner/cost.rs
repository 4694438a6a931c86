//! Edge cost of the vector-field guided planner: goal distance, alignment with
//! the scene field along the edge, and log field magnitude at the edge end.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::scenario::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub delta_dis: f64,
    pub delta_dir: f64,
    pub delta_mag: f64,
    pub w: f64,
    pub l: f64,
    pub m_floor: f64,
    pub n_int: usize,
}

impl CostModel {
    pub fn from_params(p: &ParamSet) -> Self {
        Self {
            delta_dis: p.delta_dis,
            delta_dir: p.delta_dir,
            delta_mag: p.delta_mag,
            w: p.w,
            l: p.l,
            m_floor: p.m_floor,
            n_int: p.n_int,
        }
    }

    /// Per-edge shift `-δ_mag·ln(m_floor)` that makes the magnitude term
    /// nonnegative. Tree costs accumulate edge costs, so a negative constant
    /// per edge would reward paths with more edges; the planner adds this
    /// offset so only the relative field magnitude matters.
    pub fn floor_offset(&self) -> f64 {
        -self.delta_mag * self.m_floor.ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTerms {
    pub dis: f64,
    pub f_dir: f64,
    pub f_mag: f64,
}

impl CostTerms {
    pub fn weighted(&self, m: &CostModel) -> f64 {
        m.delta_dis * self.dis + m.delta_dir * self.f_dir + m.delta_mag * self.f_mag
    }
}

/// Cost terms of the straight edge `from -> to` under `field`.
///
/// The direction term integrates `(w - l * t . v) * |edge|` along the edge
/// with the trapezoid rule, where `t` is the unit tangent and `v` the unit
/// field (zero where the field vanishes).
pub fn cost_terms(from: Vec2, to: Vec2, goal: Vec2, model: &CostModel, field: impl Fn(Vec2) -> Vec2) -> CostTerms {
    let edge = to - from;
    let len = edge.norm();
    let f_dir = if len > 0.0 {
        let tangent = edge * (1.0 / len);
        let n = model.n_int.max(2);
        let h = 1.0 / (n - 1) as f64;
        let mut acc = 0.0;
        for k in 0..n {
            let v = field(from.lerp(to, k as f64 * h));
            let m = v.norm();
            let align = if m > 0.0 { tangent.dot(v) / m } else { 0.0 };
            let weight = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            acc += weight * (model.w - model.l * align);
        }
        acc * h * len
    } else {
        0.0
    };
    let f_mag = field(to).norm().max(model.m_floor).ln();
    CostTerms {
        dis: goal.distance(to),
        f_dir,
        f_mag,
    }
}

/// Edge cost as accumulated along the tree: the weighted terms plus
/// [`CostModel::floor_offset`]. Never negative for `w >= l`.
pub fn tree_edge_cost(from: Vec2, to: Vec2, goal: Vec2, model: &CostModel, field: impl Fn(Vec2) -> Vec2) -> f64 {
    edge_cost(from, to, goal, model, field) + model.floor_offset()
}

pub fn edge_cost(from: Vec2, to: Vec2, goal: Vec2, model: &CostModel, field: impl Fn(Vec2) -> Vec2) -> f64 {
    cost_terms(from, to, goal, model, field).weighted(model)
}
