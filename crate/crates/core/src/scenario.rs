//! World description: people, obstacles, map bounds, motion scripts and the
//! tunable parameter set, plus the TOML scenario file format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::geometry::{angle_diff, normalize_angle, segment_point_distance, Pose, Vec2};

/// Inflation applied to obstacles that do not state one, meters.
pub const DEFAULT_INFLATION: f64 = 0.3;

/// One timed waypoint of a motion script.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonState {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<Vec<Waypoint>>,
}

impl PersonState {
    pub fn new(id: u32, x: f64, y: f64, theta: f64) -> Self {
        Self {
            id,
            x,
            y,
            theta: normalize_angle(theta),
            script: None,
        }
    }

    pub fn with_script(mut self, script: Vec<Waypoint>) -> Self {
        self.script = Some(script);
        self
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.theta)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::from_angle(self.theta)
    }

    /// Script waypoints with the declared pose prepended at t = 0 when the
    /// script itself starts later.
    fn trajectory(&self) -> Option<Vec<Waypoint>> {
        let script = self.script.as_ref().filter(|s| !s.is_empty())?;
        let mut out = Vec::with_capacity(script.len() + 1);
        if script[0].t > 0.0 {
            out.push(Waypoint {
                t: 0.0,
                x: self.x,
                y: self.y,
                theta: self.theta,
            });
        }
        out.extend_from_slice(script);
        Some(out)
    }

    /// True if the script moves or turns the person around `t`; standing
    /// still between two identical waypoints does not count as moving.
    pub fn is_moving_at(&self, t: f64) -> bool {
        self.trajectory().is_some_and(|traj| {
            traj.windows(2)
                .any(|w| w[0].t <= t && t < w[1].t && displaces(&w[0], &w[1]))
        })
    }

    /// True if the script still moves or turns the person at some time `>= t`.
    pub fn moves_after(&self, t: f64) -> bool {
        self.trajectory()
            .is_some_and(|traj| traj.windows(2).any(|w| w[1].t > t && displaces(&w[0], &w[1])))
    }

    /// Pose at time `t`, following the script if there is one.
    pub fn at(&self, t: f64) -> PersonState {
        let Some(traj) = self.trajectory() else {
            return self.clone();
        };
        let pose = interpolate(&traj, t);
        PersonState {
            id: self.id,
            x: pose.x,
            y: pose.y,
            theta: pose.theta,
            script: self.script.clone(),
        }
    }
}

/// Walking or turning between two waypoints.
fn displaces(a: &Waypoint, b: &Waypoint) -> bool {
    a.x != b.x || a.y != b.y || normalize_angle(a.theta) != normalize_angle(b.theta)
}

fn interpolate(traj: &[Waypoint], t: f64) -> Pose {
    let first = traj[0];
    if t <= first.t {
        return Pose::new(first.x, first.y, normalize_angle(first.theta));
    }
    for w in traj.windows(2) {
        let (a, b) = (w[0], w[1]);
        if t <= b.t {
            let s = (t - a.t) / (b.t - a.t);
            let theta = a.theta + s * angle_diff(b.theta, a.theta);
            return Pose::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y), normalize_angle(theta));
        }
    }
    let last = traj[traj.len() - 1];
    Pose::new(last.x, last.y, normalize_angle(last.theta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Rect(Rect),
    Circle(Circle),
}

impl Shape {
    /// Euclidean distance from `p` to the shape; zero inside.
    pub fn distance(&self, p: Vec2) -> f64 {
        match self {
            Shape::Rect(r) => {
                let dx = (r.x_min - p.x).max(0.0).max(p.x - r.x_max);
                let dy = (r.y_min - p.y).max(0.0).max(p.y - r.y_max);
                dx.hypot(dy)
            }
            Shape::Circle(c) => (Vec2::new(c.cx, c.cy).distance(p) - c.radius).max(0.0),
        }
    }

    /// Smallest distance from any point of segment `a`-`b` to the shape.
    pub fn segment_distance(&self, a: Vec2, b: Vec2) -> f64 {
        match self {
            Shape::Circle(c) => (segment_point_distance(a, b, Vec2::new(c.cx, c.cy)) - c.radius).max(0.0),
            Shape::Rect(r) => {
                if segment_hits_rect(a, b, r) {
                    return 0.0;
                }
                let corners = [
                    Vec2::new(r.x_min, r.y_min),
                    Vec2::new(r.x_max, r.y_min),
                    Vec2::new(r.x_max, r.y_max),
                    Vec2::new(r.x_min, r.y_max),
                ];
                corners
                    .iter()
                    .map(|&c| segment_point_distance(a, b, c))
                    .fold(self.distance(a).min(self.distance(b)), f64::min)
            }
        }
    }
}

/// Liang-Barsky clip of the segment against the closed rectangle.
fn segment_hits_rect(a: Vec2, b: Vec2, r: &Rect) -> bool {
    let d = b - a;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for (p, q) in [
        (-d.x, a.x - r.x_min),
        (d.x, r.x_max - a.x),
        (-d.y, a.y - r.y_min),
        (d.y, r.y_max - a.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                lo = lo.max(t);
            } else {
                hi = hi.min(t);
            }
            if lo > hi {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObstacleRecord", into = "ObstacleRecord")]
pub struct Obstacle {
    pub shape: Shape,
    pub inflation: f64,
}

impl Obstacle {
    pub fn rect(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            shape: Shape::Rect(Rect {
                x_min,
                x_max,
                y_min,
                y_max,
            }),
            inflation: DEFAULT_INFLATION,
        }
    }

    pub fn circle(cx: f64, cy: f64, radius: f64) -> Self {
        Self {
            shape: Shape::Circle(Circle { cx, cy, radius }),
            inflation: DEFAULT_INFLATION,
        }
    }

    pub fn with_inflation(mut self, inflation: f64) -> Self {
        self.inflation = inflation;
        self
    }

    /// Closed membership test against the real or the inflated boundary.
    pub fn contains(&self, p: Vec2, inflated: bool) -> bool {
        let margin = if inflated { self.inflation } else { 0.0 };
        self.shape.distance(p) <= margin
    }

    /// Closed test: does segment `a`-`b` touch the inflated obstacle?
    pub fn blocks_segment(&self, a: Vec2, b: Vec2) -> bool {
        self.shape.segment_distance(a, b) <= self.inflation
    }

    /// Distance from `p` to the inflated boundary (zero inside).
    pub fn clearance(&self, p: Vec2) -> f64 {
        (self.shape.distance(p) - self.inflation).max(0.0)
    }
}

/// On-disk form of an obstacle: exactly one of `rect` / `circle`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rect: Option<Rect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    circle: Option<Circle>,
    #[serde(default)]
    inflation: Option<f64>,
}

impl TryFrom<ObstacleRecord> for Obstacle {
    type Error = String;

    fn try_from(rec: ObstacleRecord) -> Result<Self, Self::Error> {
        let shape = match (rec.rect, rec.circle) {
            (Some(r), None) => {
                if !(r.x_min < r.x_max && r.y_min < r.y_max) {
                    return Err(format!("degenerate rectangle {r:?}"));
                }
                Shape::Rect(r)
            }
            (None, Some(c)) => {
                if !(c.radius > 0.0) {
                    return Err(format!("circle radius must be positive, got {}", c.radius));
                }
                Shape::Circle(c)
            }
            _ => return Err("obstacle needs exactly one of `rect` or `circle`".into()),
        };
        let inflation = rec.inflation.unwrap_or(DEFAULT_INFLATION);
        if !(inflation >= 0.0) {
            return Err(format!("inflation must be >= 0, got {inflation}"));
        }
        Ok(Obstacle { shape, inflation })
    }
}

impl From<Obstacle> for ObstacleRecord {
    fn from(o: Obstacle) -> Self {
        let (rect, circle) = match o.shape {
            Shape::Rect(r) => (Some(r), None),
            Shape::Circle(c) => (None, Some(c)),
        };
        ObstacleRecord {
            rect,
            circle,
            inflation: Some(o.inflation),
        }
    }
}

/// Every tunable constant of the engine.
///
/// Defaults for the social and cost constants are the published simulation
/// values; the remaining defaults are engineering choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamSet {
    /// Weibull confidence constants.
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Dipole coefficient.
    pub alpha: f64,
    /// Social damping coefficient.
    pub beta: f64,
    /// Gaze point offset along each heading, meters.
    pub r_gaze: f64,
    pub delta_dis: f64,
    pub delta_dir: f64,
    pub delta_mag: f64,
    /// Direction-cost constants.
    pub w: f64,
    pub l: f64,
    /// Motion-space radius used for sub-goals, meters.
    pub r_rob: f64,
    /// Minimum allowed robot-person distance, meters.
    pub d_thres: f64,
    /// Spatial-confidence threshold for a group edge.
    pub a_thres: f64,
    pub epsilon_steer: f64,
    pub rewire_radius: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Singularity guard around each person, meters.
    pub r_min: f64,
    /// Radius of the goal disc around an observation position, meters.
    pub goal_radius: f64,
    pub tol_oop: f64,
    /// Floor on field magnitude inside the log-magnitude cost.
    pub m_floor: f64,
    /// Trapezoid samples for the direction-cost integral.
    pub n_int: usize,
    /// Extra person clearance on top of `d_thres` used by the cruise planner.
    pub clearance_margin: f64,
    pub v_robot: f64,
    pub dt: f64,
    pub t_max: f64,
}

impl Default for ParamSet {
    fn default() -> Self {
        Self {
            a: 5.102,
            b: 0.748,
            c: 0.087,
            alpha: -615.0,
            beta: -32.0,
            r_gaze: 0.05,
            delta_dis: 1.0,
            delta_dir: 5.0,
            delta_mag: 7.0,
            w: 5.0,
            l: 4.0,
            r_rob: 1.9,
            d_thres: 0.4,
            a_thres: 0.5,
            epsilon_steer: 0.35,
            rewire_radius: 1.0,
            max_iter: 20_000,
            seed: 0,
            r_min: 0.2,
            goal_radius: 0.3,
            tol_oop: 1e-3,
            m_floor: 1e-6,
            n_int: 8,
            clearance_margin: 0.05,
            v_robot: 0.5,
            dt: 0.1,
            t_max: 600.0,
        }
    }
}

impl ParamSet {
    /// Applies a `key=value` override, with the value parsed as a TOML scalar.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ScenarioError> {
        let mut table = toml::Table::try_from(&*self).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        if !table.contains_key(key) {
            return Err(ScenarioError::Validation(format!("unknown parameter `{key}`")));
        }
        let parsed: toml::Table = format!("v = {value}")
            .parse()
            .map_err(|e| ScenarioError::Parse(format!("bad value for `{key}`: {e}")))?;
        table.insert(key.to_string(), parsed["v"].clone());
        *self = table
            .try_into()
            .map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let positive = [
            ("epsilon_steer", self.epsilon_steer),
            ("rewire_radius", self.rewire_radius),
            ("r_min", self.r_min),
            ("goal_radius", self.goal_radius),
            ("tol_oop", self.tol_oop),
            ("m_floor", self.m_floor),
            ("v_robot", self.v_robot),
            ("dt", self.dt),
            ("t_max", self.t_max),
            ("r_rob", self.r_rob),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ScenarioError::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_int < 2 {
            return Err(ScenarioError::Validation("n_int must be at least 2".into()));
        }
        Ok(())
    }

    /// Radius of the disc around each person the cruise planner keeps out of.
    pub fn person_clearance(&self) -> f64 {
        self.r_min.max(self.d_thres + self.clearance_margin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Map width and height, meters. The map spans [0, width] x [0, height].
    pub size: (f64, f64),
    pub robot_start: Pose,
    #[serde(default)]
    pub persons: Vec<PersonState>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub params: ParamSet,
}

impl Scenario {
    pub fn new(size: (f64, f64), robot_start: Pose) -> Self {
        Self {
            size,
            robot_start,
            persons: Vec::new(),
            obstacles: Vec::new(),
            params: ParamSet::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.message().to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn in_bounds(&self, p: Vec2) -> bool {
        p.x >= 0.0 && p.x <= self.size.0 && p.y >= 0.0 && p.y <= self.size.1
    }

    pub fn in_obstacle(&self, p: Vec2, inflated: bool) -> bool {
        self.obstacles.iter().any(|o| o.contains(p, inflated))
    }

    /// Distance to the nearest inflated obstacle boundary; infinite without obstacles.
    pub fn obstacle_clearance(&self, p: Vec2) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.clearance(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Person poses at simulated time `t`.
    pub fn state_at(&self, t: f64) -> Vec<PersonState> {
        self.persons.iter().map(|p| p.at(t)).collect()
    }

    /// True if any person still walks at some time `>= t`.
    pub fn has_motion_after(&self, t: f64) -> bool {
        self.persons.iter().any(|p| p.moves_after(t))
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Validation(m));
        let (w, h) = self.size;
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return invalid(format!("map size must be positive, got {w} x {h}"));
        }
        self.params.validate()?;
        let start = self.robot_start.position();
        if !self.in_bounds(start) {
            return invalid(format!("robot start ({}, {}) outside the map", start.x, start.y));
        }
        if self.in_obstacle(start, true) {
            return invalid("robot start lies inside an inflated obstacle".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.persons {
            if !seen.insert(p.id) {
                return invalid(format!("duplicate person id {}", p.id));
            }
            if !self.in_bounds(p.position()) {
                return invalid(format!("person {} at ({}, {}) outside the map", p.id, p.x, p.y));
            }
            if let Some(script) = &p.script {
                if script.windows(2).any(|w| !(w[1].t > w[0].t)) {
                    return invalid(format!("person {} script times not strictly increasing", p.id));
                }
                if script.first().is_some_and(|w| w.t < 0.0) {
                    return invalid(format!("person {} script starts before t = 0", p.id));
                }
                if let Some(w) = script.iter().find(|w| !self.in_bounds(Vec2::new(w.x, w.y))) {
                    return invalid(format!(
                        "person {} script waypoint ({}, {}) outside the map",
                        p.id, w.x, w.y
                    ));
                }
            }
        }
        let initial = self.state_at(0.0);
        for p in &initial {
            if self.in_obstacle(p.position(), true) {
                return invalid(format!("person {} starts inside an inflated obstacle", p.id));
            }
        }
        for (i, a) in initial.iter().enumerate() {
            for b in &initial[i + 1..] {
                if a.position().distance(b.position()) < 1e-9 {
                    return invalid(format!("persons {} and {} coincide", a.id, b.id));
                }
            }
        }
        Ok(())
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const MINIMAL: &str = r#"
size = [14.0, 14.0]
robot_start = { x = 1.0, y = 1.0, theta = 0.0 }

[[persons]]
id = 1
x = 5.0
y = 5.0
theta = 0.5
"#;

    #[test]
    fn minimal_file_gets_default_params() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.persons.len(), 1);
        assert!(s.obstacles.is_empty());
        assert_eq!(s.params, ParamSet::default());
        assert_eq!(s.params.alpha, -615.0);
        assert_eq!(s.params.d_thres, 0.4);
    }

    #[test]
    fn person_outside_map_is_rejected() {
        let text = MINIMAL.replace("x = 5.0", "x = 20.0").replace("y = 5.0", "y = 20.0");
        assert!(matches!(
            Scenario::from_toml_str(&text),
            Err(ScenarioError::Validation(_))
        ));
    }

    #[test]
    fn person_inside_obstacle_is_rejected() {
        let text =
            format!("{MINIMAL}\n[[obstacles]]\nrect = {{ x_min = 4.0, x_max = 6.0, y_min = 4.0, y_max = 6.0 }}\n");
        assert!(matches!(
            Scenario::from_toml_str(&text),
            Err(ScenarioError::Validation(_))
        ));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\ncolour = 3\n");
        assert!(matches!(Scenario::from_toml_str(&text), Err(ScenarioError::Parse(_))));
        let text = MINIMAL.replace("theta = 0.5", "theta = 0.5\nmood = 1");
        assert!(Scenario::from_toml_str(&text).is_err());
    }

    #[test]
    fn obstacle_needs_exactly_one_shape() {
        let text = format!(
            "{MINIMAL}\n[[obstacles]]\nrect = {{ x_min = 8.0, x_max = 9.0, y_min = 8.0, y_max = 9.0 }}\ncircle = {{ cx = 1.0, cy = 1.0, radius = 1.0 }}\n"
        );
        assert!(matches!(Scenario::from_toml_str(&text), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn static_person_is_time_invariant() {
        let p = PersonState::new(1, 2.0, 3.0, 0.4);
        assert_eq!(p.at(17.0), p);
    }

    #[test]
    fn scripted_midpoint() {
        let p = PersonState::new(1, 0.0, 0.0, 0.0).with_script(vec![
            Waypoint {
                t: 0.0,
                x: 0.0,
                y: 0.0,
                theta: 0.0,
            },
            Waypoint {
                t: 10.0,
                x: 2.0,
                y: 0.0,
                theta: 0.0,
            },
        ]);
        let s = p.at(5.0);
        assert!((s.x - 1.0).abs() < 1e-12 && s.y.abs() < 1e-12 && s.theta.abs() < 1e-12);
        let end = p.at(50.0);
        assert_eq!((end.x, end.y), (2.0, 0.0));
    }

    #[test]
    fn heading_interpolates_through_pi() {
        let p = PersonState::new(1, 0.0, 0.0, 3.0).with_script(vec![
            Waypoint {
                t: 0.0,
                x: 0.0,
                y: 0.0,
                theta: 3.0,
            },
            Waypoint {
                t: 1.0,
                x: 0.0,
                y: 0.0,
                theta: -3.0,
            },
        ]);
        let mid = p.at(0.5).theta;
        assert!((mid.abs() - PI).abs() < 1e-9, "mid heading {mid}");
        // Oracle: dense samples never pass near zero heading.
        for k in 0..=1000 {
            let th = p.at(k as f64 / 1000.0).theta;
            assert!(th.abs() >= 3.0 - 1e-12, "heading {th} at sample {k}");
            assert!(th > -PI && th <= PI);
        }
    }

    #[test]
    fn inflation_band() {
        let o = Obstacle::rect(0.0, 1.0, 0.0, 1.0).with_inflation(0.3);
        let p = Vec2::new(1.2, 0.5);
        assert!(!o.contains(p, false));
        assert!(o.contains(p, true));
        assert!(o.contains(Vec2::new(0.5, 0.5), false));
        assert!(!o.contains(Vec2::new(3.0, 3.0), true));
        let c = Obstacle::circle(0.0, 0.0, 1.0).with_inflation(0.5);
        assert!(!c.contains(Vec2::new(1.2, 0.0), false));
        assert!(c.contains(Vec2::new(1.2, 0.0), true));
    }

    #[test]
    fn param_override() {
        let mut p = ParamSet::default();
        p.set("r_rob", "2.3").unwrap();
        assert_eq!(p.r_rob, 2.3);
        p.set("max_iter", "500").unwrap();
        assert_eq!(p.max_iter, 500);
        p.set("w", "6").unwrap();
        assert_eq!(p.w, 6.0);
        assert!(p.set("nope", "1").is_err());
        assert!(p.set("dt", "-1").is_err());
    }
}
