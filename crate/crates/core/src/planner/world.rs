use serde::{Deserialize, Serialize};

use crate::field::FieldStack;
use crate::geometry::{segment_point_distance, Disc, Vec2};
use crate::scenario::{Obstacle, ParamSet, PersonState};

/// Geometry of the free space: map bounds minus inflated obstacles, gaze
/// discs (open interiors) and person clearance discs (open interiors).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FreeSpaceSpec {
    pub size: (f64, f64),
    pub obstacles: Vec<Obstacle>,
    pub gaze_discs: Vec<Disc>,
    pub persons: Vec<Vec2>,
    pub person_clearance: f64,
}

impl FreeSpaceSpec {
    pub fn open(size: (f64, f64)) -> Self {
        Self {
            size,
            obstacles: Vec::new(),
            gaze_discs: Vec::new(),
            persons: Vec::new(),
            person_clearance: 0.0,
        }
    }

    pub fn in_bounds(&self, q: Vec2) -> bool {
        q.x >= 0.0 && q.x <= self.size.0 && q.y >= 0.0 && q.y <= self.size.1
    }

    pub fn is_free(&self, q: Vec2) -> bool {
        self.in_bounds(q)
            && !self.obstacles.iter().any(|o| o.contains(q, true))
            && !self.gaze_discs.iter().any(|d| d.contains_strictly(q))
            && !self.persons.iter().any(|p| p.distance(q) < self.person_clearance)
    }

    /// Exact test of the whole closed segment with the same boundary
    /// conventions as [`FreeSpaceSpec::is_free`]. The map is convex, so the
    /// bounds only need checking at the end points.
    pub fn segment_free(&self, a: Vec2, b: Vec2) -> bool {
        self.in_bounds(a)
            && self.in_bounds(b)
            && !self.obstacles.iter().any(|o| o.blocks_segment(a, b))
            && !self
                .gaze_discs
                .iter()
                .any(|d| segment_point_distance(a, b, d.center) < d.radius)
            && !self
                .persons
                .iter()
                .any(|&p| segment_point_distance(a, b, p) < self.person_clearance)
    }
}

/// Free space plus the scene field that shapes the VMD cost.
#[derive(Debug, Clone)]
pub struct PlanWorld {
    pub space: FreeSpaceSpec,
    pub field: FieldStack,
}

impl PlanWorld {
    pub fn new(space: FreeSpaceSpec, field: FieldStack) -> Self {
        Self { space, field }
    }

    /// A world with no persons and hence a zero field.
    pub fn without_people(space: FreeSpaceSpec, params: &ParamSet) -> Self {
        Self {
            space,
            field: FieldStack::new(&[], params),
        }
    }

    /// Free space around `persons` with the given clearance, their field,
    /// the scenario obstacles and the provided gaze discs.
    pub fn from_persons(
        size: (f64, f64),
        obstacles: &[Obstacle],
        persons: &[PersonState],
        gaze_discs: Vec<Disc>,
        person_clearance: f64,
        params: &ParamSet,
    ) -> Self {
        Self {
            space: FreeSpaceSpec {
                size,
                obstacles: obstacles.to_vec(),
                gaze_discs,
                persons: persons.iter().map(|p| p.position()).collect(),
                person_clearance,
            },
            field: FieldStack::new(persons, params),
        }
    }
}
