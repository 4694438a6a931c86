//! Social-proxemics navigation: group detection, dipole proxemics fields,
//! observation positions, vector-field guided RRT* and an auto-cruise
//! simulator that tours every group in a scene.

mod clock;
pub mod clustering;
pub mod cruise;
pub mod error;
pub mod eval;
pub mod field;
pub mod geometry;
pub mod observation;
pub mod planner;
pub mod scenario;

pub use geometry::{Pose, Vec2};
pub use scenario::{load_scenario, ParamSet, PersonState, Scenario};
