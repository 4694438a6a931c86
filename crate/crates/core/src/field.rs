//! Magnetic-dipole proxemics field of persons, groups and whole scenes.
//!
//! Each person carries a planar dipole pattern attached to their heading. Group
//! and scene fields are plain vector sums of the person fields.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::clustering::{Group, GroupSet};
use crate::error::SocialError;
use crate::geometry::Vec2;
use crate::scenario::{ParamSet, PersonState, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub vx: f64,
    pub vy: f64,
    pub magnitude: f64,
    pub direction: f64,
}

impl FieldSample {
    pub fn from_vec(v: Vec2) -> Self {
        Self {
            vx: v.x,
            vy: v.y,
            magnitude: v.norm(),
            direction: v.y.atan2(v.x),
        }
    }

    pub fn zero() -> Self {
        Self::from_vec(Vec2::ZERO)
    }

    pub fn vector(&self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }
}

/// Unguarded dipole evaluation for an offset `d = q - center` in the dipole's
/// own frame. Diverges as `d -> 0`.
#[inline]
pub fn dipole_raw(d: Vec2, alpha: f64) -> Vec2 {
    let r2 = d.norm_sq();
    let inv = alpha / (r2 * r2 * r2.sqrt());
    Vec2::new((2.0 * d.x * d.x - d.y * d.y) * inv, 3.0 * d.x * d.y * inv)
}

/// Axis-aligned dipole centered at `center`, refused inside `r_min`.
pub fn dipole_local(q: Vec2, center: Vec2, alpha: f64, r_min: f64) -> Result<FieldSample, SocialError> {
    let d = q - center;
    if d.norm() < r_min {
        return Err(SocialError::NearCenter { point: q });
    }
    Ok(FieldSample::from_vec(dipole_raw(d, alpha)))
}

/// Field of a person: the dipole evaluated in the person's frame and rotated
/// back by the heading, so the pattern turns rigidly with the person.
pub fn person_field(q: Vec2, p: &PersonState, params: &ParamSet) -> Result<FieldSample, SocialError> {
    let d = q - p.position();
    if d.norm() < params.r_min {
        return Err(SocialError::Singularity { point: q, person: p.id });
    }
    Ok(FieldSample::from_vec(
        dipole_raw(d.rotate(-p.theta), params.alpha).rotate(p.theta),
    ))
}

pub fn group_field(
    q: Vec2,
    group: &Group,
    persons: &[PersonState],
    params: &ParamSet,
) -> Result<FieldSample, SocialError> {
    let mut sum = Vec2::ZERO;
    for p in group.persons(persons) {
        sum += person_field(q, p, params)?.vector();
    }
    Ok(FieldSample::from_vec(sum))
}

pub fn global_field(
    q: Vec2,
    groups: &GroupSet,
    persons: &[PersonState],
    params: &ParamSet,
) -> Result<FieldSample, SocialError> {
    let mut sum = Vec2::ZERO;
    for g in groups.iter() {
        sum += group_field(q, g, persons, params)?.vector();
    }
    Ok(FieldSample::from_vec(sum))
}

#[derive(Debug, Clone, Copy)]
struct Source {
    id: u32,
    position: Vec2,
    cos: f64,
    sin: f64,
}

impl Source {
    #[inline]
    fn eval(&self, q: Vec2, alpha: f64) -> Vec2 {
        let d = q - self.position;
        // rotate by -theta, evaluate, rotate by +theta
        let local = Vec2::new(self.cos * d.x + self.sin * d.y, -self.sin * d.x + self.cos * d.y);
        let m = dipole_raw(local, alpha);
        Vec2::new(self.cos * m.x - self.sin * m.y, self.sin * m.x + self.cos * m.y)
    }
}

/// Person fields bound to a snapshot of person states, with an optional group
/// index. Used wherever the field is evaluated in bulk.
#[derive(Debug, Clone)]
pub struct FieldStack {
    sources: Vec<Source>,
    groups: Vec<Vec<usize>>,
    alpha: f64,
    r_min: f64,
}

impl FieldStack {
    pub fn new(persons: &[PersonState], params: &ParamSet) -> Self {
        let sources = persons
            .iter()
            .map(|p| Source {
                id: p.id,
                position: p.position(),
                cos: p.theta.cos(),
                sin: p.theta.sin(),
            })
            .collect();
        Self {
            sources,
            groups: Vec::new(),
            alpha: params.alpha,
            r_min: params.r_min,
        }
    }

    pub fn with_groups(mut self, groups: &GroupSet) -> Self {
        self.groups = groups.iter().map(|g| g.members.clone()).collect();
        self
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    fn guard(&self, q: Vec2, idx: impl Iterator<Item = usize>) -> Result<(), SocialError> {
        for i in idx {
            let s = &self.sources[i];
            if q.distance(s.position) < self.r_min {
                return Err(SocialError::Singularity { point: q, person: s.id });
            }
        }
        Ok(())
    }

    pub fn person(&self, i: usize, q: Vec2) -> Result<Vec2, SocialError> {
        self.guard(q, std::iter::once(i))?;
        Ok(self.sources[i].eval(q, self.alpha))
    }

    pub fn group(&self, k: usize, q: Vec2) -> Result<Vec2, SocialError> {
        let members = &self.groups[k];
        self.guard(q, members.iter().copied())?;
        Ok(self.sum_over(q, members.iter().copied()))
    }

    pub fn global(&self, q: Vec2) -> Result<Vec2, SocialError> {
        self.guard(q, 0..self.sources.len())?;
        Ok(self.global_unchecked(q))
    }

    /// Scene field without the singularity guard; callers must already know
    /// `q` is clear of every person.
    #[inline]
    pub fn global_unchecked(&self, q: Vec2) -> Vec2 {
        self.sum_over(q, 0..self.sources.len())
    }

    /// Field of an arbitrary subset of persons (by index).
    pub fn subset_unchecked(&self, q: Vec2, members: &[usize]) -> Vec2 {
        self.sum_over(q, members.iter().copied())
    }

    /// Distance from `q` to the nearest person, infinite for an empty stack.
    pub fn nearest_person_distance(&self, q: Vec2) -> f64 {
        self.sources
            .iter()
            .map(|s| q.distance(s.position))
            .fold(f64::INFINITY, f64::min)
    }

    #[inline]
    fn sum_over(&self, q: Vec2, idx: impl Iterator<Item = usize>) -> Vec2 {
        let mut sum = Vec2::ZERO;
        for i in idx {
            sum += self.sources[i].eval(q, self.alpha);
        }
        sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub valid: bool,
}

/// Row-major (rows along y) field samples over the map, fencepost-inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub nx: usize,
    pub ny: usize,
    pub resolution: f64,
    pub cells: Vec<GridCell>,
}

impl FieldGrid {
    pub fn at(&self, ix: usize, iy: usize) -> &GridCell {
        &self.cells[iy * self.nx + ix]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,y,vx,vy,valid")?;
        for c in &self.cells {
            writeln!(
                out,
                "{:.8e},{:.8e},{:.8e},{:.8e},{}",
                c.x, c.y, c.vx, c.vy, c.valid as u8
            )?;
        }
        Ok(())
    }
}

fn samples_along(extent: f64, resolution: f64) -> usize {
    (extent / resolution + 1e-9).floor() as usize + 1
}

/// Samples the scene field at time `t`. Cells within `r_min` of a person or
/// inside an obstacle are marked invalid and carry a zero vector.
pub fn export_field_grid(scenario: &Scenario, t: f64, resolution: f64) -> FieldGrid {
    let persons = scenario.state_at(t);
    let all: Vec<usize> = (0..persons.len()).collect();
    export_field_grid_for(scenario, &persons, &all, resolution)
}

/// Like [`export_field_grid`] but only the persons in `members` contribute to
/// the vectors; validity still accounts for every person.
pub fn export_field_grid_for(
    scenario: &Scenario,
    persons: &[PersonState],
    members: &[usize],
    resolution: f64,
) -> FieldGrid {
    assert!(resolution > 0.0, "grid resolution must be positive");
    let params = &scenario.params;
    let stack = FieldStack::new(persons, params);
    let nx = samples_along(scenario.size.0, resolution);
    let ny = samples_along(scenario.size.1, resolution);
    let row = |iy: usize| -> Vec<GridCell> {
        let y = iy as f64 * resolution;
        (0..nx)
            .map(|ix| {
                let x = ix as f64 * resolution;
                let q = Vec2::new(x, y);
                let valid = stack.nearest_person_distance(q) >= params.r_min && !scenario.in_obstacle(q, false);
                let v = if valid {
                    stack.subset_unchecked(q, members)
                } else {
                    Vec2::ZERO
                };
                GridCell {
                    x,
                    y,
                    vx: v.x,
                    vy: v.y,
                    valid,
                }
            })
            .collect()
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<GridCell>> = {
        use rayon::prelude::*;
        (0..ny).into_par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<GridCell>> = (0..ny).map(row).collect();
    FieldGrid {
        nx,
        ny,
        resolution,
        cells: rows.into_iter().flatten().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params() -> ParamSet {
        ParamSet::default()
    }

    #[test]
    fn on_axis_dipole() {
        let s = dipole_local(Vec2::new(1.0, 0.0), Vec2::ZERO, -615.0, 0.2).unwrap();
        assert_eq!((s.vx, s.vy), (-1230.0, 0.0));
        let s = dipole_local(Vec2::new(0.0, 1.0), Vec2::ZERO, -615.0, 0.2).unwrap();
        assert!((s.vx - 615.0).abs() < 1e-12 && s.vy.abs() < 1e-12);
        let far = dipole_local(Vec2::new(2.0, 0.0), Vec2::ZERO, -615.0, 0.2).unwrap();
        assert!((far.magnitude / 1230.0 - 1.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn dipole_guard() {
        assert!(dipole_local(Vec2::new(0.1, 0.0), Vec2::ZERO, -615.0, 0.2).is_err());
    }

    #[test]
    fn magnitude_consistency() {
        let s = dipole_local(Vec2::new(0.7, -1.3), Vec2::ZERO, -615.0, 0.2).unwrap();
        let m2 = s.vx * s.vx + s.vy * s.vy;
        assert!((s.magnitude * s.magnitude - m2).abs() <= 1e-12 * m2);
    }

    #[test]
    fn person_field_identity_and_rotation() {
        let p0 = PersonState::new(1, 0.0, 0.0, 0.0);
        let a = person_field(Vec2::new(1.0, 0.0), &p0, &params()).unwrap();
        assert_eq!((a.vx, a.vy), (-1230.0, 0.0));
        let p1 = PersonState::new(1, 0.0, 0.0, PI / 2.0);
        let b = person_field(Vec2::new(0.0, 1.0), &p1, &params()).unwrap();
        assert!(b.vx.abs() < 1e-9 && (b.vy + 1230.0).abs() < 1e-9, "{b:?}");
        let theta = 0.83;
        let p2 = PersonState::new(1, 3.0, 4.0, theta);
        let q = p2.position() + Vec2::from_angle(theta);
        let c = person_field(q, &p2, &params()).unwrap();
        assert!((c.magnitude - 1230.0).abs() < 1e-9);
    }

    #[test]
    fn person_field_singularity_names_person() {
        let p = PersonState::new(7, 1.0, 1.0, 0.0);
        assert_eq!(
            person_field(Vec2::new(1.05, 1.0), &p, &params()),
            Err(SocialError::Singularity {
                point: Vec2::new(1.05, 1.0),
                person: 7
            })
        );
    }

    #[test]
    fn stack_matches_free_functions() {
        let persons = vec![PersonState::new(1, 1.0, 2.0, 0.3), PersonState::new(2, 2.5, 1.0, -2.0)];
        let stack = FieldStack::new(&persons, &params());
        let q = Vec2::new(4.0, 4.5);
        let expected = person_field(q, &persons[0], &params()).unwrap().vector()
            + person_field(q, &persons[1], &params()).unwrap().vector();
        let got = stack.global(q).unwrap();
        assert!((got - expected).norm() <= 1e-12 * expected.norm());
    }

    #[test]
    fn mirror_pair_has_no_cross_component_at_midpoint() {
        let persons = vec![PersonState::new(1, -1.0, 0.0, 0.0), PersonState::new(2, 1.0, 0.0, PI)];
        let g = Group::new(vec![0, 1]);
        let s = group_field(Vec2::ZERO, &g, &persons, &params()).unwrap();
        assert!(s.vy.abs() < 1e-9);
    }

    #[test]
    fn grid_dimensions() {
        let s = Scenario::new((14.0, 14.0), crate::geometry::Pose::new(1.0, 1.0, 0.0));
        let g = export_field_grid(&s, 0.0, 0.1);
        assert_eq!((g.nx, g.ny), (141, 141));
        assert!(g.cells.iter().all(|c| c.vx == 0.0 && c.vy == 0.0 && c.valid));
        let last = g.at(140, 140);
        assert!((last.x - 14.0).abs() < 1e-9 && (last.y - 14.0).abs() < 1e-9);
    }
}
