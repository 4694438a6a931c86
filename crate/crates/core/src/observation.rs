//! Optimal observation positions (OOPs): points where a group's proxemics
//! field is balanced by its social damping, plus the group's gaze disc.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::clustering::Group;
use crate::error::OopError;
use crate::field::FieldStack;
use crate::geometry::{angle_diff, Disc, Vec2};
use crate::scenario::{Obstacle, ParamSet, PersonState};

/// Polar scan around the group centroid: radii 0.3..=4.0 m, 5 degree spokes.
const SCAN_R_MIN: f64 = 0.3;
const SCAN_R_STEP: f64 = 0.1;
const SCAN_RINGS: usize = 38;
const SCAN_SPOKES: usize = 72;
const MAX_SEEDS: usize = 24;
const INITIAL_STEP: f64 = 0.05;
/// Refinement keeps shrinking well past `tol_oop` so the reported residual is
/// a tight certificate rather than a value hovering at the tolerance.
const FINAL_STEP: f64 = 1e-12;
const MAX_PATTERN_ITERS: usize = 20_000;
const DEDUP_RADIUS: f64 = 1e-6;
const TIE_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationPose {
    pub oop: Vec2,
    /// Signed damping amplitude.
    pub damping_amp: f64,
    /// Damping direction, radians.
    pub damping_arg: f64,
    pub damping: Vec2,
    pub gaze_center: Vec2,
    pub gaze_radius: f64,
    /// `|V(oop) + damping(oop)|` at the returned position.
    pub residual: f64,
}

impl ObservationPose {
    pub fn gaze_disc(&self) -> Disc {
        Disc::new(self.gaze_center, self.gaze_radius)
    }

    /// Heading that faces the group from the OOP.
    pub fn observation_heading(&self) -> f64 {
        crate::geometry::normalize_angle(self.damping_arg + PI)
    }
}

/// Where an OOP may lie beyond the members' own singular discs.
#[derive(Debug, Clone, Copy)]
pub struct OopConstraints<'a> {
    pub size: Option<(f64, f64)>,
    pub obstacles: &'a [Obstacle],
    /// Persons the OOP must keep `clearance` from (typically everyone).
    pub persons: &'a [PersonState],
    pub clearance: f64,
}

impl OopConstraints<'_> {
    pub fn open() -> Self {
        OopConstraints {
            size: None,
            obstacles: &[],
            persons: &[],
            clearance: 0.0,
        }
    }

    fn blocked(&self, q: Vec2) -> bool {
        self.obstacles.iter().any(|o| o.contains(q, true))
    }

    fn feasible(&self, q: Vec2) -> bool {
        if let Some((w, h)) = self.size {
            if !(q.x >= 0.0 && q.x <= w && q.y >= 0.0 && q.y <= h) {
                return false;
            }
        }
        !self.blocked(q) && self.persons.iter().all(|p| p.position().distance(q) >= self.clearance)
    }

    fn obstacle_clearance(&self, q: Vec2) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.clearance(q))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Signed amplitude and direction of the social damping for `n` members.
fn damping_vector(amp: f64, arg: f64) -> Vec2 {
    Vec2::from_angle(arg) * amp
}

fn damping_parts(members: &[Vec2], candidate: Vec2, beta: f64) -> (f64, f64) {
    let n = members.len() as f64;
    let amp = beta * (-n).exp() / n;
    let thetas: Vec<f64> = members
        .iter()
        .map(|p| (candidate.y - p.y).atan2(candidate.x - p.x))
        .collect();
    (amp, mean_angle(&thetas) + PI)
}

/// Arithmetic mean of angles taken on a branch centered at their resultant
/// direction, so the result does not jump when members straddle ±π and turns
/// with the scene. Angles within half a turn of each other average exactly as
/// plain numbers would on a cut-free branch. With a vanishing resultant
/// (antipodal pairs) the plain mean is used.
fn mean_angle(thetas: &[f64]) -> f64 {
    let n = thetas.len() as f64;
    let (s, c) = thetas.iter().fold((0.0, 0.0), |(s, c), t| (s + t.sin(), c + t.cos()));
    if s.hypot(c) < 1e-9 * n {
        return thetas.iter().sum::<f64>() / n;
    }
    let reference = s.atan2(c);
    reference + thetas.iter().map(|&t| angle_diff(t, reference)).sum::<f64>() / n
}

/// Social damping vector of `group` evaluated at `candidate`.
pub fn damping_for(group: &Group, persons: &[PersonState], candidate: Vec2, params: &ParamSet) -> Vec2 {
    let positions: Vec<Vec2> = group.persons(persons).map(|p| p.position()).collect();
    let (amp, arg) = damping_parts(&positions, candidate, params.beta);
    damping_vector(amp, arg)
}

/// Mean gaze point of the group and its distance to `oop`.
pub fn gaze_space(group: &Group, persons: &[PersonState], oop: Vec2, params: &ParamSet) -> (Vec2, f64) {
    let center = gaze_center(group, persons, params);
    (center, center.distance(oop))
}

fn gaze_center(group: &Group, persons: &[PersonState], params: &ParamSet) -> Vec2 {
    let n = group.len() as f64;
    let mut sum = Vec2::ZERO;
    for p in group.persons(persons) {
        sum += p.position() + p.heading() * params.r_gaze;
    }
    sum * (1.0 / n)
}

/// Balance residual of a group, evaluable anywhere outside the members' r_min discs.
pub struct Residual {
    stack: FieldStack,
    positions: Vec<Vec2>,
    beta: f64,
    r_min: f64,
}

impl Residual {
    pub fn new(group: &Group, persons: &[PersonState], params: &ParamSet) -> Self {
        let members: Vec<PersonState> = group.persons(persons).cloned().collect();
        Self {
            stack: FieldStack::new(&members, params),
            positions: members.iter().map(|p| p.position()).collect(),
            beta: params.beta,
            r_min: params.r_min,
        }
    }

    /// `V(q) + xi(q)`, or `None` inside a member's singular disc.
    pub fn balance(&self, q: Vec2) -> Option<Vec2> {
        if self.positions.iter().any(|p| p.distance(q) < self.r_min) {
            return None;
        }
        let (amp, arg) = damping_parts(&self.positions, q, self.beta);
        Some(self.stack.global_unchecked(q) + damping_vector(amp, arg))
    }

    pub fn residual(&self, q: Vec2) -> Option<f64> {
        self.balance(q).map(Vec2::norm)
    }

    fn objective(&self, q: Vec2) -> f64 {
        self.balance(q).map_or(f64::INFINITY, Vec2::norm_sq)
    }
}

/// Compass-plus-diagonal pattern search on the squared residual, with the
/// compass turned to `frame` radians.
fn pattern_search(res: &Residual, start: Vec2, frame: f64) -> Vec2 {
    let dirs: [Vec2; 8] = std::array::from_fn(|k| Vec2::from_angle(frame + k as f64 * PI / 4.0));
    let mut x = start;
    let mut fx = res.objective(x);
    let mut step = INITIAL_STEP;
    let mut iters = 0;
    while step >= FINAL_STEP && fx > 0.0 && iters < MAX_PATTERN_ITERS {
        iters += 1;
        let mut best = (fx, x);
        for d in dirs {
            let cand = x + d * step;
            let fc = res.objective(cand);
            if fc < best.0 {
                best = (fc, cand);
            }
        }
        if best.0 < fx {
            (fx, x) = best;
        } else {
            step *= 0.5;
        }
    }
    x
}

fn scan_seeds(res: &Residual, centroid: Vec2, frame: f64, constraints: &OopConstraints) -> Vec<(f64, Vec2)> {
    let cell = |ring: usize, spoke: usize| {
        let r = SCAN_R_MIN + ring as f64 * SCAN_R_STEP;
        let a = frame + (spoke as f64 * 5.0).to_radians();
        centroid + Vec2::from_angle(a) * r
    };
    let mut values = vec![f64::INFINITY; SCAN_RINGS * SCAN_SPOKES];
    for ring in 0..SCAN_RINGS {
        for spoke in 0..SCAN_SPOKES {
            let q = cell(ring, spoke);
            if constraints.blocked(q) {
                continue;
            }
            if let Some(r) = res.residual(q) {
                values[ring * SCAN_SPOKES + spoke] = r;
            }
        }
    }
    let mut seeds = Vec::new();
    for ring in 0..SCAN_RINGS {
        for spoke in 0..SCAN_SPOKES {
            let v = values[ring * SCAN_SPOKES + spoke];
            if !v.is_finite() {
                continue;
            }
            let mut is_min = true;
            'nbhd: for dr in [-1i64, 0, 1] {
                let rr = ring as i64 + dr;
                if rr < 0 || rr >= SCAN_RINGS as i64 {
                    continue;
                }
                for ds in [-1i64, 0, 1] {
                    if dr == 0 && ds == 0 {
                        continue;
                    }
                    let ss = (spoke as i64 + ds).rem_euclid(SCAN_SPOKES as i64) as usize;
                    if values[rr as usize * SCAN_SPOKES + ss] < v {
                        is_min = false;
                        break 'nbhd;
                    }
                }
            }
            if is_min {
                seeds.push((v, cell(ring, spoke)));
            }
        }
    }
    if !constraints.blocked(centroid) {
        if let Some(r) = res.residual(centroid) {
            seeds.push((r, centroid));
        }
    }
    seeds.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.x.total_cmp(&b.1.x))
            .then(a.1.y.total_cmp(&b.1.y))
    });
    seeds.truncate(MAX_SEEDS);
    seeds
}

/// Finds the group's observation position.
///
/// A polar residual scan around the centroid seeds pattern-search refinements.
/// Scan spokes and search directions are laid out from the first member's
/// heading, so moving the whole group moves the result with it.
/// Among converged, feasible roots the one closest to the gaze center wins;
/// ties go to the candidate farthest from obstacles, then lowest `(x, y)`.
pub fn solve_oop(
    group: &Group,
    persons: &[PersonState],
    params: &ParamSet,
    constraints: &OopConstraints,
) -> Result<ObservationPose, OopError> {
    if group.is_empty() {
        return Err(OopError::EmptyGroup);
    }
    let res = Residual::new(group, persons, params);
    let n = group.len() as f64;
    let centroid = group.persons(persons).fold(Vec2::ZERO, |acc, p| acc + p.position()) * (1.0 / n);
    let center = gaze_center(group, persons, params);
    let frame = persons[group.members[0]].theta;

    let mut best_any: Option<(f64, Vec2)> = None;
    let mut roots: Vec<(Vec2, f64)> = Vec::new();
    for (_, seed) in scan_seeds(&res, centroid, frame, constraints) {
        let x = pattern_search(&res, seed, frame);
        let Some(r) = res.residual(x) else { continue };
        if best_any.map_or(true, |(br, _)| r < br) {
            best_any = Some((r, x));
        }
        if r <= params.tol_oop && constraints.feasible(x) && !roots.iter().any(|(q, _)| q.distance(x) < DEDUP_RADIUS) {
            roots.push((x, r));
        }
    }

    let chosen = roots.into_iter().min_by(|(a, _), (b, _)| {
        let (da, db) = (a.distance(center), b.distance(center));
        if (da - db).abs() > TIE_RADIUS {
            return da.total_cmp(&db);
        }
        let (ca, cb) = (constraints.obstacle_clearance(*a), constraints.obstacle_clearance(*b));
        if ca != cb && !(ca.is_infinite() && cb.is_infinite()) && (ca - cb).abs() > 1e-9 {
            return cb.total_cmp(&ca);
        }
        a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
    });

    match chosen {
        Some((oop, residual)) => {
            let (amp, arg) = damping_parts(&res.positions, oop, params.beta);
            Ok(ObservationPose {
                oop,
                damping_amp: amp,
                damping_arg: arg,
                damping: damping_vector(amp, arg),
                gaze_center: center,
                gaze_radius: center.distance(oop),
                residual,
            })
        }
        None => {
            let (residual, best) = best_any.unwrap_or((f64::INFINITY, centroid));
            Err(OopError::NoConvergence { best, residual })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ParamSet {
        ParamSet::default()
    }

    #[test]
    fn angle_mean_is_arithmetic_off_the_cut() {
        let deg = |d: f64| d.to_radians();
        assert!((mean_angle(&[0.0, 0.0, deg(90.0)]) - deg(30.0)).abs() < 1e-12);
        assert!((mean_angle(&[deg(-54.0), deg(54.0)])).abs() < 1e-12);
        let across = mean_angle(&[deg(170.0), deg(-170.0)]);
        assert!(
            (crate::geometry::normalize_angle(across) - PI).abs() < 1e-12,
            "{across}"
        );
    }

    #[test]
    fn single_member_damping() {
        let persons = vec![PersonState::new(1, 0.0, 0.0, 0.0)];
        let g = Group::new(vec![0]);
        let xi = damping_for(&g, &persons, Vec2::new(1.0, 0.0), &params());
        let amp = -32.0 * (-1.0f64).exp();
        assert!((amp + 11.772).abs() < 1e-3);
        assert!((xi.x - 11.772).abs() < 1e-3 && xi.y.abs() < 1e-12, "{xi:?}");
    }

    #[test]
    fn damping_vanishes_for_large_groups() {
        let persons: Vec<_> = (0..30)
            .map(|i| PersonState::new(i, (i as f64) * 0.7, 0.0, 0.0))
            .collect();
        let g = Group::new((0..30).collect());
        let xi = damping_for(&g, &persons, Vec2::new(5.0, 5.0), &params());
        assert!(xi.norm() < 1e-12);
    }

    #[test]
    fn gaze_of_single_person() {
        let persons = vec![PersonState::new(1, 0.0, 0.0, 0.0)];
        let (c, r) = gaze_space(&Group::new(vec![0]), &persons, Vec2::new(3.0, 4.0), &params());
        assert!((c.x - 0.05).abs() < 1e-15 && c.y == 0.0);
        assert!((r - (2.95f64.powi(2) + 16.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gaze_of_facing_pair_is_midpoint() {
        let persons = vec![PersonState::new(1, -0.6, 0.0, 0.0), PersonState::new(2, 0.6, 0.0, PI)];
        let (c, _) = gaze_space(&Group::new(vec![0, 1]), &persons, Vec2::ZERO, &params());
        assert!(c.norm() < 1e-15);
    }

    #[test]
    fn single_person_oop_on_heading_axis() {
        let persons = vec![PersonState::new(1, 0.0, 0.0, 0.0)];
        let pose = solve_oop(&Group::new(vec![0]), &persons, &params(), &OopConstraints::open()).unwrap();
        // Closed form on the axis: 2|alpha|/d^3 = |beta| e^-1.
        let d = (2.0 * 615.0 / (32.0 * (-1.0f64).exp())).cbrt();
        assert!(pose.oop.y.abs() < 1e-6, "{pose:?}");
        assert!((pose.oop.x - d).abs() < 1e-6, "{pose:?}");
        assert!(pose.residual <= 1e-3);
    }

    #[test]
    fn empty_group_errors() {
        assert_eq!(
            solve_oop(&Group::new(vec![]), &[], &params(), &OopConstraints::open()),
            Err(OopError::EmptyGroup)
        );
    }

    #[test]
    fn unreachable_root_reports_best_candidate() {
        let persons = vec![PersonState::new(1, 0.0, 0.0, 0.0)];
        let c = OopConstraints {
            size: Some((3.0, 3.0)),
            ..OopConstraints::open()
        };
        let err = solve_oop(&Group::new(vec![0]), &persons, &params(), &c).unwrap_err();
        assert!(matches!(err, OopError::NoConvergence { residual, .. } if residual <= 1e-3));
    }
}
