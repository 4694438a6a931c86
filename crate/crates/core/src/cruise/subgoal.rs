//! Sub-goal selection: where the planned path leaves the robot's motion circle.

use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubGoal {
    pub point: Vec2,
    /// Arc length along the path from its first waypoint.
    pub along: f64,
    /// True when the sub-goal is the path's final waypoint.
    pub is_final: bool,
}

/// Farthest-along-path crossing of `path` with the circle of radius `r`
/// around `center`, or the final waypoint when the path never leaves the
/// circle.
pub fn next_subgoal(path: &[Vec2], center: Vec2, r: f64) -> SubGoal {
    assert!(!path.is_empty(), "sub-goal of an empty path");
    let total: f64 = path.windows(2).map(|w| w[0].distance(w[1])).sum();
    let last = *path.last().unwrap();
    let mut best: Option<SubGoal> = None;
    let mut walked = 0.0;
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d = b - a;
        let len = d.norm();
        if len > 0.0 {
            for s in segment_circle(a, d, center, r) {
                best = Some(SubGoal {
                    point: a + d * s,
                    along: walked + s * len,
                    is_final: false,
                });
            }
        }
        walked += len;
    }
    match best {
        Some(sg) if total - sg.along > 1e-12 => sg,
        _ => SubGoal {
            point: last,
            along: total,
            is_final: true,
        },
    }
}

/// Parameters in `[0, 1]` where `a + s*d` meets the circle, ascending.
fn segment_circle(a: Vec2, d: Vec2, center: Vec2, r: f64) -> Vec<f64> {
    let f = a - center;
    let qa = d.norm_sq();
    let qb = 2.0 * f.dot(d);
    let qc = f.norm_sq() - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    let mut out = Vec::with_capacity(2);
    for s in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
        if (0.0..=1.0).contains(&s) && out.last() != Some(&s) {
            out.push(s);
        }
    }
    out
}

/// The part of `path` from its start to arc length `along`.
pub fn truncate_path(path: &[Vec2], along: f64) -> Vec<Vec2> {
    let mut out = vec![path[0]];
    let mut walked = 0.0;
    for w in path.windows(2) {
        let len = w[0].distance(w[1]);
        if walked + len >= along {
            let s = if len > 0.0 { (along - walked) / len } else { 1.0 };
            let p = w[0].lerp(w[1], s.clamp(0.0, 1.0));
            if p != *out.last().unwrap() {
                out.push(p);
            }
            return out;
        }
        out.push(w[1]);
        walked += len;
    }
    out
}

/// The part of `path` from arc length `along` to its end.
pub fn path_from(path: &[Vec2], along: f64) -> Vec<Vec2> {
    let mut walked = 0.0;
    for (i, w) in path.windows(2).enumerate() {
        let len = w[0].distance(w[1]);
        if walked + len > along {
            let s = if len > 0.0 { (along - walked) / len } else { 0.0 };
            let mut out = vec![w[0].lerp(w[1], s.clamp(0.0, 1.0))];
            out.extend_from_slice(&path[i + 1..]);
            return out;
        }
        walked += len;
    }
    vec![*path.last().unwrap()]
}
