//! Exact open-path visiting order (fixed start, no return) by Held-Karp.

use crate::error::TspError;
use crate::geometry::Vec2;

/// Largest number of targets the exact solver accepts.
pub const MAX_EXACT_TSP: usize = 12;

const TIE_TOL: f64 = 1e-9;

/// Orders `targets` to minimize the Euclidean tour length from `start`.
/// Among equally short tours the lexicographically smallest id sequence wins.
pub fn visit_sequence(start: Vec2, targets: &[(u32, Vec2)]) -> Result<Vec<u32>, TspError> {
    let n = targets.len();
    if n == 0 {
        return Err(TspError::Empty);
    }
    if n > MAX_EXACT_TSP {
        return Err(TspError::TooManyTargets(n));
    }
    let mut sorted = targets.to_vec();
    sorted.sort_by_key(|&(id, _)| id);
    let pts: Vec<Vec2> = sorted.iter().map(|&(_, p)| p).collect();
    let dist = |a: usize, b: usize| pts[a].distance(pts[b]);

    // rest[mask][j]: shortest path that starts at target j and visits every
    // target in `mask` (j not in mask).
    let full = 1usize << n;
    let mut rest = vec![vec![f64::INFINITY; n]; full];
    for j in 0..n {
        rest[0][j] = 0.0;
    }
    for mask in 1..full {
        for j in 0..n {
            if mask & (1 << j) != 0 {
                continue;
            }
            let mut best = f64::INFINITY;
            for k in 0..n {
                if mask & (1 << k) != 0 {
                    best = best.min(dist(j, k) + rest[mask & !(1 << k)][k]);
                }
            }
            rest[mask][j] = best;
        }
    }

    // Walk forward, taking the smallest id whose continuation stays optimal.
    let mut order = Vec::with_capacity(n);
    let mut mask = full - 1;
    let mut from: Option<usize> = None;
    while mask != 0 {
        let leg = |k: usize| match from {
            Some(j) => dist(j, k),
            None => start.distance(pts[k]),
        };
        let optimum = (0..n)
            .filter(|&k| mask & (1 << k) != 0)
            .map(|k| leg(k) + rest[mask & !(1 << k)][k])
            .fold(f64::INFINITY, f64::min);
        let pick = (0..n)
            .find(|&k| {
                mask & (1 << k) != 0 && leg(k) + rest[mask & !(1 << k)][k] <= optimum + TIE_TOL * optimum.max(1.0)
            })
            .expect("some target attains the optimum");
        order.push(sorted[pick].0);
        mask &= !(1 << pick);
        from = Some(pick);
    }
    Ok(order)
}

/// Length of the open tour visiting `points` in order from `start`.
pub fn tour_length(start: Vec2, points: &[Vec2]) -> f64 {
    let mut prev = start;
    let mut total = 0.0;
    for &p in points {
        total += prev.distance(p);
        prev = p;
    }
    total
}
