//! Uniform-grid spatial hash over tree nodes for nearest and radius queries.

use crate::geometry::Vec2;

use super::Node;

pub(super) struct GridIndex {
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl GridIndex {
    pub fn new(size: (f64, f64), cell: f64) -> Self {
        let cell = cell.max(1e-3);
        let nx = ((size.0 / cell).ceil() as usize).max(1);
        let ny = ((size.1 / cell).ceil() as usize).max(1);
        Self {
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
        }
    }

    fn coords(&self, q: Vec2) -> (usize, usize) {
        let cx = ((q.x / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
        let cy = ((q.y / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
        (cx, cy)
    }

    pub fn insert(&mut self, id: usize, q: Vec2) {
        let (cx, cy) = self.coords(q);
        self.buckets[cy * self.nx + cx].push(id);
    }

    /// Nearest node by Euclidean distance; ties go to the lower id.
    pub fn nearest(&self, q: Vec2, nodes: &[Node]) -> usize {
        let (cx, cy) = self.coords(q);
        let mut best: Option<(f64, usize)> = None;
        let max_ring = self.nx.max(self.ny);
        for ring in 0..=max_ring {
            // Every node outside ring `ring` is at least `ring * cell` away
            // from q in one axis, minus q's offset inside its own cell.
            if let Some((d, _)) = best {
                if d.sqrt() < (ring as f64 - 1.0) * self.cell {
                    break;
                }
            }
            self.for_ring(cx, cy, ring, |bucket| {
                for &id in bucket {
                    let d = nodes[id].state.distance_sq(q);
                    if best.map_or(true, |(bd, bid)| d < bd || (d == bd && id < bid)) {
                        best = Some((d, id));
                    }
                }
            });
        }
        best.map(|(_, id)| id).expect("index is never empty")
    }

    /// Ids within `radius` of `q`, sorted ascending.
    pub fn within(&self, q: Vec2, radius: f64, nodes: &[Node], out: &mut Vec<usize>) {
        out.clear();
        let reach = (radius / self.cell).ceil() as usize;
        let (cx, cy) = self.coords(q);
        let r2 = radius * radius;
        for y in cy.saturating_sub(reach)..=(cy + reach).min(self.ny - 1) {
            for x in cx.saturating_sub(reach)..=(cx + reach).min(self.nx - 1) {
                for &id in &self.buckets[y * self.nx + x] {
                    if nodes[id].state.distance_sq(q) <= r2 {
                        out.push(id);
                    }
                }
            }
        }
        out.sort_unstable();
    }

    fn for_ring(&self, cx: usize, cy: usize, ring: usize, mut f: impl FnMut(&[usize])) {
        let (cx, cy, r) = (cx as i64, cy as i64, ring as i64);
        let visit = |x: i64, y: i64, f: &mut dyn FnMut(&[usize])| {
            if x >= 0 && y >= 0 && (x as usize) < self.nx && (y as usize) < self.ny {
                f(&self.buckets[y as usize * self.nx + x as usize]);
            }
        };
        if r == 0 {
            visit(cx, cy, &mut f);
            return;
        }
        for x in (cx - r)..=(cx + r) {
            visit(x, cy - r, &mut f);
            visit(x, cy + r, &mut f);
        }
        for y in (cy - r + 1)..=(cy + r - 1) {
            visit(cx - r, y, &mut f);
            visit(cx + r, y, &mut f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nodes: Vec<Node> = (0..500)
            .map(|_| Node {
                state: Vec2::new(rng.gen::<f64>() * 14.0, rng.gen::<f64>() * 9.0),
                parent: None,
                cost: 0.0,
            })
            .collect();
        let mut index = GridIndex::new((14.0, 9.0), 1.0);
        for (i, n) in nodes.iter().enumerate() {
            index.insert(i, n.state);
        }
        let mut near = Vec::new();
        for _ in 0..200 {
            let q = Vec2::new(rng.gen::<f64>() * 14.0, rng.gen::<f64>() * 9.0);
            let brute = (0..nodes.len())
                .min_by(|&a, &b| nodes[a].state.distance_sq(q).total_cmp(&nodes[b].state.distance_sq(q)))
                .unwrap();
            assert_eq!(index.nearest(q, &nodes), brute);
            index.within(q, 1.0, &nodes, &mut near);
            let expect: Vec<usize> = (0..nodes.len())
                .filter(|&i| nodes[i].state.distance(q) <= 1.0)
                .collect();
            assert_eq!(near, expect);
        }
    }
}
