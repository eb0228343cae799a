//! Incremental Bowyer–Watson Delaunay triangulation in the plane.
//!
//! The outside of the convex hull is covered by ghost triangles that share a
//! single vertex at infinity, so hull edges are never lost when points are
//! inserted outside the current hull. Predicates use adaptive exact
//! arithmetic.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust::{incircle, orient2d, Coord};

const GHOST: usize = usize::MAX;
const NONE: usize = usize::MAX;

/// Insertion order is shuffled with this seed, so ties between cocircular
/// configurations always resolve the same way.
pub const INSERTION_SEED: u64 = 0x5EED_DE1A;

/// Edges and triangles of a planar triangulation, vertices sorted ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Triangulation {
    pub edges: Vec<[usize; 2]>,
    pub triangles: Vec<[usize; 3]>,
}

fn coord(p: [f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    orient2d(coord(a), coord(b), coord(c))
}

struct Mesh<'a> {
    pts: &'a [[f64; 2]],
    tris: Vec<[usize; 3]>,
    adj: Vec<[usize; 3]>,
    alive: Vec<bool>,
    free: Vec<usize>,
    last: usize,
    walk_state: u32,
}

impl<'a> Mesh<'a> {
    fn ghost_slot(&self, t: usize) -> Option<usize> {
        self.tris[t].iter().position(|&v| v == GHOST)
    }

    fn in_conflict(&self, t: usize, p: usize) -> bool {
        let tri = self.tris[t];
        let pp = self.pts[p];
        match self.ghost_slot(t) {
            Some(g) => {
                let u = self.pts[tri[(g + 1) % 3]];
                let v = self.pts[tri[(g + 2) % 3]];
                let o = orient(u, v, pp);
                if o > 0.0 {
                    return true;
                }
                if o < 0.0 {
                    return false;
                }
                let along = |a: [f64; 2], b: [f64; 2]| (pp[0] - a[0]) * (b[0] - a[0]) + (pp[1] - a[1]) * (b[1] - a[1]);
                along(u, v) > 0.0 && along(v, u) > 0.0
            }
            None => {
                let [a, b, c] = tri.map(|i| coord(self.pts[i]));
                incircle(a, b, c, coord(pp)) > 0.0
            }
        }
    }

    fn alloc(&mut self, tri: [usize; 3]) -> usize {
        if let Some(t) = self.free.pop() {
            self.tris[t] = tri;
            self.adj[t] = [NONE; 3];
            self.alive[t] = true;
            t
        } else {
            self.tris.push(tri);
            self.adj.push([NONE; 3]);
            self.alive.push(true);
            self.tris.len() - 1
        }
    }

    fn edge_slot(&self, t: usize, x: usize, y: usize) -> Option<usize> {
        let tri = self.tris[t];
        (0..3).find(|&i| tri[(i + 1) % 3] == x && tri[(i + 2) % 3] == y)
    }

    fn next_offset(&mut self) -> usize {
        // xorshift; only used to randomize the walk direction
        let mut s = self.walk_state;
        s ^= s << 13;
        s ^= s >> 17;
        s ^= s << 5;
        self.walk_state = s;
        (s % 3) as usize
    }

    /// Finds one triangle in conflict with point `p`.
    fn locate(&mut self, p: usize) -> usize {
        let pp = self.pts[p];
        let mut t = self.last;
        if !self.alive[t] {
            t = (0..self.tris.len()).find(|&i| self.alive[i]).expect("mesh is nonempty");
        }
        if let Some(g) = self.ghost_slot(t) {
            t = self.adj[t][g];
        }
        let cap = 4 * self.tris.len() + 64;
        for _ in 0..cap {
            if self.ghost_slot(t).is_some() {
                return t;
            }
            let tri = self.tris[t];
            let start = self.next_offset();
            let mut moved = false;
            for r in 0..3 {
                let i = (start + r) % 3;
                let a = self.pts[tri[(i + 1) % 3]];
                let b = self.pts[tri[(i + 2) % 3]];
                if orient(a, b, pp) < 0.0 {
                    t = self.adj[t][i];
                    moved = true;
                    break;
                }
            }
            if !moved {
                return t;
            }
        }
        (0..self.tris.len())
            .find(|&i| self.alive[i] && self.in_conflict(i, p))
            .expect("a distinct point conflicts with some triangle")
    }

    fn insert(&mut self, p: usize) {
        let seed = self.locate(p);
        debug_assert!(self.in_conflict(seed, p));

        let mut cavity = vec![seed];
        let mut in_cavity: HashMap<usize, ()> = HashMap::new();
        in_cavity.insert(seed, ());
        let mut k = 0;
        while k < cavity.len() {
            let t = cavity[k];
            k += 1;
            for i in 0..3 {
                let n = self.adj[t][i];
                if !in_cavity.contains_key(&n) && self.in_conflict(n, p) {
                    in_cavity.insert(n, ());
                    cavity.push(n);
                }
            }
        }

        // Boundary edges (x, y) of the cavity with the outer neighbour.
        let mut boundary = Vec::new();
        for &t in &cavity {
            let tri = self.tris[t];
            for i in 0..3 {
                let n = self.adj[t][i];
                if !in_cavity.contains_key(&n) {
                    boundary.push((tri[(i + 1) % 3], tri[(i + 2) % 3], n));
                }
            }
        }
        for &t in &cavity {
            self.alive[t] = false;
            self.free.push(t);
        }

        let mut by_start = HashMap::with_capacity(boundary.len());
        let mut by_end = HashMap::with_capacity(boundary.len());
        let mut created = Vec::with_capacity(boundary.len());
        for &(x, y, n) in &boundary {
            let t = self.alloc([x, y, p]);
            self.adj[t][2] = n;
            let j = self
                .edge_slot(n, y, x)
                .expect("outer neighbour shares the boundary edge");
            self.adj[n][j] = t;
            by_start.insert(x, t);
            by_end.insert(y, t);
            created.push(t);
        }
        for &t in &created {
            let [x, y, _] = self.tris[t];
            self.adj[t][0] = by_start[&y];
            self.adj[t][1] = by_end[&x];
        }
        self.last = *created
            .iter()
            .find(|&&t| self.ghost_slot(t).is_none())
            .unwrap_or(&created[0]);
    }
}

/// Delaunay triangulation of distinct planar points.
///
/// Fewer than three points give the complete complex on them; an all
/// collinear input gives the path along the line.
pub fn triangulate(pts: &[[f64; 2]]) -> Triangulation {
    let n = pts.len();
    if n < 2 {
        return Triangulation::default();
    }
    if n == 2 {
        return Triangulation {
            edges: vec![[0, 1]],
            triangles: vec![],
        };
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(INSERTION_SEED));

    let (a, b) = (order[0], order[1]);
    let Some(k) = (2..n).find(|&k| orient(pts[a], pts[b], pts[order[k]]) != 0.0) else {
        return collinear_path(pts, a, b);
    };
    order.swap(2, k);
    let c = order[2];
    let (a, b) = if orient(pts[a], pts[b], pts[c]) > 0.0 {
        (a, b)
    } else {
        (b, a)
    };

    let mut mesh = Mesh {
        pts,
        tris: vec![[a, b, c], [b, a, GHOST], [c, b, GHOST], [a, c, GHOST]],
        adj: vec![[NONE; 3]; 4],
        alive: vec![true; 4],
        free: Vec::new(),
        last: 0,
        walk_state: 0x9E37_79B9,
    };
    let mut edge_owner = HashMap::new();
    for t in 0..4 {
        let tri = mesh.tris[t];
        for i in 0..3 {
            edge_owner.insert((tri[(i + 1) % 3], tri[(i + 2) % 3]), (t, i));
        }
    }
    for t in 0..4 {
        let tri = mesh.tris[t];
        for i in 0..3 {
            let (x, y) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
            mesh.adj[t][i] = edge_owner[&(y, x)].0;
        }
    }

    for &p in &order[3..] {
        mesh.insert(p);
    }

    let mut triangles: Vec<[usize; 3]> = (0..mesh.tris.len())
        .filter(|&t| mesh.alive[t] && mesh.ghost_slot(t).is_none())
        .map(|t| {
            let mut tri = mesh.tris[t];
            tri.sort_unstable();
            tri
        })
        .collect();
    triangles.sort_unstable();
    let mut edges: Vec<[usize; 2]> = triangles
        .iter()
        .flat_map(|&[x, y, z]| [[x, y], [x, z], [y, z]])
        .collect();
    edges.sort_unstable();
    edges.dedup();
    Triangulation { edges, triangles }
}

fn collinear_path(pts: &[[f64; 2]], a: usize, b: usize) -> Triangulation {
    let dir = [pts[b][0] - pts[a][0], pts[b][1] - pts[a][1]];
    let mut along: Vec<(f64, usize)> = (0..pts.len())
        .map(|i| {
            let t = (pts[i][0] - pts[a][0]) * dir[0] + (pts[i][1] - pts[a][1]) * dir[1];
            (t, i)
        })
        .collect();
    along.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut edges: Vec<[usize; 2]> = along
        .windows(2)
        .map(|w| {
            let (x, y) = (w[0].1, w[1].1);
            [x.min(y), x.max(y)]
        })
        .collect();
    edges.sort_unstable();
    Triangulation {
        edges,
        triangles: vec![],
    }
}
