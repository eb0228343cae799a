//! Test-only oracles that share no code with the library's reduction.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_points(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect()
}

pub fn dist(p: &[[f64; 2]], a: usize, b: usize) -> f64 {
    let dx = p[a][0] - p[b][0];
    let dy = p[a][1] - p[b][1];
    (dx * dx + dy * dy).sqrt()
}

/// A simplex with its diameter value.
#[derive(Debug, Clone)]
pub struct Cell {
    pub vertices: Vec<usize>,
    pub value: f64,
}

fn diameter(p: &[[f64; 2]], v: &[usize]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            best = best.max(dist(p, v[i], v[j]));
        }
    }
    best
}

/// Every simplex on at most three vertices.
pub fn brute_rips(p: &[[f64; 2]]) -> Vec<Cell> {
    let n = p.len();
    let mut cells = Vec::new();
    for a in 0..n {
        cells.push(vec![a]);
        for b in a + 1..n {
            cells.push(vec![a, b]);
            for c in b + 1..n {
                cells.push(vec![a, b, c]);
            }
        }
    }
    cells
        .into_iter()
        .map(|v| Cell {
            value: diameter(p, &v),
            vertices: v,
        })
        .collect()
}

/// Circumcircle test by exact-enough determinant for well-separated random points.
fn in_circle(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    let orient = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let m = |p: [f64; 2]| [p[0] - d[0], p[1] - d[1], (p[0] - d[0]).powi(2) + (p[1] - d[1]).powi(2)];
    let (ra, rb, rc) = (m(a), m(b), m(c));
    let det = ra[0] * (rb[1] * rc[2] - rb[2] * rc[1]) - ra[1] * (rb[0] * rc[2] - rb[2] * rc[0])
        + ra[2] * (rb[0] * rc[1] - rb[1] * rc[0]);
    det * orient.signum()
}

/// Delaunay complex from the empty-circumcircle property over all triples.
pub fn brute_weak_alpha(p: &[[f64; 2]]) -> Vec<Cell> {
    let n = p.len();
    let mut tris = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let orient = (p[b][0] - p[a][0]) * (p[c][1] - p[a][1]) - (p[b][1] - p[a][1]) * (p[c][0] - p[a][0]);
                if orient.abs() < 1e-14 {
                    continue;
                }
                if (0..n)
                    .filter(|&d| d != a && d != b && d != c)
                    .all(|d| in_circle(p[a], p[b], p[c], p[d]) < 0.0)
                {
                    tris.push(vec![a, b, c]);
                }
            }
        }
    }
    let mut edges: Vec<Vec<usize>> = tris
        .iter()
        .flat_map(|t| [vec![t[0], t[1]], vec![t[0], t[2]], vec![t[1], t[2]]])
        .collect();
    edges.sort();
    edges.dedup();
    let mut cells: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    cells.extend(edges);
    cells.extend(tris);
    cells
        .into_iter()
        .map(|v| Cell {
            value: diameter(p, &v),
            vertices: v,
        })
        .collect()
}

/// Rank over F2 of a dense 0/1 matrix given as rows of bits.
fn rank_f2(mut rows: Vec<Vec<u64>>) -> usize {
    let words = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for bit in 0..words * 64 {
        let (w, m) = (bit / 64, 1u64 << (bit % 64));
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][w] & m != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let pr = rows[rank].clone();
        for r in 0..rows.len() {
            if r != rank && rows[r][w] & m != 0 {
                for (x, y) in rows[r].iter_mut().zip(&pr) {
                    *x ^= y;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Rank of the boundary map from the `cols` simplices to the `rows` simplices.
fn boundary_rank(cells: &[Cell], cols: &[usize], rows: &[usize]) -> usize {
    if cols.is_empty() || rows.is_empty() {
        return 0;
    }
    let words = cols.len().div_ceil(64);
    let matrix: Vec<Vec<u64>> = rows
        .iter()
        .map(|&r| {
            let mut bits = vec![0u64; words];
            for (c, &col) in cols.iter().enumerate() {
                let face = &cells[r].vertices;
                let co = &cells[col].vertices;
                if co.len() == face.len() + 1 && face.iter().all(|v| co.contains(v)) {
                    bits[c / 64] |= 1 << (c % 64);
                }
            }
            bits
        })
        .collect();
    rank_f2(matrix)
}

/// Persistence diagram of dimension `k` as sorted `(birth, death)` pairs,
/// with `f64::INFINITY` deaths for essential classes, from persistent Betti
/// numbers of every pair of sublevel complexes.
pub fn brute_diagram(cells: &[Cell], k: usize) -> Vec<(f64, f64)> {
    let mut times: Vec<f64> = cells.iter().map(|c| c.value).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let m = times.len();
    let of_dim = |d: usize, t: usize| -> Vec<usize> {
        (0..cells.len())
            .filter(|&i| cells[i].vertices.len() == d + 1 && cells[i].value <= times[t])
            .collect()
    };
    // beta[s][t] for s <= t.
    let mut beta = vec![vec![0i64; m]; m];
    for s in 0..m {
        let ks = of_dim(k, s);
        let cycles = ks.len()
            - if k == 0 {
                0
            } else {
                boundary_rank(cells, &ks, &of_dim(k - 1, s))
            };
        for t in s..m {
            let kt = of_dim(k, t);
            let cofaces = of_dim(k + 1, t);
            let outside: Vec<usize> = kt.iter().copied().filter(|i| !ks.contains(i)).collect();
            let bounded = boundary_rank(cells, &cofaces, &kt) - boundary_rank(cells, &cofaces, &outside);
            beta[s][t] = cycles as i64 - bounded as i64;
        }
    }
    let b = |s: isize, t: usize| if s < 0 { 0 } else { beta[s as usize][t] };
    let mut out = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let mu = b(i as isize, j - 1) - b(i as isize, j) - b(i as isize - 1, j - 1) + b(i as isize - 1, j);
            assert!(mu >= 0, "negative multiplicity");
            for _ in 0..mu {
                out.push((times[i], times[j]));
            }
        }
        let ess = b(i as isize, m - 1) - b(i as isize - 1, m - 1);
        for _ in 0..ess {
            out.push((times[i], f64::INFINITY));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out
}
