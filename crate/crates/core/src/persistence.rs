//! Boundary-matrix reduction, persistence diagrams and the bottleneck distance.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Result, TopoError};
use crate::filtration::Filtration;
use crate::simplicial::add_column;

/// A birth simplex paired with the simplex that kills its class.
///
/// Indices refer to positions in the filtration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimplexPair {
    pub birth: usize,
    pub death: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EssentialSimplex {
    pub simplex: usize,
    pub dim: usize,
}

/// Result of reducing a filtration's boundary matrix.
#[derive(Debug, Clone)]
pub struct PersistencePairing {
    pub pairs: Vec<SimplexPair>,
    pub essential: Vec<EssentialSimplex>,
    reduced: Vec<Vec<usize>>,
}

impl PersistencePairing {
    /// Column `j` of the reduced matrix R.
    pub fn reduced_column(&self, j: usize) -> &[usize] {
        &self.reduced[j]
    }

    /// `low(j)`, the largest row index of the reduced column, if any.
    pub fn low(&self, j: usize) -> Option<usize> {
        self.reduced[j].last().copied()
    }

    pub fn pair_of_death(&self, death: usize) -> Option<&SimplexPair> {
        self.pairs.iter().find(|p| p.death == death)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReductionOptions {
    /// Zero out columns of simplices already known to create a class.
    pub clearing: bool,
}

/// Column reduction with the default options.
pub fn reduce(filtration: &Filtration) -> PersistencePairing {
    reduce_with(filtration, ReductionOptions::default())
}

pub fn reduce_with(filtration: &Filtration, options: ReductionOptions) -> PersistencePairing {
    let boundary = filtration.boundary();
    let n = boundary.len();
    let mut reduced: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut pivot_col: Vec<Option<usize>> = vec![None; n];

    let mut order: Vec<usize> = (0..n).collect();
    if options.clearing {
        // Higher dimensions first so their pivots can clear lower columns.
        order.sort_by_key(|&j| (std::cmp::Reverse(boundary.dim_of(j)), j));
    }
    let mut cleared = vec![false; n];

    for j in order {
        if cleared[j] {
            continue;
        }
        let mut col = boundary.column(j).to_vec();
        while let Some(&low) = col.last() {
            match pivot_col[low] {
                Some(i) => add_column(&mut col, &reduced[i]),
                None => {
                    pivot_col[low] = Some(j);
                    if options.clearing {
                        cleared[low] = true;
                    }
                    break;
                }
            }
        }
        reduced[j] = col;
    }

    let mut pairs = Vec::new();
    let mut essential = Vec::new();
    for j in 0..n {
        if let Some(&low) = reduced[j].last() {
            pairs.push(SimplexPair {
                birth: low,
                death: j,
                dim: boundary.dim_of(low),
            });
        } else if pivot_col[j].is_none() {
            essential.push(EssentialSimplex {
                simplex: j,
                dim: boundary.dim_of(j),
            });
        }
    }
    pairs.sort_by_key(|p| p.birth);
    PersistencePairing {
        pairs,
        essential,
        reduced,
    }
}

/// A finite diagram point with references back to the filtration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagramPoint {
    pub birth: f64,
    pub death: f64,
    pub birth_simplex: usize,
    pub death_simplex: usize,
    pub birth_witness: Option<(usize, usize)>,
    pub death_witness: Option<(usize, usize)>,
}

impl DiagramPoint {
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssentialPoint {
    pub birth: f64,
    pub simplex: usize,
}

/// Persistence diagram of one homology dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    pub dim: usize,
    /// Points with `birth < death`, in order of their death simplex.
    pub regular: Vec<DiagramPoint>,
    pub essential: Vec<EssentialPoint>,
}

/// Persistence-descending order used to rank diagram points.
///
/// Ties go to the earlier birth, then to the lexicographically smaller
/// witness pairs.
pub fn rank_order(a: &DiagramPoint, b: &DiagramPoint) -> Ordering {
    b.persistence()
        .total_cmp(&a.persistence())
        .then_with(|| a.birth.total_cmp(&b.birth))
        .then_with(|| a.birth_witness.cmp(&b.birth_witness))
        .then_with(|| a.death_witness.cmp(&b.death_witness))
        .then_with(|| a.death_simplex.cmp(&b.death_simplex))
}

impl PersistenceDiagram {
    pub fn empty(dim: usize) -> Self {
        PersistenceDiagram {
            dim,
            regular: Vec::new(),
            essential: Vec::new(),
        }
    }

    /// Regular points sorted by rank (most persistent first).
    pub fn ranked(&self) -> Vec<DiagramPoint> {
        let mut pts = self.regular.clone();
        pts.sort_by(rank_order);
        pts
    }

    pub fn to_json(&self, filtration: &Filtration) -> DiagramJson {
        let vertices = |i: usize| filtration.entry(i).simplex.vertices().to_vec();
        DiagramJson {
            dim: self.dim,
            regular: self.regular.iter().map(|p| [p.birth, p.death]).collect(),
            essential: self.essential.iter().map(|p| p.birth).collect(),
            pairs: self
                .regular
                .iter()
                .map(|p| [vertices(p.birth_simplex), vertices(p.death_simplex)])
                .collect(),
        }
    }
}

/// Exported form of a diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramJson {
    pub dim: usize,
    pub regular: Vec<[f64; 2]>,
    pub essential: Vec<f64>,
    pub pairs: Vec<[Vec<usize>; 2]>,
}

/// Diagrams for dimensions `0..=max_dim`. Zero-persistence pairs are dropped.
pub fn diagrams(filtration: &Filtration, pairing: &PersistencePairing, max_dim: usize) -> Vec<PersistenceDiagram> {
    let mut out: Vec<PersistenceDiagram> = (0..=max_dim).map(PersistenceDiagram::empty).collect();
    let mut by_death: Vec<&SimplexPair> = pairing.pairs.iter().collect();
    by_death.sort_by_key(|p| p.death);
    for p in by_death {
        if p.dim > max_dim {
            continue;
        }
        let b = filtration.entry(p.birth);
        let d = filtration.entry(p.death);
        if d.value > b.value {
            out[p.dim].regular.push(DiagramPoint {
                birth: b.value,
                death: d.value,
                birth_simplex: p.birth,
                death_simplex: p.death,
                birth_witness: b.witness,
                death_witness: d.witness,
            });
        }
    }
    for e in &pairing.essential {
        if e.dim <= max_dim {
            out[e.dim].essential.push(EssentialPoint {
                birth: filtration.entry(e.simplex).value,
                simplex: e.simplex,
            });
        }
    }
    out
}

/// Reduces `filtration` and returns its diagrams up to `max_dim`.
pub fn compute_diagrams(filtration: &Filtration, max_dim: usize) -> (PersistencePairing, Vec<PersistenceDiagram>) {
    let pairing = reduce(filtration);
    let dgms = diagrams(filtration, &pairing, max_dim);
    (pairing, dgms)
}

fn linf(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

/// Maximum bipartite matching size (Hopcroft–Karp).
fn max_matching(left: usize, right: usize, adj: &[Vec<usize>]) -> usize {
    const FREE: usize = usize::MAX;
    let mut match_l = vec![FREE; left];
    let mut match_r = vec![FREE; right];
    let mut dist = vec![0usize; left];
    let mut matched = 0;
    loop {
        let mut queue = VecDeque::new();
        let mut found = false;
        for u in 0..left {
            if match_l[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == FREE {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            return matched;
        }
        fn augment(
            u: usize,
            adj: &[Vec<usize>],
            match_l: &mut [usize],
            match_r: &mut [usize],
            dist: &mut [usize],
        ) -> bool {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == usize::MAX || (dist[w] == dist[u] + 1 && augment(w, adj, match_l, match_r, dist)) {
                    match_l[u] = v;
                    match_r[v] = u;
                    return true;
                }
            }
            dist[u] = usize::MAX;
            false
        }
        for u in 0..left {
            if match_l[u] == FREE && augment(u, adj, &mut match_l, &mut match_r, &mut dist) {
                matched += 1;
            }
        }
    }
}

/// Bottleneck distance between two finite point multisets, diagonal included.
pub fn bottleneck_points(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (m, k) = (a.len(), b.len());
    let half = |p: (f64, f64)| (p.1 - p.0) / 2.0;
    let mut candidates: Vec<f64> = vec![0.0];
    candidates.extend(a.iter().chain(b).map(|&p| half(p)));
    for &p in a {
        for &q in b {
            candidates.push(linf(p, q));
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    // Left: a points then diagonal copies of b. Right: b points then diagonal copies of a.
    let feasible = |r: f64| {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m + k];
        for i in 0..m {
            for j in 0..k {
                if linf(a[i], b[j]) <= r {
                    adj[i].push(j);
                }
            }
            if half(a[i]) <= r {
                adj[i].push(k + i);
            }
        }
        for j in 0..k {
            if half(b[j]) <= r {
                adj[m + j].push(j);
            }
            adj[m + j].extend(k..k + m);
        }
        max_matching(m + k, k + m, &adj) == m + k
    };

    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

/// Exact bottleneck distance between two diagrams of the same dimension.
///
/// Essential points only match essential points; a different number of
/// them gives an infinite distance.
pub fn bottleneck_distance(a: &PersistenceDiagram, b: &PersistenceDiagram) -> Result<f64> {
    if a.dim != b.dim {
        return Err(TopoError::Usage(format!(
            "cannot compare diagrams of dimensions {} and {}",
            a.dim, b.dim
        )));
    }
    if a.essential.len() != b.essential.len() {
        return Ok(f64::INFINITY);
    }
    let mut ea: Vec<f64> = a.essential.iter().map(|p| p.birth).collect();
    let mut eb: Vec<f64> = b.essential.iter().map(|p| p.birth).collect();
    ea.sort_by(f64::total_cmp);
    eb.sort_by(f64::total_cmp);
    let essential = ea.iter().zip(&eb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let pa: Vec<(f64, f64)> = a.regular.iter().map(|p| (p.birth, p.death)).collect();
    let pb: Vec<(f64, f64)> = b.regular.iter().map(|p| (p.birth, p.death)).collect();
    Ok(essential.max(bottleneck_points(&pa, &pb)))
}

/// Splits an even-degree edge set into edge-disjoint simple cycles.
fn simple_cycles(edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &(a, b) in edges {
        adj.entry(a).or_default().insert(b);
        adj.entry(b).or_default().insert(a);
    }
    let mut cycles = Vec::new();
    while let Some(start) = adj.iter().find(|(_, s)| !s.is_empty()).map(|(&v, _)| v) {
        let mut path = vec![start];
        let mut pos: HashMap<usize, usize> = HashMap::from([(start, 0)]);
        loop {
            let cur = *path.last().unwrap();
            let Some(&next) = adj[&cur].iter().next() else {
                break;
            };
            adj.get_mut(&cur).unwrap().remove(&next);
            adj.get_mut(&next).unwrap().remove(&cur);
            if let Some(&p) = pos.get(&next) {
                cycles.push(path[p..].to_vec());
                for v in &path[p + 1..] {
                    pos.remove(v);
                }
                path.truncate(p + 1);
            } else {
                pos.insert(next, path.len());
                path.push(next);
            }
        }
    }
    cycles
}

/// Representative loop of the `rank`-th most persistent 1-dimensional class.
///
/// The loop comes from the reduced column of the class's death simplex.
/// When that cycle splits into several simple loops the longest is returned.
/// Edges are listed in traversal order, the last one closing the loop.
pub fn representative_cycle(
    filtration: &Filtration,
    pairing: &PersistencePairing,
    rank: usize,
) -> Result<Vec<(usize, usize)>> {
    let dgm = diagrams(filtration, pairing, 1).pop().expect("dimension 1 diagram");
    let ranked = dgm.ranked();
    let point = rank
        .checked_sub(1)
        .and_then(|r| ranked.get(r))
        .ok_or(TopoError::NoCycle(rank))?;
    let edges: Vec<(usize, usize)> = pairing
        .reduced_column(point.death_simplex)
        .iter()
        .map(|&i| {
            let v = filtration.entry(i).simplex.vertices();
            (v[0], v[1])
        })
        .collect();
    let longest = simple_cycles(&edges)
        .into_iter()
        .fold(Vec::new(), |best, c| if c.len() > best.len() { c } else { best });
    if longest.len() < 3 {
        return Err(TopoError::NoCycle(rank));
    }
    Ok((0..longest.len())
        .map(|i| (longest[i], longest[(i + 1) % longest.len()]))
        .collect())
}
