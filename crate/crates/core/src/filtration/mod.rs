//! Point clouds and the diameter filtrations built on them.
//!
//! Both filtrations assign every simplex its diameter, the largest distance
//! between two of its vertices, and remember which vertex pair attains it.
//! That witness pair is how diagram gradients reach point coordinates.

pub mod delaunay;

use std::cmp::Ordering;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TopoError};
use crate::simplicial::{BoundaryMatrix, Simplex, SimplicialComplex};

pub use delaunay::{triangulate, Triangulation};

/// `n` points in `d` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: Vec<f64>,
    dim: usize,
}

impl PointCloud {
    pub fn new(coords: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(TopoError::InvalidPointCloud("dimension must be at least 1".into()));
        }
        if coords.is_empty() {
            return Err(TopoError::InvalidPointCloud("empty point cloud".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(TopoError::InvalidPointCloud(format!(
                "{} coordinates do not split into rows of {dim}",
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(TopoError::InvalidPointCloud(format!(
                "non-finite coordinate in point {}",
                i / dim
            )));
        }
        Ok(PointCloud { coords, dim })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != dim) {
            return Err(TopoError::InvalidPointCloud("ragged rows".into()));
        }
        Self::new(rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect(), dim)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let mut coords = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            coords.extend(m.row(i).iter().copied());
        }
        Self::new(coords, m.ncols())
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.coords)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// The points at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> PointCloud {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointCloud { coords, dim: self.dim }
    }

    /// Fails on the first pair of exactly coincident points.
    pub fn check_distinct(&self) -> Result<()> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.point(a)
                .iter()
                .zip(self.point(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        });
        for w in idx.windows(2) {
            if self.point(w[0]) == self.point(w[1]) {
                return Err(TopoError::DuplicatePoints(w[0].min(w[1]), w[0].max(w[1])));
            }
        }
        Ok(())
    }

    fn planar(&self) -> Result<Vec<[f64; 2]>> {
        if self.dim != 2 {
            return Err(TopoError::Usage(format!(
                "Delaunay-based constructions need 2D points, got dimension {}",
                self.dim
            )));
        }
        Ok(self.points().map(|p| [p[0], p[1]]).collect())
    }
}

/// One simplex of a filtration with its appearance time.
#[derive(Debug, Clone, PartialEq)]
pub struct FiltrationEntry {
    pub simplex: Simplex,
    pub value: f64,
    /// Vertex pair realizing the diameter; `None` for vertices.
    pub witness: Option<(usize, usize)>,
}

/// Simplices ordered by appearance, together with their boundary matrix.
#[derive(Debug, Clone)]
pub struct Filtration {
    entries: Vec<FiltrationEntry>,
    boundary: BoundaryMatrix,
}

fn entry_order(a: &FiltrationEntry, b: &FiltrationEntry) -> Ordering {
    a.value.total_cmp(&b.value).then_with(|| a.simplex.cmp(&b.simplex))
}

impl Filtration {
    /// Sorts entries by value, then dimension, then lexicographically.
    pub fn new(mut entries: Vec<FiltrationEntry>) -> Result<Self> {
        entries.sort_by(entry_order);
        Self::from_ordered(entries)
    }

    /// Keeps the given order; it must be monotone and place faces first.
    pub fn from_ordered(entries: Vec<FiltrationEntry>) -> Result<Self> {
        if let Some(e) = entries.iter().find(|e| !e.value.is_finite()) {
            return Err(TopoError::Ordering(format!(
                "simplex {} has non-finite value",
                e.simplex
            )));
        }
        let order: Vec<Simplex> = entries.iter().map(|e| e.simplex.clone()).collect();
        let boundary = BoundaryMatrix::from_ordered(&order)?;
        for (j, e) in entries.iter().enumerate() {
            for &i in boundary.column(j) {
                if entries[i].value > e.value {
                    return Err(TopoError::Ordering(format!(
                        "face {} enters at {} after coface {} at {}",
                        entries[i].simplex, entries[i].value, e.simplex, e.value
                    )));
                }
            }
        }
        Ok(Filtration { entries, boundary })
    }

    pub fn entries(&self) -> &[FiltrationEntry] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> &FiltrationEntry {
        &self.entries[i]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn boundary(&self) -> &BoundaryMatrix {
        &self.boundary
    }

    /// The complex at the end of the filtration.
    pub fn complex(&self) -> SimplicialComplex {
        SimplicialComplex::from_closed_set(self.entries.iter().map(|e| e.simplex.clone()).collect())
    }
}

/// Which filtration to build on a point cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiltrationKind {
    WeakAlpha,
    Rips { max_dim: usize },
}

/// Default cap on the number of Rips simplices.
pub const DEFAULT_RIPS_BUDGET: usize = 4_000_000;

pub fn build_filtration(cloud: &PointCloud, kind: FiltrationKind) -> Result<Filtration> {
    match kind {
        FiltrationKind::WeakAlpha => weak_alpha_filtration(cloud),
        FiltrationKind::Rips { max_dim } => vietoris_rips_filtration(cloud, max_dim),
    }
}

/// Lexicographically first vertex pair of maximal distance, and that distance.
fn diameter(vertices: &[usize], dist: impl Fn(usize, usize) -> f64) -> (f64, (usize, usize)) {
    let mut best = (f64::NEG_INFINITY, (vertices[0], vertices[0]));
    for (i, &a) in vertices.iter().enumerate() {
        for &b in &vertices[i + 1..] {
            let d = dist(a, b);
            if d > best.0 {
                best = (d, (a, b));
            }
        }
    }
    best
}

fn entry_for(simplex: Simplex, dist: impl Fn(usize, usize) -> f64) -> FiltrationEntry {
    if simplex.dim() == 0 {
        FiltrationEntry {
            simplex,
            value: 0.0,
            witness: None,
        }
    } else {
        let (value, witness) = diameter(simplex.vertices(), dist);
        FiltrationEntry {
            simplex,
            value,
            witness: Some(witness),
        }
    }
}

/// Delaunay triangulation of a planar cloud as a simplicial complex.
pub fn delaunay_2d(cloud: &PointCloud) -> Result<SimplicialComplex> {
    let pts = cloud.planar()?;
    cloud.check_distinct()?;
    let tri = triangulate(&pts);
    let mut simplices: std::collections::BTreeSet<Simplex> = (0..cloud.len()).map(Simplex::vertex).collect();
    simplices.extend(tri.edges.iter().map(|&[a, b]| Simplex::edge(a, b)));
    simplices.extend(tri.triangles.iter().map(|t| Simplex::from_sorted(t.to_vec())));
    Ok(SimplicialComplex::from_closed_set(simplices))
}

/// Diameter filtration restricted to the Delaunay triangulation.
pub fn weak_alpha_filtration(cloud: &PointCloud) -> Result<Filtration> {
    let pts = cloud.planar()?;
    cloud.check_distinct()?;
    let tri = triangulate(&pts);
    let dist = |a: usize, b: usize| cloud.distance(a, b);
    let mut entries = Vec::with_capacity(cloud.len() + tri.edges.len() + tri.triangles.len());
    entries.extend((0..cloud.len()).map(|v| entry_for(Simplex::vertex(v), dist)));
    entries.extend(tri.edges.iter().map(|&[a, b]| entry_for(Simplex::edge(a, b), dist)));
    entries.extend(
        tri.triangles
            .iter()
            .map(|t| entry_for(Simplex::from_sorted(t.to_vec()), dist)),
    );
    Filtration::new(entries)
}

/// Vietoris–Rips filtration with simplices up to dimension `max_dim + 1`.
pub fn vietoris_rips_filtration(cloud: &PointCloud, max_dim: usize) -> Result<Filtration> {
    vietoris_rips_filtration_with_budget(cloud, max_dim, DEFAULT_RIPS_BUDGET)
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

pub fn vietoris_rips_filtration_with_budget(cloud: &PointCloud, max_dim: usize, budget: usize) -> Result<Filtration> {
    if max_dim < 1 {
        return Err(TopoError::Usage("Rips max_dim must be at least 1".into()));
    }
    cloud.check_distinct()?;
    let n = cloud.len();
    let top = (max_dim + 1).min(n.saturating_sub(1));
    let count: u128 = (1..=top as u128 + 1).map(|k| binomial(n as u128, k)).sum();
    if count > budget as u128 {
        return Err(TopoError::BudgetExceeded { count, budget });
    }

    let mut dmat = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = cloud.distance(i, j);
            dmat[i * n + j] = d;
            dmat[j * n + i] = d;
        }
    }
    let dist = |a: usize, b: usize| dmat[a * n + b];

    let mut entries = Vec::with_capacity(count as usize);
    let mut stack: Vec<usize> = Vec::with_capacity(top + 1);
    fn extend(
        stack: &mut Vec<usize>,
        n: usize,
        top: usize,
        out: &mut Vec<FiltrationEntry>,
        dist: &dyn Fn(usize, usize) -> f64,
    ) {
        let start = stack.last().map_or(0, |&v| v + 1);
        for v in start..n {
            stack.push(v);
            out.push(entry_for(Simplex::from_sorted(stack.clone()), dist));
            if stack.len() <= top {
                extend(stack, n, top, out, dist);
            }
            stack.pop();
        }
    }
    extend(&mut stack, n, top, &mut entries, &dist);
    Filtration::new(entries)
}
