//! Circular pseudotime from the dominant loop of a planar embedding.

use std::f64::consts::TAU;

use crate::error::{Result, TopoError};
use crate::filtration::{weak_alpha_filtration, PointCloud};
use crate::persistence::{reduce, representative_cycle};

/// Closed polygon through embedding points, with cumulative arc lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleModel {
    vertices: Vec<usize>,
    /// `cumulative[k]` is the arc length up to the start of edge `k`;
    /// the last entry is the total length.
    cumulative: Vec<f64>,
}

impl CycleModel {
    /// Builds a model from a vertex loop, starting at the smallest index and
    /// heading toward its smaller neighbour.
    pub fn from_loop(embedding: &PointCloud, mut vertices: Vec<usize>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(TopoError::Usage(format!(
                "a loop needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if let Some(&v) = vertices.iter().find(|&&v| v >= embedding.len()) {
            return Err(TopoError::Usage(format!("loop vertex {v} outside the embedding")));
        }
        let start = (0..vertices.len()).min_by_key(|&i| vertices[i]).unwrap();
        vertices.rotate_left(start);
        if vertices[vertices.len() - 1] < vertices[1] {
            vertices[1..].reverse();
        }
        let m = vertices.len();
        let mut cumulative = Vec::with_capacity(m + 1);
        let mut acc = 0.0;
        cumulative.push(acc);
        for k in 0..m {
            let len = embedding.distance(vertices[k], vertices[(k + 1) % m]);
            if len <= 0.0 {
                return Err(TopoError::Usage(format!("loop edge {k} has zero length")));
            }
            acc += len;
            cumulative.push(acc);
        }
        Ok(CycleModel { vertices, cumulative })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn edge_count(&self) -> usize {
        self.vertices.len()
    }

    /// Endpoints of edge `k`.
    pub fn edge(&self, k: usize) -> (usize, usize) {
        (self.vertices[k], self.vertices[(k + 1) % self.vertices.len()])
    }

    pub fn edge_length(&self, k: usize) -> f64 {
        self.cumulative[k + 1] - self.cumulative[k]
    }

    pub fn total_length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn arc_start(&self, k: usize) -> f64 {
        self.cumulative[k]
    }
}

/// Loop of the most persistent class in the weak Alpha diagram `D_1`.
pub fn extract_cycle_model(embedding: &PointCloud) -> Result<CycleModel> {
    let filtration = weak_alpha_filtration(embedding)?;
    let pairing = reduce(&filtration);
    let edges = representative_cycle(&filtration, &pairing, 1)?;
    CycleModel::from_loop(embedding, edges.iter().map(|e| e.0).collect())
}

/// Where a point lands on the cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub edge: usize,
    /// Position along the edge, 0 at its first vertex.
    pub t: f64,
    pub point: Vec<f64>,
    pub distance: f64,
}

/// Clamped orthogonal projection of `x` onto segment `a b`.
fn project_segment(x: &[f64], a: &[f64], b: &[f64]) -> (f64, Vec<f64>, f64) {
    let ab: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if len2 > 0.0 {
        let dot: f64 = x.iter().zip(a).zip(&ab).map(|((xi, ai), d)| (xi - ai) * d).sum();
        (dot / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let point: Vec<f64> = a.iter().zip(&ab).map(|(p, d)| p + t * d).collect();
    let dist = x.iter().zip(&point).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
    (t, point, dist)
}

/// Nearest point on the cycle for every embedding point. Ties keep the
/// lowest edge index.
pub fn project_onto_cycle(embedding: &PointCloud, model: &CycleModel) -> Vec<Projection> {
    embedding
        .points()
        .map(|x| {
            let mut best: Option<Projection> = None;
            for k in 0..model.edge_count() {
                let (a, b) = model.edge(k);
                let (t, point, distance) = project_segment(x, embedding.point(a), embedding.point(b));
                if best.as_ref().is_none_or(|p| distance < p.distance) {
                    best = Some(Projection {
                        edge: k,
                        t,
                        point,
                        distance,
                    });
                }
            }
            best.expect("cycle has edges")
        })
        .collect()
}

/// Arc position of each projection scaled to `[0, 2 pi)`.
pub fn circular_pseudotimes(projections: &[Projection], model: &CycleModel) -> Vec<f64> {
    let total = model.total_length();
    projections
        .iter()
        .map(|p| {
            let arc = model.arc_start(p.edge) + p.t * model.edge_length(p.edge);
            let v = TAU * arc / total;
            if v >= TAU {
                v - TAU
            } else {
                v
            }
        })
        .collect()
}

/// Cycle extraction, projection and pseudotimes in one call.
pub fn infer_pseudotime(embedding: &PointCloud) -> Result<(CycleModel, Vec<Projection>, Vec<f64>)> {
    let model = extract_cycle_model(embedding)?;
    let proj = project_onto_cycle(embedding, &model);
    let times = circular_pseudotimes(&proj, &model);
    Ok((model, proj, times))
}
