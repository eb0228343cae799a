//! Topological losses on persistence diagrams and their point gradients.
//!
//! A term sums `g(b, d) = (d - b)^p ((d + b) / 2)^q` over a window of ranks
//! in one diagram. Because every filtration value is a distance between a
//! witness pair of points, the derivative of each `b` and `d` lands on two
//! rows of the gradient.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TopoError};
use crate::filtration::{build_filtration, FiltrationKind, PointCloud};
use crate::persistence::{compute_diagrams, DiagramPoint, PersistenceDiagram};

/// Upper end of a rank window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRank", into = "RawRank")]
pub enum RankEnd {
    Finite(usize),
    Infinite,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawRank {
    Int(usize),
    Text(String),
}

impl TryFrom<RawRank> for RankEnd {
    type Error = String;

    fn try_from(raw: RawRank) -> std::result::Result<Self, String> {
        match raw {
            RawRank::Int(j) => Ok(RankEnd::Finite(j)),
            RawRank::Text(s) if s == "inf" => Ok(RankEnd::Infinite),
            RawRank::Text(s) => Err(format!("expected a rank or \"inf\", got {s:?}")),
        }
    }
}

impl From<RankEnd> for RawRank {
    fn from(r: RankEnd) -> Self {
        match r {
            RankEnd::Finite(j) => RawRank::Int(j),
            RankEnd::Infinite => RawRank::Text("inf".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub f: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Functional {
    pub tau: f64,
}

fn one() -> f64 {
    1.0
}

/// One summand of a topological loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTerm {
    /// Homology dimension.
    pub k: usize,
    /// First rank of the window, 1-based.
    pub i: usize,
    pub j: RankEnd,
    pub mu: f64,
    #[serde(default = "one")]
    pub p: f64,
    #[serde(default)]
    pub q: f64,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<Sampling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<Functional>,
}

impl LossTerm {
    /// `mu * sum of (d - b)` over ranks `i..=j` of diagram `k`.
    pub fn persistence(k: usize, i: usize, j: RankEnd, mu: f64) -> Self {
        LossTerm {
            k,
            i,
            j,
            mu,
            p: 1.0,
            q: 0.0,
            weight: 1.0,
            sampling: None,
            functional: None,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_sampling(mut self, f: f64, n: usize) -> Self {
        self.sampling = Some(Sampling { f, n });
        self
    }

    pub fn with_functional(mut self, tau: f64) -> Self {
        self.functional = Some(Functional { tau });
        self
    }

    pub fn with_exponents(mut self, p: f64, q: f64) -> Self {
        self.p = p;
        self.q = q;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TopoError::Config(m));
        if self.i == 0 {
            return bad("rank windows start at 1".into());
        }
        if self.mu != 1.0 && self.mu != -1.0 {
            return bad(format!("mu must be +1 or -1, got {}", self.mu));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return bad(format!("p must be positive, got {}", self.p));
        }
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return bad(format!("q must be non-negative, got {}", self.q));
        }
        if !self.weight.is_finite() {
            return bad(format!("weight must be finite, got {}", self.weight));
        }
        if let Some(s) = self.sampling {
            if !(s.f > 0.0 && s.f <= 1.0) {
                return bad(format!("sampling fraction must lie in (0, 1], got {}", s.f));
            }
            if s.n == 0 {
                return bad("sampling needs at least one repeat".into());
            }
        }
        if let Some(fl) = self.functional {
            if !(0.0..=1.0).contains(&fl.tau) {
                return bad(format!("tau must lie in [0, 1], got {}", fl.tau));
            }
        }
        Ok(())
    }

    fn last_rank(&self) -> usize {
        match self.j {
            RankEnd::Finite(j) => j,
            RankEnd::Infinite => usize::MAX,
        }
    }

    /// Smallest subset on which the term's diagram can be non-trivial.
    fn min_points(&self) -> usize {
        if self.k == 0 {
            2
        } else {
            self.k + 2
        }
    }

    fn g(&self, b: f64, d: f64) -> f64 {
        let mut v = (d - b).powf(self.p);
        if self.q != 0.0 {
            v *= ((d + b) / 2.0).powf(self.q);
        }
        v
    }

    /// Partial derivatives of `g` with respect to birth and death.
    fn dg(&self, b: f64, d: f64) -> (f64, f64) {
        let pers = d - b;
        let dp = self.p * pers.powf(self.p - 1.0);
        if self.q == 0.0 {
            return (-dp, dp);
        }
        let mid = (d + b) / 2.0;
        let mq = mid.powf(self.q);
        let dm = pers.powf(self.p) * self.q * mid.powf(self.q - 1.0) / 2.0;
        (-dp * mq + dm, dp * mq + dm)
    }
}

/// Diagram points picked out by the term's rank window.
///
/// Essential points take the top ranks but carry no finite persistence,
/// so they are skipped.
pub fn selected_points(diagrams: &[PersistenceDiagram], term: &LossTerm) -> Vec<DiagramPoint> {
    let Some(dgm) = diagrams.get(term.k) else {
        return Vec::new();
    };
    let first = term.i.max(1);
    let last = term.last_rank();
    if last < first {
        return Vec::new();
    }
    let offset = dgm.essential.len();
    dgm.ranked()
        .into_iter()
        .enumerate()
        .filter(|(r, _)| {
            let rank = r + 1 + offset;
            rank >= first && rank <= last
        })
        .map(|(_, p)| p)
        .collect()
}

/// Value of one term (without its weight) on precomputed diagrams.
pub fn eval_term(diagrams: &[PersistenceDiagram], term: &LossTerm) -> f64 {
    term.mu
        * selected_points(diagrams, term)
            .iter()
            .map(|p| term.g(p.birth, p.death))
            .sum::<f64>()
}

/// Dense `n x d` gradient aligned with a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub values: Vec<f64>,
    pub dim: usize,
}

impl Gradient {
    pub fn zeros(n: usize, dim: usize) -> Self {
        Gradient {
            values: vec![0.0; n * dim],
            dim,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn add_scaled(&mut self, other: &Gradient, s: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn nonzero_rows(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.row(i).iter().any(|&v| v != 0.0))
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Adds `coef` times the gradient of `|x_a - x_b|`.
fn push_distance_grad(
    cloud: &PointCloud,
    grad: &mut Gradient,
    (a, b): (usize, usize),
    coef: f64,
    map: &dyn Fn(usize) -> usize,
) {
    if coef == 0.0 {
        return;
    }
    let dist = cloud.distance(a, b);
    let (xa, xb) = (cloud.point(a), cloud.point(b));
    let diff: Vec<f64> = xa.iter().zip(xb).map(|(u, v)| coef * (u - v) / dist).collect();
    for (g, d) in grad.row_mut(map(a)).iter_mut().zip(&diff) {
        *g += d;
    }
    for (g, d) in grad.row_mut(map(b)).iter_mut().zip(&diff) {
        *g -= d;
    }
}

fn accumulate_gradient(
    cloud: &PointCloud,
    diagrams: &[PersistenceDiagram],
    term: &LossTerm,
    coef: f64,
    grad: &mut Gradient,
    map: &dyn Fn(usize) -> usize,
) {
    for p in selected_points(diagrams, term) {
        let (gb, gd) = term.dg(p.birth, p.death);
        if let Some(w) = p.birth_witness {
            push_distance_grad(cloud, grad, w, coef * term.mu * gb, map);
        }
        if let Some(w) = p.death_witness {
            push_distance_grad(cloud, grad, w, coef * term.mu * gd, map);
        }
    }
}

/// Gradient of [`eval_term`] with respect to the cloud coordinates.
pub fn gradient_term(cloud: &PointCloud, diagrams: &[PersistenceDiagram], term: &LossTerm) -> Gradient {
    let mut grad = Gradient::zeros(cloud.len(), cloud.dim());
    accumulate_gradient(cloud, diagrams, term, 1.0, &mut grad, &|i| i);
    grad
}

/// Weighted sum of terms on the sub-cloud `indices`, gradient scattered back.
fn eval_on_subset(
    cloud: &PointCloud,
    kind: FiltrationKind,
    indices: &[usize],
    terms: &[(&LossTerm, f64)],
) -> Result<(f64, Gradient)> {
    let sub = cloud.subset(indices);
    let max_k = terms.iter().map(|(t, _)| t.k).max().unwrap_or(0);
    let filtration = build_filtration(&sub, kind)?;
    let (_, diagrams) = compute_diagrams(&filtration, max_k);
    let mut grad = Gradient::zeros(cloud.len(), cloud.dim());
    let mut value = 0.0;
    for &(term, coef) in terms {
        value += coef * eval_term(&diagrams, term);
        accumulate_gradient(&sub, &diagrams, term, coef, &mut grad, &|i| indices[i]);
    }
    Ok((value, grad))
}

fn min_points(terms: &[(&LossTerm, f64)]) -> usize {
    terms.iter().map(|(t, _)| t.min_points()).max().unwrap_or(1)
}

/// Points with centrality `1 - g / max g` at most `tau`, where `g` is the
/// distance to the cloud mean.
pub fn functional_selection(cloud: &PointCloud, tau: f64) -> Result<Vec<usize>> {
    let n = cloud.len();
    let d = cloud.dim();
    let mut mean = vec![0.0; d];
    for p in cloud.points() {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v / n as f64;
        }
    }
    let g: Vec<f64> = cloud
        .points()
        .map(|p| p.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .collect();
    let gmax = g.iter().copied().fold(0.0, f64::max);
    if gmax <= 0.0 {
        return Err(TopoError::Config(
            "centrality is undefined when all points sit at the mean".into(),
        ));
    }
    if tau >= 1.0 {
        return Ok((0..n).collect());
    }
    Ok((0..n).filter(|&i| 1.0 - g[i] / gmax <= tau).collect())
}

fn restricted_indices(cloud: &PointCloud, functional: Option<Functional>, needed: usize) -> Result<Vec<usize>> {
    match functional {
        None => Ok((0..cloud.len()).collect()),
        Some(Functional { tau }) => {
            let sel = functional_selection(cloud, tau)?;
            if sel.len() < needed {
                return Err(TopoError::Config(format!(
                    "functional restriction at tau = {tau} keeps {} points, need at least {needed}",
                    sel.len()
                )));
            }
            Ok(sel)
        }
    }
}

fn draw_subsets(pool: &[usize], sampling: Sampling, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let size = ((sampling.f * pool.len() as f64).ceil() as usize).clamp(1, pool.len());
    (0..count)
        .map(|_| {
            let mut s: Vec<usize> = index::sample(rng, pool.len(), size)
                .into_iter()
                .map(|i| pool[i])
                .collect();
            s.sort_unstable();
            s
        })
        .collect()
}

/// Mean over `sampling.n` random subsets of `pool`.
fn eval_sampled_group(
    cloud: &PointCloud,
    kind: FiltrationKind,
    pool: &[usize],
    sampling: Sampling,
    terms: &[(&LossTerm, f64)],
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Gradient)> {
    let size = (sampling.f * pool.len() as f64).ceil() as usize;
    let needed = min_points(terms);
    if size < needed {
        return Err(TopoError::Config(format!(
            "sampling fraction {} keeps {size} of {} points, need at least {needed}",
            sampling.f,
            pool.len()
        )));
    }
    let subsets = draw_subsets(pool, sampling, sampling.n, rng);
    let results: Vec<Result<(f64, Gradient)>> = subsets
        .par_iter()
        .map(|s| eval_on_subset(cloud, kind, s, terms))
        .collect();
    let mut total = 0.0;
    let mut grad = Gradient::zeros(cloud.len(), cloud.dim());
    for r in results {
        let (v, g) = match r {
            Ok(x) => x,
            Err(TopoError::Config(m)) => return Err(TopoError::Config(m)),
            Err(_) => {
                // Degenerate subset: draw a replacement once.
                let retry = draw_subsets(pool, sampling, 1, rng).remove(0);
                eval_on_subset(cloud, kind, &retry, terms)?
            }
        };
        total += v;
        grad.add_scaled(&g, 1.0);
    }
    let n = sampling.n as f64;
    grad.scale(1.0 / n);
    Ok((total / n, grad))
}

fn eval_group(
    cloud: &PointCloud,
    kind: FiltrationKind,
    functional: Option<Functional>,
    sampling: Option<Sampling>,
    terms: &[(&LossTerm, f64)],
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Gradient)> {
    let needed = min_points(terms);
    let pool = restricted_indices(cloud, functional, needed)?;
    match sampling {
        None => eval_on_subset(cloud, kind, &pool, terms),
        Some(s) => eval_sampled_group(cloud, kind, &pool, s, terms, rng),
    }
}

/// Mean loss and gradient of one term over random subsets drawn under `seed`.
pub fn eval_sampled(cloud: &PointCloud, kind: FiltrationKind, term: &LossTerm, seed: u64) -> Result<(f64, Gradient)> {
    term.validate()?;
    let sampling = term.sampling.unwrap_or(Sampling { f: 1.0, n: 1 });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    eval_group(cloud, kind, None, Some(sampling), &[(term, 1.0)], &mut rng)
}

/// Loss and gradient of one term on the centrality sublevel set.
///
/// The selection is held fixed while differentiating.
pub fn eval_functional(cloud: &PointCloud, kind: FiltrationKind, term: &LossTerm) -> Result<(f64, Gradient)> {
    term.validate()?;
    let functional = term.functional.unwrap_or(Functional { tau: 1.0 });
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    eval_group(cloud, kind, Some(functional), None, &[(term, 1.0)], &mut rng)
}

/// A weighted combination of loss terms over one kind of filtration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoLossSpec {
    pub filtration: FiltrationKind,
    pub terms: Vec<LossTerm>,
}

impl TopoLossSpec {
    pub fn new(filtration: FiltrationKind, terms: Vec<LossTerm>) -> Result<Self> {
        let spec = TopoLossSpec { filtration, terms };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(TopoError::Config("a loss needs at least one term".into()));
        }
        self.terms.iter().try_for_each(LossTerm::validate)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: TopoLossSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Terms grouped by the point restriction they evaluate on.
    fn groups(&self) -> BTreeMap<GroupKey, Vec<(&LossTerm, f64)>> {
        let mut out: BTreeMap<GroupKey, Vec<(&LossTerm, f64)>> = BTreeMap::new();
        for (idx, t) in self.terms.iter().enumerate() {
            let key = GroupKey {
                first_term: self
                    .terms
                    .iter()
                    .position(|u| u.functional == t.functional && u.sampling == t.sampling)
                    .unwrap_or(idx),
            };
            out.entry(key).or_default().push((t, t.weight));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct GroupKey {
    first_term: usize,
}

/// Weighted loss value and gradient of a whole spec.
///
/// Terms that share a restriction share one filtration, or one per sampled
/// subset. Sampled groups draw from a single generator seeded by `seed`, in
/// term order.
pub fn eval_spec(cloud: &PointCloud, spec: &TopoLossSpec, seed: u64) -> Result<(f64, Gradient)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let mut grad = Gradient::zeros(cloud.len(), cloud.dim());
    for (key, terms) in spec.groups() {
        let head = &spec.terms[key.first_term];
        let (v, g) = eval_group(cloud, spec.filtration, head.functional, head.sampling, &terms, &mut rng)?;
        total += v;
        grad.add_scaled(&g, 1.0);
    }
    Ok((total, grad))
}

/// Loss value only, on the full cloud with sampling and restrictions dropped.
pub fn eval_spec_unrestricted_value(cloud: &PointCloud, spec: &TopoLossSpec) -> Result<f64> {
    let max_k = spec.terms.iter().map(|t| t.k).max().unwrap_or(0);
    let filtration = build_filtration(cloud, spec.filtration)?;
    let (_, diagrams) = compute_diagrams(&filtration, max_k);
    Ok(spec.terms.iter().map(|t| t.weight * eval_term(&diagrams, t)).sum())
}
