//! Embedding losses: PCA on the Stiefel manifold, a UMAP-style neighbor
//! embedding, an inner-product graph model and a DeepWalk-style skip-gram.
//!
//! Embeddings are `n x d` matrices with one row per data element.

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, TopoError};

/// Orthonormal `D x d` projection matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProjection {
    w: DMatrix<f64>,
}

fn orthonormality_error(w: &DMatrix<f64>) -> f64 {
    let gram = w.transpose() * w;
    (gram - DMatrix::identity(w.ncols(), w.ncols())).abs().max()
}

impl LinearProjection {
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        if w.ncols() == 0 || w.ncols() > w.nrows() {
            return Err(TopoError::Usage(format!(
                "a projection needs 0 < d <= D, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        let err = orthonormality_error(&w);
        if err > 1e-8 {
            return Err(TopoError::Usage(format!(
                "projection columns are not orthonormal (deviation {err:e})"
            )));
        }
        Ok(LinearProjection { w })
    }

    /// The first `d` standard basis vectors.
    pub fn identity_block(big_d: usize, d: usize) -> Result<Self> {
        Self::new(DMatrix::identity(big_d, d))
    }

    /// Orthonormalized Gaussian matrix.
    pub fn random(big_d: usize, d: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(big_d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        Ok(LinearProjection { w: qr_retract(g)? })
    }

    /// Top-`d` right singular vectors of `x`.
    pub fn from_pca(x: &DMatrix<f64>, d: usize) -> Result<Self> {
        if d == 0 || d > x.ncols() {
            return Err(TopoError::Usage(format!(
                "cannot take {d} components of {}-dimensional data",
                x.ncols()
            )));
        }
        // Eigenvectors of the D x D or n x n Gram matrix, whichever is smaller.
        let w = if x.ncols() <= x.nrows() {
            let eig = (x.transpose() * x).symmetric_eigen();
            top_columns(&eig.eigenvectors, &eig.eigenvalues, d)
        } else {
            let eig = (x * x.transpose()).symmetric_eigen();
            let u = top_columns(&eig.eigenvectors, &eig.eigenvalues, d);
            x.transpose() * u
        };
        let w = qr_retract(w)?;
        Self::new(w)
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn input_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn project(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x * &self.w
    }
}

fn top_columns(vectors: &DMatrix<f64>, values: &nalgebra::DVector<f64>, d: usize) -> DMatrix<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let cols: Vec<_> = order[..d].iter().map(|&i| vectors.column(i).into_owned()).collect();
    DMatrix::from_columns(&cols)
}

/// Q factor of a thin QR decomposition with a positive R diagonal.
fn qr_retract(a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for i in 0..r.ncols() {
        let rii = r[(i, i)];
        if rii.abs() < 1e-12 || !rii.is_finite() {
            return Err(TopoError::Retraction(format!(
                "update is rank deficient (|R[{i},{i}]| = {:e})",
                rii.abs()
            )));
        }
        if rii < 0.0 {
            q.column_mut(i).neg_mut();
        }
    }
    Ok(q)
}

/// Subtracts each column's mean.
pub fn center_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    out
}

/// Mean squared reconstruction error `|X W W^T - X|^2 / (n D)` and its
/// gradient with respect to `W`.
pub fn pca_loss_grad(x: &DMatrix<f64>, proj: &LinearProjection) -> Result<(f64, DMatrix<f64>)> {
    if x.ncols() != proj.input_dim() {
        return Err(TopoError::Usage(format!(
            "data has {} columns but the projection expects {}",
            x.ncols(),
            proj.input_dim()
        )));
    }
    let w = proj.w();
    let xw = x * w;
    let resid = &xw * w.transpose() - x;
    let scale = 1.0 / (x.nrows() * x.ncols()) as f64;
    let loss = resid.norm_squared() * scale;
    let grad = (x.transpose() * &resid * w + resid.transpose() * xw) * (2.0 * scale);
    Ok((loss, grad))
}

/// One fixed-size Riemannian gradient step followed by QR retraction.
pub fn stiefel_step(proj: &LinearProjection, grad: &DMatrix<f64>, step: f64) -> Result<LinearProjection> {
    if step.is_nan() || step <= 0.0 {
        return Err(TopoError::Usage(format!("step size must be positive, got {step}")));
    }
    let w = proj.w();
    let wtg = w.transpose() * grad;
    let sym = (&wtg + wtg.transpose()) * 0.5;
    let xi = grad - w * sym;
    if xi.iter().all(|&v| v == 0.0) {
        return Ok(proj.clone());
    }
    Ok(LinearProjection {
        w: qr_retract(w - xi * step)?,
    })
}

/// Undirected graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphData {
    n: usize,
    edges: Vec<(usize, usize)>,
    labels: Option<Vec<usize>>,
}

impl GraphData {
    /// Edges are stored once each as `(min, max)`; repeats are merged.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut list = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(TopoError::Usage(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(TopoError::Usage(format!("edge ({a}, {b}) outside 0..{n}")));
            }
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        list.dedup();
        Ok(GraphData {
            n,
            edges: list,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(TopoError::Usage(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }
}

fn sq_dist(e: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    (0..e.ncols()).map(|c| (e[(i, c)] - e[(j, c)]).powi(2)).sum()
}

/// Adds `coef * (e_i - e_j)` to row `i` and subtracts it from row `j`.
fn push_pair(grad: &mut DMatrix<f64>, e: &DMatrix<f64>, i: usize, j: usize, coef: f64) {
    for c in 0..e.ncols() {
        let v = coef * (e[(i, c)] - e[(j, c)]);
        grad[(i, c)] += v;
        grad[(j, c)] -= v;
    }
}

/// Symmetrized fuzzy kNN graph used as the attraction target.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    n: usize,
    /// `(i, j, w)` with `i < j`, sorted.
    pub edges: Vec<(usize, usize, f64)>,
}

impl KnnGraph {
    pub fn node_count(&self) -> usize {
        self.n
    }
}

pub const DEFAULT_KNN: usize = 15;

/// kNN graph with weights `exp(-(d - rho) / sigma)`, where `rho` is the
/// nearest-neighbor distance and `sigma` makes each row sum to `log2 k`.
/// Directed weights `a`, `b` are merged as `a + b - a b`.
pub fn knn_graph(x: &DMatrix<f64>, k: usize) -> Result<KnnGraph> {
    let n = x.nrows();
    if k == 0 || k >= n {
        return Err(TopoError::Config(format!(
            "need 0 < k < n for a kNN graph, got k = {k} with n = {n}"
        )));
    }
    let target = (k as f64).log2();
    let mut directed = std::collections::BTreeMap::new();
    for i in 0..n {
        let mut near: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (sq_dist(x, i, j).sqrt(), j))
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        near.truncate(k);
        let rho = near.iter().map(|p| p.0).find(|&d| d > 0.0).unwrap_or(0.0);
        let mass = |sigma: f64| -> f64 { near.iter().map(|&(d, _)| (-(d - rho).max(0.0) / sigma).exp()).sum() };
        let (mut lo, mut hi) = (1e-12f64, 1.0f64);
        while mass(hi) < target && hi < 1e12 {
            hi *= 2.0;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mass(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let sigma = 0.5 * (lo + hi);
        for &(d, j) in &near {
            directed.insert((i, j), (-(d - rho).max(0.0) / sigma).exp());
        }
    }
    let mut edges = Vec::new();
    for (&(i, j), &a) in &directed {
        match directed.get(&(j, i)) {
            Some(&b) if i < j => edges.push((i, j, a + b - a * b)),
            Some(_) => {}
            None => edges.push((i.min(j), i.max(j), a)),
        }
    }
    edges.sort_by_key(|e| (e.0, e.1));
    Ok(KnnGraph { n, edges })
}

/// Negative samples drawn once and reused while a step is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSamples {
    /// For each graph edge, the nodes repelled from its first endpoint.
    pub per_edge: Vec<Vec<usize>>,
}

pub const UMAP_NEGATIVES: usize = 5;
const REPULSION_EPS: f64 = 1e-3;

/// `m` uniform negatives per edge, never the edge's own endpoints.
pub fn draw_negatives(graph: &KnnGraph, m: usize, seed: u64) -> NegativeSamples {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = graph.n;
    let per_edge = graph
        .edges
        .iter()
        .map(|&(i, j, _)| {
            if n <= 2 {
                return Vec::new();
            }
            (0..m)
                .map(|_| loop {
                    let k = rng.random_range(0..n);
                    if k != i && k != j {
                        break k;
                    }
                })
                .collect()
        })
        .collect();
    NegativeSamples { per_edge }
}

/// UMAP-style cross entropy with Cauchy kernel `q = 1 / (1 + d^2)`.
///
/// Each edge contributes `w log(1 + d^2)` and, for each negative `k`,
/// `w (log(1 + d_ik^2) - log(d_ik^2 + eps))`. The total is averaged over edges.
pub fn umap_like_loss_grad_with(
    e: &DMatrix<f64>,
    graph: &KnnGraph,
    negatives: &NegativeSamples,
) -> Result<(f64, DMatrix<f64>)> {
    if e.nrows() != graph.n {
        return Err(TopoError::Usage(format!(
            "embedding has {} rows, graph has {} nodes",
            e.nrows(),
            graph.n
        )));
    }
    let mut grad = DMatrix::zeros(e.nrows(), e.ncols());
    let mut loss = 0.0;
    let scale = 1.0 / graph.edges.len().max(1) as f64;
    for (&(i, j, w), negs) in graph.edges.iter().zip(&negatives.per_edge) {
        let d2 = sq_dist(e, i, j);
        loss += w * d2.ln_1p();
        push_pair(&mut grad, e, i, j, scale * w * 2.0 / (1.0 + d2));
        for &k in negs {
            let d2 = sq_dist(e, i, k);
            loss += w * (d2.ln_1p() - (d2 + REPULSION_EPS).ln());
            let dd = 1.0 / (1.0 + d2) - 1.0 / (d2 + REPULSION_EPS);
            push_pair(&mut grad, e, i, k, scale * w * 2.0 * dd);
        }
    }
    Ok((loss * scale, grad))
}

pub fn umap_like_loss_grad(e: &DMatrix<f64>, graph: &KnnGraph, negative_seed: u64) -> Result<(f64, DMatrix<f64>)> {
    let negs = draw_negatives(graph, UMAP_NEGATIVES, negative_seed);
    umap_like_loss_grad_with(e, graph, &negs)
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let t = s.exp();
        t / (1.0 + t)
    }
}

/// `log(1 + exp(s))` without overflow.
fn softplus(s: f64) -> f64 {
    s.max(0.0) + (-s.abs()).exp().ln_1p()
}

fn dot(e: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    (0..e.ncols()).map(|c| e[(a, c)] * e[(b, c)]).sum()
}

/// Adds `coef * d<e_a, e_b>` to the gradient.
fn push_dot(grad: &mut DMatrix<f64>, e: &DMatrix<f64>, a: usize, b: usize, coef: f64) {
    for c in 0..e.ncols() {
        grad[(a, c)] += coef * e[(b, c)];
        grad[(b, c)] += coef * e[(a, c)];
    }
}

/// Mean binary cross entropy of `sigmoid(<e_u, e_v>)` against the edge
/// indicator, over all unordered node pairs.
pub fn inner_product_graph_loss_grad(graph: &GraphData, e: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let n = graph.node_count();
    if e.nrows() != n {
        return Err(TopoError::Usage(format!(
            "embedding has {} rows, graph has {n} nodes",
            e.nrows()
        )));
    }
    let pairs = (n * n.saturating_sub(1) / 2).max(1) as f64;
    let mut grad = DMatrix::zeros(n, e.ncols());
    let mut loss = 0.0;
    for u in 0..n {
        for v in u + 1..n {
            let s = dot(e, u, v);
            let y = if graph.has_edge(u, v) { 1.0 } else { 0.0 };
            loss += softplus(s) - y * s;
            push_dot(&mut grad, e, u, v, (sigmoid(s) - y) / pairs);
        }
    }
    Ok((loss / pairs, grad))
}

/// Random-walk and skip-gram settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
    pub negatives: usize,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walks_per_node: 10,
            walk_length: 10,
            window: 2,
            negatives: 5,
        }
    }
}

/// Context pairs and their negatives, fixed for one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramSamples {
    pub pairs: Vec<(usize, usize)>,
    pub negatives: Vec<Vec<usize>>,
    /// Nodes without neighbors; their walks contribute nothing.
    pub isolated: Vec<usize>,
}

/// Uniform random walks, window pairs and unigram^(3/4) negatives.
pub fn deepwalk_samples(graph: &GraphData, cfg: &WalkConfig, seed: u64) -> SkipGramSamples {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let adj = graph.adjacency();
    let n = graph.node_count();
    let mut counts = vec![0usize; n];
    let mut pairs = Vec::new();
    for _ in 0..cfg.walks_per_node {
        for start in 0..n {
            let mut walk = vec![start];
            while walk.len() < cfg.walk_length {
                let nb = &adj[*walk.last().unwrap()];
                if nb.is_empty() {
                    break;
                }
                walk.push(nb[rng.random_range(0..nb.len())]);
            }
            for &v in &walk {
                counts[v] += 1;
            }
            for (a, &c) in walk.iter().enumerate() {
                let hi = (a + cfg.window + 1).min(walk.len());
                for &x in &walk[a + 1..hi] {
                    pairs.push((c, x));
                    pairs.push((x, c));
                }
            }
        }
    }
    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
    let negatives = match WeightedIndex::new(&weights) {
        Ok(dist) if n > 2 => pairs
            .iter()
            .map(|&(c, x)| {
                (0..cfg.negatives)
                    .filter_map(|_| (0..64).map(|_| dist.sample(&mut rng)).find(|&k| k != c && k != x))
                    .collect()
            })
            .collect(),
        _ => vec![Vec::new(); pairs.len()],
    };
    let isolated = (0..n).filter(|&v| adj[v].is_empty()).collect();
    SkipGramSamples {
        pairs,
        negatives,
        isolated,
    }
}

/// Mean over context pairs of `-log s(<e_c, e_x>) - sum log s(-<e_c, e_k>)`.
pub fn skipgram_loss_grad(e: &DMatrix<f64>, samples: &SkipGramSamples) -> (f64, DMatrix<f64>) {
    let mut grad = DMatrix::zeros(e.nrows(), e.ncols());
    if samples.pairs.is_empty() {
        return (0.0, grad);
    }
    let scale = 1.0 / samples.pairs.len() as f64;
    let mut loss = 0.0;
    for (&(c, x), negs) in samples.pairs.iter().zip(&samples.negatives) {
        let s = dot(e, c, x);
        loss += softplus(-s);
        push_dot(&mut grad, e, c, x, scale * (sigmoid(s) - 1.0));
        for &k in negs {
            let s = dot(e, c, k);
            loss += softplus(s);
            push_dot(&mut grad, e, c, k, scale * sigmoid(s));
        }
    }
    (loss * scale, grad)
}

pub fn deepwalk_loss_grad(
    graph: &GraphData,
    e: &DMatrix<f64>,
    cfg: &WalkConfig,
    seed: u64,
) -> Result<(f64, DMatrix<f64>)> {
    if e.nrows() != graph.node_count() {
        return Err(TopoError::Usage(format!(
            "embedding has {} rows, graph has {} nodes",
            e.nrows(),
            graph.node_count()
        )));
    }
    Ok(skipgram_loss_grad(e, &deepwalk_samples(graph, cfg, seed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    /// Largest entrywise gap between `grad` and central differences of `f`.
    fn fd_error(x: &DMatrix<f64>, grad: &DMatrix<f64>, h: f64, f: impl Fn(&DMatrix<f64>) -> f64) -> f64 {
        let mut worst = 0.0f64;
        for idx in 0..x.len() {
            let mut up = x.clone();
            up[idx] += h;
            let mut down = x.clone();
            down[idx] -= h;
            let num = (f(&up) - f(&down)) / (2.0 * h);
            worst = worst.max((num - grad[idx]).abs());
        }
        worst / grad.abs().max().max(1e-12)
    }

    #[test]
    fn pca_zero_loss_on_embedded_data() {
        let mut x = DMatrix::zeros(10, 4);
        let g = gaussian(10, 2, 1);
        x.view_mut((0, 0), (10, 2)).copy_from(&g);
        let p = LinearProjection::identity_block(4, 2).unwrap();
        assert!(pca_loss_grad(&x, &p).unwrap().0 < 1e-20);
    }

    #[test]
    fn pca_solution_beats_random_projections() {
        let x = center_columns(&gaussian(40, 6, 2));
        let best = pca_loss_grad(&x, &LinearProjection::from_pca(&x, 2).unwrap())
            .unwrap()
            .0;
        // Independent SVD of the data as a cross-check.
        let svd = x.clone().svd(false, true);
        let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let tail: f64 = sv[2..].iter().map(|s| s * s).sum::<f64>() / (40.0 * 6.0);
        assert!((best - tail).abs() < 1e-10);
        for s in 0..100 {
            let w = LinearProjection::random(6, 2, 1000 + s).unwrap();
            assert!(best <= pca_loss_grad(&x, &w).unwrap().0 + 1e-12);
        }
    }

    #[test]
    fn pca_gradient_matches_fd() {
        let x = center_columns(&gaussian(15, 5, 3));
        let p = LinearProjection::random(5, 2, 4).unwrap();
        let (_, g) = pca_loss_grad(&x, &p).unwrap();
        // The loss is defined for any W, orthonormal or not.
        let f = |w: &DMatrix<f64>| {
            let r = &x * w * w.transpose() - &x;
            r.norm_squared() / 75.0
        };
        assert!(fd_error(p.w(), &g, 1e-6, f) < 1e-6);
    }

    #[test]
    fn pca_dimension_mismatch() {
        let x = gaussian(5, 3, 0);
        let p = LinearProjection::identity_block(4, 2).unwrap();
        assert!(matches!(pca_loss_grad(&x, &p), Err(TopoError::Usage(_))));
    }

    #[test]
    fn pca_invariant_under_rotation_of_w() {
        let x = center_columns(&gaussian(20, 5, 5));
        let p = LinearProjection::random(5, 2, 6).unwrap();
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let q = LinearProjection::new(p.w() * rot).unwrap();
        let (a, b) = (pca_loss_grad(&x, &p).unwrap().0, pca_loss_grad(&x, &q).unwrap().0);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn stiefel_contract() {
        let x = center_columns(&gaussian(30, 8, 7));
        let mut p = LinearProjection::random(8, 2, 8).unwrap();
        let zero = DMatrix::zeros(8, 2);
        assert_eq!(stiefel_step(&p, &zero, 0.1).unwrap(), p);
        assert!(stiefel_step(&p, &zero, 0.0).is_err());
        let before = pca_loss_grad(&x, &p).unwrap().0;
        for _ in 0..5 {
            let (_, g) = pca_loss_grad(&x, &p).unwrap();
            p = stiefel_step(&p, &g, 0.05).unwrap();
            assert!(orthonormality_error(p.w()) < 1e-10);
        }
        assert!(pca_loss_grad(&x, &p).unwrap().0 < before);
        let big = gaussian(8, 2, 9) * 1e3;
        assert!(orthonormality_error(stiefel_step(&p, &big, 1.0).unwrap().w()) < 1e-10);
    }

    #[test]
    fn retraction_reports_rank_deficiency() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(qr_retract(a), Err(TopoError::Retraction(_))));
    }

    #[test]
    fn knn_weights_are_merged_and_bounded() {
        let x = gaussian(30, 3, 10);
        let g = knn_graph(&x, 5).unwrap();
        assert!(g.edges.iter().all(|&(i, j, w)| i < j && w > 0.0 && w <= 1.0));
        assert!(matches!(knn_graph(&x, 30), Err(TopoError::Config(_))));
    }

    #[test]
    fn umap_limits_and_gradient() {
        let x = gaussian(25, 4, 11);
        let g = knn_graph(&x, 5).unwrap();
        let negs = draw_negatives(&g, UMAP_NEGATIVES, 12);
        let e = gaussian(25, 2, 13);
        let (_, grad) = umap_like_loss_grad_with(&e, &g, &negs).unwrap();
        let f = |m: &DMatrix<f64>| umap_like_loss_grad_with(m, &g, &negs).unwrap().0;
        assert!(fd_error(&e, &grad, 1e-6, f) < 1e-4);

        // Attraction of a collapsed edge vanishes.
        let single = KnnGraph {
            n: 2,
            edges: vec![(0, 1, 0.7)],
        };
        let none = NegativeSamples { per_edge: vec![vec![]] };
        let same = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let (l, gr) = umap_like_loss_grad_with(&same, &single, &none).unwrap();
        assert_eq!(l, 0.0);
        assert!(gr.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inner_product_values_and_gradient() {
        let one = GraphData::new(2, [(0, 1)]).unwrap();
        let orth = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let (l, _) = inner_product_graph_loss_grad(&one, &orth).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
        let aligned = DMatrix::from_row_slice(2, 1, &[10.0, 10.0]);
        assert!(inner_product_graph_loss_grad(&one, &aligned).unwrap().0 < 1e-40);

        let g = GraphData::new(12, (0..12).map(|i| (i, (i + 1) % 12)).chain([(0, 6), (3, 9)])).unwrap();
        let e = gaussian(12, 3, 14);
        let (_, grad) = inner_product_graph_loss_grad(&g, &e).unwrap();
        let f = |m: &DMatrix<f64>| inner_product_graph_loss_grad(&g, m).unwrap().0;
        assert!(fd_error(&e, &grad, 1e-6, f) < 1e-6);
    }

    #[test]
    fn graph_validation() {
        assert!(GraphData::new(3, [(0, 0)]).is_err());
        assert!(GraphData::new(3, [(0, 3)]).is_err());
        let g = GraphData::new(3, [(1, 0), (0, 1), (1, 2)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(g.clone().with_labels(vec![0, 1]).is_err());
    }

    #[test]
    fn deepwalk_gradient_and_two_nodes() {
        let g = GraphData::new(10, (0..9).map(|i| (i, i + 1)).chain([(0, 5), (2, 8)])).unwrap();
        let cfg = WalkConfig::default();
        let samples = deepwalk_samples(&g, &cfg, 15);
        assert!(!samples.pairs.is_empty());
        assert!(samples
            .pairs
            .iter()
            .zip(&samples.negatives)
            .all(|(&(c, x), n)| n.iter().all(|&k| k != c && k != x)));
        let e = gaussian(10, 2, 16);
        let (_, grad) = skipgram_loss_grad(&e, &samples);
        let f = |m: &DMatrix<f64>| skipgram_loss_grad(m, &samples).0;
        assert!(fd_error(&e, &grad, 1e-6, f) < 1e-4);
        assert_eq!(
            deepwalk_loss_grad(&g, &e, &cfg, 15).unwrap().0,
            skipgram_loss_grad(&e, &samples).0
        );

        let path = GraphData::new(2, [(0, 1)]).unwrap();
        let u = DMatrix::from_row_slice(2, 2, &[0.6, 0.8, 0.6, 0.8]);
        let mut prev = f64::INFINITY;
        for t in 1..20 {
            let (l, _) = deepwalk_loss_grad(&path, &(&u * t as f64), &cfg, 1).unwrap();
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn isolated_nodes_are_reported() {
        let g = GraphData::new(4, [(0, 1), (1, 2)]).unwrap();
        let s = deepwalk_samples(&g, &WalkConfig::default(), 0);
        assert_eq!(s.isolated, vec![3]);
        assert!(s.pairs.iter().all(|&(a, b)| a != 3 && b != 3));
    }

    #[test]
    fn losses_invariant_under_orthogonal_maps() {
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let e = gaussian(20, 2, 17);
        let er = &e * &rot;
        let x = gaussian(20, 3, 18);
        let knn = knn_graph(&x, 4).unwrap();
        let negs = draw_negatives(&knn, 5, 1);
        let (a, ga) = umap_like_loss_grad_with(&e, &knn, &negs).unwrap();
        let (b, gb) = umap_like_loss_grad_with(&er, &knn, &negs).unwrap();
        assert!((a - b).abs() < 1e-10);
        assert!((ga * &rot - gb).abs().max() < 1e-10);
        let g = GraphData::new(20, (0..19).map(|i| (i, i + 1))).unwrap();
        let (a, ga) = inner_product_graph_loss_grad(&g, &e).unwrap();
        let (b, gb) = inner_product_graph_loss_grad(&g, &er).unwrap();
        assert!((a - b).abs() < 1e-10);
        assert!((ga * &rot - gb).abs().max() < 1e-10);
    }

    #[test]
    fn descent_smoke() {
        let x = gaussian(30, 3, 19);
        let knn = knn_graph(&x, 5).unwrap();
        let negs = draw_negatives(&knn, 5, 2);
        let g = GraphData::new(30, (0..29).map(|i| (i, i + 1))).unwrap();
        let samples = deepwalk_samples(&g, &WalkConfig::default(), 3);
        let losses: Vec<Box<dyn Fn(&DMatrix<f64>) -> (f64, DMatrix<f64>)>> = vec![
            Box::new(|e| umap_like_loss_grad_with(e, &knn, &negs).unwrap()),
            Box::new(|e| inner_product_graph_loss_grad(&g, e).unwrap()),
            Box::new(|e| skipgram_loss_grad(e, &samples)),
        ];
        for f in &losses {
            let mut e = gaussian(30, 2, 20);
            let start = f(&e).0;
            let mut last = start;
            for _ in 0..10 {
                let (l, gr) = f(&e);
                assert!(l <= last + 1e-12);
                last = l;
                e -= gr * 1e-3;
            }
            assert!(f(&e).0 < start);
        }
        let xc = center_columns(&x);
        let mut p = LinearProjection::random(3, 2, 21).unwrap();
        let mut last = f64::INFINITY;
        for _ in 0..10 {
            let (l, gr) = pca_loss_grad(&xc, &p).unwrap();
            assert!(l <= last + 1e-12);
            last = l;
            p = stiefel_step(&p, &gr, 1e-3).unwrap();
        }
    }
}
