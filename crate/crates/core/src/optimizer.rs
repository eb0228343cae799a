//! Gradient-descent loop for `L_emb + lambda_top * L_top`.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embedders::{
    deepwalk_loss_grad, inner_product_graph_loss_grad, pca_loss_grad, stiefel_step, umap_like_loss_grad, GraphData,
    KnnGraph, LinearProjection, WalkConfig,
};
use crate::error::{Result, TopoError};
use crate::filtration::{FiltrationKind, PointCloud};
use crate::topo_loss::{eval_spec, LossTerm, RankEnd, TopoLossSpec};

/// SplitMix64 mix of a seed and a stream index.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Regularized,
    TopologicalOnly,
    EmbeddingOnly,
}

fn default_long() -> usize {
    100
}
fn default_short() -> usize {
    50
}
fn default_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub lambda_top: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop once the topological loss stagnates.
    #[serde(default)]
    pub early_stop: bool,
    #[serde(default = "default_long")]
    pub stop_long: usize,
    #[serde(default = "default_short")]
    pub stop_short: usize,
    #[serde(default = "default_tol")]
    pub stop_tolerance: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    /// Heavy-ball coefficient for free coordinates; 0 disables it.
    #[serde(default)]
    pub momentum: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lambda_top: 0.0,
            learning_rate: 0.01,
            max_epochs: 100,
            early_stop: false,
            stop_long: default_long(),
            stop_short: default_short(),
            stop_tolerance: default_tol(),
            seed: 0,
            mode: Mode::Regularized,
            momentum: 0.0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TopoError::Config(m));
        if !(self.lambda_top >= 0.0 && self.lambda_top.is_finite()) {
            return bad(format!("lambda_top must be finite and >= 0, got {}", self.lambda_top));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.stop_short == 0 || self.stop_short > self.stop_long {
            return bad(format!(
                "stop windows must satisfy 0 < short <= long, got {} and {}",
                self.stop_short, self.stop_long
            ));
        }
        if self.early_stop && self.stop_long > self.max_epochs {
            return bad(format!(
                "stop window of {} epochs exceeds max_epochs = {}",
                self.stop_long, self.max_epochs
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        Ok(())
    }

    /// Weights on the embedding and topological losses.
    pub fn loss_weights(&self) -> (f64, f64) {
        match self.mode {
            Mode::Regularized => (1.0, self.lambda_top),
            Mode::EmbeddingOnly => (1.0, 0.0),
            Mode::TopologicalOnly => (0.0, 1.0),
        }
    }
}

/// The embedding loss being optimized.
#[derive(Debug, Clone)]
pub enum Embedder {
    /// Reconstruction loss of a linear projection of column-centered data.
    Pca {
        data: DMatrix<f64>,
    },
    Umap {
        graph: KnnGraph,
    },
    InnerProduct {
        graph: GraphData,
    },
    DeepWalk {
        graph: GraphData,
        walk: WalkConfig,
    },
    /// No embedding loss; coordinates are optimized directly.
    Coordinates,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Linear(LinearProjection),
    Free,
}

/// Current coordinates, and the projection that produced them if linear.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingState {
    pub coords: DMatrix<f64>,
    pub provenance: Provenance,
}

impl EmbeddingState {
    pub fn linear(data: &DMatrix<f64>, proj: LinearProjection) -> Self {
        EmbeddingState {
            coords: proj.project(data),
            provenance: Provenance::Linear(proj),
        }
    }

    pub fn free(coords: DMatrix<f64>) -> Self {
        EmbeddingState {
            coords,
            provenance: Provenance::Free,
        }
    }

    /// Gaussian coordinates with standard deviation `scale`.
    pub fn random(n: usize, d: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::free(DMatrix::from_fn(n, d, |_, _| {
            scale * rng.sample::<f64, _>(StandardNormal)
        }))
    }

    pub fn to_cloud(&self) -> Result<PointCloud> {
        PointCloud::from_matrix(&self.coords)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub embedding_loss: f64,
    pub topological_loss: f64,
    pub total_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    /// Losses evaluated at the start of each executed epoch.
    pub records: Vec<EpochRecord>,
    pub final_state: EmbeddingState,
    pub wall_time_secs: f64,
    pub stopped_early: bool,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn topological_losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.topological_loss).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,l_emb,l_top,l_tot\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e}\n",
                r.epoch, r.embedding_loss, r.topological_loss, r.total_loss
            ));
        }
        s
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let last = self.records.last();
        serde_json::json!({
            "epochs": self.records.len(),
            "stopped_early": self.stopped_early,
            "wall_time_secs": self.wall_time_secs,
            "final_embedding_loss": last.map(|r| r.embedding_loss),
            "final_topological_loss": last.map(|r| r.topological_loss),
            "final_total_loss": last.map(|r| r.total_loss),
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FitError {
    #[error(transparent)]
    Topo(#[from] TopoError),
    #[error("loss diverged at epoch {epoch}")]
    Diverged { epoch: usize, trace: Box<RunTrace> },
}

/// True when the mean of the last `stop_long` values is within
/// `stop_tolerance` (relative) of the mean of the last `stop_short`.
pub fn stagnation_stop(losses: &[f64], config: &RunConfig) -> bool {
    if losses.len() < config.stop_long {
        return false;
    }
    let mean = |k: usize| losses[losses.len() - k..].iter().sum::<f64>() / k as f64;
    let (long, short) = (mean(config.stop_long), mean(config.stop_short));
    if short == 0.0 {
        (long - short).abs() < config.stop_tolerance
    } else {
        (long / short - 1.0).abs() < config.stop_tolerance
    }
}

/// Embedding loss and its gradient on the state's parameters
/// (`W` for linear states, coordinates otherwise).
pub fn embedding_loss_grad(embedder: &Embedder, state: &EmbeddingState, seed: u64) -> Result<(f64, DMatrix<f64>)> {
    match (embedder, &state.provenance) {
        (Embedder::Pca { data }, Provenance::Linear(p)) => pca_loss_grad(data, p),
        (Embedder::Pca { .. }, Provenance::Free) => Err(TopoError::Usage(
            "the PCA embedder needs a linear embedding state".into(),
        )),
        (_, Provenance::Linear(_)) => Err(TopoError::Usage(
            "only the PCA embedder optimizes a linear projection".into(),
        )),
        (Embedder::Umap { graph }, _) => umap_like_loss_grad(&state.coords, graph, seed),
        (Embedder::InnerProduct { graph }, _) => inner_product_graph_loss_grad(graph, &state.coords),
        (Embedder::DeepWalk { graph, walk }, _) => deepwalk_loss_grad(graph, &state.coords, walk, seed),
        (Embedder::Coordinates, _) => Ok((0.0, DMatrix::zeros(state.coords.nrows(), state.coords.ncols()))),
    }
}

fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Runs the optimization from `init`.
///
/// With no `spec` the topological loss is zero. Each epoch evaluates both
/// losses at the current state, records them, then takes one step.
pub fn fit(
    embedder: &Embedder,
    init: EmbeddingState,
    spec: Option<&TopoLossSpec>,
    config: &RunConfig,
) -> std::result::Result<RunTrace, FitError> {
    config.validate()?;
    if let Some(s) = spec {
        s.validate()?;
        if s.filtration == FiltrationKind::WeakAlpha && init.coords.ncols() != 2 {
            return Err(TopoError::Usage(format!(
                "weak Alpha losses need a 2-dimensional embedding, got {}",
                init.coords.ncols()
            ))
            .into());
        }
    }
    let start = Instant::now();
    let (w_emb, w_top) = config.loss_weights();
    let mut state = init;
    let mut velocity = DMatrix::zeros(state.coords.nrows(), state.coords.ncols());
    let mut records: Vec<EpochRecord> = Vec::new();
    let mut stopped_early = false;

    let diverged = |epoch: usize, records: Vec<EpochRecord>, state: EmbeddingState| FitError::Diverged {
        epoch,
        trace: Box::new(RunTrace {
            records,
            final_state: state,
            wall_time_secs: start.elapsed().as_secs_f64(),
            stopped_early: false,
        }),
    };

    for epoch in 0..config.max_epochs {
        let epoch_seed = derive_seed(config.seed, epoch as u64);
        let (l_emb, g_emb) = embedding_loss_grad(embedder, &state, derive_seed(epoch_seed, 1))?;
        let (l_top, g_top) = match spec {
            Some(s) => {
                let (v, g) = eval_spec(&state.to_cloud()?, s, derive_seed(epoch_seed, 2))?;
                (
                    v,
                    DMatrix::from_row_slice(state.coords.nrows(), state.coords.ncols(), &g.values),
                )
            }
            None => (0.0, DMatrix::zeros(state.coords.nrows(), state.coords.ncols())),
        };
        let total = w_emb * l_emb + w_top * l_top;
        records.push(EpochRecord {
            epoch,
            embedding_loss: l_emb,
            topological_loss: l_top,
            total_loss: total,
        });
        if !(l_emb.is_finite() && l_top.is_finite() && all_finite(&g_emb) && all_finite(&g_top)) {
            return Err(diverged(epoch, records, state));
        }
        if config.early_stop && spec.is_some() {
            let tops: Vec<f64> = records.iter().map(|r| r.topological_loss).collect();
            if stagnation_stop(&tops, config) {
                stopped_early = true;
                break;
            }
        }

        let lr = config.learning_rate;
        state = match &state.provenance {
            Provenance::Linear(p) => {
                let Embedder::Pca { data } = embedder else {
                    unreachable!("checked by embedding_loss_grad")
                };
                let grad = g_emb * w_emb + data.transpose() * g_top * w_top;
                let next = stiefel_step(p, &grad, lr)?;
                EmbeddingState::linear(data, next)
            }
            Provenance::Free => {
                let grad = g_emb * w_emb + g_top * w_top;
                velocity = &velocity * config.momentum + grad;
                EmbeddingState::free(&state.coords - &velocity * lr)
            }
        };
        if !all_finite(&state.coords) {
            return Err(diverged(epoch, records, state));
        }
    }

    Ok(RunTrace {
        records,
        final_state: state,
        wall_time_secs: start.elapsed().as_secs_f64(),
        stopped_early,
    })
}

/// Runtime of `iterations` steps of the circle loss `-(d_1 - b_1)` on a
/// uniform random planar cloud of `n` points, with no embedding loss.
pub fn benchmark_circle_loss(n: usize, iterations: usize, seed: u64) -> Result<f64> {
    let init = EmbeddingState::random(n, 2, 1.0, seed);
    let spec = TopoLossSpec::new(
        FiltrationKind::WeakAlpha,
        vec![LossTerm::persistence(1, 1, RankEnd::Finite(1), -1.0)],
    )?;
    let config = RunConfig {
        learning_rate: 0.01,
        max_epochs: iterations,
        mode: Mode::TopologicalOnly,
        seed,
        ..RunConfig::default()
    };
    let start = Instant::now();
    fit(&Embedder::Coordinates, init, Some(&spec), &config).map_err(|e| match e {
        FitError::Topo(t) => t,
        FitError::Diverged { epoch, .. } => TopoError::Config(format!("benchmark diverged at epoch {epoch}")),
    })?;
    Ok(start.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedders::center_columns;

    fn circle_spec() -> TopoLossSpec {
        TopoLossSpec::new(
            FiltrationKind::WeakAlpha,
            vec![LossTerm::persistence(1, 1, RankEnd::Finite(1), -1.0)],
        )
        .unwrap()
    }

    fn data(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        center_columns(&DMatrix::from_fn(n, d, |_, _| rng.random::<f64>()))
    }

    #[test]
    fn stagnation_rule() {
        let cfg = RunConfig::default();
        assert!(stagnation_stop(&[2.0; 100], &cfg));
        assert!(stagnation_stop(&[0.0; 120], &cfg));
        assert!(!stagnation_stop(&[2.0; 99], &cfg));
        let falling: Vec<f64> = (0..200).map(|i| 100.0 - i as f64).collect();
        assert!(!stagnation_stop(&falling, &cfg));
    }

    #[test]
    fn config_validation() {
        let ok = RunConfig::default();
        assert!(ok.validate().is_ok());
        assert!(RunConfig {
            max_epochs: 0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(RunConfig {
            learning_rate: 0.0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(RunConfig {
            lambda_top: -1.0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(RunConfig {
            early_stop: true,
            max_epochs: 50,
            ..ok.clone()
        }
        .validate()
        .is_err());
        let parsed: RunConfig =
            serde_json::from_str(r#"{"learning_rate": 0.1, "max_epochs": 5, "mode": "topological-only"}"#).unwrap();
        assert_eq!(parsed.mode, Mode::TopologicalOnly);
        assert_eq!(parsed.stop_long, 100);
    }

    #[test]
    fn zero_lambda_equals_embedding_only() {
        let x = data(30, 5, 1);
        let init = EmbeddingState::linear(&x, LinearProjection::random(5, 2, 2).unwrap());
        let emb = Embedder::Pca { data: x };
        let spec = circle_spec();
        let base = RunConfig {
            max_epochs: 20,
            seed: 3,
            ..RunConfig::default()
        };
        let a = fit(&emb, init.clone(), Some(&spec), &base).unwrap();
        let b = fit(
            &emb,
            init,
            Some(&spec),
            &RunConfig {
                mode: Mode::EmbeddingOnly,
                lambda_top: 5.0,
                ..base
            },
        )
        .unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.final_state, b.final_state);
    }

    #[test]
    fn loss_accounting_and_reproducibility() {
        let x = data(40, 6, 4);
        let init = EmbeddingState::linear(&x, LinearProjection::from_pca(&x, 2).unwrap());
        let emb = Embedder::Pca { data: x };
        let spec = TopoLossSpec::new(
            FiltrationKind::WeakAlpha,
            vec![LossTerm::persistence(1, 1, RankEnd::Finite(1), -1.0).with_sampling(0.5, 3)],
        )
        .unwrap();
        let cfg = RunConfig {
            lambda_top: 0.1,
            max_epochs: 30,
            seed: 5,
            ..RunConfig::default()
        };
        let a = fit(&emb, init.clone(), Some(&spec), &cfg).unwrap();
        let b = fit(&emb, init, Some(&spec), &cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.final_state, b.final_state);
        assert_eq!(a.len(), 30);
        for r in &a.records {
            assert_eq!(r.total_loss, r.embedding_loss + 0.1 * r.topological_loss);
        }
        let Provenance::Linear(p) = &a.final_state.provenance else {
            panic!("linear state expected")
        };
        let gram = p.w().transpose() * p.w();
        assert!((gram - DMatrix::identity(2, 2)).abs().max() < 1e-10);
        assert!(a.to_csv().starts_with("epoch,l_emb,l_top,l_tot\n0,"));
        assert_eq!(a.summary_json()["epochs"], 30);
    }

    #[test]
    fn early_stop_fires_on_flat_loss() {
        // A single triangle has no loop, so the loss stays at zero.
        let init = EmbeddingState::free(DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]));
        let cfg = RunConfig {
            max_epochs: 500,
            early_stop: true,
            mode: Mode::TopologicalOnly,
            ..RunConfig::default()
        };
        let t = fit(&Embedder::Coordinates, init, Some(&circle_spec()), &cfg).unwrap();
        assert!(t.stopped_early);
        assert_eq!(t.len(), 100);
    }

    #[test]
    fn divergence_returns_partial_trace() {
        // Huge steps on the inner-product model blow the embedding up.
        let g = GraphData::new(6, (0..5).map(|i| (i, i + 1))).unwrap();
        let init = EmbeddingState::random(6, 2, 1.0, 7);
        let cfg = RunConfig {
            learning_rate: 1e300,
            max_epochs: 50,
            ..RunConfig::default()
        };
        match fit(&Embedder::InnerProduct { graph: g }, init, None, &cfg) {
            Err(FitError::Diverged { epoch, trace }) => assert_eq!(trace.len(), epoch + 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn weak_alpha_needs_planar_embedding() {
        let init = EmbeddingState::random(10, 3, 1.0, 1);
        let err = fit(
            &Embedder::Coordinates,
            init,
            Some(&circle_spec()),
            &RunConfig::default(),
        );
        assert!(matches!(err, Err(FitError::Topo(TopoError::Usage(_)))));
    }

    #[test]
    fn mismatched_embedder_and_state() {
        let init = EmbeddingState::random(10, 2, 1.0, 1);
        let err = fit(
            &Embedder::Pca { data: data(10, 3, 0) },
            init,
            None,
            &RunConfig::default(),
        );
        assert!(matches!(err, Err(FitError::Topo(TopoError::Usage(_)))));
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(9, 4), derive_seed(9, 4));
    }

    #[test]
    fn benchmark_runs() {
        assert!(benchmark_circle_loss(50, 3, 0).unwrap() >= 0.0);
    }
}
