//! JSON experiment descriptions and their resolution into a runnable fit.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::embedders::{knn_graph, GraphData, LinearProjection, WalkConfig, DEFAULT_KNN};
use crate::error::{Result, TopoError};
use crate::filtration::PointCloud;
use crate::optimizer::{derive_seed, fit, Embedder, EmbeddingState, FitError, RunConfig, RunTrace};
use crate::topo_loss::TopoLossSpec;

use super::{
    center, generate_gaussian_cloud, generate_noisy_circle, generate_synthetic_cycle, load_edge_list, load_point_csv,
    parse_labels,
};

fn cycle_n() -> usize {
    50
}
fn cycle_dim() -> usize {
    500
}
fn cycle_noise() -> f64 {
    0.45
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorSpec {
    SyntheticCycle {
        #[serde(default = "cycle_n")]
        n: usize,
        #[serde(default = "cycle_dim")]
        ambient_dim: usize,
        #[serde(default = "cycle_noise")]
        noise_half_width: f64,
    },
    Gaussian {
        n: usize,
        d: usize,
    },
    NoisyCircle {
        n: usize,
        sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputSource {
    Points {
        path: PathBuf,
    },
    Edges {
        path: PathBuf,
        #[serde(default)]
        nodes: Option<usize>,
        #[serde(default)]
        labels: Option<PathBuf>,
    },
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedderKind {
    Pca,
    Umap,
    InnerProduct,
    Deepwalk,
}

/// A loss given inline or as a path to its JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LossSource {
    Path(PathBuf),
    Inline(TopoLossSpec),
}

fn two() -> usize {
    2
}
fn knn_default() -> usize {
    DEFAULT_KNN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub input: InputSource,
    pub embedder: EmbedderKind,
    #[serde(default = "two")]
    pub dim: usize,
    #[serde(default = "knn_default")]
    pub knn: usize,
    #[serde(default)]
    pub loss: Option<LossSource>,
    pub run: RunConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// Everything needed to call [`fit`].
#[derive(Debug, Clone)]
pub struct Experiment {
    pub embedder: Embedder,
    pub init: EmbeddingState,
    pub spec: Option<TopoLossSpec>,
    pub run: RunConfig,
    /// Input points when the input is a cloud.
    pub points: Option<PointCloud>,
    pub graph: Option<GraphData>,
    /// Ground-truth angles from circle generators.
    pub angles: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let graph_input = matches!(self.input, InputSource::Edges { .. });
        let graph_embedder = matches!(self.embedder, EmbedderKind::InnerProduct | EmbedderKind::Deepwalk);
        if graph_input != graph_embedder {
            return Err(TopoError::Config(format!(
                "embedder {:?} cannot consume {} input",
                self.embedder,
                if graph_input { "graph" } else { "point" }
            )));
        }
        if self.dim == 0 {
            return Err(TopoError::Config("embedding dimension must be positive".into()));
        }
        self.run.validate()
    }

    /// Loads inputs (relative paths against `base`) and builds the initial state.
    pub fn build(&self, base: &Path) -> Result<Experiment> {
        self.validate()?;
        let seed = self.run.seed;
        let spec = match &self.loss {
            None => None,
            Some(LossSource::Inline(s)) => {
                s.validate()?;
                Some(s.clone())
            }
            Some(LossSource::Path(p)) => Some(TopoLossSpec::from_json(&std::fs::read_to_string(resolve(base, p))?)?),
        };
        let mut points = None;
        let mut graph = None;
        let mut angles = None;
        match &self.input {
            InputSource::Points { path } => points = Some(load_point_csv(&resolve(base, path))?),
            InputSource::Edges { path, nodes, labels } => {
                let mut g = load_edge_list(&resolve(base, path), *nodes)?;
                if let Some(l) = labels {
                    g = g.with_labels(parse_labels(&std::fs::read_to_string(resolve(base, l))?)?)?;
                }
                graph = Some(g);
            }
            InputSource::Generator(spec) => {
                let gen_seed = derive_seed(seed, 100);
                let (cloud, a) = match *spec {
                    GeneratorSpec::SyntheticCycle {
                        n,
                        ambient_dim,
                        noise_half_width,
                    } => {
                        let (c, a) = generate_synthetic_cycle(n, ambient_dim, noise_half_width, gen_seed)?;
                        (c, Some(a))
                    }
                    GeneratorSpec::Gaussian { n, d } => (generate_gaussian_cloud(n, d, gen_seed)?, None),
                    GeneratorSpec::NoisyCircle { n, sigma } => {
                        let (c, a) = generate_noisy_circle(n, sigma, gen_seed)?;
                        (c, Some(a))
                    }
                };
                points = Some(cloud);
                angles = a;
            }
        }

        let init_seed = derive_seed(seed, 101);
        let (embedder, init) = match self.embedder {
            EmbedderKind::Pca | EmbedderKind::Umap => {
                let cloud = points.as_ref().expect("point input checked by validate");
                let x = center(cloud).to_matrix();
                let proj = LinearProjection::from_pca(&x, self.dim)?;
                if self.embedder == EmbedderKind::Pca {
                    let init = EmbeddingState::linear(&x, proj);
                    (Embedder::Pca { data: x }, init)
                } else {
                    let graph = knn_graph(&x, self.knn)?;
                    let init = EmbeddingState::free(proj.project(&x));
                    (Embedder::Umap { graph }, init)
                }
            }
            EmbedderKind::InnerProduct | EmbedderKind::Deepwalk => {
                let g = graph.clone().expect("graph input checked by validate");
                let init = EmbeddingState::random(g.node_count(), self.dim, 0.1, init_seed);
                let emb = if self.embedder == EmbedderKind::InnerProduct {
                    Embedder::InnerProduct { graph: g }
                } else {
                    Embedder::DeepWalk {
                        graph: g,
                        walk: WalkConfig::default(),
                    }
                };
                (emb, init)
            }
        };
        Ok(Experiment {
            embedder,
            init,
            spec,
            run: self.run.clone(),
            points,
            graph,
            angles,
            out: self.out.as_ref().map(|o| resolve(base, o)),
        })
    }
}

impl Experiment {
    pub fn run(&self) -> std::result::Result<RunTrace, FitError> {
        fit(&self.embedder, self.init.clone(), self.spec.as_ref(), &self.run)
    }

    /// Initial coordinates as a matrix.
    pub fn initial_coords(&self) -> &DMatrix<f64> {
        &self.init.coords
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SYNTH: &str = r#"{
        "input": {"generator": {"synthetic-cycle": {"n": 20, "ambient_dim": 10}}},
        "embedder": "pca",
        "loss": {"filtration": "weak-alpha", "terms": [{"k": 1, "i": 1, "j": 1, "mu": -1}]},
        "run": {"lambda_top": 0.01, "learning_rate": 0.01, "max_epochs": 5, "seed": 3}
    }"#;

    #[test]
    fn inline_generator_config_runs() {
        let cfg = ExperimentConfig::from_json(SYNTH).unwrap();
        let exp = cfg.build(Path::new(".")).unwrap();
        assert_eq!(exp.init.coords.shape(), (20, 2));
        assert_eq!(exp.angles.as_ref().unwrap().len(), 20);
        let trace = exp.run().unwrap();
        assert_eq!(trace.len(), 5);
    }

    #[test]
    fn incompatible_embedder_is_rejected() {
        let text = SYNTH.replace("\"pca\"", "\"deepwalk\"");
        assert!(matches!(ExperimentConfig::from_json(&text), Err(TopoError::Config(_))));
    }

    #[test]
    fn files_resolve_relative_to_base() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("g.txt"), "0 1\n1 2\n2 3\n3 0\n").unwrap();
        std::fs::write(dir.path().join("labels.txt"), "0\n0\n1\n1\n").unwrap();
        std::fs::write(
            dir.path().join("loss.json"),
            r#"{"filtration": "weak-alpha", "terms": [{"k": 0, "i": 2, "j": 2, "mu": -1}]}"#,
        )
        .unwrap();
        let text = r#"{
            "input": {"edges": {"path": "g.txt", "labels": "labels.txt"}},
            "embedder": "inner-product",
            "loss": "loss.json",
            "run": {"lambda_top": 0.1, "learning_rate": 0.1, "max_epochs": 3},
            "out": "results"
        }"#;
        let exp = ExperimentConfig::from_json(text).unwrap().build(dir.path()).unwrap();
        assert_eq!(exp.graph.as_ref().unwrap().labels(), Some(&[0, 0, 1, 1][..]));
        assert_eq!(exp.out.as_deref(), Some(dir.path().join("results").as_path()));
        assert!(exp.spec.is_some());
        assert_eq!(exp.run().unwrap().len(), 3);
    }
}
