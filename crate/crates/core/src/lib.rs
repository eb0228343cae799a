//! Persistent homology of point clouds and topological regularization of
//! low-dimensional embeddings.

pub mod embedders;
pub mod error;
pub mod filtration;
pub mod io;
pub mod metrics;
pub mod optimizer;
pub mod persistence;
pub mod pseudotime;
pub mod simplicial;
pub mod topo_loss;

pub use error::{Result, TopoError};
pub use nalgebra::DMatrix;
