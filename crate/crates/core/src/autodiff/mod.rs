//! Reverse-mode automatic differentiation, parameter storage, and Adam.

mod adam;
pub mod gradcheck;
mod graph;
mod init;
mod params;

pub use adam::{AdamConfig, AdamState};
pub use graph::{sigmoid, Gradients, Graph, Tensor, TensorId};
pub use init::{init_values, InitScheme, EMBEDDING_INIT};
pub use params::{BoundParams, ParamStore};
