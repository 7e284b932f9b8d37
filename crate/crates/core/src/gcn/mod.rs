//! Two-layer graph convolutional network with hand-derived gradients.

mod adam;
mod adjacency;
mod model;
mod train;

pub use adam::{adam_step, AdamState};
pub use adjacency::{normalize_adjacency, NormAdjacency};
pub use model::{
    argmax_rows, backward, data_loss, forward, forward_propagated, init_model, loss, predict, softmax_rows,
    ForwardCache, GcnModel, Gradients,
};
pub use train::{train, EpochRecord, TrainConfig, TrainResult};
