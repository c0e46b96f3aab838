//! Layers built from QPUs, the real-valued pieces they connect to, and the
//! model graph that chains them.

mod aggregate;
mod bridge;
mod dense;
mod init;
mod loss;
mod model;
mod qfc;

pub use aggregate::{graph_aggregate, graph_aggregate_backward, graph_aggregate_taped, AdjacencyWeights};
pub use bridge::{bridge_backward, bridge_forward, BridgeMode};
pub use dense::{DenseGrads, DenseLayer};
pub use init::{init_xavier, xavier_bound, xavier_uniform};
pub use loss::{argmax, softmax_cross_entropy};
pub use model::{
    flatten_grads, ForwardTrace, Layer, LayerGrads, ModelGraph, ModelKind, ModelOptions, Shape, Signal,
    SignalGrad, FEATURE_WIDTH,
};
pub use qfc::{QfcGrads, QpuFcLayer};
