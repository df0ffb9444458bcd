//! The Wave-U-Net: configuration, size calculus, parameters and forward pass.

mod checkpoint;
mod config;
mod forward;
mod params;
mod sizes;

pub use checkpoint::{AdamMoments, Checkpoint, CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{ModelConfig, Upsampling, DEFAULT_LEAKY_SLOPE};
pub use forward::{forward, forward_graph, ParamVars};
pub use params::{build, ParamArray, ParameterSet};
pub use sizes::{compute_valid_sizes, shape_trace, trace_from, BlockShape};
