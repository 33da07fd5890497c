//! Part-query transformer: point embedding, query/point cross-attention blocks and
//! the decoder heads for segmentation, kinematic tree and motion.

mod config;
mod forward;
mod weights;

pub use config::ModelConfig;
pub use forward::{axis_vote, axis_votes, embed_points, forward, NetworkOutput};
pub use weights::{count_params, linear_params, sidecar_path, ModelWeights, Params};
