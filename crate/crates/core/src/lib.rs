//! Articulated-structure prediction from static meshes.
//!
//! Given a triangle mesh, the pipeline samples a point cloud, runs a part-query
//! transformer that predicts articulated part segmentation, the kinematic tree and
//! per-part motion constraints, decodes those into an [`ArticulatedStructure`], and
//! exports simulator-ready URDF. The crate also contains the training loop, a
//! procedural generator of articulated furniture, and the penalized evaluation
//! protocol used to score predictions.

pub mod articulation;
pub mod assignment;
pub mod error;
pub mod evalproto;
pub mod geometry;
pub mod gradcheck;
pub mod inference;
pub mod model;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::{Tape, Tensor, Var};
