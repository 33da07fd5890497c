//! Query-to-part matching, the multi-task loss, augmentation and the training loop.

mod augment;
mod gt;
mod loss;
mod matching;
mod trainer;

pub use augment::{augment, augment_with, AugmentParams};
pub use gt::{closest_on_axis, GroundTruth};
pub use loss::{compute_loss, Loss, LossBreakdown, REVOLUTE_RANGE_WEIGHT};
pub use matching::{match_parts, utility_matrix, Assignment};
pub use trainer::{loss_and_grads, make_example, train, write_loss_csv, Example, TrainConfig, TrainOutput};

#[cfg(test)]
mod tests;
