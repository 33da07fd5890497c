use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Working width D of point and query latents.
    pub dim: usize,
    pub blocks: usize,
    pub heads: usize,
    /// Number of part queries P_max.
    pub max_parts: usize,
    /// Width of optional per-point features (0 disables the feature branch).
    pub feature_dim: usize,
    /// Hidden width of the input embedding MLPs.
    pub embed_hidden: usize,
    /// Hidden width of the feed-forward MLP after each attention.
    pub mlp_hidden: usize,
    /// Hidden width of the per-query heads and pairwise heads.
    pub head_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 64,
            blocks: 2,
            heads: 4,
            max_parts: 8,
            feature_dim: 0,
            embed_hidden: 64,
            mlp_hidden: 128,
            head_hidden: 64,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.heads == 0 || !self.dim.is_multiple_of(self.heads) {
            return Err(Error::invalid(format!(
                "dim {} must be a positive multiple of heads {}",
                self.dim, self.heads
            )));
        }
        if self.max_parts == 0 {
            return Err(Error::invalid("max_parts must be at least 1"));
        }
        if self.embed_hidden == 0 || self.mlp_hidden == 0 || self.head_hidden == 0 {
            return Err(Error::invalid("hidden widths must be positive"));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }
}
