use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{apply_transform, NormTransform, PointCloud};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    /// Bounds of the uniform isotropic scale.
    pub scale_range: [f64; 2],
    /// Standard deviation of each translation component.
    pub translation_sigma: f64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            scale_range: [0.95, 1.05],
            translation_sigma: 0.02,
        }
    }
}

impl AugmentParams {
    pub const IDENTITY: AugmentParams = AugmentParams {
        scale_range: [1.0, 1.0],
        translation_sigma: 0.0,
    };

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> NormTransform {
        let [lo, hi] = self.scale_range;
        let u: f64 = rng.gen();
        let scale = lo + u * (hi - lo);
        let mut translation = [0.0; 3];
        if self.translation_sigma > 0.0 {
            let normal = Normal::new(0.0, self.translation_sigma).expect("positive sigma");
            for t in &mut translation {
                *t = normal.sample(rng);
            }
        }
        NormTransform { scale, translation }
    }
}

/// Random scale then translation of all positions; normals are untouched. Returns
/// the augmented cloud and the applied map, which the caller applies to the
/// ground-truth structure as well.
pub fn augment_with<R: Rng + ?Sized>(cloud: &PointCloud, params: &AugmentParams, rng: &mut R) -> (PointCloud, NormTransform) {
    let t = params.draw(rng);
    (apply_transform(cloud, &t), t)
}

pub fn augment(cloud: &PointCloud, params: &AugmentParams, seed: u64) -> (PointCloud, NormTransform) {
    augment_with(cloud, params, &mut ChaCha8Rng::seed_from_u64(seed))
}
