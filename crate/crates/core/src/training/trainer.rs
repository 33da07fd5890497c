use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::articulation::{apply_articulation, random_pose_with, reposed, ArticulatedStructure, JointPose};
use crate::error::{Error, Result};
use crate::geometry::{normalize, sample_point_cloud, Mesh, PointCloud, SampleParams};
use crate::model::{forward, ModelConfig, ModelWeights};
use crate::tensor::{adam_step, AdamConfig, AdamState, Tape, Tensor};

use super::augment::{augment_with, AugmentParams};
use super::gt::GroundTruth;
use super::loss::{compute_loss, LossBreakdown};
use super::matching::match_parts;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    /// Objects per optimizer step; gradients are averaged.
    pub batch_size: usize,
    /// Points sampled per object.
    pub points: usize,
    pub sharp_fraction: f64,
    pub angle_threshold_deg: f64,
    /// Probability of training on the rest state instead of a random pose.
    pub rest_pose_prob: f64,
    pub augment: bool,
    pub augment_params: AugmentParams,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Linear learning-rate warmup length.
    pub warmup_steps: usize,
    /// Global gradient-norm clip; 0 disables.
    pub grad_clip: f64,
    /// Cosine decay after warmup down to `final_lr_fraction * lr` at the last step.
    pub cosine_decay: bool,
    pub final_lr_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            steps: 2000,
            batch_size: 1,
            points: 512,
            sharp_fraction: 0.5,
            angle_threshold_deg: 30.0,
            rest_pose_prob: 0.5,
            augment: true,
            augment_params: AugmentParams::default(),
            lr: adam.lr,
            weight_decay: adam.weight_decay,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            warmup_steps: 100,
            grad_clip: 1.0,
            cosine_decay: true,
            final_lr_fraction: 0.05,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self, step: usize) -> AdamConfig {
        let warm = if self.warmup_steps == 0 {
            1.0
        } else {
            ((step + 1) as f64 / self.warmup_steps as f64).min(1.0)
        };
        let decay = if self.cosine_decay && step >= self.warmup_steps && self.steps > self.warmup_steps + 1 {
            let t = (step - self.warmup_steps) as f64 / (self.steps - self.warmup_steps - 1) as f64;
            let c = 0.5 * (1.0 + (std::f64::consts::PI * t.min(1.0)).cos());
            self.final_lr_fraction + (1.0 - self.final_lr_fraction) * c
        } else {
            1.0
        };
        AdamConfig {
            lr: self.lr * warm * decay,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.points == 0 {
            return Err(Error::invalid("batch_size and points must be positive"));
        }
        if !(0.0..=1.0).contains(&self.rest_pose_prob) || !(0.0..=1.0).contains(&self.sharp_fraction) {
            return Err(Error::invalid("probabilities must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.final_lr_fraction) {
            return Err(Error::invalid("final_lr_fraction must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// One posed, sampled, normalized and augmented object with its supervision.
pub struct Example {
    pub cloud: PointCloud,
    pub gt: GroundTruth,
    pub pose: JointPose,
}

/// Builds a training example for one object using `rng` for every random choice.
pub fn make_example<R: Rng + ?Sized>(
    mesh: &Mesh,
    structure: &ArticulatedStructure,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Example> {
    let pose = if rng.gen::<f64>() < cfg.rest_pose_prob {
        JointPose::new()
    } else {
        random_pose_with(structure, rng)
    };
    let posed = apply_articulation(mesh, structure, &pose)?;
    let posed_structure = reposed(structure, &pose)?;
    let params = SampleParams {
        n: cfg.points,
        sharp_fraction: cfg.sharp_fraction,
        angle_threshold_deg: cfg.angle_threshold_deg,
        seed: rng.gen(),
        cover_all_faces: false,
    };
    let cloud = normalize(&sample_point_cloud(&posed, &params)?)?;
    let mut frame = posed_structure.transformed(&cloud.transform);
    let cloud = if cfg.augment {
        let (c, t) = augment_with(&cloud, &cfg.augment_params, rng);
        frame = frame.transformed(&t);
        c
    } else {
        cloud
    };
    let gt = GroundTruth::new(&frame, &cloud)?;
    Ok(Example { cloud, gt, pose })
}

/// Loss and parameter gradients for one example.
pub fn loss_and_grads(weights: &ModelWeights, ex: &Example) -> Result<(LossBreakdown, Vec<Tensor>)> {
    let tape = Tape::new();
    let p = weights.on_tape(&tape);
    let out = forward(&p, &tape, &ex.cloud)?;
    let assignment = match_parts(out.seg_logits.value(), &ex.gt.point_labels, ex.gt.part_count)?;
    let loss = compute_loss(&p, &tape, &out, &ex.gt, &assignment)?;
    let grads = tape.backward(&loss.total);
    Ok((loss.breakdown, p.vars().iter().map(|v| grads.get_or_zeros(v)).collect()))
}

fn step_rng(seed: u64, step: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step as u64 + 1);
    rng
}

fn clip(grads: &mut [Tensor], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grads
        .iter()
        .flat_map(|g| g.data())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads {
            for v in g.data_mut() {
                *v *= s;
            }
        }
    }
}

pub struct TrainOutput {
    pub weights: ModelWeights,
    /// Mean breakdown over the batch at each step.
    pub curve: Vec<(usize, LossBreakdown)>,
    /// Step at which the loss became non-finite; `weights` are from the step before.
    pub diverged_at: Option<usize>,
}

/// Trains from `init` (or a fresh seeded initialization). `on_step` sees every
/// step's loss and the updated weights.
pub fn train(
    dataset: &[(Mesh, ArticulatedStructure)],
    model: &ModelConfig,
    cfg: &TrainConfig,
    init: Option<ModelWeights>,
    mut on_step: impl FnMut(usize, &LossBreakdown, &ModelWeights),
) -> Result<TrainOutput> {
    if dataset.is_empty() {
        return Err(Error::invalid("training needs at least one object"));
    }
    cfg.validate()?;
    for (mesh, s) in dataset {
        s.validate_for(mesh.faces.len())?;
        if s.part_count > model.max_parts {
            return Err(Error::invalid(format!(
                "object with {} parts exceeds max_parts {}",
                s.part_count, model.max_parts
            )));
        }
    }
    let mut weights = match init {
        Some(w) if &w.config == model => w,
        Some(_) => return Err(Error::invalid("initial weights do not match the model config")),
        None => ModelWeights::init(model, cfg.seed)?,
    };
    let mut state = AdamState::zeros_like(&weights.tensors().cloned().collect::<Vec<_>>());
    let mut curve = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let mut rng = step_rng(cfg.seed, step);
        let mut sum: Option<Vec<Tensor>> = None;
        let mut mean = LossBreakdown::default();
        let mut diverged = false;
        for _ in 0..cfg.batch_size {
            let (mesh, structure) = &dataset[rng.gen_range(0..dataset.len())];
            let ex = make_example(mesh, structure, cfg, &mut rng)?;
            let (b, grads) = match loss_and_grads(&weights, &ex) {
                Ok(x) => x,
                Err(Error::Numerical(msg)) => {
                    log::error!("step {step}: {msg}");
                    diverged = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            accumulate(&mut mean, &b, 1.0 / cfg.batch_size as f64);
            match &mut sum {
                None => sum = Some(grads),
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(&grads) {
                        for (x, y) in a.data_mut().iter_mut().zip(g.data()) {
                            *x += y;
                        }
                    }
                }
            }
        }
        if diverged {
            return Ok(TrainOutput { weights, curve, diverged_at: Some(step) });
        }
        let mut grads = sum.expect("batch_size >= 1");
        if cfg.batch_size > 1 {
            let s = 1.0 / cfg.batch_size as f64;
            for g in &mut grads {
                for v in g.data_mut() {
                    *v *= s;
                }
            }
        }
        clip(&mut grads, cfg.grad_clip);
        let mut params: Vec<Tensor> = weights.tensors().cloned().collect();
        adam_step(&mut params, &grads, &mut state, &cfg.adam(step))?;
        weights.set_tensors(params)?;
        curve.push((step, mean));
        on_step(step, &mean, &weights);
    }
    Ok(TrainOutput { weights, curve, diverged_at: None })
}

fn accumulate(acc: &mut LossBreakdown, b: &LossBreakdown, w: f64) {
    acc.seg += w * b.seg;
    acc.kin += w * b.kin;
    acc.motion_type += w * b.motion_type;
    acc.prismatic_range += w * b.prismatic_range;
    acc.revolute_range += w * b.revolute_range;
    acc.prismatic_dir += w * b.prismatic_dir;
    acc.revolute_dir += w * b.revolute_dir;
    acc.axis_point += w * b.axis_point;
    acc.total += w * b.total;
}

pub fn write_loss_csv(path: &Path, curve: &[(usize, LossBreakdown)]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::from(LossBreakdown::CSV_HEADER);
    text.push('\n');
    for (step, b) in curve {
        text.push_str(&b.csv_row(*step));
        text.push('\n');
    }
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
