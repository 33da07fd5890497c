//! Central finite-difference gradient checking.
//!
//! Used by the test suites and by the `gradcheck` CLI subcommand. The reference
//! derivative never touches the tape's backward rules: it re-evaluates the forward
//! function on perturbed copies of the inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tensor::{Tape, Tensor, Var, L2_EPS};

pub const DEFAULT_STEP: f64 = 1e-5;

pub const ZERO_NORM: f64 = 1e-7;

/// Relative error between two gradient tensors: `||a - b|| / max(||a||, ||b||)`, or
/// the absolute difference norm when both norms are below `ZERO_NORM`. Some
/// parameters have an identically zero gradient (a key bias under softmax, say), and
/// there finite differences return pure rounding noise.
pub fn relative_error(a: &Tensor, b: &Tensor) -> f64 {
    let diff: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let na = a.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < ZERO_NORM {
        diff
    } else {
        diff / scale
    }
}

/// Compare analytic gradients of the scalar `f(inputs)` with central differences.
/// Returns the worst per-input relative error.
pub fn check<F>(inputs: &[Tensor], h: f64, f: F) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&tape, &vars)?;
    let grads = tape.backward(&out);
    let analytic: Vec<Tensor> = vars.iter().map(|v| grads.get_or_zeros(v)).collect();

    let eval = |xs: &[Tensor]| -> Result<f64> {
        let t = Tape::no_grad();
        let vs: Vec<Var<'_>> = xs.iter().map(|x| t.leaf(x.clone())).collect();
        Ok(f(&t, &vs)?.value().item())
    };

    let mut worst = 0.0f64;
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (idx, input) in inputs.iter().enumerate() {
        let mut numeric = Tensor::zeros(input.shape());
        for k in 0..input.numel() {
            let x0 = input.data()[k];
            work[idx].data_mut()[k] = x0 + h;
            let fp = eval(&work)?;
            work[idx].data_mut()[k] = x0 - h;
            let fm = eval(&work)?;
            work[idx].data_mut()[k] = x0;
            numeric.data_mut()[k] = (fp - fm) / (2.0 * h);
        }
        worst = worst.max(relative_error(&analytic[idx], &numeric));
    }
    Ok(worst)
}

/// Worst relative error of one named check over its random instances.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_rel_err: f64,
}

type Case = fn(&mut ChaCha8Rng) -> Result<f64>;

fn rand_t(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::uniform(shape, 1.0, rng)
}

fn dims(rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    (rng.gen_range(1..=6), rng.gen_range(2..=6), rng.gen_range(1..=6))
}

fn contract<'t>(out: &Var<'t>, w: &Tensor) -> Result<Var<'t>> {
    out.mul(&out.tape().leaf(w.clone())).map(|v| v.sum())
}

fn unary(rng: &mut ChaCha8Rng, op: for<'t> fn(&Var<'t>) -> Result<Var<'t>>) -> Result<f64> {
    let (m, n, _) = dims(rng);
    let a = Tensor::uniform(&[m, n], 2.0, rng);
    let w = rand_t(rng, &[m, n]);
    check(&[a], DEFAULT_STEP, |_, v| contract(&op(&v[0])?, &w))
}

fn binary(rng: &mut ChaCha8Rng, op: for<'t> fn(&Var<'t>, &Var<'t>) -> Result<Var<'t>>) -> Result<f64> {
    let (m, n, _) = dims(rng);
    let (a, b, w) = (rand_t(rng, &[m, n]), rand_t(rng, &[m, n]), rand_t(rng, &[m, n]));
    check(&[a, b], DEFAULT_STEP, |_, v| contract(&op(&v[0], &v[1])?, &w))
}

const CASES: &[(&str, Case)] = &[
    ("matmul", |rng| {
        let (m, n, k) = dims(rng);
        let (a, b, w) = (rand_t(rng, &[m, k]), rand_t(rng, &[k, n]), rand_t(rng, &[m, n]));
        check(&[a, b], DEFAULT_STEP, |_, v| contract(&v[0].matmul(&v[1])?, &w))
    }),
    ("add", |rng| binary(rng, |a, b| a.add(b))),
    ("sub", |rng| binary(rng, |a, b| a.sub(b))),
    ("mul", |rng| binary(rng, |a, b| a.mul(b))),
    ("add_row", |rng| {
        let (m, n, _) = dims(rng);
        let (a, r, w) = (rand_t(rng, &[m, n]), rand_t(rng, &[n]), rand_t(rng, &[m, n]));
        check(&[a, r], DEFAULT_STEP, |_, v| contract(&v[0].add_row(&v[1])?, &w))
    }),
    ("mul_row", |rng| {
        let (m, n, _) = dims(rng);
        let (a, r, w) = (rand_t(rng, &[m, n]), rand_t(rng, &[n]), rand_t(rng, &[m, n]));
        check(&[a, r], DEFAULT_STEP, |_, v| contract(&v[0].mul_row(&v[1])?, &w))
    }),
    ("scale", |rng| unary(rng, |a| Ok(a.scale(-1.7)))),
    ("transpose", |rng| {
        let (m, n, _) = dims(rng);
        let (a, w) = (rand_t(rng, &[m, n]), rand_t(rng, &[n, m]));
        check(&[a], DEFAULT_STEP, |_, v| contract(&v[0].transpose(), &w))
    }),
    ("reshape", |rng| {
        let (m, n, _) = dims(rng);
        let (a, w) = (rand_t(rng, &[m, n]), rand_t(rng, &[m * n, 1]));
        check(&[a], DEFAULT_STEP, |_, v| contract(&v[0].reshape(&[m * n, 1])?, &w))
    }),
    ("concat", |rng| {
        let (m, n, k) = dims(rng);
        let (a, b, w) = (rand_t(rng, &[m, n]), rand_t(rng, &[m, k]), rand_t(rng, &[m, n + k]));
        check(&[a, b], DEFAULT_STEP, |_, v| {
            contract(&Var::concat(&[v[0].clone(), v[1].clone()], 1)?, &w)
        })
    }),
    ("slice_cols", |rng| {
        let (m, n, _) = dims(rng);
        let start = rng.gen_range(0..n);
        let len = rng.gen_range(1..=n - start);
        let (a, w) = (rand_t(rng, &[m, n]), rand_t(rng, &[m, len]));
        check(&[a], DEFAULT_STEP, |_, v| contract(&v[0].slice_cols(start, len)?, &w))
    }),
    ("slice_rows", |rng| {
        let (m, n, _) = dims(rng);
        let start = rng.gen_range(0..m);
        let len = rng.gen_range(1..=m - start);
        let (a, w) = (rand_t(rng, &[m, n]), rand_t(rng, &[len, n]));
        check(&[a], DEFAULT_STEP, |_, v| contract(&v[0].slice_rows(start, len)?, &w))
    }),
    ("gather_rows", |rng| {
        let (m, n, k) = dims(rng);
        let idx: Vec<usize> = (0..k + 2).map(|_| rng.gen_range(0..m)).collect();
        let (a, w) = (rand_t(rng, &[m, n]), rand_t(rng, &[k + 2, n]));
        check(&[a], DEFAULT_STEP, |_, v| contract(&v[0].gather_rows(&idx)?, &w))
    }),
    ("softmax", |rng| unary(rng, |a| Ok(a.softmax()))),
    ("layer_norm", |rng| unary(rng, |a| Ok(a.layer_norm(1e-5)))),
    ("gelu", |rng| unary(rng, |a| Ok(a.gelu()))),
    ("l2_normalize", |rng| unary(rng, |a| a.l2_normalize(L2_EPS))),
    ("sum", |rng| {
        let (m, n, _) = dims(rng);
        check(&[rand_t(rng, &[m, n])], DEFAULT_STEP, |_, v| Ok(v[0].sum()))
    }),
    ("mean", |rng| {
        let (m, n, _) = dims(rng);
        check(&[rand_t(rng, &[m, n])], DEFAULT_STEP, |_, v| Ok(v[0].mean()))
    }),
    ("l1_loss", |rng| {
        let (m, n, _) = dims(rng);
        let a = Tensor::uniform(&[m, n], 3.0, rng);
        // residuals stay away from the kink
        let target = a.map(|x| if x > 0.0 { x - 0.5 } else { x + 0.5 });
        check(&[a], DEFAULT_STEP, |_, v| v[0].l1_loss(&target))
    }),
    ("cross_entropy", |rng| {
        let (m, n, _) = dims(rng);
        let a = Tensor::uniform(&[m, n], 3.0, rng);
        let labels: Vec<usize> = (0..m).map(|_| rng.gen_range(0..n)).collect();
        check(&[a], DEFAULT_STEP, |_, v| v[0].cross_entropy(&labels))
    }),
    ("binary_cross_entropy", |rng| {
        let (m, n, _) = dims(rng);
        let a = Tensor::uniform(&[m, n], 3.0, rng);
        let t = Tensor::uniform(&[m, n], 0.5, rng).map(|x| x + 0.5);
        check(&[a], DEFAULT_STEP, |_, v| v[0].binary_cross_entropy(&t))
    }),
    ("pair_mlp", |rng| {
        let (n, m, h) = dims(rng);
        let (a, b, w, bias) = (rand_t(rng, &[n, h]), rand_t(rng, &[m, h]), rand_t(rng, &[h]), rand_t(rng, &[1]));
        let wo = rand_t(rng, &[n, m]);
        check(&[a, b, w, bias], DEFAULT_STEP, |_, v| contract(&v[0].pair_mlp(&v[1], &v[2], &v[3])?, &wo))
    }),
    ("compute_loss", |rng| loss_check(rng.gen())),
];

/// Finite-difference check of the full multi-task loss with respect to every weight
/// tensor of a toy model (6 points, 2 parts, 3 queries).
pub fn loss_check(seed: u64) -> Result<f64> {
    use crate::articulation::{ArticulatedStructure, MotionSpec};
    use crate::geometry::{PointCloud, PointSample};
    use crate::model::{forward, ModelConfig, ModelWeights};
    use crate::training::{compute_loss, match_parts, GroundTruth};

    let cfg = ModelConfig {
        dim: 8,
        blocks: 1,
        heads: 2,
        max_parts: 3,
        feature_dim: 0,
        embed_hidden: 8,
        mlp_hidden: 8,
        head_hidden: 8,
    };
    let weights = ModelWeights::init(&cfg, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..6)
        .map(|j| PointSample {
            position: std::array::from_fn(|_| rng.gen_range(-0.5..0.5)),
            normal: [0.0, 0.0, 1.0],
            feature: Vec::new(),
            source_face: j as u32,
        })
        .collect();
    let cloud = PointCloud {
        samples,
        transform: Default::default(),
    };
    let hinge = MotionSpec::revolute([0.0, 1.0, 0.0], [0.3, 0.0, -0.2], [0.0, 1.5]);
    let structure = ArticulatedStructure {
        part_count: 2,
        face_labels: vec![0, 0, 0, 1, 1, 1],
        parent: vec![None, Some(0)],
        motion: vec![MotionSpec::FIXED, hinge],
    };
    let gt = GroundTruth::new(&structure, &cloud)?;
    let assignment = {
        let tape = Tape::no_grad();
        let out = forward(&weights.on_tape(&tape), &tape, &cloud)?;
        match_parts(out.seg_logits.value(), &gt.point_labels, gt.part_count)?
    };
    let inputs: Vec<Tensor> = weights.tensors().cloned().collect();
    check(&inputs, DEFAULT_STEP, |tape, vars| {
        let p = weights.bind(vars.to_vec())?;
        let out = forward(&p, tape, &cloud)?;
        Ok(compute_loss(&p, tape, &out, &gt, &assignment)?.total)
    })
}

/// Runs every op check on `instances` seeded random inputs plus the loss check.
pub fn suite(instances: usize, seed: u64) -> Result<Vec<CheckResult>> {
    CASES
        .iter()
        .map(|(name, case)| {
            let mut worst = 0.0f64;
            for k in 0..instances {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
                worst = worst.max(case(&mut rng)?);
            }
            Ok(CheckResult { name, max_rel_err: worst })
        })
        .collect()
}
