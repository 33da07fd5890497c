use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::articulation::{synth_object, ObjectKind};
use crate::gradcheck;
use crate::model::{forward, ModelConfig, ModelWeights};
use crate::tensor::{Tape, Tensor};

fn tiny() -> ModelConfig {
    ModelConfig {
        dim: 16,
        blocks: 1,
        heads: 2,
        embed_hidden: 16,
        mlp_hidden: 16,
        head_hidden: 16,
        ..ModelConfig::default()
    }
}

fn brute_force_utility(u: &[Vec<f64>], q: usize) -> f64 {
    fn go(u: &[Vec<f64>], i: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if i == u.len() {
            *best = best.max(acc);
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                // same summation order as the assignment's utility
                go(u, i + 1, used, acc + u[i][c], best);
                used[c] = false;
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    go(u, 0, &mut vec![false; q], 0.0, &mut best);
    best
}

#[test]
fn matching_equals_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..200 {
        let q = rng.gen_range(1..=7);
        let p = rng.gen_range(1..=q.min(5));
        let n = rng.gen_range(p..=20);
        let mut labels: Vec<usize> = (0..n).map(|j| if j < p { j } else { rng.gen_range(0..p) }).collect();
        labels.rotate_left(rng.gen_range(0..n));
        let logits = Tensor::uniform(&[n, q], 3.0, &mut rng);
        let a = match_parts(&logits, &labels, p).unwrap();
        let u = utility_matrix(&logits, &labels, p).unwrap();
        let mut seen = a.query_of_part.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), p, "not injective");
        assert_eq!(a.utility, brute_force_utility(&u, q));
    }
}

#[test]
fn hand_cross_entropy() {
    let tape = Tape::no_grad();
    let logits = tape.leaf(Tensor::new(vec![2, 2], vec![2.0, 0.0, 2.0, 0.0]).unwrap());
    let l = logits.cross_entropy(&[0, 0]).unwrap().value().item();
    assert!((l - 0.126928).abs() < 1e-6);
    assert!((l - (1.0 + (-2f64).exp()).ln()).abs() < 1e-15);
}

fn example(seed: u64) -> Example {
    let (mesh, s) = synth_object(ObjectKind::Mixed, seed);
    let cfg = TrainConfig {
        points: 128,
        ..TrainConfig::default()
    };
    make_example(&mesh, &s, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn loss_of(weights: &ModelWeights, ex: &Example, gt: &GroundTruth) -> LossBreakdown {
    let tape = Tape::no_grad();
    let p = weights.on_tape(&tape);
    let out = forward(&p, &tape, &ex.cloud).unwrap();
    let a = match_parts(out.seg_logits.value(), &gt.point_labels, gt.part_count).unwrap();
    compute_loss(&p, &tape, &out, gt, &a).unwrap().breakdown
}

#[test]
fn loss_total_is_the_weighted_sum() {
    let w = ModelWeights::init(&tiny(), 2).unwrap();
    for seed in 0..5 {
        let ex = example(seed);
        let b = loss_of(&w, &ex, &ex.gt);
        assert!(b.total.is_finite() && b.total >= 0.0);
        assert!((b.total - b.weighted_total()).abs() < 1e-12);
        let mut doubled = b;
        doubled.revolute_range *= 2.0;
        let delta = doubled.weighted_total() - b.weighted_total();
        assert!((delta - REVOLUTE_RANGE_WEIGHT * b.revolute_range).abs() < 1e-12);
    }
}

#[test]
fn loss_invariant_to_part_relabeling() {
    let w = ModelWeights::init(&tiny(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..6 {
        let ex = example(seed);
        let p = ex.gt.part_count;
        let mut perm: Vec<usize> = (0..p).collect();
        for i in (1..p).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let a = loss_of(&w, &ex, &ex.gt);
        let b = loss_of(&w, &ex, &ex.gt.relabeled(&perm));
        assert_eq!(a, b, "perm {perm:?}");
    }
}

#[test]
fn loss_gradient_matches_finite_differences() {
    for seed in 0..2 {
        let e = gradcheck::loss_check(seed).unwrap();
        assert!(e < 1e-4, "seed {seed}: {e:e}");
    }
}

#[test]
fn seg_loss_falls_as_matched_logits_rise() {
    let w = ModelWeights::init(&tiny(), 1).unwrap();
    let ex = example(4);
    let tape = Tape::no_grad();
    let out = forward(&w.on_tape(&tape), &tape, &ex.cloud).unwrap();
    let a = match_parts(out.seg_logits.value(), &ex.gt.point_labels, ex.gt.part_count).unwrap();
    let targets: Vec<usize> = ex.gt.point_labels.iter().map(|&l| a.query_of_part[l]).collect();
    let q = out.seg_logits.value().cols();
    let mut last = f64::INFINITY;
    for c in [0.0, 0.25, 1.0, 4.0] {
        let mut logits = out.seg_logits.value().clone();
        for (j, &t) in targets.iter().enumerate() {
            logits.data_mut()[j * q + t] += c;
        }
        let l = tape.leaf(logits).cross_entropy(&targets).unwrap().value().item();
        assert!(l < last);
        last = l;
    }
}

fn one_object() -> Vec<(crate::geometry::Mesh, crate::articulation::ArticulatedStructure)> {
    vec![synth_object(ObjectKind::Cabinet, 1)]
}

#[test]
fn overfits_one_object() {
    let cfg = TrainConfig {
        steps: 200,
        points: 256,
        ..TrainConfig::default()
    };
    let out = train(&one_object(), &ModelConfig::default(), &cfg, None, |_, _, _| {}).unwrap();
    assert!(out.diverged_at.is_none());
    let mean = |r: &[(usize, LossBreakdown)]| r.iter().map(|(_, b)| b.total).sum::<f64>() / r.len() as f64;
    let (first, last) = (mean(&out.curve[..5]), mean(&out.curve[180..]));
    assert!(last < 0.25 * first, "{first} -> {last}");
}

#[test]
fn zero_learning_rate_keeps_weights() {
    let cfg = TrainConfig {
        steps: 5,
        points: 64,
        lr: 0.0,
        ..TrainConfig::default()
    };
    let init = ModelWeights::init(&tiny(), 0).unwrap();
    let out = train(&one_object(), &tiny(), &cfg, Some(init.clone()), |_, _, _| {}).unwrap();
    assert_eq!(out.weights, init);
}

#[test]
fn identical_seeds_identical_weights() {
    let cfg = TrainConfig {
        steps: 6,
        points: 64,
        batch_size: 2,
        seed: 17,
        ..TrainConfig::default()
    };
    let data: Vec<_> = (0..3).map(|s| synth_object(ObjectKind::Mixed, s)).collect();
    let a = train(&data, &tiny(), &cfg, None, |_, _, _| {}).unwrap();
    let b = train(&data, &tiny(), &cfg, None, |_, _, _| {}).unwrap();
    assert_eq!(a.weights, b.weights);
    assert_eq!(a.curve, b.curve);
}

#[test]
fn loss_csv_has_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("loss.csv");
    let b = LossBreakdown {
        total: 1.5,
        ..Default::default()
    };
    write_loss_csv(&path, &[(0, b), (1, b)]).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], LossBreakdown::CSV_HEADER);
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("1,1.5,"));
}

#[test]
fn warmup_and_decay_schedule() {
    let cfg = TrainConfig {
        steps: 1000,
        warmup_steps: 100,
        lr: 1.0,
        ..TrainConfig::default()
    };
    assert!((cfg.adam(0).lr - 0.01).abs() < 1e-15);
    assert!((cfg.adam(99).lr - 1.0).abs() < 1e-15);
    assert!((cfg.adam(999).lr - cfg.final_lr_fraction).abs() < 1e-12);
    let flat = TrainConfig {
        cosine_decay: false,
        ..cfg
    };
    assert_eq!(flat.adam(999).lr, 1.0);
}
