//! End-to-end acceptance checks. Each test writes one `PASS`/`FAIL` line straight to
//! stderr, so the verdicts show up even when libtest captures output.
//!
//! The desk-scale training run takes roughly 40 minutes on one core and is ignored by
//! default: `cargo test --release -p artic-core --test acceptance -- --ignored`.

use std::io::Write;
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use artic_core::articulation::{
    apply_articulation, export_urdf, import_urdf, random_pose, synth_object, ArticulatedStructure, JointPose,
    JointValue, MotionSpec, ObjectKind, Prismatic, Revolute,
};
use artic_core::evalproto::{evaluate, penalized_aggregate, EvalConfig, EvalReport, EvalSummary, Penalties};
use artic_core::geometry::pcld::{load_pcld, save_pcld};
use artic_core::geometry::{
    chamfer, normalize, sample_point_cloud, vec3, Mesh, NormTransform, PointCloud, PointSample, SampleParams, Vec3,
};
use artic_core::gradcheck;
use artic_core::inference::{arborescence_weight, extract_kinematic_tree, infer, DecodeConfig};
use artic_core::model::{forward, ModelConfig, ModelWeights};
use artic_core::tensor::audit::audit_allocations;
use artic_core::training::{match_parts, train, utility_matrix, TrainConfig};
use artic_core::{Tape, Tensor};

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{tag} criterion {id:>2} ({name}): {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

static SERIAL: Mutex<()> = Mutex::new(());

/// Criteria run one at a time so the timed ones are not sharing a core.
fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

// ---------------------------------------------------------------- 1: matching

/// Best total utility over injective maps part -> query, summed in part order.
fn exhaustive_matching(u: &[Vec<f64>], queries: usize) -> f64 {
    fn go(u: &[Vec<f64>], p: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if p == u.len() {
            *best = best.max(acc);
            return;
        }
        for q in 0..used.len() {
            if !used[q] {
                used[q] = true;
                go(u, p + 1, used, acc + u[p][q], best);
                used[q] = false;
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    go(u, 0, &mut vec![false; queries], 0.0, &mut best);
    best
}

#[test]
fn c01_matching_equals_exhaustive_search() {
    let _serial = serial();
    let t = Instant::now();
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let queries = rng.gen_range(1..=7usize);
        let parts = rng.gen_range(1..=queries.min(5));
        let n = rng.gen_range(parts..parts + 40);
        let mut labels: Vec<usize> = (0..parts).collect();
        labels.extend((parts..n).map(|_| rng.gen_range(0..parts)));
        let data = (0..n * queries).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let logits = Tensor::new(vec![n, queries], data).unwrap();
        let a = match_parts(&logits, &labels, parts).unwrap();
        let u = utility_matrix(&logits, &labels, parts).unwrap();
        let got: f64 = a.query_of_part.iter().enumerate().map(|(p, &q)| u[p][q]).fold(0.0, |s, v| s + v);
        worst = worst.max((exhaustive_matching(&u, queries) - got).abs());
    }
    let el = t.elapsed();
    verdict(
        1,
        "matching",
        worst == 0.0 && el < Duration::from_secs(10),
        format!("max utility gap {worst:e} over 200 instances in {:.2} s", secs(el)),
    );
}

// ---------------------------------------------------------------- 2: arborescence

/// Heaviest spanning arborescence by enumerating every parent assignment.
fn exhaustive_arborescence(w: &[Vec<f64>]) -> f64 {
    let n = w.len();
    let mut best = f64::NEG_INFINITY;
    let mut choice = vec![0usize; n];
    // choice[c] == n marks the root, otherwise it is the parent of c
    loop {
        let roots = choice.iter().filter(|&&p| p == n).count();
        let valid = roots == 1
            && (0..n).all(|c| choice[c] != c)
            && (0..n).all(|start| {
                let mut v = start;
                for _ in 0..=n {
                    if choice[v] == n {
                        return true;
                    }
                    v = choice[v];
                }
                false
            });
        if valid {
            let parent: Vec<Option<usize>> = choice.iter().map(|&p| (p < n).then_some(p)).collect();
            best = best.max(arborescence_weight(w, &parent));
        }
        let mut k = 0;
        while k < n && choice[k] == n {
            choice[k] = 0;
            k += 1;
        }
        if k == n {
            return best;
        }
        choice[k] += 1;
    }
}

#[test]
fn c02_arborescence_equals_exhaustive_search() {
    let _serial = serial();
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    let mut cases = 0;
    for n in 1..=5usize {
        for _ in 0..100 {
            let w: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
            let present: Vec<usize> = (0..n).collect();
            let tree = extract_kinematic_tree(&w, &present).unwrap();
            if arborescence_weight(&w, &tree.parent) != exhaustive_arborescence(&w) {
                mismatches += 1;
            }
            cases += 1;
        }
    }
    let el = t.elapsed();
    verdict(
        2,
        "arborescence",
        mismatches == 0 && el < Duration::from_secs(30),
        format!("{mismatches} mismatches over {cases} weight matrices (n <= 5) in {:.2} s", secs(el)),
    );
}

// ---------------------------------------------------------------- 3: chamfer

fn brute_chamfer(a: &[Vec3], b: &[Vec3]) -> f64 {
    let directed = |x: &[Vec3], y: &[Vec3]| {
        x.iter()
            .map(|p| y.iter().map(|q| vec3::dist(*p, *q)).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / x.len() as f64
    };
    0.5 * (directed(a, b) + directed(b, a))
}

#[test]
fn c03_chamfer_equals_brute_force() {
    let _serial = serial();
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let mut cloud = |shift: f64| -> Vec<Vec3> {
            (0..1000).map(|_| [rng.gen::<f64>() + shift, rng.gen(), rng.gen()]).collect()
        };
        let (a, b) = (cloud(0.0), cloud(0.3));
        worst = worst.max((chamfer(&a, &b).unwrap() - brute_chamfer(&a, &b)).abs());
    }
    let el = t.elapsed();
    verdict(
        3,
        "chamfer",
        worst < 1e-9 && el < Duration::from_secs(20),
        format!("max |diff| {worst:e} over 50 pairs of 1000 points in {:.2} s", secs(el)),
    );
}

// ---------------------------------------------------------------- 4: gradients

#[test]
fn c04_gradient_suite() {
    let _serial = serial();
    let t = Instant::now();
    let results = gradcheck::suite(3, 4).unwrap();
    let worst = results.iter().max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err)).unwrap();
    let has_loss = results.iter().any(|r| r.name == "compute_loss");
    let el = t.elapsed();
    verdict(
        4,
        "gradients",
        has_loss && worst.max_rel_err < 1e-4 && el < Duration::from_secs(60),
        format!(
            "{} checks, worst {} at {:.2e}, {:.2} s",
            results.len(),
            worst.name,
            worst.max_rel_err,
            secs(el)
        ),
    );
}

// ---------------------------------------------------------------- 5: architecture

fn random_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|k| PointSample {
            position: [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)],
            normal: vec3::normalized([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.5]).unwrap(),
            feature: vec![],
            source_face: k as u32,
        })
        .collect();
    PointCloud { samples, transform: NormTransform::default() }
}

#[test]
fn c05_architecture_invariants() {
    let _serial = serial();
    let cfg = ModelConfig::default();
    assert_eq!((cfg.dim, cfg.blocks, cfg.max_parts), (64, 2, 8));
    let mut notes = Vec::new();
    let mut ok = true;

    let w = ModelWeights::init(&cfg, 5).unwrap();
    let pc = random_cloud(512, 50);
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let mut sigma: Vec<usize> = (0..pc.len()).collect();
    for i in (1..sigma.len()).rev() {
        sigma.swap(i, rng.gen_range(0..=i));
    }
    let permuted = PointCloud {
        samples: sigma.iter().map(|&i| pc.samples[i].clone()).collect(),
        transform: pc.transform,
    };
    let tape = Tape::no_grad();
    let a = forward(&w.on_tape(&tape), &tape, &pc).unwrap();
    let b = forward(&w.on_tape(&tape), &tape, &permuted).unwrap();
    let equivariant = sigma
        .iter()
        .enumerate()
        .all(|(k, &i)| b.seg_logits.value().row(k) == a.seg_logits.value().row(i));
    ok &= equivariant;
    notes.push(format!("permutation equivariance {}", if equivariant { "exact" } else { "broken" }));

    // identical query embeddings must give identical per-query outputs
    let mut tied = ModelWeights::init(&cfg, 6).unwrap();
    let q = tied.get_mut("queries").unwrap();
    let d = q.cols();
    let first = q.row(0).to_vec();
    for row in q.data_mut().chunks_mut(d) {
        row.copy_from_slice(&first);
    }
    let out = forward(&tied.on_tape(&tape), &tape, &pc).unwrap();
    let heads = [
        out.type_logits.value(),
        out.prismatic_range.value(),
        out.revolute_range.value(),
        out.prismatic_dir.value(),
        out.revolute_dir.value(),
        out.query_latent.value(),
    ];
    let per_query = heads.iter().all(|t| (1..t.rows()).all(|i| t.row(i) == t.row(0)));
    ok &= per_query;
    notes.push(format!("per-query heads {}", if per_query { "exact" } else { "differ" }));

    let n = 512;
    let (_, shapes) = audit_allocations(|| {
        let tape = Tape::new();
        let out = forward(&w.on_tape(&tape), &tape, &pc).unwrap();
        tape.backward(&out.seg_logits.sum());
    });
    let largest = shapes.iter().map(|s| s.iter().product::<usize>()).max().unwrap_or(0);
    let audit = !shapes.is_empty() && largest < n * n;
    ok &= audit;
    notes.push(format!("largest tensor {largest} elements (N^2 = {})", n * n));
    verdict(5, "architecture", ok, notes.join(", "));
}

// ---------------------------------------------------------------- 6: metric protocol

#[test]
fn c06_metric_protocol() {
    let _serial = serial();
    let mut ok = true;
    let mut notes = Vec::new();
    let p = Penalties::default();
    let constants = p.giou == -1.0 && p.miou == 0.0 && p.pc.is_none();
    ok &= constants;

    let worked = penalized_aggregate(&[0.5], 0, 1, 0.0).unwrap();
    ok &= worked == 0.375;
    notes.push(format!("worked example {worked}"));
    ok &= penalized_aggregate(&[], 2, 1, -1.0).unwrap() == -1.0;
    ok &= penalized_aggregate(&[1.0, 1.0], 1, 0, 0.0).unwrap() == 0.5 * (2.0 / 3.0 + 1.0);

    let cfg = EvalConfig { points: 5_000, ..EvalConfig::default() };
    let mut strict = 0;
    let mut half_diag_ok = true;
    for seed in 0..100 {
        let (mesh, gt) = synth_object(ObjectKind::Mixed, 5000 + seed);
        assert!(gt.part_count >= 2);
        let naive = ArticulatedStructure::single_part(mesh.faces.len());
        let r = evaluate(&naive, &gt, &mesh, &cfg, "naive").unwrap();
        if r.rest.miou < r.rest.miou_unpenalized {
            strict += 1;
        }
        let (lo, hi) = vec3::bounds(&mesh.vertices).unwrap();
        let e = vec3::sub(hi, lo);
        let half_diag = 0.5 * vec3::norm(e) / e[0].max(e[1]).max(e[2]);
        half_diag_ok &= (r.pc_penalty - half_diag).abs() < 1e-12;
    }
    ok &= strict == 100 && half_diag_ok;
    notes.push(format!("gIoU -1 / mIoU 0 defaults {constants}"));
    notes.push(format!("PC penalty = half diagonal {half_diag_ok}"));
    notes.push(format!("naive baseline penalized < unpenalized on {strict}/100"));
    verdict(6, "metric protocol", ok, notes.join(", "));
}

// ---------------------------------------------------------------- 7: desk-scale training

const TRAIN_STEPS: usize = 20_000;
const TRAIN_BATCH: usize = 4;
const TRAIN_LR: f64 = 1e-3;
const EVAL_POINTS: usize = 200_000;

fn held_out_summary(weights: &ModelWeights) -> EvalSummary {
    let dc = DecodeConfig { points: 20_000, ..DecodeConfig::default() };
    let ec = EvalConfig { points: EVAL_POINTS, ..EvalConfig::default() };
    let reports: Vec<EvalReport> = (1000..1020u64)
        .map(|seed| {
            let (mesh, gt) = synth_object(ObjectKind::Mixed, seed);
            let pred = infer(&mesh, weights, &dc).unwrap().structure;
            evaluate(&pred, &gt, &mesh, &ec, &seed.to_string()).unwrap()
        })
        .collect();
    EvalSummary::from_reports(&reports)
}

#[test]
#[ignore = "trains for about 40 minutes; run with --ignored"]
fn c07_desk_scale_end_to_end() {
    let _serial = serial();
    let data: Vec<(Mesh, ArticulatedStructure)> = (0..200).map(|s| synth_object(ObjectKind::Mixed, s)).collect();
    let cfg = TrainConfig {
        steps: TRAIN_STEPS,
        batch_size: TRAIN_BATCH,
        points: 512,
        lr: TRAIN_LR,
        seed: 0,
        ..TrainConfig::default()
    };
    let model = ModelConfig::default();
    assert_eq!((model.dim, model.blocks, model.max_parts, model.feature_dim), (64, 2, 8, 0));
    let t = Instant::now();
    let out = train(&data, &model, &cfg, None, |_, _, _| {}).unwrap();
    let train_time = t.elapsed();
    assert!(out.diverged_at.is_none());

    let learned = held_out_summary(&out.weights);
    let control = held_out_summary(&ModelWeights::init(&model, 9).unwrap());
    let miou = learned.rest.miou;
    let axis = learned.mean_axis_error_deg.unwrap_or(f64::INFINITY);
    let types = learned.type_accuracy.unwrap_or(0.0);
    let oc = learned.articulated.oc;
    let checks = [
        ("training <= 45 min", train_time <= Duration::from_secs(45 * 60)),
        ("mIoU >= 0.70", miou >= 0.70),
        ("axis error < 15 deg", axis < 15.0),
        ("type accuracy >= 0.85", types >= 0.85),
        ("OC < 0.05", oc < 0.05),
        ("control mIoU < 0.35", control.rest.miou < 0.35),
    ];
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    verdict(
        7,
        "desk-scale end-to-end",
        failed.is_empty(),
        format!(
            "train {:.0} s; mIoU {miou:.3}, axis {axis:.1} deg, types {types:.3}, OC {oc:.4}; \
             control mIoU {:.3}; failed: {failed:?}",
            secs(train_time),
            control.rest.miou
        ),
    );
}

// ---------------------------------------------------------------- 8: round trips

fn structures_close(a: &ArticulatedStructure, b: &ArticulatedStructure, tol: f64) -> bool {
    let close3 = |x: Vec3, y: Vec3| vec3::dist(x, y) <= tol;
    let close2 = |x: [f64; 2], y: [f64; 2]| (x[0] - y[0]).abs() <= tol && (x[1] - y[1]).abs() <= tol;
    a.part_count == b.part_count
        && a.parent == b.parent
        && a.face_labels == b.face_labels
        && a.motion.iter().zip(&b.motion).all(|(x, y)| {
            x.motion_type == y.motion_type
                && match (x.prismatic, y.prismatic) {
                    (Some(p), Some(q)) => close3(p.direction, q.direction) && close2(p.range, q.range),
                    (None, None) => true,
                    _ => false,
                }
                && match (x.revolute, y.revolute) {
                    (Some(p), Some(q)) => {
                        close3(p.direction, q.direction) && close3(p.point, q.point) && close2(p.range, q.range)
                    }
                    (None, None) => true,
                    _ => false,
                }
        })
}

#[test]
fn c08_round_trips() {
    let _serial = serial();
    let dir = tempfile::tempdir().unwrap();
    let mut urdf_ok = 0;
    for seed in 0..100 {
        let (mesh, s) = synth_object(ObjectKind::Mixed, 8000 + seed);
        let sub = dir.path().join(format!("u{seed}"));
        let path = export_urdf(&mesh, &s, &sub).unwrap();
        let (mesh2, s2) = import_urdf(&path).unwrap();
        let geometry = mesh2.faces.len() == mesh.faces.len()
            && (0..mesh.faces.len())
                .all(|f| mesh.corners(f).iter().zip(mesh2.corners(f)).all(|(a, b)| vec3::dist(*a, b) <= 1e-9));
        if geometry && structures_close(&s, &s2, 1e-9) {
            urdf_ok += 1;
        }
    }

    let w = ModelWeights::init(&ModelConfig::default(), 8).unwrap();
    let ckpt = dir.path().join("m.ptwt");
    w.save(&ckpt).unwrap();
    let back = ModelWeights::load(&ckpt).unwrap();
    let bits = |m: &ModelWeights| -> Vec<u64> { m.tensors().flat_map(|t| t.data().iter().map(|v| v.to_bits())).collect() };
    let ckpt_ok = back.config == w.config && back.names().eq(w.names()) && bits(&back) == bits(&w);

    let (mesh, _) = synth_object(ObjectKind::Cabinet, 8);
    let pc = normalize(&sample_point_cloud(&mesh, &SampleParams::training(3000, 8)).unwrap()).unwrap();
    let path = dir.path().join("c.pcld");
    save_pcld(&path, &pc).unwrap();
    let pc_back = load_pcld(&path).unwrap();
    let again = dir.path().join("d.pcld");
    save_pcld(&again, &pc_back).unwrap();
    // positions and normals are stored as f32
    let f32_exact = |a: &[f64; 3], b: &[f64; 3]| a.iter().zip(b).all(|(x, y)| (*x as f32 as f64).to_bits() == y.to_bits());
    let pc_ok = std::fs::read(&path).unwrap() == std::fs::read(&again).unwrap()
        && pc_back.len() == pc.len()
        && pc_back.samples.iter().zip(&pc.samples).all(|(b, a)| {
            f32_exact(&a.position, &b.position) && f32_exact(&a.normal, &b.normal) && a.source_face == b.source_face
        });

    verdict(
        8,
        "round trips",
        urdf_ok == 100 && ckpt_ok && pc_ok,
        format!("URDF {urdf_ok}/100, checkpoint bit-exact {ckpt_ok}, point cloud bit-exact {pc_ok}"),
    );
}

// ---------------------------------------------------------------- 9: kinematics

type M4 = [[f64; 4]; 4];

fn m4_mul(a: &M4, b: &M4) -> M4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn m4_translate(t: Vec3) -> M4 {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for k in 0..3 {
        m[k][3] = t[k];
    }
    m
}

/// Rotation by a unit quaternion about a line through `point`.
fn m4_about(axis: Vec3, point: Vec3, angle: f64) -> M4 {
    let (s, w) = (0.5 * angle).sin_cos();
    let (x, y, z) = (axis[0] * s, axis[1] * s, axis[2] * s);
    let r = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w), 0.0],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w), 0.0],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y), 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ];
    m4_mul(&m4_translate(point), &m4_mul(&r, &m4_translate(vec3::scale(point, -1.0))))
}

fn m4_apply(m: &M4, p: Vec3) -> Vec3 {
    let r = |i: usize| m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2] + m[i][3];
    [r(0), r(1), r(2)]
}

#[test]
fn c09_kinematics() {
    let _serial = serial();
    // rigid parts stay rigid
    let mut iso_err = 0.0f64;
    for seed in 0..20 {
        let (mesh, s) = synth_object(ObjectKind::Mixed, 9000 + seed);
        let posed = apply_articulation(&mesh, &s, &random_pose(&s, seed)).unwrap();
        for part in 0..s.part_count as u32 {
            let pairs: Vec<(Vec3, Vec3)> = (0..mesh.faces.len())
                .filter(|&f| s.face_labels[f] == part)
                .flat_map(|f| mesh.corners(f).into_iter().zip(posed.corners(f)))
                .step_by(7)
                .collect();
            for a in &pairs {
                for b in pairs.iter().step_by(3) {
                    iso_err = iso_err.max((vec3::dist(a.0, b.0) - vec3::dist(a.1, b.1)).abs());
                }
            }
        }
    }

    let mut zero_err = 0.0f64;
    for seed in 0..20 {
        let (mesh, s) = synth_object(ObjectKind::Mixed, 9100 + seed);
        let zero: JointPose = (1..s.part_count)
            .map(|i| {
                let m = &s.motion[i];
                (i, JointValue { revolute: m.revolute.map(|_| 0.0), prismatic: m.prismatic.map(|_| 0.0) })
            })
            .collect();
        for pose in [JointPose::new(), zero] {
            let posed = apply_articulation(&mesh, &s, &pose).unwrap();
            for (a, b) in posed.vertices.iter().zip(&mesh.vertices) {
                zero_err = zero_err.max(vec3::dist(*a, *b));
            }
        }
    }

    let mut mesh = Mesh::cuboid([-0.5, -0.5, -0.5], [0.5, 0.5, 0.5]);
    mesh.append(&Mesh::cuboid([0.5, -0.4, 0.5], [0.9, 0.4, 0.55]));
    mesh.append(&Mesh::cuboid([0.6, -0.1, 0.55], [0.7, 0.1, 0.6]));
    mesh.append(&Mesh::cuboid([0.62, -0.02, 0.6], [0.68, 0.02, 0.7]));
    let labels: Vec<u32> = (0..4u32).flat_map(|p| std::iter::repeat_n(p, 12)).collect();
    let s = ArticulatedStructure {
        part_count: 4,
        face_labels: labels,
        parent: vec![None, Some(0), Some(1), Some(2)],
        motion: vec![
            MotionSpec::FIXED,
            MotionSpec::revolute([0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [0.0, 2.0]),
            MotionSpec::prismatic([1.0, 0.0, 0.0], [0.0, 0.1]),
            MotionSpec::both(
                Prismatic { direction: [0.0, 0.0, 1.0], range: [0.0, 0.05] },
                Revolute { direction: [0.0, 0.0, 1.0], point: [0.65, 0.0, 0.6], range: [1.0, 1.0] },
            ),
        ],
    };
    let (t1, l2, (t3, l3)) = (0.7, 0.06, (-0.4, 0.03));
    let pose: JointPose = [
        (1, JointValue { revolute: Some(t1), prismatic: None }),
        (2, JointValue { revolute: None, prismatic: Some(l2) }),
        (3, JointValue { revolute: Some(t3), prismatic: Some(l3) }),
    ]
    .into_iter()
    .collect();
    let m1 = m4_about([0.0, 1.0, 0.0], [0.5, 0.0, 0.5], t1);
    let m2 = m4_mul(&m1, &m4_translate([l2, 0.0, 0.0]));
    let m3 = m4_mul(&m2, &m4_mul(&m4_translate([0.0, 0.0, l3]), &m4_about([0.0, 0.0, 1.0], [0.65, 0.0, 0.6], t3)));
    let stack = [m4_translate([0.0; 3]), m1, m2, m3];
    let posed = apply_articulation(&mesh, &s, &pose).unwrap();
    let mut chain_err = 0.0f64;
    for f in 0..mesh.faces.len() {
        let m = &stack[s.face_labels[f] as usize];
        for (got, rest) in posed.corners(f).iter().zip(mesh.corners(f)) {
            chain_err = chain_err.max(vec3::dist(*got, m4_apply(m, rest)));
        }
    }

    verdict(
        9,
        "kinematics",
        iso_err <= 1e-9 && zero_err <= 1e-12 && chain_err <= 1e-9,
        format!("isometry {iso_err:.1e}, zero pose {zero_err:.1e}, 3-deep chain {chain_err:.1e}"),
    );
}

// ---------------------------------------------------------------- 10: performance

#[test]
fn c10_inference_time() {
    let _serial = serial();
    let w = ModelWeights::init(&ModelConfig::default(), 10).unwrap();
    let (mesh, _) = synth_object(ObjectKind::Cabinet, 10);
    let cfg = DecodeConfig { points: 102_400, ..DecodeConfig::default() };
    let t = Instant::now();
    let res = infer(&mesh, &w, &cfg).unwrap();
    let el = t.elapsed();
    verdict(
        10,
        "inference time",
        res.points == 102_400 && el < Duration::from_secs(10),
        format!("{} points in {:.2} s", res.points, secs(el)),
    );
}
