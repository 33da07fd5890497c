use std::path::{Path, PathBuf};
use std::time::Instant;

use artic_core::articulation::{
    apply_articulation, export_urdf as write_urdf, fully_articulated_pose, load_json, random_pose, reposed,
    save_json, synth_object, ArticulatedStructure, JointPose,
};
use artic_core::evalproto::{evaluate, EvalReport, EvalSummary, CSV_HEADER};
use artic_core::geometry::pcld::save_pcld;
use artic_core::geometry::{load_mesh, normalize, sample_point_cloud, save_obj, Mesh, SampleParams};
use artic_core::gradcheck;
use artic_core::inference::{self, RootPolicy};
use artic_core::model::ModelWeights;
use artic_core::training::{train as run_training, write_loss_csv, LossBreakdown};
use artic_core::{Error, Result};

use crate::config::FileConfig;
use crate::manifest::{manifest_path, write_atomic, RunManifest};
use crate::{
    ArticulateArgs, EvalArgs, ExportUrdfArgs, GradcheckArgs, InferArgs, PoseChoice, SampleArgs, SeedArg, SynthArgs,
    TrainArgs,
};

fn require_seed(s: &SeedArg) -> Result<u64> {
    s.seed
        .ok_or_else(|| Error::invalid("this command is randomized: pass --seed or set PARTIC_SEED"))
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let seed = require_seed(&a.seed)?;
    mkdir(&a.out)?;
    let t = Instant::now();
    let mut m = RunManifest::new(
        "synth",
        serde_json::json!({ "kind": a.kind, "count": a.count }),
        Some(seed),
    );
    for i in 0..a.count {
        let (mesh, s) = synth_object(a.kind, seed.wrapping_add(i as u64));
        let stem = a.out.join(format!("obj_{i:04}"));
        let (obj, js) = (stem.with_extension("obj"), stem.with_extension("json"));
        save_obj(&obj, &mesh)?;
        save_json(&js, &s)?;
        m.outputs.extend([obj, js]);
    }
    m.time("synth", t.elapsed().as_secs_f64());
    m.write(&manifest_path(&a.out))
}

pub fn sample(a: SampleArgs) -> Result<()> {
    let seed = require_seed(&a.seed)?;
    let t = Instant::now();
    let mesh = load_mesh(&a.mesh)?;
    let params = SampleParams {
        n: a.points,
        sharp_fraction: a.sharp_fraction,
        angle_threshold_deg: a.angle_threshold,
        seed,
        cover_all_faces: a.cover_all_faces,
    };
    let mut cloud = sample_point_cloud(&mesh, &params)?;
    if a.normalize {
        cloud = normalize(&cloud)?;
    }
    save_pcld(&a.out, &cloud)?;
    let mut m = RunManifest::new(
        "sample",
        serde_json::json!({
            "points": a.points,
            "sharp_fraction": a.sharp_fraction,
            "angle_threshold_deg": a.angle_threshold,
            "cover_all_faces": a.cover_all_faces,
            "normalize": a.normalize,
        }),
        Some(seed),
    );
    m.inputs.push(a.mesh);
    m.outputs.push(a.out.clone());
    m.time("sample", t.elapsed().as_secs_f64());
    m.write(&manifest_path(&a.out))
}

/// `(name.obj, name.json)` pairs in name order.
fn dataset_files(dir: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|e| e == "json") && !p.to_string_lossy().ends_with("manifest.json") {
            let obj = p.with_extension("obj");
            if obj.exists() {
                out.push((obj, p));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn load_pair(obj: &Path, js: &Path) -> Result<(Mesh, ArticulatedStructure)> {
    let mesh = load_mesh(obj)?;
    let s = load_json(js)?;
    s.validate_for(mesh.faces.len())?;
    Ok((mesh, s))
}

pub fn train(a: TrainArgs) -> Result<()> {
    let file = FileConfig::load(a.config.config.as_deref())?;
    let mut cfg = file.train;
    cfg.seed = a.seed.seed.unwrap_or(cfg.seed);
    if a.seed.seed.is_none() && a.config.config.is_none() {
        require_seed(&a.seed)?;
    }
    if let Some(v) = a.steps {
        cfg.steps = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.points {
        cfg.points = v;
    }
    if let Some(v) = a.lr {
        cfg.lr = v;
    }
    let t = Instant::now();
    let files = dataset_files(&a.data)?;
    if files.is_empty() {
        return Err(Error::invalid(format!("no OBJ + JSON pairs in {}", a.data.display())));
    }
    let data = files
        .iter()
        .map(|(o, j)| load_pair(o, j))
        .collect::<Result<Vec<_>>>()?;
    let init = a.init.as_deref().map(ModelWeights::load).transpose()?;
    let model = init.as_ref().map_or(file.model.clone(), |w| w.config.clone());
    let load_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let every = a.log_every.max(1);
    let out = run_training(&data, &model, &cfg, init, |step, b: &LossBreakdown, _| {
        if step % every == 0 || step + 1 == cfg.steps {
            println!(
                "step {step} total {:.4} seg {:.4} kin {:.4} type {:.4} axis {:.4}",
                b.total, b.seg, b.kin, b.motion_type, b.axis_point
            );
        }
    })?;
    let train_s = t.elapsed().as_secs_f64();
    if let Some(step) = out.diverged_at {
        log::error!("loss diverged at step {step}; saving the last finite weights");
    }
    out.weights.save(&a.out)?;
    let csv = a.loss_csv.unwrap_or_else(|| with_suffix(&a.out, ".loss.csv"));
    write_loss_csv(&csv, &out.curve)?;
    let mut m = RunManifest::new(
        "train",
        serde_json::json!({ "model": model, "train": cfg }),
        Some(cfg.seed),
    );
    m.inputs = files.into_iter().flat_map(|(o, j)| [o, j]).collect();
    m.outputs = vec![a.out.clone(), artic_core::model::sidecar_path(&a.out), csv];
    m.time("load", load_s);
    m.time("train", train_s);
    m.write(&manifest_path(&a.out))?;
    match out.diverged_at {
        Some(step) => Err(Error::Numerical(format!("training diverged at step {step}"))),
        None => Ok(()),
    }
}

fn fmt_vec(v: [f64; 3]) -> String {
    format!("({:.3}, {:.3}, {:.3})", v[0], v[1], v[2])
}

fn print_parts(s: &ArticulatedStructure) {
    println!("{:<5} {:<7} {:<10} {:<48} range", "part", "parent", "type", "axis");
    for (i, m) in s.motion.iter().enumerate() {
        let parent = s.parent[i].map_or("-".to_string(), |p| p.to_string());
        let mut axis = Vec::new();
        let mut range = Vec::new();
        if let Some(p) = &m.prismatic {
            axis.push(format!("slide {}", fmt_vec(p.direction)));
            range.push(format!("[-{:.3}, {:.3}]", p.range[0], p.range[1]));
        }
        if let Some(r) = &m.revolute {
            axis.push(format!("hinge {} @ {}", fmt_vec(r.direction), fmt_vec(r.point)));
            range.push(format!("[-{:.3}, {:.3}] rad", r.range[0], r.range[1]));
        }
        let or_dash = |v: Vec<String>| if v.is_empty() { "-".to_string() } else { v.join("; ") };
        println!(
            "{:<5} {:<7} {:<10} {:<48} {}",
            i,
            parent,
            m.motion_type.name(),
            or_dash(axis),
            or_dash(range)
        );
    }
}

pub fn infer(a: InferArgs) -> Result<()> {
    let seed = require_seed(&a.seed)?;
    let file = FileConfig::load(a.config.config.as_deref())?;
    let mut cfg = file.decode;
    cfg.seed = seed;
    if let Some(n) = a.points {
        cfg.points = n;
    }
    if a.no_refine {
        cfg.refine = false;
    }
    if let Some(r) = a.root {
        cfg.root_policy = RootPolicy::Query(r);
    }
    let t = Instant::now();
    let mesh = load_mesh(&a.mesh)?;
    let weights = ModelWeights::load(&a.ckpt)?;
    let load_s = t.elapsed().as_secs_f64();
    let res = inference::infer(&mesh, &weights, &cfg)?;
    save_json(&a.out, &res.structure)?;
    let mut m = RunManifest::new("infer", serde_json::json!({ "decode": cfg }), Some(seed));
    m.inputs = vec![a.mesh.clone(), a.ckpt.clone()];
    m.outputs.push(a.out.clone());
    if let Some(dir) = &a.urdf {
        mkdir(dir)?;
        m.outputs.push(write_urdf(&mesh, &res.structure, dir)?);
    }
    let tm = res.timings;
    m.time("load", load_s);
    m.time("sample", tm.sample.as_secs_f64());
    m.time("forward", tm.forward.as_secs_f64());
    m.time("decode", tm.decode.as_secs_f64());
    m.write(&manifest_path(&a.out))?;
    print_parts(&res.structure);
    println!(
        "{} parts from {} points in {:.2} s (sample {:.2}, forward {:.2}, decode {:.2})",
        res.structure.part_count,
        res.points,
        tm.total().as_secs_f64(),
        tm.sample.as_secs_f64(),
        tm.forward.as_secs_f64(),
        tm.decode.as_secs_f64()
    );
    Ok(())
}

pub fn articulate(a: ArticulateArgs) -> Result<()> {
    let mesh = load_mesh(&a.mesh)?;
    let s = load_json(&a.artic)?;
    s.validate_for(mesh.faces.len())?;
    let mut seed = None;
    let pose: JointPose = match (&a.pose, a.state) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::parse(format!("{}: {e}", path.display())))?
        }
        (None, PoseChoice::Rest) => JointPose::new(),
        (None, PoseChoice::Full) => fully_articulated_pose(&s),
        (None, PoseChoice::Random) => {
            let v = require_seed(&a.seed)?;
            seed = Some(v);
            random_pose(&s, v)
        }
    };
    let posed = apply_articulation(&mesh, &s, &pose)?;
    save_obj(&a.out, &posed)?;
    let mut m = RunManifest::new("articulate", serde_json::json!({ "pose": pose }), seed);
    m.inputs = vec![a.mesh, a.artic];
    if let Some(p) = a.pose {
        m.inputs.push(p);
    }
    m.outputs.push(a.out.clone());
    if let Some(out) = &a.artic_out {
        save_json(out, &reposed(&s, &pose)?)?;
        m.outputs.push(out.clone());
    }
    m.write(&manifest_path(&a.out))
}

pub fn export_urdf(a: ExportUrdfArgs) -> Result<()> {
    let (mesh, s) = load_pair(&a.mesh, &a.artic)?;
    mkdir(&a.out)?;
    let path = write_urdf(&mesh, &s, &a.out)?;
    let mut m = RunManifest::new("export-urdf", serde_json::Value::Null, None);
    m.inputs = vec![a.mesh, a.artic];
    m.outputs.push(path);
    m.write(&manifest_path(&a.out))
}

struct Instance {
    id: String,
    pred: PathBuf,
    gt: PathBuf,
    mesh: PathBuf,
}

fn eval_one(inst: &Instance, cfg: &artic_core::evalproto::EvalConfig) -> Result<EvalReport> {
    let mesh = load_mesh(&inst.mesh)?;
    let (pred, gt) = (load_json(&inst.pred)?, load_json(&inst.gt)?);
    evaluate(&pred, &gt, &mesh, cfg, &inst.id)
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let seed = require_seed(&a.seed)?;
    let file = FileConfig::load(a.config.config.as_deref())?;
    let mut cfg = file.eval;
    cfg.seed = seed;
    if let Some(n) = a.points {
        cfg.points = n;
    }
    let instances: Vec<Instance> = match (&a.gt, &a.gt_dir) {
        (Some(gt), _) => {
            let mesh = a
                .mesh
                .clone()
                .ok_or_else(|| Error::invalid("--mesh is required with --gt"))?;
            let id = gt.file_stem().map_or("0".into(), |s| s.to_string_lossy().into_owned());
            vec![Instance {
                id,
                pred: a.pred.clone(),
                gt: gt.clone(),
                mesh,
            }]
        }
        (None, Some(dir)) => dataset_files(dir)?
            .into_iter()
            .map(|(obj, js)| {
                let id = js.file_stem().expect("json file").to_string_lossy().into_owned();
                Instance {
                    pred: a.pred.join(format!("{id}.json")),
                    id,
                    gt: js,
                    mesh: obj,
                }
            })
            .collect(),
        (None, None) => return Err(Error::invalid("pass --gt or --gt-dir")),
    };
    if instances.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    let t = Instant::now();
    let jobs = a.jobs.clamp(1, instances.len());
    let mut slots: Vec<Option<Result<EvalReport>>> = (0..instances.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunk = instances.len().div_ceil(jobs);
        for (insts, out) in instances.chunks(chunk).zip(slots.chunks_mut(chunk)) {
            let cfg = &cfg;
            scope.spawn(move || {
                for (inst, slot) in insts.iter().zip(out) {
                    *slot = Some(eval_one(inst, cfg));
                }
            });
        }
    });
    let reports = slots
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect::<Result<Vec<_>>>()?;
    let summary = EvalSummary::from_reports(&reports);
    let doc = serde_json::json!({ "summary": summary, "instances": reports });
    write_atomic(&a.out, serde_json::to_string_pretty(&doc).expect("report serializes").as_bytes())?;
    let csv = a.csv.unwrap_or_else(|| with_suffix(&a.out, ".csv"));
    let mut text = format!("{CSV_HEADER}\n");
    for r in &reports {
        for row in r.csv_rows() {
            text.push_str(&row);
            text.push('\n');
        }
    }
    write_atomic(&csv, text.as_bytes())?;
    let mut m = RunManifest::new("eval", serde_json::json!({ "eval": cfg, "jobs": jobs }), Some(seed));
    m.inputs = instances.into_iter().flat_map(|i| [i.pred, i.gt, i.mesh]).collect();
    m.outputs = vec![a.out.clone(), csv];
    m.time("eval", t.elapsed().as_secs_f64());
    m.write(&manifest_path(&a.out))?;
    let (r, f) = (&summary.rest, &summary.articulated);
    println!("instances {}", summary.instances);
    println!("rest               gIoU {:.4} mIoU {:.4} PC {:.4}", r.giou, r.miou, r.pc);
    println!(
        "fully articulated  gIoU {:.4} mIoU {:.4} PC {:.4} OC {:.4}",
        f.giou, f.miou, f.pc, f.oc
    );
    Ok(())
}

pub fn gradcheck(a: GradcheckArgs) -> Result<()> {
    let seed = a.seed.seed.unwrap_or(0);
    let results = gradcheck::suite(a.instances, seed)?;
    let mut worst = 0.0f64;
    for r in &results {
        println!("{:<22} {:.3e}", r.name, r.max_rel_err);
        worst = worst.max(r.max_rel_err);
    }
    println!("max relative error {worst:.3e}");
    if worst < a.tolerance {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "max relative error {worst:e} exceeds tolerance {:e}",
            a.tolerance
        )))
    }
}
