//! `artic`: synthetic data, sampling, training, inference, posing, URDF export,
//! evaluation and gradient checks from the command line.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use artic_core::articulation::ObjectKind;
use artic_core::Error;

#[derive(Parser)]
#[command(name = "artic", version, about = "Articulated-structure prediction toolkit")]
struct Cli {
    /// Log filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct SeedArg {
    /// Random seed; falls back to PARTIC_SEED.
    #[arg(long, env = "PARTIC_SEED")]
    pub seed: Option<u64>,
}

#[derive(Args, Clone, Debug)]
pub struct ConfigArg {
    /// TOML file with [model], [train], [decode] and [eval] tables; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate procedural articulated objects as OBJ + articulation JSON pairs.
    Synth(SynthArgs),
    /// Sample a point cloud from a mesh into the binary point-cloud format.
    Sample(SampleArgs),
    /// Train a model on a directory of OBJ + JSON pairs.
    Train(TrainArgs),
    /// Predict the articulated structure of a mesh.
    Infer(InferArgs),
    /// Pose a mesh with its articulated structure.
    Articulate(ArticulateArgs),
    /// Write a URDF bundle for a mesh and its articulated structure.
    ExportUrdf(ExportUrdfArgs),
    /// Score predicted structures against ground truth.
    Eval(EvalArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, value_parser = parse_kind)]
    pub kind: ObjectKind,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long, default_value_t = 2048)]
    pub points: usize,
    /// Fraction of samples placed on sharp edges.
    #[arg(long, default_value_t = 0.5)]
    pub sharp_fraction: f64,
    /// Dihedral angle in degrees above which an edge counts as sharp.
    #[arg(long, default_value_t = 30.0)]
    pub angle_threshold: f64,
    /// Put one sample at every face centroid first.
    #[arg(long)]
    pub cover_all_faces: bool,
    /// Center and scale to a unit bounding box.
    #[arg(long)]
    pub normalize: bool,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Directory of `<name>.obj` + `<name>.json` pairs.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint to write; the model config goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Start from this checkpoint instead of a fresh initialization.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Loss curve CSV; defaults to `<out>.loss.csv`.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    /// Log the loss every this many steps.
    #[arg(long, default_value_t = 100)]
    pub log_every: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Args)]
pub struct InferArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Articulation JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also export a URDF bundle into this directory.
    #[arg(long)]
    pub urdf: Option<PathBuf>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Skip connected-component label refinement.
    #[arg(long)]
    pub no_refine: bool,
    /// Fixed root query for the kinematic tree instead of sweeping all roots.
    #[arg(long)]
    pub root: Option<usize>,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PoseChoice {
    Rest,
    Full,
    Random,
}

#[derive(Args)]
pub struct ArticulateArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub artic: PathBuf,
    /// Posed OBJ to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = PoseChoice::Full)]
    pub state: PoseChoice,
    /// Joint values as JSON `{"<part>": {"prismatic": v, "revolute": v}}`; overrides --state.
    #[arg(long)]
    pub pose: Option<PathBuf>,
    /// Also write the structure re-expressed in the posed frame.
    #[arg(long)]
    pub artic_out: Option<PathBuf>,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Args)]
pub struct ExportUrdfArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub artic: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Predicted articulation JSON, or a directory of them with --gt-dir.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth articulation JSON.
    #[arg(long, conflicts_with = "gt_dir", required_unless_present = "gt_dir")]
    pub gt: Option<PathBuf>,
    #[arg(long, requires = "gt")]
    pub mesh: Option<PathBuf>,
    /// Directory of ground-truth `<name>.json` + `<name>.obj`; predictions are
    /// `<pred>/<name>.json`.
    #[arg(long)]
    pub gt_dir: Option<PathBuf>,
    /// Report JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-instance CSV rows; defaults to `<out>.csv`.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Instances evaluated in parallel in directory mode.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Args)]
pub struct GradcheckArgs {
    /// Random instances per op.
    #[arg(long, default_value_t = 5)]
    pub instances: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[command(flatten)]
    pub seed: SeedArg,
}

fn parse_kind(s: &str) -> Result<ObjectKind, String> {
    s.parse::<ObjectKind>().map_err(|e| e.to_string())
}

/// Exit codes: 2 bad input, 3 numerical failure, 4 I/O.
fn exit_code(e: &Error) -> (u8, &'static str) {
    match e {
        Error::Io { .. } => (4, "io"),
        Error::Numerical(_) => (3, "numerical"),
        Error::Parse(_) | Error::Shape { .. } | Error::InvalidInput(_) | Error::InvalidStructure(_) => {
            (2, "bad_input")
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Sample(a) => commands::sample(a),
        Command::Train(a) => commands::train(a),
        Command::Infer(a) => commands::infer(a),
        Command::Articulate(a) => commands::articulate(a),
        Command::ExportUrdf(a) => commands::export_urdf(a),
        Command::Eval(a) => commands::eval(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, kind) = exit_code(&e);
            let msg = e.to_string().replace('\n', " ");
            eprintln!("artic-error kind={kind} code={code}: {msg}");
            ExitCode::from(code)
        }
    }
}
