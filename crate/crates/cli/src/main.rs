//! `fovea`: foveation, policy training, scanpaths and evaluation from the
//! command line. Every command writes into a run directory together with a
//! manifest.json that `fovea replay` can re-execute and check.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug, Clone)]
#[command(name = "fovea", version, about = "Foveated scene understanding experiments")]
pub struct Cli {
    /// Worker threads; 0 uses one per logical core [count]
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Seed for every random choice the command makes
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// TOML file with [corpus], [training], [oracle] and [eval] sections; flags override it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Directory for outputs and manifest.json [default: run, or <original>.replay]
    #[arg(long, global = true, value_name = "DIR")]
    pub run_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Foveate an image at one or more fixations
    Foveate(FoveateArgs),
    /// Generate a synthetic scene corpus
    Corpus(CorpusArgs),
    /// Train a fixation-policy chain on a corpus
    Train(TrainArgs),
    /// Generate scanpaths from a policy, priority maps, or at random
    Scanpath(ScanpathArgs),
    /// Score model scanpaths against human fixations
    Eval(EvalArgs),
    /// Re-run a recorded command and compare output hashes
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone)]
pub struct FieldArgs {
    /// Pixels per degree of visual angle [px/DVA]; overrides distance and pitch
    #[arg(long)]
    pub ppd: Option<u32>,
    /// Observer distance [cm]
    #[arg(long, default_value_t = 75.0)]
    pub observer_distance: f64,
    /// Physical pixel size [cm]
    #[arg(long, default_value_t = 0.0293)]
    pub pixel_pitch: f64,
}

#[derive(Args, Debug, Clone)]
pub struct FoveateArgs {
    /// Input image (PNG or PNM)
    #[arg(long)]
    pub image: PathBuf,
    /// Fixation as X,Y in image pixels [px]; repeat for several
    #[arg(long = "fixation", value_name = "X,Y", required = true)]
    pub fixations: Vec<String>,
    /// Resolution falloff α [DVA]; 20 is nearly uniform, 0.2 heavily blurred
    #[arg(long, default_value_t = fovea::foveation::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[command(flatten)]
    pub field: FieldArgs,
    /// Output file name inside the run directory
    #[arg(long, default_value = "foveated.png")]
    pub out: String,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutArg {
    Free,
    Quadrants,
}

#[derive(Args, Debug, Clone)]
pub struct CorpusArgs {
    /// Number of scenes
    #[arg(long)]
    pub scenes: Option<usize>,
    /// Field width [px]
    #[arg(long)]
    pub width: Option<usize>,
    /// Field height [px]
    #[arg(long)]
    pub height: Option<usize>,
    #[command(flatten)]
    pub field: FieldArgs,
    /// Fewest regions per scene [count]
    #[arg(long)]
    pub min_regions: Option<usize>,
    /// Most regions per scene [count]
    #[arg(long)]
    pub max_regions: Option<usize>,
    /// Smallest region side [DVA]
    #[arg(long)]
    pub size_min: Option<f64>,
    /// Largest region side [DVA]
    #[arg(long)]
    pub size_max: Option<f64>,
    /// Region arrangement
    #[arg(long, value_enum)]
    pub layout: Option<LayoutArg>,
    /// Upper weight of su_i regions [0..1]
    #[arg(long)]
    pub su_i_max_weight: Option<f64>,
    /// Minimum gap between the critical region and salient regions [DVA]
    #[arg(long)]
    pub salient_gap: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardArg {
    Semantic,
    Entropy,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// Corpus JSON from `fovea corpus`
    #[arg(long)]
    pub corpus: PathBuf,
    /// Reward driving the policy
    #[arg(long, value_enum, default_value = "semantic")]
    pub reward: RewardArg,
    /// Passes over the corpus [count]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Fixations per trajectory, one network each [count]
    #[arg(long)]
    pub fixations: Option<usize>,
    /// Trajectories per batch [count]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Softmax temperature τ
    #[arg(long)]
    pub temperature: Option<f64>,
    /// AdamW learning rate η
    #[arg(long)]
    pub lr: Option<f64>,
    /// AdamW weight decay λ
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Gradient-spreading σ [action cells]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Resolution falloff α [DVA]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Oracle descriptions per query [count]
    #[arg(long)]
    pub descriptions: Option<usize>,
    /// Feature channels C per action cell [count]
    #[arg(long)]
    pub channels: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Policy,
    Map,
    Random,
}

#[derive(Args, Debug, Clone)]
pub struct ScanpathArgs {
    /// Fixation source
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Corpus JSON
    #[arg(long)]
    pub corpus: PathBuf,
    /// Checkpoint for policy mode
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Directory of <scene_id>.png or <scene_id>.csv priority maps for map mode
    #[arg(long)]
    pub maps: Option<PathBuf>,
    /// Map model name; deepgaze, gbvs and itti-koch pick their IOR diameter
    #[arg(long, default_value = "map")]
    pub source: String,
    /// Inhibition-of-return diameter [DVA]
    #[arg(long)]
    pub ior: Option<f64>,
    /// Map smoothing disc diameter [DVA]
    #[arg(long, default_value_t = fovea::scanpath::MAP_SMOOTHING)]
    pub smooth: f64,
    /// Fixations after the initial one [count]; policy mode uses the chain length
    #[arg(long, default_value_t = 4)]
    pub fixations: usize,
    /// Scanpaths per scene in random mode [count]
    #[arg(long, alias = "n", default_value_t = 1)]
    pub runs: usize,
    /// Initial fixation: center, below-center, training-below-center, corners, or X,Y [px]
    #[arg(long, default_value = "below-center")]
    pub initial: String,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    /// Corpus JSON with the scenes' category regions
    #[arg(long)]
    pub corpus: PathBuf,
    /// Human fixation CSV
    #[arg(long)]
    pub human: PathBuf,
    /// Model fixations as NAME=CSV; repeat for several
    #[arg(long = "model", value_name = "NAME=CSV", required = true)]
    pub models: Vec<String>,
    /// Model whose NLL normalizes the others
    #[arg(long)]
    pub baseline: Option<String>,
    /// Distance from a segment edge that still counts as a hit [DVA]
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Center-bias disc diameter [DVA]
    #[arg(long)]
    pub center_bias: Option<f64>,
    /// Heatmap Gaussian σ [DVA]
    #[arg(long)]
    pub heatmap_sigma: Option<f64>,
    /// Post-initial fixations scored per sequence [count]
    #[arg(long)]
    pub fixations: Option<usize>,
    /// Subject resamples for frequency intervals [count]
    #[arg(long)]
    pub resamples: Option<usize>,
    /// Joint resamples for AUC and CC intervals [count]
    #[arg(long)]
    pub map_resamples: Option<usize>,
    /// Scenes whose heatmaps are rendered to PNG [count]
    #[arg(long, default_value_t = 3)]
    pub heatmaps: usize,
}

#[derive(Args, Debug, Clone)]
pub struct ReplayArgs {
    /// manifest.json of the run to repeat
    #[arg(long)]
    pub manifest: PathBuf,
}

/// Exit codes: 0 success, 2 usage, 3 data, 4 numeric.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<commands::UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<fovea::Error>() {
            return core_code(e);
        }
    }
    3
}

fn core_code(e: &fovea::Error) -> u8 {
    use fovea::Error as E;
    match e {
        E::Domain(_) | E::Shape(_) => 2,
        E::Numeric(_) => 4,
        E::Scene { source, .. } => core_code(source),
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::run(&cli, std::env::args().skip(1).collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
