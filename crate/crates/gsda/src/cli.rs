//! Command-line definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::io::CloudFormat;
use crate::manifest::SplitFilter;
use crate::report::ReportFormat;

#[derive(Debug, Parser)]
#[command(name = "gsda", version, about = "Graph spectral domain attacks on point-cloud classifiers")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for data generation, initialization, target assignment and SRS.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-instance jobs; defaults to all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = ReportFormat::Json)]
    pub format: ReportFormat,
}

impl Default for GlobalArgs {
    fn default() -> Self {
        Self { seed: 0, jobs: None, out_dir: PathBuf::from("."), format: ReportFormat::Json }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic shape dataset and its manifest.
    GenData(GenDataArgs),
    /// Train the mini-PointNet victim on a manifest.
    Train(TrainArgs),
    /// Classify cloud files or manifest entries.
    Classify(ClassifyArgs),
    /// Graph spectrum of one cloud, with optional band edits.
    Spectrum(SpectrumArgs),
    /// Run GSDA (or the coordinate baseline) over a manifest.
    Attack(AttackArgs),
    /// Re-classify adversarial clouds after a defense.
    DefendEval(DefendArgs),
    /// Misclassification matrix of adversarial sets across models.
    Transfer(TransferArgs),
}

fn cloud_format(s: &str) -> Result<CloudFormat, String> {
    s.parse()
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 50)]
    pub per_class: usize,
    #[arg(long, default_value_t = 256)]
    pub n_points: usize,
    /// Comma-separated class names; all eight by default.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    #[arg(long, default_value_t = 0.01)]
    pub jitter: f64,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Skip the random z-rotation and scaling.
    #[arg(long)]
    pub no_augment: bool,
    #[arg(long, value_parser = cloud_format, default_value = "xyz")]
    pub cloud_format: CloudFormat,
}

impl Default for GenDataArgs {
    fn default() -> Self {
        Self {
            per_class: 50,
            n_points: 256,
            classes: None,
            jitter: 0.01,
            train_fraction: 0.8,
            no_augment: false,
            cloud_format: CloudFormat::Xyz,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Dataset manifest.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f64,
    /// Shared per-point layer widths.
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    pub widths: Vec<usize>,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    /// Checkpoint path; `<out-dir>/model.gsda` by default.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

impl TrainArgs {
    pub fn new(data: PathBuf) -> Self {
        Self {
            data,
            epochs: 30,
            batch_size: 16,
            lr: 1e-3,
            weight_decay: 1e-4,
            widths: vec![64, 128, 256],
            hidden: 64,
            model_out: None,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Cloud files (xyz, off, ply).
    pub inputs: Vec<PathBuf>,
    /// Classify manifest entries instead of files.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SplitFilter::Test)]
    pub split: SplitFilter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Transform {
    Graph,
    Dct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BandName {
    None,
    Low,
    Mid,
    High,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = Transform::Graph)]
    pub transform: Transform,
    /// First index of the mid band; `n/32` by default.
    #[arg(long)]
    pub low_end: Option<usize>,
    /// First index of the high band; `n/4` by default.
    #[arg(long)]
    pub high_start: Option<usize>,
    /// Bands whose coefficients are zeroed, e.g. `mid,high`.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub remove_band: Vec<BandName>,
    /// Band that receives a constant offset on every coefficient.
    #[arg(long, value_enum)]
    pub perturb_band: Option<BandName>,
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    pub delta: f64,
}

impl SpectrumArgs {
    pub fn new(input: PathBuf) -> Self {
        Self {
            input,
            k: 10,
            transform: Transform::Graph,
            low_end: None,
            high_start: None,
            remove_band: Vec::new(),
            perturb_band: None,
            delta: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Xyz,
}

#[derive(Debug, Clone, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitFilter::Test)]
    pub split: SplitFilter,
    /// Keep only instances the model classifies correctly.
    #[arg(long)]
    pub only_correct: bool,
    /// Attack at most this many instances (after filtering).
    #[arg(long)]
    pub limit: Option<usize>,
    /// Targeted mode with round-robin targets over the other classes.
    #[arg(long)]
    pub targeted: bool,
    /// Run the coordinate-space baseline instead of GSDA.
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 10.0)]
    pub beta_init: f64,
    #[arg(long, default_value_t = 10)]
    pub binary_search_steps: usize,
    #[arg(long, default_value_t = 5.0)]
    pub w_chamfer: f64,
    #[arg(long, default_value_t = 0.5)]
    pub w_hausdorff: f64,
    #[arg(long, default_value_t = 3.0)]
    pub eps_max: f64,
    #[arg(long, default_value_t = 0.2)]
    pub eps_xyz: f64,
    /// `low`, `mid`, `high` or an explicit index range `a..b`.
    #[arg(long)]
    pub band_mask: Option<String>,
    #[arg(long)]
    pub low_end: Option<usize>,
    #[arg(long)]
    pub high_start: Option<usize>,
    #[arg(long, value_enum, default_value_t = Transform::Graph)]
    pub transform: Transform,
    /// Run every round for the full iteration budget.
    #[arg(long)]
    pub no_abort_early: bool,
}

impl AttackArgs {
    pub fn new(model: PathBuf, data: PathBuf) -> Self {
        Self {
            model,
            data,
            split: SplitFilter::Test,
            only_correct: false,
            limit: None,
            targeted: false,
            baseline: None,
            iterations: 500,
            lr: 0.01,
            k: 10,
            beta_init: 10.0,
            binary_search_steps: 10,
            w_chamfer: 5.0,
            w_hausdorff: 0.5,
            eps_max: 3.0,
            eps_xyz: 0.2,
            band_mask: None,
            low_end: None,
            high_start: None,
            transform: Transform::Graph,
            no_abort_early: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DefenseKind {
    None,
    Sor,
    Srs,
}

#[derive(Debug, Clone, Args)]
pub struct DefendArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Adversarial manifest written by `attack`.
    #[arg(long)]
    pub adv: PathBuf,
    #[arg(long, value_enum, default_value_t = DefenseKind::Sor)]
    pub defense: DefenseKind,
    #[arg(long, default_value_t = 2)]
    pub sor_k: usize,
    #[arg(long, default_value_t = 1.1)]
    pub sor_alpha: f64,
    #[arg(long)]
    pub sor_drop_ratio: Option<f64>,
    /// Evaluate SOR at each of these drop ratios, one summary row each.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Option<Vec<f64>>,
    /// Points removed by SRS.
    #[arg(long)]
    pub srs_drop: Option<usize>,
}

impl DefendArgs {
    pub fn new(model: PathBuf, adv: PathBuf, defense: DefenseKind) -> Self {
        Self { model, adv, defense, sor_k: 2, sor_alpha: 1.1, sor_drop_ratio: None, sweep: None, srs_drop: None }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TransferArgs {
    /// Target model checkpoints (columns).
    #[arg(long, value_delimiter = ',', required = true)]
    pub models: Vec<PathBuf>,
    /// Adversarial manifests (rows).
    #[arg(long, value_delimiter = ',', required = true)]
    pub adv: Vec<PathBuf>,
}
