//! Command-line front end: `sweep`, `train`, `evaluate` and `validate`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{
    self, load_dataset, run_sweep, validate_schema, DatasetFilter, RunSettings, TIMESTAMP_ENV,
};
use crate::error::{Error, Result};
use crate::mitigation::ZneConfig;
use crate::qagt::{self, GroupBy, LrSchedule, ModelConfig, SplitStrategy, TrainConfig};
use crate::qsim::NoiseModel;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "qburgers",
    version,
    about = "Quantum Burgers simulation, ZNE and learned error correction"
)]
pub struct Cli {
    /// Base seed for sampling, splits and initialization.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    pub out_dir: PathBuf,
    /// Fixed timestamp written into experiment files.
    #[arg(long, global = true, env = TIMESTAMP_ENV)]
    pub timestamp_override: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the parameter sweep and write experiment files plus a manifest.
    Sweep(SweepArgs),
    /// Train a corrector for one grid size.
    Train(TrainArgs),
    /// Score a checkpoint against the classical reference.
    Evaluate(EvaluateArgs),
    /// Check every experiment file in a directory against the schema.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_values_t = dataset::NU_VALUES)]
    pub nu_list: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = dataset::DT_VALUES)]
    pub dt_list: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = dataset::N_VALUES)]
    pub n_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = dataset::UL_VALUES)]
    pub ul_list: Vec<f64>,
    #[arg(long, default_value_t = crate::qsim::DEFAULT_SHOTS)]
    pub shots: u64,
    /// Single-qubit depolarizing probability.
    #[arg(long, default_value_t = 0.001)]
    pub noise_p1: f64,
    /// Two-qubit depolarizing probability.
    #[arg(long, default_value_t = 0.01)]
    pub noise_p2: f64,
    /// Readout flip probability (both directions).
    #[arg(long, default_value_t = 0.02)]
    pub noise_readout: f64,
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    pub zne: OnOff,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// JSON file of hardware counts keyed by record key.
    #[arg(long)]
    pub hardware_counts: Option<PathBuf>,
    /// Backend label stored with imported hardware counts.
    #[arg(long, default_value = "imported", requires = "hardware_counts")]
    pub hardware_backend: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Schedule {
    None,
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Sample,
    Combo,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Grid size the model is trained for.
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// `step` multiplies the rate by 0.1 after epoch 70.
    #[arg(long, value_enum, default_value_t = Schedule::None)]
    pub schedule: Schedule,
    /// Fraction of inputs replaced by hardware fields where available.
    #[arg(long, default_value_t = 0.0)]
    pub mix_ratio: f64,
    /// Decoupled weight decay on weight matrices.
    #[arg(long, default_value_t = 3.0)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Hold out individual snapshots or whole parameter combinations.
    #[arg(long, value_enum, default_value_t = SplitArg::Sample)]
    pub split: SplitArg,
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 128)]
    pub mlp_hidden: usize,
    /// Pool every output slot over the whole graph.
    #[arg(long)]
    pub no_lightcone_masks: bool,
    /// Defaults to `<out-dir>/model_N<dim>.json`.
    #[arg(long)]
    pub checkpoint_out: Option<PathBuf>,
    /// Defaults to `<out-dir>/history_N<dim>.csv`.
    #[arg(long)]
    pub history_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupArg {
    Dim,
    NuRegime,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data_dir: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value_t = GroupArg::Dim)]
    pub group_by: GroupArg,
    /// Only samples with viscosity in `[nu_min, nu_max]`.
    #[arg(long)]
    pub nu_min: Option<f64>,
    #[arg(long)]
    pub nu_max: Option<f64>,
    /// Report CSV path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub data_dir: PathBuf,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs, out: &mut dyn Write) -> Result<i32> {
    let combos = dataset::sweep(&a.nu_list, &a.dt_list, &a.n_list, &a.ul_list);
    if combos.is_empty() {
        return Err(Error::InvalidArgument("empty parameter grid".into()));
    }
    let settings = RunSettings {
        noise: NoiseModel {
            p1: a.noise_p1,
            p2: a.noise_p2,
            readout_p01: a.noise_readout,
            readout_p10: a.noise_readout,
        },
        shots: a.shots,
        base_seed: cli.seed,
        combo_index: 0,
        zne: (a.zne == OnOff::On).then(ZneConfig::default),
        hardware_backend: a
            .hardware_counts
            .as_ref()
            .map(|_| a.hardware_backend.clone()),
        hardware_import: a.hardware_counts.clone(),
        timestamp: cli.timestamp_override.clone(),
        ..RunSettings::default()
    };
    let summary = run_sweep(&combos, &settings, &cli.out_dir, a.jobs)?;
    let _ = writeln!(
        out,
        "combos {} records {} failed {} -> {}",
        summary.combos,
        summary.records,
        summary.failed_records,
        cli.out_dir.display()
    );
    Ok(EXIT_OK)
}

fn cmd_train(cli: &Cli, a: &TrainArgs, out: &mut dyn Write) -> Result<i32> {
    if !a.data_dir.is_dir() {
        return Err(Error::InvalidArgument(format!(
            "data directory {} does not exist",
            a.data_dir.display()
        )));
    }
    let filter = DatasetFilter {
        dims: Some(vec![a.dim]),
        ..DatasetFilter::default()
    };
    let data = load_dataset(&a.data_dir, &filter)?;
    let model_cfg = ModelConfig {
        num_gat_layers: a.layers,
        attention_heads: a.heads,
        hidden_dim: a.hidden,
        mlp_hidden: a.mlp_hidden,
        out_dim: a.dim,
        use_lightcone_masks: !a.no_lightcone_masks,
    };
    let train_cfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        lr_schedule: match a.schedule {
            Schedule::None => LrSchedule::Constant,
            Schedule::Step => LrSchedule::step_default(),
        },
        batch_size: a.batch_size,
        val_fraction: a.val_fraction,
        split: match a.split {
            SplitArg::Sample => SplitStrategy::Sample,
            SplitArg::Combo => SplitStrategy::Combo,
        },
        seed: cli.seed,
        hardware_mix_ratio: a.mix_ratio,
        weight_decay: a.weight_decay,
    };
    let outcome = qagt::train(&data.samples, &model_cfg, &train_cfg)?;
    let ckpt = a
        .checkpoint_out
        .clone()
        .unwrap_or_else(|| cli.out_dir.join(format!("model_N{}.json", a.dim)));
    let hist = a
        .history_out
        .clone()
        .unwrap_or_else(|| cli.out_dir.join(format!("history_N{}.csv", a.dim)));
    if let Some(parent) = ckpt.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    qagt::save_checkpoint(&outcome.params, &ckpt)?;
    write_file(&hist, &qagt::history_csv(&outcome.history))?;
    let last = outcome.history.last().expect("epochs >= 1");
    let _ = writeln!(
        out,
        "trained N={} on {} samples ({} held out): train_loss {:.4e} val_loss {:.4e} val_mae {:.4}",
        a.dim,
        outcome.train_keys.len(),
        outcome.val_keys.len(),
        last.train_loss,
        last.val_loss,
        last.val_mae
    );
    let _ = writeln!(
        out,
        "checkpoint {}\nhistory {}",
        ckpt.display(),
        hist.display()
    );
    Ok(EXIT_OK)
}

fn cmd_evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> Result<i32> {
    let params = qagt::load_checkpoint(&a.checkpoint)?;
    let filter = DatasetFilter {
        dims: Some(vec![params.config.out_dim]),
        nu_range: match (a.nu_min, a.nu_max) {
            (None, None) => None,
            (lo, hi) => Some((lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))),
        },
        ..DatasetFilter::default()
    };
    let data = load_dataset(&a.data_dir, &filter)?;
    if data.samples.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no samples of dimension {} match the filter in {}",
            params.config.out_dim,
            a.data_dir.display()
        )));
    }
    let report = qagt::evaluate(&params, &data.samples)?;
    let csv = report.to_csv(match a.group_by {
        GroupArg::Dim => GroupBy::Dim,
        GroupArg::NuRegime => GroupBy::NuRegime,
    });
    match &a.out {
        Some(path) => {
            write_file(path, &csv)?;
            let _ = writeln!(out, "report {}", path.display());
        }
        None => {
            let _ = write!(out, "{csv}");
        }
    }
    Ok(EXIT_OK)
}

fn cmd_validate(a: &ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    if !a.data_dir.is_dir() {
        return Err(Error::InvalidArgument(format!(
            "data directory {} does not exist",
            a.data_dir.display()
        )));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(&a.data_dir)
        .map_err(|e| Error::io(&a.data_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && p.file_name().is_some_and(|n| n != "manifest.json")
        })
        .collect();
    files.sort();
    if files.is_empty() {
        let _ = writeln!(
            err,
            "warning: no experiment files in {}",
            a.data_dir.display()
        );
        return Ok(EXIT_OK);
    }
    let mut bad = 0;
    for f in &files {
        let violations = validate_schema(f)?;
        if !violations.is_empty() {
            bad += 1;
            let _ = writeln!(err, "{}:", f.display());
            for v in violations {
                let _ = writeln!(err, "  {v}");
            }
        }
    }
    let _ = writeln!(out, "{} files checked, {} invalid", files.len(), bad);
    Ok(if bad == 0 { EXIT_OK } else { EXIT_RUNTIME })
}

/// Parses `args` and runs the selected command, returning the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Sweep(a) => cmd_sweep(&cli, a, out),
        Command::Train(a) => cmd_train(&cli, a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Validate(a) => cmd_validate(a, out, err),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
    }
}
