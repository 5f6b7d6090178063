//! Command-line front end: `fit-basis`, `bench`, `train` and `gradcheck`.
//!
//! Every command writes its outputs plus one `<name>_manifest.json` into the
//! output directory (`--out`, else `$FASTKAN_OUT`, else `./out`). Only the
//! manifest carries timing, so other outputs are byte-identical between runs
//! with the same seed.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::basis::{
    BSplineBasis, Family, GaussianRbfBasis, GridSpec, DEFAULT_CENTERS, DEFAULT_GRIDS, DEFAULT_HI, DEFAULT_LO,
    DEFAULT_ORDER,
};
use crate::basisfit::{emit_fit_curves, fit_transform};
use crate::bench::{bench_table, emit_bench, run_bench, BenchConfig, BenchMode};
use crate::data::{load_mnist, split_validation, subset, synth_regression, xor, Dataset, MnistSplit, SynthTask};
use crate::error::{KanError, Result};
use crate::gradcheck::{run_gradcheck, GradCheckConfig, DEFAULT_EPSILON, DEFAULT_TOLERANCE};
use crate::network::{save, train, EpochRecord, Loss, Network, NetworkSpec, OptimizerKind, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Default output directory when `--out` is not given.
pub const OUT_DIR_ENV: &str = "FASTKAN_OUT";
/// Default MNIST directory when `--mnist-dir` is not given.
pub const MNIST_DIR_ENV: &str = "FASTKAN_MNIST_DIR";

pub fn exit_code(err: &KanError) -> i32 {
    match err {
        KanError::Config(_) | KanError::Argument(_) | KanError::Shape { .. } | KanError::Singular { .. } => {
            EXIT_USAGE
        }
        KanError::Data(_) | KanError::Format { .. } | KanError::Io { .. } => EXIT_DATA,
        KanError::NonFinite { .. } => EXIT_NUMERIC,
        KanError::State(_) => EXIT_CHECK_FAILED,
    }
}

#[derive(Debug, Parser)]
#[command(name = "fastkan", version, about = "KAN layers with B-spline and Gaussian RBF bases")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit cubic B-spline bases with linear combinations of Gaussian RBFs.
    FitBasis(FitBasisArgs),
    /// Time forward and forward+backward of one KAN layer per family.
    Bench(BenchArgs),
    /// Train a KAN on MNIST or a synthetic task.
    Train(TrainArgs),
    /// Compare every backward pass with central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitBasisArgs {
    /// Spline knot intervals G.
    #[arg(long, default_value_t = DEFAULT_GRIDS)]
    pub grids: usize,
    /// Spline order k.
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    pub order: usize,
    /// Number of Gaussian centers N.
    #[arg(long, default_value_t = DEFAULT_CENTERS)]
    pub centers: usize,
    /// Gaussian width h; defaults to the center spacing.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Grid range shared by both bases.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true,
          default_values_t = [DEFAULT_LO, DEFAULT_HI])]
    pub range: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Widen the sampled interval by this many knot spacings on each side.
    #[arg(long, default_value_t = 0.0)]
    pub margin: f64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Forward,
    ForwardBackward,
    Both,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    pub in_dim: usize,
    #[arg(long, default_value_t = 100)]
    pub out_dim: usize,
    /// Basis functions per input.
    #[arg(long, default_value_t = 8)]
    pub bases: usize,
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    #[arg(long, default_value_t = 10)]
    pub rounds: usize,
    #[arg(long, default_value_t = 1000)]
    pub repeats: usize,
    #[arg(long, default_value_t = 100)]
    pub warmup: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = Family::Spline)]
    pub baseline: Family,
    #[arg(long, default_value_t = Family::Rbf)]
    pub candidate: Family,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// Comma-separated layer widths, input first.
    #[arg(long, value_delimiter = ',', default_value = "784,64,10")]
    pub arch: Vec<usize>,
    #[arg(long, default_value_t = Family::Rbf)]
    pub family: Family,
    /// Basis functions per input.
    #[arg(long, default_value_t = 8)]
    pub bases: usize,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory holding the MNIST IDX files (plain or .gz).
    #[arg(long)]
    pub mnist_dir: Option<PathBuf>,
    /// Class-stratified training subset size.
    #[arg(long)]
    pub subset: Option<usize>,
    /// Validation rows; defaults to subset/5 with --subset, else 10000.
    #[arg(long)]
    pub val: Option<usize>,
    /// Train on a synthetic task instead: xor, sine, gaussian_bump, product.
    #[arg(long)]
    pub synth: Option<String>,
    /// Sample count for synthetic regression tasks.
    #[arg(long, default_value_t = 1000)]
    pub synth_samples: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GradcheckArgs {
    /// Only check layers and networks of this family.
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// Written next to every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub started_at: f64,
    pub duration_s: f64,
    pub outputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub epoch_wall_times_s: Vec<f64>,
}

struct Run {
    command: &'static str,
    started_at: f64,
    clock: Instant,
    dir: PathBuf,
}

impl Run {
    fn start(command: &'static str, out: &Option<PathBuf>) -> Result<Self> {
        let dir = out.clone().unwrap_or_else(default_out_dir);
        std::fs::create_dir_all(&dir).map_err(|e| KanError::io(&dir, e))?;
        let started_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        Ok(Self {
            command,
            started_at,
            clock: Instant::now(),
            dir,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn finish(
        self,
        manifest_name: &str,
        config: &impl Serialize,
        seed: u64,
        mut outputs: Vec<PathBuf>,
        epoch_wall_times_s: Vec<f64>,
    ) -> Result<PathBuf> {
        let path = self.path(manifest_name);
        outputs.push(path.clone());
        let manifest = RunManifest {
            command: self.command.to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: self.started_at,
            duration_s: self.clock.elapsed().as_secs_f64(),
            outputs,
            epoch_wall_times_s,
        };
        write_json(&path, &manifest)?;
        Ok(path)
    }
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("out"), PathBuf::from)
}

pub fn default_mnist_dir() -> PathBuf {
    std::env::var_os(MNIST_DIR_ENV).map_or_else(|| PathBuf::from("data/mnist"), PathBuf::from)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| KanError::io(path, e))
}

/// Runs one parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::FitBasis(a) => cmd_fit_basis(&a).map(|()| EXIT_OK),
        Command::Bench(a) => cmd_bench(&a).map(|()| EXIT_OK),
        Command::Train(a) => cmd_train(&a).map(|_| EXIT_OK),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}

pub fn cmd_fit_basis(args: &FitBasisArgs) -> Result<()> {
    let (lo, hi) = (args.range[0], args.range[1]);
    if !(args.margin >= 0.0 && args.margin.is_finite()) {
        return Err(KanError::Argument(format!("--margin must be non-negative, got {}", args.margin)));
    }
    let spline = BSplineBasis::new(GridSpec::new(lo, hi, args.grids, args.order)?);
    let grid_r = GridSpec::centers(lo, hi, args.centers)?;
    let rbf = match args.bandwidth {
        Some(h) => GaussianRbfBasis::with_bandwidth(grid_r, h)?,
        None => GaussianRbfBasis::new(grid_r)?,
    };
    let pad = args.margin * spline.knot_spacing();
    let run = Run::start("fit-basis", &args.out)?;
    let report = fit_transform(&spline, &rbf, args.samples, lo - pad, hi + pad)?;
    let csv = run.path("fit_curves.csv");
    let json = run.path("fit_report.json");
    emit_fit_curves(&report, &spline, &rbf, &csv)?;
    write_json(&json, &report)?;
    println!(
        "{} spline bases from {} Gaussians (h = {}): max |error| {:.6e}, rms {:.6e} over {} samples on [{}, {}]",
        report.transform.cols(),
        report.transform.rows(),
        report.bandwidth,
        report.max_abs_error,
        report.rms_error,
        report.samples,
        report.sample_lo,
        report.sample_hi,
    );
    let mut config = args.clone();
    config.bandwidth = Some(report.bandwidth);
    run.finish("fit-basis_manifest.json", &config, 0, vec![csv, json], Vec::new())?;
    Ok(())
}

pub fn bench_config(args: &BenchArgs) -> BenchConfig {
    BenchConfig {
        in_dim: args.in_dim,
        out_dim: args.out_dim,
        basis_count: args.bases,
        batch: args.batch,
        rounds: args.rounds,
        repeats_per_round: args.repeats,
        warmup: args.warmup,
        modes: match args.mode {
            ModeArg::Forward => vec![BenchMode::Forward],
            ModeArg::ForwardBackward => vec![BenchMode::ForwardBackward],
            ModeArg::Both => vec![BenchMode::Forward, BenchMode::ForwardBackward],
        },
        baseline: args.baseline,
        candidate: args.candidate,
    }
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let cfg = bench_config(args);
    cfg.validate()?;
    let run = Run::start("bench", &args.out)?;
    let report = run_bench(&cfg, args.seed)?;
    print!("{}", bench_table(&report));
    let outputs = emit_bench(&report, run.path("bench.csv"))?;
    run.finish("bench_manifest.json", &cfg, args.seed, outputs, Vec::new())?;
    Ok(())
}

/// Everything `train` resolved from its flags, as recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedTrain {
    pub network: NetworkSpec,
    pub train: TrainConfig,
    pub data: String,
    pub train_rows: usize,
    pub val_rows: usize,
}

fn train_data(args: &TrainArgs) -> Result<(Dataset, Dataset, Loss, String)> {
    match args.synth.as_deref() {
        Some("xor") => Ok((xor(), xor(), Loss::CrossEntropy, "xor".into())),
        Some(name) => {
            let task: SynthTask = name.parse()?;
            let ds = synth_regression(task, args.synth_samples, args.seed)?;
            let val = args.val.unwrap_or(args.synth_samples / 5).max(1);
            let (tr, va) = split_validation(&ds, val, args.seed)?;
            Ok((tr, va, Loss::Mse, name.to_string()))
        }
        None => {
            let dir = args.mnist_dir.clone().unwrap_or_else(default_mnist_dir);
            let full = load_mnist(&dir, MnistSplit::Train)?;
            let (pool, val) = match args.subset {
                Some(n) => {
                    let val = args.val.unwrap_or(n / 5);
                    (subset(&full, n + val, args.seed)?, val)
                }
                None => (full, args.val.unwrap_or(10_000)),
            };
            let (tr, va) = split_validation(&pool, val, args.seed)?;
            Ok((tr, va, Loss::CrossEntropy, format!("mnist:{}", dir.display())))
        }
    }
}

pub fn epoch_csv(records: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,val_accuracy\n");
    for r in records {
        out.push_str(&format!("{},{},{},{}\n", r.epoch, r.train_loss, r.val_loss, r.val_accuracy));
    }
    out
}

pub fn cmd_train(args: &TrainArgs) -> Result<Vec<EpochRecord>> {
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        learning_rate: args.lr,
        optimizer: match args.optimizer {
            OptimizerArg::Adam => OptimizerKind::adam(),
            OptimizerArg::Sgd => OptimizerKind::Sgd,
        },
        seed: args.seed,
        loss: Loss::CrossEntropy,
    };
    cfg.validate()?;
    let spec = NetworkSpec::new(&args.arch, args.family)
        .with_seed(args.seed)
        .with_basis_count(args.bases);
    let mut net = Network::build(&spec)?;
    let (train_set, val_set, loss, data) = train_data(args)?;
    let cfg = TrainConfig { loss, ..cfg };
    let run = Run::start("train", &args.out)?;
    let stem = format!("train_{}", args.family);
    let csv = run.path(&format!("{stem}.csv"));
    let records = train(&mut net, &train_set, &val_set, &cfg, |r| {
        println!(
            "epoch {:>3}  train_loss {:.6}  val_loss {:.6}  val_accuracy {:.4}",
            r.epoch, r.train_loss, r.val_loss, r.val_accuracy
        );
    })?;
    std::fs::write(&csv, epoch_csv(&records)).map_err(|e| KanError::io(&csv, e))?;
    let model = run.path(&format!("{stem}.kanf"));
    save(&net, &model)?;
    let last = records.last().expect("at least one epoch");
    println!("final val accuracy: {:.4}", last.val_accuracy);
    let resolved = ResolvedTrain {
        network: spec,
        train: cfg,
        data,
        train_rows: train_set.len(),
        val_rows: val_set.len(),
    };
    let walls = records.iter().map(|r| r.wall_time).collect();
    run.finish(&format!("{stem}_manifest.json"), &resolved, args.seed, vec![csv, model], walls)?;
    Ok(records)
}

pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<i32> {
    if !(args.tolerance > 0.0 && args.epsilon > 0.0) {
        return Err(KanError::Argument("--tolerance and --epsilon must be positive".into()));
    }
    let cfg = GradCheckConfig {
        family: args.family,
        tolerance: args.tolerance,
        epsilon: args.epsilon,
        seed: args.seed,
    };
    let run = Run::start("gradcheck", &args.out)?;
    let report = run_gradcheck(&cfg)?;
    for r in &report.results {
        println!(
            "{:<28} {:>5} entries  max rel error {:.3e}  {}",
            r.name,
            r.entries,
            r.max_rel_error,
            if r.passed { "ok" } else { "FAIL" }
        );
    }
    let json = run.path("gradcheck.json");
    write_json(&json, &report)?;
    run.finish("gradcheck_manifest.json", args, args.seed, vec![json], Vec::new())?;
    if report.passed() {
        Ok(EXIT_OK)
    } else {
        let worst = report.worst().expect("a failing report has results");
        eprintln!(
            "gradient check failed (tolerance {:e}): worst is {} at {} with relative error {:.3e}",
            report.tolerance, worst.name, worst.worst, worst.max_rel_error
        );
        Ok(EXIT_CHECK_FAILED)
    }
}
