//! `channelkan` command-line tool.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use channelkan::channel::{
    generate_splits, load_dataset, save_dataset, write_metadata, Dataset, DATASET_MAGIC,
    SPLIT_NAMES,
};
use channelkan::eval::{
    evaluate_predictions, fit_linear_ar, predict_dataset, run_experiment_grid, BaselineKind,
    BaselinePredictor, GridOptions, LinkConfig, MetricReport, ModelPredictor, Predictor,
};
use channelkan::model::{load_checkpoint, Ablation, ModelParams};
use channelkan::numerics::ComplexTensor;
use channelkan::train::{train, TrainSession};
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{write_manifest, RunConfig};

const DATA_ENV: &str = "CHANNELKAN_DATA_DIR";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(channelkan::Error),
}

impl From<channelkan::Error> for CliError {
    fn from(e: channelkan::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use channelkan::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_numeric() => 3,
            CliError::Core(E::Config(_) | E::Precondition(_)) => 1,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "channelkan", version, about = "CSI prediction with a hybrid CNN / Chebyshev-KAN model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config file or a manifest from an earlier run.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesise train/val/test datasets.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "KMH")]
        velocity: Option<f64>,
        /// History noise SNR in dB, or `clean`.
        #[arg(long, value_name = "DB")]
        snr: Option<String>,
    },
    /// Train a model on a generated dataset directory.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset directory (defaults to $CHANNELKAN_DATA_DIR).
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        #[arg(long, value_name = "N")]
        epochs: Option<usize>,
        #[arg(long, value_enum)]
        ablate: Option<AblateArg>,
        /// Continue from a checkpoint.
        #[arg(long, value_name = "PATH")]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint or a baseline on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum)]
        baseline: Option<BaselineArg>,
        /// Score the ground truth itself.
        #[arg(long)]
        oracle: bool,
        #[arg(long, value_enum)]
        ablate: Option<AblateArg>,
        /// Link SNRs in dB for SE and BER.
        #[arg(long, value_name = "DB[,DB...]", value_delimiter = ',')]
        snr: Vec<f64>,
    },
    /// Run a velocity x SNR x ablation x seed sweep.
    Grid {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "KMH[,KMH...]", value_delimiter = ',')]
        velocity: Vec<f64>,
        /// History noise SNRs in dB; `clean` for none.
        #[arg(long, value_name = "DB[,DB...]", value_delimiter = ',')]
        snr: Vec<String>,
        #[arg(long, value_name = "N")]
        epochs: Option<usize>,
        /// Ablations to add to the full model; `all` for the four variants.
        #[arg(long, value_delimiter = ',')]
        ablate: Vec<GridAblateArg>,
        #[arg(long, value_name = "N[,N...]", value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, value_name = "N")]
        jobs: Option<usize>,
    },
    /// Print the header of a dataset or checkpoint file.
    Inspect { path: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AblateArg {
    NoMultiscale,
    NoCnnkan,
    NoDualdomain,
    NoKan,
}

impl AblateArg {
    fn ablation(self) -> Ablation {
        let mut a = Ablation::FULL;
        match self {
            Self::NoMultiscale => a.multiscale = false,
            Self::NoCnnkan => a.cnn_kan = false,
            Self::NoDualdomain => a.dual_domain = false,
            Self::NoKan => a.kan = false,
        }
        a
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GridAblateArg {
    All,
    NoMultiscale,
    NoCnnkan,
    NoDualdomain,
    NoKan,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BaselineArg {
    Hold,
    Ar,
}

fn parse_snr(s: &str) -> Result<Option<f64>, CliError> {
    match s.trim() {
        "clean" | "inf" => Ok(None),
        v => v
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(Some)
            .ok_or_else(|| CliError::Usage(format!("invalid SNR `{v}`"))),
    }
}

fn base_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.paths.out = Some(o.clone());
    }
    cfg.sync_model_dims();
    Ok(cfg)
}

fn data_dir(cfg: &RunConfig) -> PathBuf {
    cfg.paths
        .data
        .clone()
        .or_else(|| std::env::var_os(DATA_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"))
}

fn out_dir(cfg: &RunConfig, default: &str) -> PathBuf {
    cfg.paths.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

/// Creates `dir`, refusing to reuse one that already holds a run.
fn fresh_dir(dir: &Path) -> Result<(), CliError> {
    if dir.join("manifest.json").exists() {
        return Err(CliError::Usage(format!(
            "{} already contains a run; choose another --out",
            dir.display()
        )));
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

fn load_split(dir: &Path, name: &str) -> Result<Dataset, CliError> {
    let path = dir.join(format!("{name}.ckd"));
    if !path.exists() {
        return Err(CliError::Core(channelkan::Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("missing dataset {}", path.display()),
        ))));
    }
    Ok(load_dataset(&path)?)
}

fn cmd_generate(common: Common, velocity: Option<f64>, snr: Option<String>) -> Result<(), CliError> {
    let mut cfg = base_config(&common)?;
    if let Some(v) = velocity {
        if !v.is_finite() || v < 0.0 {
            return Err(CliError::Usage(format!("velocity must be >= 0, got {v}")));
        }
        cfg.data.velocity_kmh = v;
    }
    if let Some(s) = snr {
        cfg.data.snr_db = parse_snr(&s)?;
    }
    cfg.system.validate()?;
    let out = cfg.paths.out.clone().unwrap_or_else(|| data_dir(&cfg));
    cfg.paths.out = Some(out.clone());
    fresh_dir(&out)?;
    let files: Vec<PathBuf> = SPLIT_NAMES.iter().map(|n| out.join(format!("{n}.ckd"))).collect();
    write_manifest(&out, "generate", &cfg, files.clone())?;

    let sets = generate_splits(&cfg.data, &cfg.splits, &cfg.system, cfg.seed)?;
    for ((set, path), (split, name)) in sets.iter().zip(&files).zip(SPLIT_NAMES.iter().enumerate()) {
        save_dataset(set, path)?;
        let snr = cfg.data.snr_db.map_or_else(|| "clean".to_string(), |s| s.to_string());
        write_metadata(
            &out.join(format!("{name}.meta.txt")),
            &[
                ("seed", cfg.seed.to_string()),
                ("split", format!("{split} ({name})")),
                ("velocity_kmh", cfg.data.velocity_kmh.to_string()),
                ("snr_db", snr),
                ("windows", set.len().to_string()),
                ("history_len", set.history_len.to_string()),
                ("horizon", set.horizon.to_string()),
                ("system", serde_json::to_string(&cfg.system).map_err(channelkan::Error::from)?),
                ("generator", serde_json::to_string(&cfg.data).map_err(channelkan::Error::from)?),
            ],
        )?;
        println!("{}: {} windows", path.display(), set.len());
    }
    Ok(())
}

fn cmd_train(
    common: Common,
    data: Option<PathBuf>,
    epochs: Option<usize>,
    ablate: Option<AblateArg>,
    resume: Option<PathBuf>,
) -> Result<(), CliError> {
    let mut cfg = base_config(&common)?;
    if let Some(d) = data {
        cfg.paths.data = Some(d);
    }
    if let Some(e) = epochs {
        cfg.train.epochs = e;
    }
    if let Some(a) = ablate {
        cfg.model.ablation = a.ablation();
    }
    if let Some(r) = resume {
        cfg.paths.resume = Some(r);
    }
    cfg.train.seed = cfg.seed;
    cfg.model.validate()?;
    cfg.train.validate()?;
    let data = data_dir(&cfg);
    cfg.paths.data = Some(data.clone());
    let out = out_dir(&cfg, "run");
    cfg.paths.out = Some(out.clone());

    let train_set = load_split(&data, "train")?;
    let val_set = load_split(&data, "val")?;
    let resume = match &cfg.paths.resume {
        Some(p) => Some(load_checkpoint(p, Some(&cfg.model))?),
        None => None,
    };
    fresh_dir(&out)?;
    let ckpt = out.join("model.ckpt");
    let report_path = out.join("train_report.csv");
    write_manifest(&out, "train", &cfg, vec![ckpt.clone(), report_path.clone()])?;

    let params = ModelParams::init(&cfg.model, cfg.seed)?;
    let session = TrainSession {
        checkpoint: Some(ckpt.clone()),
        resume,
    };
    let outcome = train(&cfg.model, params, &train_set, &val_set, &cfg.train, &session)?;
    outcome.report.write_csv(&report_path)?;
    outcome.report.write_timing_csv(&out.join("timing.csv"))?;
    for e in &outcome.report.epochs {
        println!(
            "epoch {:>3}  train {:.4e}  val {:.4e}  lr {:.2e}",
            e.epoch, e.train_loss, e.val_nmse, e.lr
        );
    }
    match (outcome.report.best_epoch, outcome.report.best_val_nmse) {
        (Some(e), Some(v)) => println!("best epoch {e} (val NMSE {v:.4e}) -> {}", ckpt.display()),
        _ => println!("no epochs run; saved parameters -> {}", ckpt.display()),
    }
    Ok(())
}

/// Velocity and SNR recorded in a dataset's metadata sidecar.
fn read_condition(dir: &Path, name: &str) -> (Option<f64>, Option<Option<f64>>) {
    let Ok(text) = fs::read_to_string(dir.join(format!("{name}.meta.txt"))) else {
        return (None, None);
    };
    let mut velocity = None;
    let mut snr = None;
    for line in text.lines() {
        match line.split_once(" = ") {
            Some(("velocity_kmh", v)) => velocity = v.parse().ok(),
            Some(("snr_db", v)) => snr = parse_snr(v).ok(),
            _ => {}
        }
    }
    (velocity, snr)
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    common: Common,
    data: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
    baseline: Option<BaselineArg>,
    oracle: bool,
    ablate: Option<AblateArg>,
    snr: Vec<f64>,
) -> Result<(), CliError> {
    let mut cfg = base_config(&common)?;
    if let Some(d) = data {
        cfg.paths.data = Some(d);
    }
    if let Some(c) = checkpoint {
        cfg.paths.checkpoint = Some(c);
    }
    if let Some(b) = baseline {
        cfg.paths.baseline = Some(match b {
            BaselineArg::Hold => BaselineKind::Hold,
            BaselineArg::Ar => BaselineKind::Ar,
        });
    }
    if oracle {
        cfg.paths.oracle = true;
    }
    if !snr.is_empty() {
        cfg.eval_snrs = snr;
    }
    if cfg.eval_snrs.is_empty() || cfg.eval_snrs.iter().any(|s| !s.is_finite()) {
        return Err(CliError::Usage("--snr needs finite dB values".into()));
    }
    let sources = usize::from(cfg.paths.checkpoint.is_some())
        + usize::from(cfg.paths.baseline.is_some())
        + usize::from(cfg.paths.oracle);
    if sources != 1 {
        return Err(CliError::Usage(
            "give exactly one of --checkpoint, --baseline or --oracle".into(),
        ));
    }
    let data = data_dir(&cfg);
    cfg.paths.data = Some(data.clone());
    let out = out_dir(&cfg, "eval");
    cfg.paths.out = Some(out.clone());

    let test = load_split(&data, "test")?;
    let (method, ablation, preds): (String, String, Vec<ComplexTensor>) =
        if let Some(path) = &cfg.paths.checkpoint {
            let ckpt = load_checkpoint(path, None)?;
            if let Some(a) = ablate {
                if ckpt.config.ablation != a.ablation() {
                    return Err(CliError::Core(channelkan::Error::ConfigMismatch(format!(
                        "checkpoint is `{}`, --ablate asked for `{}`",
                        ckpt.config.ablation.label(),
                        a.ablation().label()
                    ))));
                }
            }
            let label = ckpt.config.ablation.label();
            cfg.model = ckpt.config.clone();
            let p = ModelPredictor {
                config: ckpt.config,
                params: ckpt.params,
            };
            (p.name(), label, predict_dataset(&p, &test)?)
        } else if let Some(kind) = cfg.paths.baseline {
            let p: BaselinePredictor = match kind {
                BaselineKind::Hold => BaselinePredictor::Hold,
                BaselineKind::Ar => fit_linear_ar(&load_split(&data, "train")?, cfg.grid.ar_order)?,
            };
            if p.fallback_count() > 0 {
                eprintln!("warning: {} AR features fell back to hold", p.fallback_count());
            }
            (p.name(), "-".into(), predict_dataset(&p, &test)?)
        } else {
            let truth = test.samples.iter().map(|s| s.future.clone()).collect();
            ("oracle".into(), "-".into(), truth)
        };

    fresh_dir(&out)?;
    let csv = out.join("eval.csv");
    write_manifest(&out, "eval", &cfg, vec![csv.clone()])?;
    let (velocity, history_snr) = read_condition(&data, "test");
    let mut rows = Vec::new();
    for &link_snr in &cfg.eval_snrs {
        let link = LinkConfig {
            snr_db: link_snr,
            ..cfg.link
        };
        let m = evaluate_predictions(&preds, &test, &link, cfg.seed)?;
        if m.nmse_excluded > 0 {
            eprintln!("warning: {} zero-energy test samples excluded", m.nmse_excluded);
        }
        let row = MetricReport {
            velocity_kmh: velocity.unwrap_or(cfg.data.velocity_kmh),
            snr_db: history_snr.unwrap_or(cfg.data.snr_db),
            method: method.clone(),
            ablation: ablation.clone(),
            seed: cfg.seed,
            link_snr_db: link_snr,
            nmse: m.nmse,
            nmse_excluded: m.nmse_excluded,
            se_bps_hz: m.se_bps_hz,
            se_fallbacks: m.se_fallbacks,
            ber: m.ber,
        };
        println!(
            "{method} @ {link_snr} dB: nmse {:.4e}  se {:.4} bps/Hz  ber {:.4e}",
            row.nmse, row.se_bps_hz, row.ber
        );
        rows.push(row);
    }
    MetricReport::write_csv(&rows, &csv)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_grid(
    common: Common,
    velocity: Vec<f64>,
    snr: Vec<String>,
    epochs: Option<usize>,
    ablate: Vec<GridAblateArg>,
    seeds: Vec<u64>,
    jobs: Option<usize>,
) -> Result<bool, CliError> {
    let mut cfg = base_config(&common)?;
    if !velocity.is_empty() {
        cfg.grid.velocities = velocity;
    }
    if !snr.is_empty() {
        cfg.grid.snrs = snr.iter().map(|s| parse_snr(s)).collect::<Result<_, _>>()?;
    }
    if let Some(e) = epochs {
        cfg.train.epochs = e;
    }
    if !ablate.is_empty() {
        let mut labels = Vec::new();
        for a in ablate {
            let add: &[&str] = match a {
                GridAblateArg::All => &["no-multiscale", "no-cnnkan", "no-dualdomain", "no-kan"],
                GridAblateArg::NoMultiscale => &["no-multiscale"],
                GridAblateArg::NoCnnkan => &["no-cnnkan"],
                GridAblateArg::NoDualdomain => &["no-dualdomain"],
                GridAblateArg::NoKan => &["no-kan"],
            };
            for l in add {
                if !labels.iter().any(|x: &String| x == l) {
                    labels.push(l.to_string());
                }
            }
        }
        cfg.grid.ablations = labels;
    }
    if !seeds.is_empty() {
        cfg.grid.seeds = seeds;
    } else if common.seed.is_some() {
        cfg.grid.seeds = vec![cfg.seed];
    }
    let grid = cfg.grid_config();
    grid.validate()?;
    let out = out_dir(&cfg, "grid");
    cfg.paths.out = Some(out.clone());
    fs::create_dir_all(&out)?;
    let outputs = ["grid.csv", "summary.json", "curve_velocity.csv", "curve_snr.csv"];
    write_manifest(&out, "grid", &cfg, outputs.iter().map(|f| out.join(f)).collect())?;

    let opts = GridOptions {
        jobs: jobs.unwrap_or(1),
        verbose: true,
    };
    let outcome = run_experiment_grid(&grid, &out, &opts)?;
    let failed = outcome.failed();
    println!(
        "{} cells, {} resumed, {failed} failed -> {}",
        outcome.cells.len(),
        outcome.cells.iter().filter(|c| c.resumed).count(),
        out.join("grid.csv").display()
    );
    for c in outcome.cells.iter().filter(|c| c.error.is_some()) {
        eprintln!("failed: {} ({})", c.key, c.error.as_deref().unwrap_or_default());
    }
    Ok(failed == 0)
}

fn cmd_inspect(path: PathBuf) -> Result<(), CliError> {
    let mut magic = [0u8; 4];
    {
        use std::io::Read;
        fs::File::open(&path)?.read_exact(&mut magic)?;
    }
    if &magic == DATASET_MAGIC {
        let d = load_dataset(&path)?;
        println!("dataset {}", path.display());
        println!(
            "  system: {}",
            serde_json::to_string(&d.system).map_err(channelkan::Error::from)?
        );
        println!("  history_len {}  horizon {}  windows {}", d.history_len, d.horizon, d.len());
        println!(
            "  sample shapes: history {:?}  future {:?}",
            [d.history_len, d.system.subcarriers, d.system.pairs()],
            [d.horizon, d.system.subcarriers, d.system.pairs()]
        );
    } else {
        let c = load_checkpoint(&path, None)?;
        println!("checkpoint {}", path.display());
        println!(
            "  config: {}",
            serde_json::to_string(&c.config).map_err(channelkan::Error::from)?
        );
        println!("  epochs_done {}  optimizer {}", c.epochs_done, c.optimizer.is_some());
        println!("  {} tensors, {} scalars", c.params.len(), c.params.scalar_count());
        for (_, name, t) in c.params.iter() {
            println!("    {name:<24} {:?}", t.shape());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Generate { common, velocity, snr } => cmd_generate(common, velocity, snr).map(|_| true),
        Command::Train {
            common,
            data,
            epochs,
            ablate,
            resume,
        } => cmd_train(common, data, epochs, ablate, resume).map(|_| true),
        Command::Eval {
            common,
            data,
            checkpoint,
            baseline,
            oracle,
            ablate,
            snr,
        } => cmd_eval(common, data, checkpoint, baseline, oracle, ablate, snr).map(|_| true),
        Command::Grid {
            common,
            velocity,
            snr,
            epochs,
            ablate,
            seeds,
            jobs,
        } => cmd_grid(common, velocity, snr, epochs, ablate, seeds, jobs),
        Command::Inspect { path } => cmd_inspect(path).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
