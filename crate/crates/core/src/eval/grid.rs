//! Velocity x SNR x method x seed sweeps with per-cell resume.
//!
//! Layout of an output directory:
//!
//! ```text
//! data/<condition>/{train,val,test}.ckd   cached datasets
//! cells/<key>.json                        finished cell (presence = done)
//! cells/<key>.ckpt, <key>.train.csv       trained model and its trace
//! grid.csv  summary.json  curve_velocity.csv  curve_snr.csv
//! ablation_table.csv  timing.csv
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::SPLIT_NAMES;
use super::{
    evaluate_predictions, fit_linear_ar, fmt_snr, predict_dataset, BaselineKind, BaselinePredictor,
    LinkConfig, MetricReport, Predictor,
};
use crate::channel::{
    generate_splits, load_dataset, save_dataset, Dataset, DatasetSpec, SplitSizes, SystemConfig,
};
use crate::error::{Error, Result};
use crate::model::{Ablation, ModelConfig, ModelParams};
use crate::train::{train, TrainConfig, TrainSession};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub system: SystemConfig,
    /// Template for every split; velocity, SNR and window count are set per
    /// cell.
    pub data: DatasetSpec,
    pub splits: SplitSizes,
    /// Template architecture; the ablation is set per cell.
    pub model: ModelConfig,
    /// Template optimiser settings; the seed is set per cell.
    pub train: TrainConfig,
    pub link: LinkConfig,
    pub velocities: Vec<f64>,
    /// History noise levels; `null` is a clean history.
    pub snrs: Vec<Option<f64>>,
    /// Ablation labels. `full` is always included.
    pub ablations: Vec<String>,
    pub seeds: Vec<u64>,
    pub baselines: Vec<BaselineKind>,
    pub ar_order: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let system = SystemConfig::desk();
        Self {
            model: ModelConfig::for_system(&system),
            system,
            data: DatasetSpec::default(),
            splits: SplitSizes::default(),
            train: TrainConfig::default(),
            link: LinkConfig::default(),
            velocities: vec![10.0, 60.0, 100.0],
            snrs: vec![Some(10.0)],
            ablations: vec!["full".into()],
            seeds: vec![0, 1, 2],
            baselines: vec![BaselineKind::Hold, BaselineKind::Ar],
            ar_order: 4,
        }
    }
}

/// What a cell evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Model(Ablation),
    Baseline(BaselineKind),
}

impl Method {
    fn label(&self, ar_order: usize) -> String {
        match self {
            Self::Model(a) => a.label(),
            Self::Baseline(BaselineKind::Hold) => "hold".into(),
            Self::Baseline(BaselineKind::Ar) => format!("ar{ar_order}"),
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.velocities.is_empty() || self.snrs.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("velocities, snrs and seeds must be non-empty".into()));
        }
        if self.splits.train == 0 || self.splits.val == 0 || self.splits.test == 0 {
            return Err(Error::Config("every split needs at least one window".into()));
        }
        if let Some(v) = self.velocities.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Config(format!("invalid velocity {v}")));
        }
        if let Some(s) = self.snrs.iter().flatten().find(|s| !s.is_finite()) {
            return Err(Error::Config(format!("invalid SNR {s}")));
        }
        let dims = (self.data.history_len, self.data.horizon, self.system.subcarriers, self.system.pairs());
        let model = (self.model.history_len, self.model.horizon, self.model.subcarriers, self.model.pairs);
        if dims != model {
            return Err(Error::ConfigMismatch(format!(
                "data (T, L, K, A) = {dims:?} but model expects {model:?}"
            )));
        }
        self.methods().map(|_| ())
    }

    /// Baselines first, then `full`, then the requested ablations in order.
    pub fn methods(&self) -> Result<Vec<Method>> {
        let mut out: Vec<Method> = self.baselines.iter().map(|&b| Method::Baseline(b)).collect();
        out.push(Method::Model(Ablation::FULL));
        for label in &self.ablations {
            let m = Method::Model(Ablation::from_label(label)?);
            if !out.contains(&m) {
                out.push(m);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default)]
pub struct GridOptions {
    /// Worker threads; conditions are distributed across them.
    pub jobs: usize,
    /// Print one line per finished cell to stderr.
    pub verbose: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub key: String,
    pub velocity_kmh: f64,
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub method: String,
    pub report: Option<MetricReport>,
    pub error: Option<String>,
    #[serde(skip)]
    pub train_seconds: Option<f64>,
    #[serde(skip)]
    pub resumed: bool,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub cells: Vec<CellOutcome>,
}

impl GridOutcome {
    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }

    pub fn reports(&self) -> Vec<MetricReport> {
        self.cells.iter().filter_map(|c| c.report.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Condition {
    velocity: f64,
    snr: Option<f64>,
    seed: u64,
}

impl Condition {
    fn tag(&self) -> String {
        format!("v{}_snr{}_s{}", self.velocity, fmt_snr(self.snr), self.seed)
    }
}

fn conditions(cfg: &GridConfig) -> Vec<Condition> {
    let mut out = Vec::new();
    for &velocity in &cfg.velocities {
        for &snr in &cfg.snrs {
            for &seed in &cfg.seeds {
                out.push(Condition { velocity, snr, seed });
            }
        }
    }
    out
}

fn load_or_generate(cfg: &GridConfig, cond: &Condition, dir: &Path) -> Result<[Dataset; 3]> {
    let paths = SPLIT_NAMES.map(|n| dir.join(format!("{n}.ckd")));
    if paths.iter().all(|p| p.exists()) {
        let [a, b, c] = &paths;
        return Ok([load_dataset(a)?, load_dataset(b)?, load_dataset(c)?]);
    }
    fs::create_dir_all(dir)?;
    let spec = DatasetSpec {
        velocity_kmh: cond.velocity,
        snr_db: cond.snr,
        ..cfg.data.clone()
    };
    let data = generate_splits(&spec, &cfg.splits, &cfg.system, cond.seed)?;
    for (d, p) in data.iter().zip(&paths) {
        save_dataset(d, p)?;
    }
    Ok(data)
}

struct CellRun {
    report: MetricReport,
    train_seconds: Option<f64>,
}

fn run_cell(
    cfg: &GridConfig,
    cond: &Condition,
    method: Method,
    data: &[Dataset; 3],
    cell_dir: &Path,
    key: &str,
) -> Result<CellRun> {
    let [train_set, val_set, test_set] = data;
    let mut train_seconds = None;
    let predictor: Box<dyn Predictor> = match method {
        Method::Baseline(BaselineKind::Hold) => Box::new(BaselinePredictor::Hold),
        Method::Baseline(BaselineKind::Ar) => Box::new(fit_linear_ar(train_set, cfg.ar_order)?),
        Method::Model(ablation) => {
            let model = ModelConfig {
                ablation,
                ..cfg.model.clone()
            };
            let tc = TrainConfig {
                seed: cond.seed,
                ..cfg.train.clone()
            };
            let clock = Instant::now();
            let params = ModelParams::init(&model, cond.seed)?;
            let session = TrainSession {
                checkpoint: Some(cell_dir.join(format!("{key}.ckpt"))),
                resume: None,
            };
            let out = train(&model, params, train_set, val_set, &tc, &session)?;
            out.report.write_csv(&cell_dir.join(format!("{key}.train.csv")))?;
            train_seconds = Some(clock.elapsed().as_secs_f64());
            Box::new(super::ModelPredictor {
                config: model,
                params: out.params,
            })
        }
    };
    let preds = predict_dataset(predictor.as_ref(), test_set)?;
    let m = evaluate_predictions(&preds, test_set, &cfg.link, cond.seed)?;
    let ablation = match method {
        Method::Model(a) => a.label(),
        Method::Baseline(_) => "-".into(),
    };
    Ok(CellRun {
        report: MetricReport {
            velocity_kmh: cond.velocity,
            snr_db: cond.snr,
            method: predictor.name(),
            ablation,
            seed: cond.seed,
            link_snr_db: cfg.link.snr_db,
            nmse: m.nmse,
            nmse_excluded: m.nmse_excluded,
            se_bps_hz: m.se_bps_hz,
            se_fallbacks: m.se_fallbacks,
            ber: m.ber,
        },
        train_seconds,
    })
}

fn run_condition(
    cfg: &GridConfig,
    cond: &Condition,
    methods: &[Method],
    out_dir: &Path,
    verbose: bool,
) -> Vec<CellOutcome> {
    let cell_dir = out_dir.join("cells");
    let mut data: Option<Result<[Dataset; 3]>> = None;
    let mut cells = Vec::with_capacity(methods.len());
    for &method in methods {
        let label = method.label(cfg.ar_order);
        let key = format!("{}_{label}", cond.tag());
        let done = cell_dir.join(format!("{key}.json"));
        let mut outcome = CellOutcome {
            key: key.clone(),
            velocity_kmh: cond.velocity,
            snr_db: cond.snr,
            seed: cond.seed,
            method: label,
            report: None,
            error: None,
            train_seconds: None,
            resumed: false,
        };
        if let Some(report) = fs::read(&done)
            .ok()
            .and_then(|b| serde_json::from_slice::<MetricReport>(&b).ok())
        {
            outcome.report = Some(report);
            outcome.resumed = true;
            cells.push(outcome);
            continue;
        }
        let data = data.get_or_insert_with(|| {
            load_or_generate(cfg, cond, &out_dir.join("data").join(cond.tag()))
        });
        let result = match data {
            Ok(d) => fs::create_dir_all(&cell_dir)
                .map_err(Error::from)
                .and_then(|_| run_cell(cfg, cond, method, d, &cell_dir, &key)),
            Err(e) => Err(Error::Precondition(format!("dataset unavailable: {e}"))),
        };
        match result.and_then(|run| {
            fs::write(&done, serde_json::to_vec_pretty(&run.report)?)?;
            Ok(run)
        }) {
            Ok(run) => {
                outcome.report = Some(run.report);
                outcome.train_seconds = run.train_seconds;
            }
            Err(e) => outcome.error = Some(e.to_string()),
        }
        if verbose {
            match (&outcome.report, &outcome.error) {
                (Some(r), _) => eprintln!("{key}: nmse {:.4e} se {:.3} ber {:.3e}", r.nmse, r.se_bps_hz, r.ber),
                (_, Some(e)) => eprintln!("{key}: FAILED {e}"),
                _ => {}
            }
        }
        cells.push(outcome);
    }
    cells
}

/// Runs every cell not already finished under `out_dir` and writes the
/// aggregate reports. A failing cell is recorded and the rest continue.
pub fn run_experiment_grid(cfg: &GridConfig, out_dir: &Path, opts: &GridOptions) -> Result<GridOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let methods = cfg.methods()?;
    let conds = conditions(cfg);
    let slots: Mutex<Vec<Option<Vec<CellOutcome>>>> = Mutex::new(vec![None; conds.len()]);
    let next = AtomicUsize::new(0);
    let jobs = opts.jobs.clamp(1, conds.len());

    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cond) = conds.get(i) else { break };
                let cells = run_condition(cfg, cond, &methods, out_dir, opts.verbose);
                slots.lock().expect("no panics while holding the lock")[i] = Some(cells);
            });
        }
    });

    let cells: Vec<CellOutcome> = slots
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .flat_map(|c| c.expect("every condition ran"))
        .collect();
    let outcome = GridOutcome { cells };
    write_outputs(cfg, &outcome, out_dir)?;
    Ok(outcome)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Serialize)]
struct MedianRow {
    method: String,
    velocity_kmh: f64,
    snr_db: Option<f64>,
    nmse: f64,
    se_bps_hz: f64,
    ber: f64,
    seeds: usize,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    grid: &'a GridConfig,
    cells: usize,
    failed: usize,
    outcomes: &'a [CellOutcome],
    medians: &'a [MedianRow],
}

fn medians(cfg: &GridConfig, outcome: &GridOutcome) -> Vec<MedianRow> {
    // Keyed by (method index, velocity index, snr index) to keep grid order.
    let methods: Vec<String> = cfg
        .methods()
        .unwrap_or_default()
        .iter()
        .map(|m| m.label(cfg.ar_order))
        .collect();
    let mut groups: BTreeMap<(usize, usize, usize), Vec<&MetricReport>> = BTreeMap::new();
    for c in &outcome.cells {
        let Some(r) = &c.report else { continue };
        let m = methods.iter().position(|l| *l == c.method);
        let v = cfg.velocities.iter().position(|&v| v == c.velocity_kmh);
        let s = cfg.snrs.iter().position(|&s| s == c.snr_db);
        if let (Some(m), Some(v), Some(s)) = (m, v, s) {
            groups.entry((m, v, s)).or_default().push(r);
        }
    }
    groups
        .into_iter()
        .map(|((m, v, s), rs)| MedianRow {
            method: methods[m].clone(),
            velocity_kmh: cfg.velocities[v],
            snr_db: cfg.snrs[s],
            nmse: median(rs.iter().map(|r| r.nmse).collect()),
            se_bps_hz: median(rs.iter().map(|r| r.se_bps_hz).collect()),
            ber: median(rs.iter().map(|r| r.ber).collect()),
            seeds: rs.len(),
        })
        .collect()
}

fn write_outputs(cfg: &GridConfig, outcome: &GridOutcome, out_dir: &Path) -> Result<()> {
    MetricReport::write_csv(&outcome.reports(), &out_dir.join("grid.csv"))?;
    let med = medians(cfg, outcome);

    let mut by_velocity: Vec<&MedianRow> = med.iter().collect();
    by_velocity.sort_by_key(|r| {
        (
            r.method.clone(),
            cfg.snrs.iter().position(|&s| s == r.snr_db),
            cfg.velocities.iter().position(|&v| v == r.velocity_kmh),
        )
    });
    let mut csv = String::from("method,snr_db,velocity_kmh,nmse_median,seeds\n");
    for r in &by_velocity {
        csv.push_str(&format!(
            "{},{},{},{:e},{}\n",
            r.method,
            fmt_snr(r.snr_db),
            r.velocity_kmh,
            r.nmse,
            r.seeds
        ));
    }
    fs::write(out_dir.join("curve_velocity.csv"), csv)?;

    let mut by_snr: Vec<&MedianRow> = med.iter().collect();
    by_snr.sort_by_key(|r| {
        (
            r.method.clone(),
            cfg.velocities.iter().position(|&v| v == r.velocity_kmh),
            cfg.snrs.iter().position(|&s| s == r.snr_db),
        )
    });
    let mut csv = String::from("method,velocity_kmh,snr_db,nmse_median,seeds\n");
    for r in &by_snr {
        csv.push_str(&format!(
            "{},{},{},{:e},{}\n",
            r.method,
            r.velocity_kmh,
            fmt_snr(r.snr_db),
            r.nmse,
            r.seeds
        ));
    }
    fs::write(out_dir.join("curve_snr.csv"), csv)?;

    let model_methods: Vec<String> = cfg
        .methods()?
        .into_iter()
        .filter(|m| matches!(m, Method::Model(_)))
        .map(|m| m.label(cfg.ar_order))
        .collect();
    if model_methods.len() > 1 {
        let mut csv = String::from("variant,velocity_kmh,snr_db,nmse_median,se_median,ber_median,seeds\n");
        for r in med.iter().filter(|r| model_methods.contains(&r.method)) {
            csv.push_str(&format!(
                "{},{},{},{:e},{:e},{:e},{}\n",
                r.method,
                r.velocity_kmh,
                fmt_snr(r.snr_db),
                r.nmse,
                r.se_bps_hz,
                r.ber,
                r.seeds
            ));
        }
        fs::write(out_dir.join("ablation_table.csv"), csv)?;
    }

    let summary = Summary {
        grid: cfg,
        cells: outcome.cells.len(),
        failed: outcome.failed(),
        outcomes: &outcome.cells,
        medians: &med,
    };
    fs::write(out_dir.join("summary.json"), serde_json::to_vec_pretty(&summary)?)?;

    let mut timing = String::from("key,train_seconds,resumed\n");
    for c in &outcome.cells {
        let secs = c.train_seconds.map_or_else(String::new, |s| format!("{s:.3}"));
        timing.push_str(&format!("{},{},{}\n", c.key, secs, c.resumed));
    }
    fs::write(out_dir.join("timing.csv"), timing)?;
    Ok(())
}
